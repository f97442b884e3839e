// Copyright 2026 The Roomprint Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "roomprint/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "roomprint/container.hpp"
#include "roomprint/error.hpp"
#include "roomprint/parallel.hpp"

namespace roomprint {
namespace {

constexpr double kTau = 1e-12;

RowMatrix squared_distances(const RowMatrix& a, const RowMatrix& b) {
  RowMatrix d(a.rows(), b.rows());
  for (long i = 0; i < a.rows(); ++i) {
    for (long j = 0; j < b.rows(); ++j) d(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  }
  return d;
}

RowMatrix rbf(const RowMatrix& sq_dist, double gamma) { return (-gamma * sq_dist.array()).exp().matrix(); }

struct OvoFit {
  std::vector<PairMachine> machines;  // support indices refer to the training rows
  double kkt_residual = 0.0;
  bool converged = true;
};

OvoFit fit_ovo(const RowMatrix& kernel, std::span<const int> cls, int n_classes, double c, double tolerance) {
  OvoFit fit;
  for (int a = 0; a < n_classes; ++a) {
    for (int b = a + 1; b < n_classes; ++b) {
      std::vector<int> rows;
      std::vector<int> y;
      for (std::size_t i = 0; i < cls.size(); ++i) {
        if (cls[i] == a || cls[i] == b) {
          rows.push_back(static_cast<int>(i));
          y.push_back(cls[i] == a ? 1 : -1);
        }
      }
      RowMatrix sub(static_cast<long>(rows.size()), static_cast<long>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows.size(); ++j) sub(static_cast<long>(i), static_cast<long>(j)) = kernel(rows[i], rows[j]);
      }
      const SmoResult r = solve_smo(sub, y, c, tolerance);
      fit.kkt_residual = std::max(fit.kkt_residual, r.kkt_residual);
      fit.converged = fit.converged && r.converged;

      PairMachine m;
      m.first = a;
      m.second = b;
      m.bias = r.bias;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (r.alpha[i] > 0.0) {
          m.support.push_back(rows[i]);
          m.coefficients.push_back(y[i] * r.alpha[i]);
        }
      }
      fit.machines.push_back(std::move(m));
    }
  }
  return fit;
}

// kernel_at(j) returns K(x, row j) for the rows the machines refer to.
template <typename KernelAt>
Prediction vote(const std::vector<PairMachine>& machines, int n_classes, KernelAt&& kernel_at) {
  Prediction p;
  p.votes.assign(static_cast<std::size_t>(n_classes), 0);
  p.margins.assign(static_cast<std::size_t>(n_classes), 0.0);
  for (const auto& m : machines) {
    double f = m.bias;
    for (std::size_t s = 0; s < m.support.size(); ++s) f += m.coefficients[s] * kernel_at(m.support[s]);
    ++p.votes[static_cast<std::size_t>(f > 0.0 ? m.first : m.second)];
    p.margins[static_cast<std::size_t>(m.first)] += f;
    p.margins[static_cast<std::size_t>(m.second)] -= f;
  }
  int best = 0;
  for (int k = 1; k < n_classes; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const auto bu = static_cast<std::size_t>(best);
    if (p.votes[ku] > p.votes[bu] || (p.votes[ku] == p.votes[bu] && p.margins[ku] > p.margins[bu])) best = k;
  }
  p.class_index = best;
  return p;
}

void check_grid(const std::vector<double>& grid, const char* name) {
  if (grid.empty()) throw Error(ErrorKind::kInvalidArgument, std::string(name) + " grid is empty");
  for (double v : grid) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorKind::kInvalidArgument, std::string(name) + " grid needs positive values");
  }
}

RowMatrix select_rows(const RowMatrix& x, const std::vector<int>& rows) {
  RowMatrix out(static_cast<long>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<long>(i)) = x.row(rows[i]);
  return out;
}

FeatureSpec spec_of(const Roomprint& rp) {
  return {static_cast<int>(rp.rt60_s.size()), rp.octave_fraction, rp.alpha, rp.log_transformed};
}

RowMatrix stack_features(const std::vector<Roomprint>& features, const FeatureSpec& spec) {
  RowMatrix x(static_cast<long>(features.size()), spec.length);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (!(spec_of(features[i]) == spec)) {
      throw Error(ErrorKind::kFeatureMismatch, "roomprint " + std::to_string(i) + " differs in length, B, alpha or log flag");
    }
    const auto f = features[i].features();
    for (int k = 0; k < spec.length; ++k) x(static_cast<long>(i), k) = f[static_cast<std::size_t>(k)];
  }
  return x;
}

std::string format_pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

Eigen::VectorXd Scaler::apply(std::span<const double> x) const {
  if (static_cast<long>(x.size()) != mean.size()) throw Error(ErrorKind::kFeatureMismatch, "feature length differs from the scaler");
  Eigen::VectorXd out(mean.size());
  for (long k = 0; k < mean.size(); ++k) out[k] = (x[static_cast<std::size_t>(k)] - mean[k]) / std[k];
  return out;
}

RowMatrix Scaler::apply(const RowMatrix& x) const {
  if (x.cols() != mean.size()) throw Error(ErrorKind::kFeatureMismatch, "feature length differs from the scaler");
  RowMatrix out = x;
  out.rowwise() -= mean.transpose();
  out.array().rowwise() /= std.transpose().array();
  return out;
}

Scaler Scaler::fit(const RowMatrix& x) {
  Scaler s;
  s.mean = x.colwise().mean().transpose();
  s.std.resize(x.cols());
  for (long k = 0; k < x.cols(); ++k) {
    const double var = (x.col(k).array() - s.mean[k]).square().mean();
    s.std[k] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

std::vector<double> log_grid(int lo_exponent, int hi_exponent, int per_decade) {
  if (hi_exponent < lo_exponent || per_decade < 1) throw Error(ErrorKind::kInvalidArgument, "bad grid range");
  std::vector<double> out;
  const int steps = (hi_exponent - lo_exponent) * per_decade;
  for (int k = 0; k <= steps; ++k) {
    out.push_back(std::pow(10.0, lo_exponent + static_cast<double>(k) / per_decade));
  }
  return out;
}

SmoResult solve_smo(const RowMatrix& kernel, std::span<const int> y, double c, double tolerance, long max_iterations) {
  const auto n = static_cast<long>(y.size());
  if (kernel.rows() != n || kernel.cols() != n) throw Error(ErrorKind::kInvalidArgument, "kernel size differs from labels");
  if (!(c > 0.0)) throw Error(ErrorKind::kInvalidArgument, "c must be positive");

  SmoResult r;
  r.alpha.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<double>& alpha = r.alpha;
  std::vector<double> grad(static_cast<std::size_t>(n), -1.0);
  auto yi = [&](long i) { return static_cast<double>(y[static_cast<std::size_t>(i)]); };
  auto at_upper = [&](long i) { return alpha[static_cast<std::size_t>(i)] >= c; };
  auto at_lower = [&](long i) { return alpha[static_cast<std::size_t>(i)] <= 0.0; };
  auto q = [&](long i, long j) { return yi(i) * yi(j) * kernel(i, j); };

  for (;;) {
    // Working set: maximal violating i, then j by second-order gain.
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    long i = -1;
    for (long t = 0; t < n; ++t) {
      const double g = grad[static_cast<std::size_t>(t)];
      if (yi(t) > 0 ? !at_upper(t) : !at_lower(t)) {
        const double v = -yi(t) * g;
        if (v >= gmax) {
          gmax = v;
          i = t;
        }
      }
    }
    long j = -1;
    double best_obj = std::numeric_limits<double>::infinity();
    for (long t = 0; t < n; ++t) {
      const double g = grad[static_cast<std::size_t>(t)];
      if (yi(t) > 0 ? at_lower(t) : at_upper(t)) continue;
      const double v = yi(t) * g;
      gmax2 = std::max(gmax2, v);
      if (i < 0) continue;
      const double diff = gmax + v;
      if (diff > 0.0) {
        double quad = kernel(i, i) + kernel(t, t) - 2.0 * yi(i) * yi(t) * kernel(i, t);
        if (quad <= 0.0) quad = kTau;
        const double obj = -(diff * diff) / quad;
        if (obj <= best_obj) {
          best_obj = obj;
          j = t;
        }
      }
    }
    r.kkt_residual = std::max(0.0, gmax + gmax2);
    if (i < 0 || j < 0 || gmax + gmax2 < tolerance) {
      r.converged = true;
      break;
    }
    if (r.iterations >= max_iterations) break;
    ++r.iterations;

    const auto iu = static_cast<std::size_t>(i);
    const auto ju = static_cast<std::size_t>(j);
    const double old_i = alpha[iu];
    const double old_j = alpha[ju];
    if (y[iu] != y[ju]) {
      double quad = kernel(i, i) + kernel(j, j) + 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[iu] - grad[ju]) / quad;
      const double diff = alpha[iu] - alpha[ju];
      alpha[iu] += delta;
      alpha[ju] += delta;
      if (diff > 0.0) {
        if (alpha[ju] < 0.0) {
          alpha[ju] = 0.0;
          alpha[iu] = diff;
        }
      } else if (alpha[iu] < 0.0) {
        alpha[iu] = 0.0;
        alpha[ju] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[iu] > c) {
          alpha[iu] = c;
          alpha[ju] = c - diff;
        }
      } else if (alpha[ju] > c) {
        alpha[ju] = c;
        alpha[iu] = c + diff;
      }
    } else {
      double quad = kernel(i, i) + kernel(j, j) - 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[iu] - grad[ju]) / quad;
      const double sum = alpha[iu] + alpha[ju];
      alpha[iu] -= delta;
      alpha[ju] += delta;
      if (sum > c) {
        if (alpha[iu] > c) {
          alpha[iu] = c;
          alpha[ju] = sum - c;
        }
      } else if (alpha[ju] < 0.0) {
        alpha[ju] = 0.0;
        alpha[iu] = sum;
      }
      if (sum > c) {
        if (alpha[ju] > c) {
          alpha[ju] = c;
          alpha[iu] = sum - c;
        }
      } else if (alpha[iu] < 0.0) {
        alpha[iu] = 0.0;
        alpha[ju] = sum;
      }
    }
    const double di = alpha[iu] - old_i;
    const double dj = alpha[ju] - old_j;
    for (long t = 0; t < n; ++t) grad[static_cast<std::size_t>(t)] += q(i, t) * di + q(j, t) * dj;
  }

  // Threshold from free vectors, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  long free = 0;
  for (long t = 0; t < n; ++t) {
    const double yg = yi(t) * grad[static_cast<std::size_t>(t)];
    if (at_upper(t)) {
      if (yi(t) < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (at_lower(t)) {
      if (yi(t) > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free;
      sum_free += yg;
    }
  }
  const double rho = free > 0 ? sum_free / static_cast<double>(free) : 0.5 * (ub + lb);
  r.bias = -rho;
  return r;
}

std::vector<int> stratified_folds(std::span<const int> class_index, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorKind::kInvalidArgument, "need at least 2 folds");
  std::map<int, std::vector<int>> members;
  for (std::size_t i = 0; i < class_index.size(); ++i) members[class_index[i]].push_back(static_cast<int>(i));
  std::mt19937_64 rng(seed);
  std::vector<int> fold(class_index.size(), 0);
  int offset = 0;
  for (auto& [cls, idx] : members) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < idx.size(); ++k) fold[static_cast<std::size_t>(idx[k])] = static_cast<int>((k + static_cast<std::size_t>(offset)) % static_cast<std::size_t>(folds));
    offset += static_cast<int>(idx.size());
  }
  return fold;
}

SvmModel train_classifier(const std::vector<Roomprint>& features, const std::vector<std::string>& labels,
                          const ClassifierOptions& options, TrainingSummary* summary) {
  if (features.empty()) throw Error(ErrorKind::kInsufficientClassSupport, "no training roomprints");
  const FeatureSpec spec = spec_of(features.front());
  return train_classifier(stack_features(features, spec), labels, spec, options, summary);
}

SvmModel train_classifier(const RowMatrix& x, const std::vector<std::string>& labels, const FeatureSpec& spec,
                          const ClassifierOptions& options, TrainingSummary* summary) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw Error(ErrorKind::kInvalidArgument, "feature and label counts differ");
  if (x.cols() != spec.length) throw Error(ErrorKind::kFeatureMismatch, "feature width differs from the spec");
  if (!x.allFinite()) throw Error(ErrorKind::kInvalidArgument, "non-finite feature value");
  check_grid(options.grid_c, "c");
  check_grid(options.grid_gamma, "gamma");
  if (options.folds < 2) throw Error(ErrorKind::kInvalidArgument, "need at least 2 folds");

  const std::set<std::string> unique(labels.begin(), labels.end());
  std::vector<std::string> classes(unique.begin(), unique.end());
  const int k = static_cast<int>(classes.size());
  if (k < 2) throw Error(ErrorKind::kInsufficientClassSupport, "need at least two classes");
  std::vector<int> cls(labels.size());
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    cls[i] = static_cast<int>(std::lower_bound(classes.begin(), classes.end(), labels[i]) - classes.begin());
    ++counts[static_cast<std::size_t>(cls[i])];
  }
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] < options.folds) {
      throw Error(ErrorKind::kInsufficientClassSupport, "class '" + classes[static_cast<std::size_t>(c)] + "' has " +
                                                            std::to_string(counts[static_cast<std::size_t>(c)]) + " samples");
    }
  }

  std::vector<double> grid_c = options.grid_c;
  std::vector<double> grid_g = options.grid_gamma;
  std::sort(grid_c.begin(), grid_c.end());
  std::sort(grid_g.begin(), grid_g.end());

  // Per fold: scaler fitted on the training part, distances for both parts.
  const std::vector<int> fold = stratified_folds(cls, options.folds, options.seed);
  struct FoldData {
    std::vector<int> train_cls;
    std::vector<int> val_cls;
    RowMatrix train_d2;
    RowMatrix val_d2;
  };
  std::vector<FoldData> folds(static_cast<std::size_t>(options.folds));
  for (int f = 0; f < options.folds; ++f) {
    std::vector<int> tr, va;
    for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? va : tr).push_back(static_cast<int>(i));
    const RowMatrix xtr = select_rows(x, tr);
    const Scaler s = Scaler::fit(xtr);
    const RowMatrix ztr = s.apply(xtr);
    const RowMatrix zva = s.apply(select_rows(x, va));
    auto& fd = folds[static_cast<std::size_t>(f)];
    for (int i : tr) fd.train_cls.push_back(cls[static_cast<std::size_t>(i)]);
    for (int i : va) fd.val_cls.push_back(cls[static_cast<std::size_t>(i)]);
    fd.train_d2 = squared_distances(ztr, ztr);
    fd.val_d2 = squared_distances(zva, ztr);
  }

  struct JobResult {
    std::vector<long> correct;  // per c
    double kkt = 0.0;
    bool converged = true;
  };
  const std::size_t jobs = grid_g.size() * folds.size();
  std::vector<JobResult> results(jobs);
  parallel_for(jobs, [&](std::size_t job) {
    const double gamma = grid_g[job / folds.size()];
    const FoldData& fd = folds[job % folds.size()];
    const RowMatrix ktr = rbf(fd.train_d2, gamma);
    const RowMatrix kva = rbf(fd.val_d2, gamma);
    JobResult& res = results[job];
    for (double c : grid_c) {
      const OvoFit fit = fit_ovo(ktr, fd.train_cls, k, c, options.tolerance);
      res.kkt = std::max(res.kkt, fit.kkt_residual);
      res.converged = res.converged && fit.converged;
      long correct = 0;
      for (long v = 0; v < kva.rows(); ++v) {
        const Prediction p = vote(fit.machines, k, [&](int j) { return kva(v, j); });
        if (p.class_index == fd.val_cls[static_cast<std::size_t>(v)]) ++correct;
      }
      res.correct.push_back(correct);
    }
  });

  TrainingSummary local;
  for (const auto& r : results) {
    local.max_kkt_residual = std::max(local.max_kkt_residual, r.kkt);
    local.all_converged = local.all_converged && r.converged;
  }
  const double n = static_cast<double>(x.rows());
  bool first = true;
  for (std::size_t ci = 0; ci < grid_c.size(); ++ci) {
    for (std::size_t gi = 0; gi < grid_g.size(); ++gi) {
      long correct = 0;
      for (std::size_t f = 0; f < folds.size(); ++f) correct += results[gi * folds.size() + f].correct[ci];
      const GridCell cell{grid_c[ci], grid_g[gi], 100.0 * static_cast<double>(correct) / n};
      local.grid.push_back(cell);
      if (first || cell.cv_accuracy > local.best.cv_accuracy) local.best = cell;
      first = false;
    }
  }

  // Refit on everything with the selected pair.
  SvmModel model;
  model.classes = classes;
  model.c = local.best.c;
  model.gamma = local.best.gamma;
  model.spec = spec;
  model.scaler = Scaler::fit(x);
  const RowMatrix z = model.scaler.apply(x);
  const OvoFit fit = fit_ovo(rbf(squared_distances(z, z), model.gamma), cls, k, model.c, options.tolerance);
  local.max_kkt_residual = std::max(local.max_kkt_residual, fit.kkt_residual);
  local.all_converged = local.all_converged && fit.converged;

  std::vector<int> remap(static_cast<std::size_t>(x.rows()), -1);
  std::vector<int> used;
  for (const auto& m : fit.machines) {
    for (int s : m.support) {
      if (remap[static_cast<std::size_t>(s)] < 0) {
        remap[static_cast<std::size_t>(s)] = static_cast<int>(used.size());
        used.push_back(s);
      }
    }
  }
  model.support_vectors = select_rows(z, used);
  model.machines = fit.machines;
  for (auto& m : model.machines) {
    for (int& s : m.support) s = remap[static_cast<std::size_t>(s)];
  }
  if (summary) *summary = std::move(local);
  return model;
}

Prediction predict_detail(const SvmModel& model, std::span<const double> feature) {
  if (static_cast<int>(feature.size()) != model.spec.length) {
    throw Error(ErrorKind::kFeatureMismatch, "feature has " + std::to_string(feature.size()) + " values, model expects " +
                                                 std::to_string(model.spec.length));
  }
  const Eigen::VectorXd z = model.scaler.apply(feature);
  std::vector<double> kernel(static_cast<std::size_t>(model.support_vectors.rows()));
  for (long s = 0; s < model.support_vectors.rows(); ++s) {
    kernel[static_cast<std::size_t>(s)] = std::exp(-model.gamma * (model.support_vectors.row(s).transpose() - z).squaredNorm());
  }
  return vote(model.machines, static_cast<int>(model.classes.size()),
              [&](int j) { return kernel[static_cast<std::size_t>(j)]; });
}

std::string predict(const SvmModel& model, std::span<const double> feature) {
  return model.classes[static_cast<std::size_t>(predict_detail(model, feature).class_index)];
}

std::string predict(const SvmModel& model, const Roomprint& feature) {
  if (!(spec_of(feature) == model.spec)) throw Error(ErrorKind::kFeatureMismatch, "roomprint configuration differs from the model");
  return predict(model, feature.features());
}

Metrics compute_metrics(const std::vector<std::string>& classes, std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw Error(ErrorKind::kInvalidArgument, "truth and prediction counts differ");
  if (truth.empty()) throw Error(ErrorKind::kInvalidArgument, "empty test set");
  const std::size_t k = classes.size();
  Metrics m;
  m.classes = classes;
  m.confusion.assign(k, std::vector<long>(k, 0));
  long correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++m.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
    if (truth[i] == predicted[i]) ++correct;
  }
  // Macro averages over classes that occur in the truth or the predictions.
  double p_sum = 0.0, r_sum = 0.0;
  int active = 0;
  for (std::size_t c = 0; c < k; ++c) {
    long row = 0, col = 0;
    for (std::size_t o = 0; o < k; ++o) {
      row += m.confusion[c][o];
      col += m.confusion[o][c];
    }
    if (row == 0 && col == 0) continue;
    ++active;
    const double tp = static_cast<double>(m.confusion[c][c]);
    p_sum += col > 0 ? tp / static_cast<double>(col) : 0.0;
    r_sum += row > 0 ? tp / static_cast<double>(row) : 0.0;
  }
  m.precision = 100.0 * p_sum / active;
  m.recall = 100.0 * r_sum / active;
  m.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(truth.size());
  return m;
}

Metrics evaluate(const SvmModel& model, const RowMatrix& features, const std::vector<std::string>& labels) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) throw Error(ErrorKind::kInvalidArgument, "feature and label counts differ");
  std::vector<int> truth, predicted;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = std::find(model.classes.begin(), model.classes.end(), labels[i]);
    if (it == model.classes.end()) throw Error(ErrorKind::kInvalidArgument, "label '" + labels[i] + "' unknown to the model");
    truth.push_back(static_cast<int>(it - model.classes.begin()));
    const auto row = features.row(static_cast<long>(i));
    predicted.push_back(predict_detail(model, std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))).class_index);
  }
  return compute_metrics(model.classes, truth, predicted);
}

Metrics evaluate(const SvmModel& model, const std::vector<Roomprint>& features, const std::vector<std::string>& labels) {
  if (features.empty()) throw Error(ErrorKind::kInvalidArgument, "empty test set");
  return evaluate(model, stack_features(features, model.spec), labels);
}

std::string format_metrics_table(const std::vector<std::pair<std::string, Metrics>>& rows) {
  std::size_t width = 9;
  for (const auto& [name, m] : rows) width = std::max(width, name.size());
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %9s  %9s  %9s\n", static_cast<int>(width), "Condition", "Precision", "Recall",
                "Accuracy");
  out << line;
  for (const auto& [name, m] : rows) {
    std::snprintf(line, sizeof line, "%-*s  %9s  %9s  %9s\n", static_cast<int>(width), name.c_str(),
                  format_pct(m.precision).c_str(), format_pct(m.recall).c_str(), format_pct(m.accuracy).c_str());
    out << line;
  }
  return out.str();
}

std::string metrics_to_json(const Metrics& m) {
  nlohmann::json j;
  j["classes"] = m.classes;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["accuracy"] = m.accuracy;
  j["confusion"] = m.confusion;
  return j.dump(2);
}

void save_classifier(const SvmModel& model, const std::filesystem::path& path) {
  Container c(kClassifierMagic);
  c.put_strings("classes", model.classes);
  c.put("support_vectors", Float64Array{{static_cast<std::uint64_t>(model.support_vectors.rows()),
                                         static_cast<std::uint64_t>(model.support_vectors.cols())},
                                        std::vector<double>(model.support_vectors.data(),
                                                            model.support_vectors.data() + model.support_vectors.size())});
  std::vector<double> pairs, bias, counts, support, coef;
  for (const auto& m : model.machines) {
    pairs.push_back(m.first);
    pairs.push_back(m.second);
    bias.push_back(m.bias);
    counts.push_back(static_cast<double>(m.support.size()));
    support.insert(support.end(), m.support.begin(), m.support.end());
    coef.insert(coef.end(), m.coefficients.begin(), m.coefficients.end());
  }
  c.put("machine_pairs", std::move(pairs));
  c.put("machine_bias", std::move(bias));
  c.put("machine_support_counts", std::move(counts));
  c.put("machine_support", std::move(support));
  c.put("machine_coefficients", std::move(coef));
  c.put("hyper", std::vector<double>{model.gamma, model.c});
  c.put("scaler_mean", std::vector<double>(model.scaler.mean.data(), model.scaler.mean.data() + model.scaler.mean.size()));
  c.put("scaler_std", std::vector<double>(model.scaler.std.data(), model.scaler.std.data() + model.scaler.std.size()));
  c.put("feature_spec", std::vector<double>{static_cast<double>(model.spec.length), static_cast<double>(model.spec.octave_fraction),
                                            model.spec.alpha, model.spec.log_transformed ? 1.0 : 0.0});
  c.save(path);
}

SvmModel load_classifier(const std::filesystem::path& path) {
  const Container c = Container::load(path, kClassifierMagic);
  SvmModel model;
  model.classes = c.strings("classes");
  const auto& sv = c.array("support_vectors");
  if (sv.dims.size() != 2) throw Error(ErrorKind::kCorruptFile, "support_vectors must be 2-D");
  model.support_vectors = Eigen::Map<const RowMatrix>(sv.data.data(), static_cast<long>(sv.dims[0]), static_cast<long>(sv.dims[1]));
  const auto& pairs = c.array("machine_pairs").data;
  const auto& bias = c.array("machine_bias").data;
  const auto& counts = c.array("machine_support_counts").data;
  const auto& support = c.array("machine_support").data;
  const auto& coef = c.array("machine_coefficients").data;
  if (pairs.size() != 2 * bias.size() || counts.size() != bias.size() || support.size() != coef.size()) {
    throw Error(ErrorKind::kCorruptFile, "inconsistent machine arrays");
  }
  std::size_t offset = 0;
  for (std::size_t m = 0; m < bias.size(); ++m) {
    PairMachine pm;
    pm.first = static_cast<int>(pairs[2 * m]);
    pm.second = static_cast<int>(pairs[2 * m + 1]);
    pm.bias = bias[m];
    const auto count = static_cast<std::size_t>(counts[m]);
    if (offset + count > support.size()) throw Error(ErrorKind::kCorruptFile, "support list overruns");
    for (std::size_t s = 0; s < count; ++s) {
      const auto idx = static_cast<int>(support[offset + s]);
      if (idx < 0 || idx >= model.support_vectors.rows()) throw Error(ErrorKind::kCorruptFile, "support index out of range");
      pm.support.push_back(idx);
      pm.coefficients.push_back(coef[offset + s]);
    }
    offset += count;
    model.machines.push_back(std::move(pm));
  }
  const auto& hyper = c.array("hyper").data;
  const auto& mean = c.array("scaler_mean").data;
  const auto& std_dev = c.array("scaler_std").data;
  const auto& spec = c.array("feature_spec").data;
  if (hyper.size() != 2 || spec.size() != 4 || mean.size() != std_dev.size()) throw Error(ErrorKind::kCorruptFile, "bad header arrays");
  model.gamma = hyper[0];
  model.c = hyper[1];
  model.scaler.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<long>(mean.size()));
  model.scaler.std = Eigen::Map<const Eigen::VectorXd>(std_dev.data(), static_cast<long>(std_dev.size()));
  model.spec = {static_cast<int>(spec[0]), static_cast<int>(spec[1]), spec[2], spec[3] != 0.0};
  if (model.scaler.mean.size() != model.spec.length || model.support_vectors.cols() != model.spec.length) {
    throw Error(ErrorKind::kCorruptFile, "feature width inconsistent");
  }
  return model;
}

}  // namespace roomprint
