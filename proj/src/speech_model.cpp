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

#include "roomprint/speech_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "roomprint/container.hpp"
#include "roomprint/error.hpp"
#include "roomprint/parallel.hpp"

namespace roomprint {
namespace {

constexpr long kChunk = 2048;
constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kMinPrior = 1e-12;

long chunk_count(long rows) { return (rows + kChunk - 1) / kChunk; }

// Per-component terms of the diagonal Gaussian log density, precomputed so a
// block of frames can be scored with two matrix products.
struct GaussianTerms {
  RowMatrix inv_var;        // M x D
  RowMatrix mean_inv_var;   // M x D
  Eigen::VectorXd offset;   // M: log prior - 0.5 (D log 2pi + sum log var + sum mu^2/var)

  GaussianTerms(const Eigen::VectorXd& priors, const RowMatrix& means, const RowMatrix& variances) {
    inv_var = variances.cwiseInverse();
    mean_inv_var = means.cwiseProduct(inv_var);
    const auto m = priors.size();
    offset.resize(m);
    for (long k = 0; k < m; ++k) {
      const double log_det = variances.row(k).array().log().sum();
      const double quad = means.row(k).cwiseProduct(mean_inv_var.row(k)).sum();
      offset[k] = std::log(priors[k]) - 0.5 * (means.cols() * kLog2Pi + log_det + quad);
    }
  }

  // Joint log densities log(pi_k N(x_l)) for a block of frames.
  RowMatrix score(const Eigen::Ref<const RowMatrix>& x) const {
    RowMatrix s = -0.5 * x.cwiseAbs2() * inv_var.transpose() + x * mean_inv_var.transpose();
    s.rowwise() += offset.transpose();
    return s;
  }
};

// Normalizes joint log densities in place into posteriors; returns the summed
// log-likelihood of the block and counts rows that had no finite density.
double normalize_rows(RowMatrix& s, std::size_t* underflow) {
  double total = 0.0;
  const long m = s.cols();
  for (long l = 0; l < s.rows(); ++l) {
    const double peak = s.row(l).maxCoeff();
    if (!std::isfinite(peak)) {
      s.row(l).setConstant(1.0 / static_cast<double>(m));
      if (underflow) ++*underflow;
      continue;
    }
    double sum = 0.0;
    for (long k = 0; k < m; ++k) {
      const double e = std::exp(s(l, k) - peak);
      s(l, k) = e;
      sum += e;
    }
    s.row(l) /= sum;
    total += peak + std::log(sum);
  }
  return total;
}

struct Accumulator {
  Eigen::VectorXd mass;
  RowMatrix sum_x;
  RowMatrix sum_xx;
  double log_likelihood = 0.0;
};

Accumulator accumulate_block(const GaussianTerms& terms, const Eigen::Ref<const RowMatrix>& x) {
  RowMatrix post = terms.score(x);
  Accumulator acc;
  acc.log_likelihood = normalize_rows(post, nullptr);
  acc.mass = post.colwise().sum().transpose();
  acc.sum_x = post.transpose() * x;
  acc.sum_xx = post.transpose() * x.cwiseAbs2();
  return acc;
}

// One E-step over all frames with a fixed-size chunk partition so the
// reduction order does not depend on the number of worker threads.
Accumulator expectation(const GaussianTerms& terms, const RowMatrix& x) {
  const long chunks = chunk_count(x.rows());
  std::vector<Accumulator> parts(static_cast<std::size_t>(chunks));
  parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t c) {
    const long start = static_cast<long>(c) * kChunk;
    const long len = std::min(kChunk, x.rows() - start);
    parts[c] = accumulate_block(terms, x.middleRows(start, len));
  });
  Accumulator total = std::move(parts.front());
  for (std::size_t c = 1; c < parts.size(); ++c) {
    total.mass += parts[c].mass;
    total.sum_x += parts[c].sum_x;
    total.sum_xx += parts[c].sum_xx;
    total.log_likelihood += parts[c].log_likelihood;
  }
  return total;
}

RowMatrix squared_distances(const Eigen::Ref<const RowMatrix>& x, const RowMatrix& centers) {
  RowMatrix d = -2.0 * x * centers.transpose();
  d.colwise() += x.rowwise().squaredNorm();
  d.rowwise() += centers.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

RowMatrix kmeans_plus_plus(const RowMatrix& x, int m, std::mt19937_64& rng) {
  const long rows = x.rows();
  RowMatrix centers(m, x.cols());
  std::uniform_int_distribution<long> pick(0, rows - 1);
  centers.row(0) = x.row(pick(rng));
  Eigen::VectorXd best = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 1; k < m; ++k) {
    const double total = best.sum();
    long chosen = pick(rng);
    if (total > 0.0) {
      double target = unit(rng) * total;
      chosen = rows - 1;
      for (long l = 0; l < rows; ++l) {
        target -= best[l];
        if (target <= 0.0) {
          chosen = l;
          break;
        }
      }
    }
    centers.row(k) = x.row(chosen);
    best = best.cwiseMin((x.rowwise() - centers.row(k)).rowwise().squaredNorm());
  }
  return centers;
}

std::vector<int> assign_nearest(const RowMatrix& x, const RowMatrix& centers) {
  std::vector<int> labels(static_cast<std::size_t>(x.rows()));
  const long chunks = chunk_count(x.rows());
  parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t c) {
    const long start = static_cast<long>(c) * kChunk;
    const long len = std::min(kChunk, x.rows() - start);
    const RowMatrix d = squared_distances(x.middleRows(start, len), centers);
    for (long l = 0; l < len; ++l) {
      Eigen::Index arg = 0;
      d.row(l).minCoeff(&arg);
      labels[static_cast<std::size_t>(start + l)] = static_cast<int>(arg);
    }
  });
  return labels;
}

void initialize(const RowMatrix& x, const TrainingOptions& options, SpeechModel& model, bool& clamped) {
  const int m = options.mixtures;
  const long d = x.cols();
  std::mt19937_64 rng(options.seed);
  RowMatrix centers = kmeans_plus_plus(x, m, rng);
  std::uniform_int_distribution<long> pick(0, x.rows() - 1);

  std::vector<int> labels;
  for (int it = 0; it < std::max(1, options.kmeans_iterations); ++it) {
    labels = assign_nearest(x, centers);
    RowMatrix sums = RowMatrix::Zero(m, d);
    std::vector<long> counts(static_cast<std::size_t>(m), 0);
    for (long l = 0; l < x.rows(); ++l) {
      sums.row(labels[static_cast<std::size_t>(l)]) += x.row(l);
      ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(l)])];
    }
    for (int k = 0; k < m; ++k) {
      if (counts[static_cast<std::size_t>(k)] > 0) {
        centers.row(k) = sums.row(k) / static_cast<double>(counts[static_cast<std::size_t>(k)]);
      } else {
        centers.row(k) = x.row(pick(rng));
      }
    }
  }
  labels = assign_nearest(x, centers);

  const Eigen::RowVectorXd global_mean = x.colwise().mean();
  const Eigen::RowVectorXd global_var =
      ((x.rowwise() - global_mean).cwiseAbs2().colwise().sum() / static_cast<double>(x.rows()))
          .cwiseMax(options.variance_floor);

  RowMatrix sq = RowMatrix::Zero(m, d);
  std::vector<long> counts(static_cast<std::size_t>(m), 0);
  for (long l = 0; l < x.rows(); ++l) {
    const int k = labels[static_cast<std::size_t>(l)];
    sq.row(k) += (x.row(l) - centers.row(k)).cwiseAbs2();
    ++counts[static_cast<std::size_t>(k)];
  }
  model.means = centers;
  model.variances.resize(m, d);
  model.priors.resize(m);
  for (int k = 0; k < m; ++k) {
    const long n = counts[static_cast<std::size_t>(k)];
    if (n >= 2) {
      model.variances.row(k) = sq.row(k) / static_cast<double>(n);
    } else {
      model.variances.row(k) = global_var;
    }
    for (long j = 0; j < d; ++j) {
      if (model.variances(k, j) < options.variance_floor) {
        model.variances(k, j) = options.variance_floor;
        clamped = true;
      }
    }
    model.priors[k] = std::max(kMinPrior, static_cast<double>(n) / static_cast<double>(x.rows()));
  }
  model.priors /= model.priors.sum();
}

void maximization(const Accumulator& acc, long frames, const TrainingOptions& options, SpeechModel& model,
                  bool& clamped) {
  const long m = model.priors.size();
  for (long k = 0; k < m; ++k) {
    const double mass = acc.mass[k];
    model.priors[k] = std::max(kMinPrior, mass / static_cast<double>(frames));
    if (mass < 1e-10) continue;  // starved component keeps its previous shape
    model.means.row(k) = acc.sum_x.row(k) / mass;
    for (long j = 0; j < model.means.cols(); ++j) {
      double v = acc.sum_xx(k, j) / mass - model.means(k, j) * model.means(k, j);
      if (v < options.variance_floor) {
        v = options.variance_floor;
        clamped = true;
      }
      model.variances(k, j) = v;
    }
  }
  model.priors /= model.priors.sum();
}

RowMatrix average_spectrum(const SpeechModel& model, const RowMatrix& cepstra, const RowMatrix& spectra) {
  const GaussianTerms terms(model.priors, model.means, model.variances);
  const long chunks = chunk_count(cepstra.rows());
  std::vector<RowMatrix> weighted(static_cast<std::size_t>(chunks));
  std::vector<Eigen::VectorXd> mass(static_cast<std::size_t>(chunks));
  parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t c) {
    const long start = static_cast<long>(c) * kChunk;
    const long len = std::min(kChunk, cepstra.rows() - start);
    RowMatrix post = terms.score(cepstra.middleRows(start, len));
    normalize_rows(post, nullptr);
    weighted[c] = post.transpose() * spectra.middleRows(start, len);
    mass[c] = post.colwise().sum().transpose();
  });
  RowMatrix s = weighted.front();
  Eigen::VectorXd total = mass.front();
  for (std::size_t c = 1; c < weighted.size(); ++c) {
    s += weighted[c];
    total += mass[c];
  }
  if (model.avg_mode == AvgSpectrumMode::kNormalized) {
    const Eigen::RowVectorXd fallback = spectra.colwise().mean();
    for (long k = 0; k < s.rows(); ++k) {
      if (total[k] > 1e-12) {
        s.row(k) /= total[k];
      } else {
        s.row(k) = fallback;
      }
    }
  }
  return s;
}

}  // namespace

SpeechModel train_speech_model(const CepstraMatrix& cepstra, const SpectraMatrix& spectra,
                               const TrainingOptions& options, TrainingReport* report) {
  const RowMatrix& x = cepstra.values;
  if (options.mixtures < 1) throw Error(ErrorKind::kInvalidArgument, "mixtures must be >= 1");
  if (x.rows() != spectra.values.rows()) {
    throw Error(ErrorKind::kConfigMismatch, "cepstra and spectra are not row-aligned");
  }
  if (x.rows() < 10L * options.mixtures) {
    throw Error(ErrorKind::kInsufficientData, std::to_string(x.rows()) + " frames for " +
                                                  std::to_string(options.mixtures) + " mixtures");
  }
  if (!x.allFinite() || !spectra.values.allFinite()) {
    throw Error(ErrorKind::kInvalidArgument, "non-finite training features");
  }

  SpeechModel model;
  model.avg_mode = options.avg_mode;
  TrainingReport local;
  bool clamped = false;
  initialize(x, options, model, clamped);

  const double frames = static_cast<double>(x.rows());
  for (int it = 0; it < options.max_iterations; ++it) {
    const GaussianTerms terms(model.priors, model.means, model.variances);
    const Accumulator acc = expectation(terms, x);
    const double ll = acc.log_likelihood / frames;
    local.log_likelihood.push_back(ll);
    local.iterations = it + 1;
    if (it > 0 && ll - local.log_likelihood[local.log_likelihood.size() - 2] < options.tolerance) {
      local.converged = true;
      break;
    }
    maximization(acc, x.rows(), options, model, clamped);
  }
  local.variance_clamped = clamped;

  model.avg_spectrum = average_spectrum(model, x, spectra.values);
  model.frame_config.n_mfcc = static_cast<int>(x.cols());
  model.frame_config.n_fft = 2 * static_cast<int>(spectra.values.cols() - 1);
  if (report) *report = std::move(local);
  return model;
}

SpeechModel train_speech_model(const std::vector<AudioBuffer>& corpus, const FrameConfig& config,
                               const TrainingOptions& options, TrainingReport* report) {
  std::vector<FrontEnd> parts(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) {
    if (corpus[i].sample_rate_hz != config.sample_rate_hz) {
      throw Error(ErrorKind::kConfigMismatch, "corpus file sample rate differs from model rate");
    }
    parts[i] = compute_front_end(corpus[i], config);
  });
  long rows = 0;
  for (const auto& p : parts) rows += p.cepstra.values.rows();
  if (parts.empty()) throw Error(ErrorKind::kInsufficientData, "empty corpus");

  CepstraMatrix cepstra;
  SpectraMatrix spectra;
  cepstra.values.resize(rows, parts.front().cepstra.values.cols());
  spectra.values.resize(rows, parts.front().spectra.values.cols());
  spectra.bin_hz = parts.front().spectra.bin_hz;
  spectra.mean_normalized = true;
  long at = 0;
  for (const auto& p : parts) {
    const long n = p.cepstra.values.rows();
    cepstra.values.middleRows(at, n) = p.cepstra.values;
    spectra.values.middleRows(at, n) = p.spectra.values;
    at += n;
  }
  parts.clear();

  SpeechModel model = train_speech_model(cepstra, spectra, options, report);
  const int n_fft = model.frame_config.n_fft;
  model.frame_config = config;
  model.frame_config.n_fft = n_fft;
  return model;
}

ProbMatrix mixture_posteriors(const SpeechModel& model, const CepstraMatrix& cepstra) {
  if (cepstra.values.cols() != model.dims()) {
    throw Error(ErrorKind::kConfigMismatch, "cepstral dimension differs from the model");
  }
  const GaussianTerms terms(model.priors, model.means, model.variances);
  ProbMatrix out;
  out.values = terms.score(cepstra.values);
  normalize_rows(out.values, &out.underflow_rows);
  return out;
}

SpectraMatrix ideal_speech_from_posteriors(const SpeechModel& model, const ProbMatrix& posteriors) {
  if (posteriors.values.cols() != model.mixtures()) {
    throw Error(ErrorKind::kConfigMismatch, "posterior width differs from mixture count");
  }
  SpectraMatrix out;
  out.values = posteriors.values * model.avg_spectrum;
  out.mean_normalized = true;
  const int n_fft = 2 * (model.bins() - 1);
  out.bin_hz = n_fft > 0 ? static_cast<double>(model.frame_config.sample_rate_hz) / n_fft : 0.0;
  return out;
}

SpectraMatrix estimate_ideal_speech(const SpeechModel& model, const CepstraMatrix& cepstra) {
  return ideal_speech_from_posteriors(model, mixture_posteriors(model, cepstra));
}

Eigen::VectorXd frame_log_likelihood(const SpeechModel& model, const CepstraMatrix& cepstra) {
  const GaussianTerms terms(model.priors, model.means, model.variances);
  const RowMatrix s = terms.score(cepstra.values);
  Eigen::VectorXd ll(s.rows());
  for (long l = 0; l < s.rows(); ++l) {
    const double peak = s.row(l).maxCoeff();
    ll[l] = peak + std::log((s.row(l).array() - peak).exp().sum());
  }
  return ll;
}

void validate(const SpeechModel& model) {
  const long m = model.priors.size();
  if (m < 1) throw Error(ErrorKind::kInvalidArgument, "model has no mixtures");
  if (model.means.rows() != m || model.variances.rows() != m || model.avg_spectrum.rows() != m ||
      model.variances.cols() != model.means.cols()) {
    throw Error(ErrorKind::kInvalidArgument, "model array shapes disagree");
  }
  if (std::abs(model.priors.sum() - 1.0) > 1e-9 || (model.priors.array() < 0.0).any()) {
    throw Error(ErrorKind::kInvalidArgument, "priors do not form a distribution");
  }
  if (!(model.variances.array() > 0.0).all()) throw Error(ErrorKind::kInvalidArgument, "non-positive variance");
  if (!model.avg_spectrum.allFinite() || !model.means.allFinite()) {
    throw Error(ErrorKind::kInvalidArgument, "non-finite model values");
  }
}

namespace {

Float64Array to_array(const RowMatrix& m) {
  Float64Array a;
  a.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  a.data.assign(m.data(), m.data() + m.size());
  return a;
}

RowMatrix from_array(const Float64Array& a) {
  if (a.dims.size() != 2) throw Error(ErrorKind::kCorruptFile, "expected a matrix");
  RowMatrix m(static_cast<long>(a.dims[0]), static_cast<long>(a.dims[1]));
  std::copy(a.data.begin(), a.data.end(), m.data());
  return m;
}

}  // namespace

void save_speech_model(const SpeechModel& model, const std::filesystem::path& path) {
  validate(model);
  Container c(kSpeechModelMagic);
  c.put("priors", std::vector<double>(model.priors.data(), model.priors.data() + model.priors.size()));
  c.put("means", to_array(model.means));
  c.put("variances", to_array(model.variances));
  c.put("avg_spectrum", to_array(model.avg_spectrum));
  const auto& fc = model.frame_config;
  c.put("frame_config", std::vector<double>{fc.frame_ms, fc.overlap, static_cast<double>(fc.n_fft),
                                            static_cast<double>(fc.n_mfcc), static_cast<double>(fc.sample_rate_hz)});
  c.put_scalar("avg_mode", model.avg_mode == AvgSpectrumMode::kRaw ? 1.0 : 0.0);
  c.save(path);
}

SpeechModel load_speech_model(const std::filesystem::path& path) {
  const Container c = Container::load(path, kSpeechModelMagic);
  SpeechModel model;
  const auto& priors = c.array("priors").data;
  model.priors = Eigen::Map<const Eigen::VectorXd>(priors.data(), static_cast<long>(priors.size()));
  model.means = from_array(c.array("means"));
  model.variances = from_array(c.array("variances"));
  model.avg_spectrum = from_array(c.array("avg_spectrum"));
  const auto& fc = c.array("frame_config").data;
  if (fc.size() != 5) throw Error(ErrorKind::kCorruptFile, "frame_config must hold 5 values");
  model.frame_config = {fc[0], fc[1], static_cast<int>(fc[2]), static_cast<int>(fc[3]), static_cast<int>(fc[4])};
  model.avg_mode = c.scalar("avg_mode") != 0.0 ? AvgSpectrumMode::kRaw : AvgSpectrumMode::kNormalized;
  validate(model);
  if (model.frame_config.n_mfcc != model.dims()) throw Error(ErrorKind::kCorruptFile, "n_mfcc disagrees with means");
  return model;
}

std::uint64_t model_fingerprint(const SpeechModel& model) {
  std::uint64_t h = fnv1a64(model.priors.data(), sizeof(double) * static_cast<std::size_t>(model.priors.size()));
  for (const RowMatrix* m : {&model.means, &model.variances, &model.avg_spectrum}) {
    h = fnv1a64(m->data(), sizeof(double) * static_cast<std::size_t>(m->size()), h);
  }
  const auto& fc = model.frame_config;
  const double cfg[5] = {fc.frame_ms, fc.overlap, static_cast<double>(fc.n_fft), static_cast<double>(fc.n_mfcc),
                         static_cast<double>(fc.sample_rate_hz)};
  h = fnv1a64(cfg, sizeof cfg, h);
  const int mode = model.avg_mode == AvgSpectrumMode::kRaw ? 1 : 0;
  return fnv1a64(&mode, sizeof mode, h);
}

}  // namespace roomprint
