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

#include "roomprint/filter_design.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "roomprint/error.hpp"
#include "roomprint/fft.hpp"

namespace roomprint {
namespace {

using cd = std::complex<double>;

// Evaluates c0 + c1 e^{-jw} + ... by Horner in e^{-jw}.
cd eval_poly(std::span<const double> c, cd zinv) {
  cd acc = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) acc = acc * zinv + c[i];
  return acc;
}

struct Stabilized {
  std::vector<double> poly;
  double gain = 1.0;
  bool reflected = false;
};

// Moves roots of the monic-in-z^-1 polynomial `p` (p[0] != 0) inside the
// unit circle. Returns the normalized polynomial and the magnitude
// correction to apply to the numerator.
Stabilized stabilize(const std::vector<double>& p, bool is_denominator) {
  Stabilized out;
  out.poly = p;
  if (p.size() < 2) return out;
  double scale = 0.0;
  for (double c : p) scale = std::max(scale, std::abs(c));
  // A vanishing leading coefficient is a pure delay; leave such input alone.
  if (std::abs(p[0]) <= 1e-14 * scale) return out;
  auto roots = polynomial_roots(p);
  bool changed = false;
  for (auto& r : roots) {
    const double mag = std::abs(r);
    if (mag > 1.0) {
      // |1 - r e^{-jw}| = |r| |1 - e^{-jw} / conj(r)|
      out.gain *= is_denominator ? 1.0 / mag : mag;
      r = 1.0 / std::conj(r);
      changed = true;
      out.reflected = true;
    }
    if (std::abs(r) > kMaxRootRadius) {
      r *= kMaxRootRadius / std::abs(r);
      changed = true;
      out.reflected = true;
    }
  }
  if (!changed) return out;
  std::vector<double> monic = polynomial_from_roots(roots);
  for (auto& c : monic) c *= p[0];
  out.poly = std::move(monic);
  return out;
}

}  // namespace

double ComplexResponse::omega(std::size_t k) const {
  return values.size() < 2 ? 0.0 : M_PI * static_cast<double>(k) / static_cast<double>(values.size() - 1);
}

std::vector<cd> ComplexResponse::full_grid() const {
  const std::size_t n = values.size();
  if (n < 2) return values;
  const std::size_t full = 2 * (n - 1);
  std::vector<cd> out(full);
  for (std::size_t k = 0; k < n; ++k) out[k] = values[k];
  for (std::size_t k = n; k < full; ++k) out[k] = std::conj(values[full - k]);
  return out;
}

cd DigitalFilter::response(double omega) const {
  const cd zinv = std::polar(1.0, -omega);
  std::vector<double> den(a.size() + 1, 1.0);
  std::copy(a.begin(), a.end(), den.begin() + 1);
  return eval_poly(b, zinv) / eval_poly(den, zinv);
}

std::vector<cd> DigitalFilter::poles() const {
  std::vector<double> den(a.size() + 1, 1.0);
  std::copy(a.begin(), a.end(), den.begin() + 1);
  return polynomial_roots(den);
}

std::vector<cd> DigitalFilter::zeros() const { return polynomial_roots(b); }

std::vector<cd> polynomial_roots(std::span<const double> coefficients) {
  std::size_t first = 0;
  double scale = 0.0;
  for (double c : coefficients) scale = std::max(scale, std::abs(c));
  if (scale == 0.0) return {};
  while (first < coefficients.size() && std::abs(coefficients[first]) <= 1e-14 * scale) ++first;
  std::size_t last = coefficients.size();
  std::size_t zero_roots = 0;
  while (last > first + 1 && coefficients[last - 1] == 0.0) {
    --last;
    ++zero_roots;
  }
  std::vector<cd> roots(zero_roots, cd{0.0, 0.0});
  const std::size_t degree = last - first - 1;
  if (degree == 0) return roots;

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<long>(degree), static_cast<long>(degree));
  const double lead = coefficients[first];
  for (std::size_t j = 0; j < degree; ++j) {
    companion(0, static_cast<long>(j)) = -coefficients[first + 1 + j] / lead;
  }
  for (std::size_t i = 1; i < degree; ++i) companion(static_cast<long>(i), static_cast<long>(i - 1)) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  const auto ev = solver.eigenvalues();
  for (long i = 0; i < ev.size(); ++i) roots.push_back(ev[i]);
  return roots;
}

std::vector<double> polynomial_from_roots(std::span<const cd> roots) {
  std::vector<cd> c{1.0};
  for (const cd& r : roots) {
    c.push_back(0.0);
    for (std::size_t i = c.size() - 1; i > 0; --i) c[i] -= r * c[i - 1];
  }
  std::vector<double> out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
  return out;
}

ComplexResponse minimum_phase_target(std::span<const double> log_magnitude, double bin_hz, int refine) {
  const std::size_t n = log_magnitude.size();
  if (n < 2) throw Error(ErrorKind::kInvalidArgument, "need at least two bins");
  for (double v : log_magnitude) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kInvalidArgument, "non-finite log magnitude");
  }
  refine = std::max(1, refine);

  // Linear interpolation of the log magnitude onto the refined grid.
  const std::size_t fine_bins = static_cast<std::size_t>(refine) * (n - 1) + 1;
  const std::size_t fft_len = 2 * (fine_bins - 1);
  const std::size_t used_bins = fft_len / 2 + 1;
  std::vector<cd> spectrum(used_bins);
  for (std::size_t k = 0; k < used_bins; ++k) {
    const double pos = static_cast<double>(k) * static_cast<double>(n - 1) / static_cast<double>(used_bins - 1);
    const auto i = std::min(static_cast<std::size_t>(pos), n - 2);
    const double t = pos - static_cast<double>(i);
    spectrum[k] = (1.0 - t) * log_magnitude[i] + t * log_magnitude[i + 1];
  }

  RealFft fft(fft_len);
  std::vector<double> cepstrum(fft_len);
  fft.inverse(spectrum, cepstrum);
  const double scale = 1.0 / static_cast<double>(fft_len);
  // Fold the real cepstrum onto its causal part.
  std::vector<double> folded(fft_len, 0.0);
  folded[0] = cepstrum[0] * scale;
  for (std::size_t i = 1; i < fft_len / 2; ++i) folded[i] = 2.0 * cepstrum[i] * scale;
  folded[fft_len / 2] = cepstrum[fft_len / 2] * scale;
  fft.forward(folded, spectrum);

  ComplexResponse out;
  out.bin_hz = bin_hz;
  out.values.resize(n);
  const std::size_t stride = (used_bins - 1) / (n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = std::polar(std::exp(log_magnitude[k]), spectrum[k * stride].imag());
  }
  return out;
}

ComplexResponse minimum_phase_target(const ChannelEstimate& estimate) {
  return minimum_phase_target(estimate.log_magnitude, estimate.bin_hz);
}

DigitalFilter fit_minimum_phase_filter(const ComplexResponse& target, int n_b, int n_a, FitReport* report) {
  FitOptions options;
  options.n_b = n_b;
  options.n_a = n_a;
  return fit_minimum_phase_filter(target, options, report);
}

DigitalFilter fit_minimum_phase_filter(const ComplexResponse& target, const FitOptions& options, FitReport* report) {
  const int nb = options.n_b;
  const int na = options.n_a;
  if (nb < 1 || na < 1) throw Error(ErrorKind::kInvalidArgument, "filter orders must be >= 1");
  const std::size_t n = target.bins();
  if (n < static_cast<std::size_t>(2 * (nb + na + 1))) {
    throw Error(ErrorKind::kInvalidArgument, "frequency grid too small for the requested orders");
  }
  for (const cd& h : target.values) {
    if (!std::isfinite(h.real()) || !std::isfinite(h.imag())) {
      throw Error(ErrorKind::kDegenerateTarget, "non-finite target");
    }
  }
  if (std::all_of(target.values.begin(), target.values.end(), [](const cd& h) { return h == cd{}; })) {
    throw Error(ErrorKind::kDegenerateTarget, "all-zero target");
  }

  const long unknowns = nb + 1 + na;
  const long rows = 2 * static_cast<long>(n);
  // Basis e^{-j w k} for k up to max order, shared by both polynomials.
  const int max_order = std::max(nb, na);
  std::vector<cd> basis(n * static_cast<std::size_t>(max_order + 1));
  for (std::size_t k = 0; k < n; ++k) {
    const double w = target.omega(k);
    for (int i = 0; i <= max_order; ++i) basis[k * static_cast<std::size_t>(max_order + 1) + static_cast<std::size_t>(i)] = std::polar(1.0, -w * i);
  }
  auto e = [&](std::size_t k, int i) { return basis[k * static_cast<std::size_t>(max_order + 1) + static_cast<std::size_t>(i)]; };

  // Endpoints of the one-sided grid stand for a single frequency each.
  std::vector<double> base_weight(n, 1.0);
  base_weight.front() = 0.5;
  base_weight.back() = 0.5;

  std::vector<double> a(static_cast<std::size_t>(na), 0.0);
  std::vector<double> b(static_cast<std::size_t>(nb + 1), 0.0);
  for (int pass = 0; pass <= std::max(0, options.refinement_passes); ++pass) {
    std::vector<double> weight = base_weight;
    if (pass > 0) {
      std::vector<double> den(a.size() + 1, 1.0);
      std::copy(a.begin(), a.end(), den.begin() + 1);
      for (std::size_t k = 0; k < n; ++k) {
        const double mag2 = std::norm(eval_poly(den, e(k, 1)));
        weight[k] = base_weight[k] / std::max(mag2, 1e-300);
      }
    }

    Eigen::MatrixXd m(rows, unknowns);
    Eigen::VectorXd rhs(rows);
    for (std::size_t k = 0; k < n; ++k) {
      const double sw = std::sqrt(weight[k]);
      const cd h = target.values[k];
      const long re = 2 * static_cast<long>(k);
      for (int i = 0; i <= nb; ++i) {
        const cd v = sw * e(k, i);
        m(re, i) = v.real();
        m(re + 1, i) = v.imag();
      }
      for (int i = 1; i <= na; ++i) {
        const cd v = -sw * h * e(k, i);
        m(re, nb + i) = v.real();
        m(re + 1, nb + i) = v.imag();
      }
      rhs[re] = sw * h.real();
      rhs[re + 1] = sw * h.imag();
    }

    // Column equilibration keeps the rank threshold meaningful when the
    // Steiglitz-McBride weights span many decades.
    Eigen::VectorXd col_scale = m.colwise().norm().transpose();
    for (long j = 0; j < unknowns; ++j) {
      if (col_scale[j] == 0.0) col_scale[j] = 1.0;
      m.col(j) /= col_scale[j];
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
    cod.setThreshold(1e-10);
    cod.compute(m);
    if (cod.rank() < nb + 1) throw Error(ErrorKind::kDegenerateTarget, "singular normal equations");
    Eigen::VectorXd x = cod.solve(rhs);
    x.array() /= col_scale.array();
    if (!x.allFinite()) throw Error(ErrorKind::kDegenerateTarget, "non-finite solution");
    for (int i = 0; i <= nb; ++i) b[static_cast<std::size_t>(i)] = x[i];
    for (int i = 0; i < na; ++i) a[static_cast<std::size_t>(i)] = x[nb + 1 + i];
  }

  DigitalFilter filter;
  std::vector<double> den(a.size() + 1, 1.0);
  std::copy(a.begin(), a.end(), den.begin() + 1);
  const Stabilized poles = stabilize(den, true);
  const Stabilized zeros = stabilize(b, false);
  filter.a.assign(poles.poly.begin() + 1, poles.poly.end());
  filter.b = zeros.poly;
  const double gain = poles.gain * zeros.gain;
  for (auto& c : filter.b) c *= gain;

  if (report) {
    report->poles_reflected = poles.reflected;
    report->zeros_reflected = zeros.reflected;
    double err = 0.0;
    double ref = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      err += std::norm(target.values[k] - filter.response(target.omega(k)));
      ref += std::norm(target.values[k]);
    }
    report->relative_error = ref > 0.0 ? std::sqrt(err / ref) : 0.0;
  }
  return filter;
}

AudioBuffer impulse_response(const DigitalFilter& filter, std::size_t length_samples, int sample_rate_hz) {
  if (length_samples < 1) throw Error(ErrorKind::kInvalidArgument, "length must be >= 1");
  AudioBuffer out;
  out.sample_rate_hz = sample_rate_hz;
  out.samples.assign(length_samples, 0.0);
  auto& y = out.samples;
  for (std::size_t t = 0; t < length_samples; ++t) {
    double acc = t < filter.b.size() ? filter.b[t] : 0.0;
    const std::size_t taps = std::min(filter.a.size(), t);
    for (std::size_t i = 0; i < taps; ++i) acc -= filter.a[i] * y[t - 1 - i];
    y[t] = acc;
  }
  return out;
}

std::size_t synthesis_length(const DigitalFilter& filter, int sample_rate_hz) {
  const auto two_seconds = static_cast<std::size_t>(2 * sample_rate_hz);
  const auto cap = static_cast<std::size_t>(10 * sample_rate_hz);
  double radius = 0.0;
  for (const cd& p : filter.poles()) radius = std::max(radius, std::abs(p));
  std::size_t bound = filter.b.size();
  if (radius > 0.0 && radius < 1.0) {
    bound += static_cast<std::size_t>(std::ceil(std::log(1e-9) / std::log(radius)));
  } else if (radius >= 1.0) {
    bound = cap;
  }
  return std::min(cap, std::max(two_seconds, bound));
}

void write_filter_csv(const std::filesystem::path& path, const DigitalFilter& filter) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  f << "coef,index,value\n";
  char line[64];
  for (std::size_t i = 0; i < filter.b.size(); ++i) {
    std::snprintf(line, sizeof line, "b,%zu,%.17g\n", i, filter.b[i]);
    f << line;
  }
  f << "a,0,1\n";
  for (std::size_t i = 0; i < filter.a.size(); ++i) {
    std::snprintf(line, sizeof line, "a,%zu,%.17g\n", i + 1, filter.a[i]);
    f << line;
  }
}

}  // namespace roomprint
