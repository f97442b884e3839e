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

#pragma once

#include <complex>
#include <filesystem>
#include <span>
#include <vector>

#include "roomprint/audio.hpp"
#include "roomprint/channel.hpp"

namespace roomprint {

// Frequency response sampled on the one-sided grid w_k = pi k / (N - 1).
// The negative-frequency half is implied by conjugate symmetry.
struct ComplexResponse {
  std::vector<std::complex<double>> values;
  double bin_hz = 0.0;

  std::size_t bins() const noexcept { return values.size(); }
  double omega(std::size_t k) const;
  // Two-sided grid of length 2 (N - 1) in FFT order.
  std::vector<std::complex<double>> full_grid() const;
};

// H(z) = (b0 + b1 z^-1 + ... + b_nb z^-nb) / (1 + a1 z^-1 + ... + a_na z^-na).
// `a` holds a1..a_na; the leading 1 is implicit.
struct DigitalFilter {
  std::vector<double> b{1.0};
  std::vector<double> a;

  std::complex<double> response(double omega) const;
  std::vector<std::complex<double>> poles() const;
  std::vector<std::complex<double>> zeros() const;
};

// Roots of c[0] x^n + c[1] x^(n-1) + ... + c[n]. Leading zero coefficients
// (roots at infinity) are dropped.
std::vector<std::complex<double>> polynomial_roots(std::span<const double> coefficients);

// Real coefficients of prod (1 - r_i z^-1), leading 1 included.
std::vector<double> polynomial_from_roots(std::span<const std::complex<double>> roots);

// Minimum-phase response with magnitude exp(log_magnitude) and the phase
// obtained through the folded real cepstrum on a grid refined by `refine`.
ComplexResponse minimum_phase_target(std::span<const double> log_magnitude, double bin_hz, int refine = 8);
ComplexResponse minimum_phase_target(const ChannelEstimate& estimate);

struct FitReport {
  bool poles_reflected = false;
  bool zeros_reflected = false;
  double relative_error = 0.0;  // ||H - B/A|| / ||H|| on the grid
};

struct FitOptions {
  int n_b = 24;
  int n_a = 24;
  int refinement_passes = 1;  // Steiglitz-McBride passes after the equation-error solve
};

// Least-squares rational fit of the target: equation-error solve followed by
// Steiglitz-McBride reweighting, then roots outside the unit circle are
// reflected inside with gain compensation. Throws kInvalidArgument on bad
// orders or a grid smaller than 2 (n_b + n_a + 1), and kDegenerateTarget for
// a non-finite or all-zero target or singular normal equations.
DigitalFilter fit_minimum_phase_filter(const ComplexResponse& target, const FitOptions& options,
                                       FitReport* report = nullptr);
DigitalFilter fit_minimum_phase_filter(const ComplexResponse& target, int n_b, int n_a,
                                       FitReport* report = nullptr);

// Largest root radius that still counts as strictly inside the unit circle.
inline constexpr double kMaxRootRadius = 1.0 - 1e-6;

// Unit-impulse response by direct-form recursion.
AudioBuffer impulse_response(const DigitalFilter& filter, std::size_t length_samples, int sample_rate_hz);

// max(2 s, samples until the slowest pole decays by 1e-9), capped at 10 s.
std::size_t synthesis_length(const DigitalFilter& filter, int sample_rate_hz);

// Two-column CSV ("b" and "a" rows): "coef,index,value".
void write_filter_csv(const std::filesystem::path& path, const DigitalFilter& filter);

}  // namespace roomprint
