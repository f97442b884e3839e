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

#include <filesystem>
#include <string>
#include <vector>

#include "roomprint/audio.hpp"

namespace roomprint {

// One base-two fractional-octave band. `index` is the ANSI band number b;
// band 30 of an odd-B bank sits at 1 kHz.
struct Band {
  int index = 0;
  double f_lower = 0.0;
  double f_mid = 0.0;
  double f_upper = 0.0;
};

struct Filterbank {
  int octave_fraction = 0;  // B in 1/B-octave
  std::vector<Band> bands;  // strictly increasing midbands
  int sample_rate_hz = 0;
};

inline constexpr double kReferenceHz = 1000.0;
// Bands are realized only up to this fraction of the Nyquist frequency.
inline constexpr double kNyquistCap = 0.95;

// Exact ANSI midband: 2^((b-30)/B) f_r for odd B, 2^((2b-59)/(2B)) f_r for even B.
double midband_frequency(int band_index, int octave_fraction);
Band make_band(int band_index, int octave_fraction);

// Keeps every band whose upper edge lies above f_min and whose midband does
// not exceed min(f_max, 0.95 Nyquist). Throws kNoBands when nothing is left.
Filterbank design_filterbank(int octave_fraction, double f_min, double f_max, int sample_rate_hz);

// Cascaded biquads: y = sections[n-1](...sections[0](x)).
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0, a1 = 0.0, a2 = 0.0;
};

struct SosFilter {
  std::vector<Biquad> sections;

  std::vector<double> apply(std::span<const double> x) const;
  double magnitude(double omega) const;
};

// Butterworth band-pass from a prototype of the given order (order 2 gives a
// 4th-order band-pass). Bands whose upper edge reaches 0.95 Nyquist are
// realized as a high-pass at the lower edge.
SosFilter design_band_filter(double f_lower, double f_upper, int sample_rate_hz, int prototype_order = 2);

// Zero-phase band-pass (forward-backward), same length as the input. Throws
// kBandUnresolvable when the band spans fewer than two DFT bins of the input.
AudioBuffer apply_bandpass(const AudioBuffer& signal, double f_lower, double f_upper);

// Schroeder energy decay curve in dB, truncated after the last non-zero sample.
struct DecayCurve {
  std::vector<double> times;
  std::vector<double> edc_db;
};

DecayCurve schroeder_decay(const AudioBuffer& band_signal);

struct Rt60Options {
  double start_db = -5.0;
};

// Least-squares line through the EDC between start_db and start_db - 60/alpha,
// extrapolated to 60 dB. Throws kInsufficientDecay when the curve does not
// reach the lower end of the window.
double estimate_rt60(const DecayCurve& curve, double alpha, const Rt60Options& options = {});

// One band after the fallback ladder alpha -> 2 -> 3. A band that fails every
// step gets a partial-range fit from start_db down to the deepest EDC point
// when that spans at least 10 dB, and NaN otherwise.
struct BandRt60 {
  double rt60_s = 0.0;
  double alpha_used = 0.0;
  bool failed = false;
};

BandRt60 estimate_rt60_with_fallback(const DecayCurve& curve, double alpha, const Rt60Options& options = {});

struct Roomprint {
  std::vector<double> rt60_s;
  std::vector<double> band_midbands_hz;
  std::vector<int> band_indices;
  std::vector<double> alpha_used;  // per band, after the fallback ladder
  int octave_fraction = 0;
  double alpha = 1.5;
  bool log_transformed = false;
  bool valid = true;
  std::vector<int> failed_bands;  // ANSI indices that failed every alpha on the ladder

  // Classifier input: rt60 values, or their natural log when log_transformed.
  std::vector<double> features() const;
};

struct RoomprintOptions {
  double alpha = 1.5;
  bool log_transform = false;
  Rt60Options rt60;
};

// Per band: zero-phase band-pass, Schroeder decay and RT60 with the fallback
// ladder alpha -> 2 -> 3. Bands that still fail get a partial-range estimate
// (when at least 10 dB of decay exist) and mark the roomprint invalid.
Roomprint compute_roomprint(const AudioBuffer& rir_estimate, const Filterbank& bank, const RoomprintOptions& options);
Roomprint compute_roomprint(const AudioBuffer& rir_estimate, const Filterbank& bank, double alpha, bool log_transform);

void write_roomprint_csv(const std::filesystem::path& path, const Roomprint& roomprint);
void write_roomprint_json(const std::filesystem::path& path, const Roomprint& roomprint);
std::string roomprint_to_json(const Roomprint& roomprint);
Roomprint roomprint_from_json(const std::string& text);
Roomprint read_roomprint_json(const std::filesystem::path& path);

}  // namespace roomprint
