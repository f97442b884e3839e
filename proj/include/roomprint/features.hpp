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

#include <Eigen/Dense>
#include <cstddef>

#include "roomprint/audio.hpp"

namespace roomprint {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Number of leading frames consumed by the RASTA filter before its output is
// defined. Cepstra start at this frame index; spectra rows are aligned by
// dropping the same count.
inline constexpr std::size_t kRastaWarmup = 4;

struct FrameConfig {
  double frame_ms = 128.0;
  double overlap = 0.5;
  int n_fft = 0;  // 0 selects the frame length
  int n_mfcc = 12;
  int sample_rate_hz = 16000;
};

struct FrameGeometry {
  int frame_length = 0;
  int hop = 0;
};

// frame_length = round(frame_ms * rate / 1000), hop = round(frame_length * (1 - overlap)).
FrameGeometry frame_geometry(double frame_ms, double overlap, int sample_rate_hz);

// Hann-windowed analysis frames, one per row.
struct FrameSet {
  RowMatrix frames;
  int hop = 0;
  int sample_rate_hz = 0;

  std::size_t count() const noexcept { return static_cast<std::size_t>(frames.rows()); }
  int frame_length() const noexcept { return static_cast<int>(frames.cols()); }
};

// Natural-log power spectra, one frame per row over bins 0..n_fft/2.
struct SpectraMatrix {
  RowMatrix values;
  double bin_hz = 0.0;
  bool mean_normalized = false;
};

// RASTA-filtered MFCCs, one row per frame after the RASTA warm-up.
struct CepstraMatrix {
  RowMatrix values;
};

// Periodic Hann window of length n (sums to a constant at 50% overlap).
Eigen::VectorXd hann_window(int n);

FrameSet frame_and_window(const AudioBuffer& audio, double frame_ms, double overlap_fraction);

// Overlap-add of the windowed frames without window compensation.
std::vector<double> overlap_add(const FrameSet& frames);

// Per-frame |DFT|^2 over the one-sided bins.
RowMatrix power_spectra(const FrameSet& frames, int n_fft);

// ln(|DFT|^2 + eps) with eps = floor * (per-frame peak power); an all-zero
// frame uses eps = floor.
SpectraMatrix log_power_spectra(const FrameSet& frames, int n_fft, double floor = 1e-12);
SpectraMatrix log_power_from_power(const RowMatrix& power, double bin_hz, double floor = 1e-12);

SpectraMatrix mean_normalize_rows(const SpectraMatrix& spectra);

// Triangular HTK mel filterbank spanning 0 Hz to Nyquist, n_mel x n_bins.
RowMatrix mel_filterbank(int n_mel, int n_fft, int sample_rate_hz);

inline constexpr int kMelBands = 26;

// Mel energies -> log -> orthonormal DCT-II -> first n_mfcc coefficients,
// then RASTA band-pass along time. Throws kInsufficientFrames for fewer
// than kRastaWarmup + 1 frames.
CepstraMatrix mfcc_rasta(const FrameSet& frames, int n_mfcc);
CepstraMatrix mfcc_rasta_from_power(const RowMatrix& power, int n_fft, int sample_rate_hz, int n_mfcc);

// Static cepstra before RASTA filtering (one row per input frame).
RowMatrix mfcc_static(const RowMatrix& power, int n_fft, int sample_rate_hz, int n_mfcc);

// RASTA filter applied column-wise: H(z) = 0.1 (2 + z^-1 - z^-3 - 2 z^-4) / (1 - 0.98 z^-1),
// recursion started at zero on frame kRastaWarmup. Returns rows - kRastaWarmup rows.
RowMatrix rasta_filter(const RowMatrix& tracks);

// Frame-level front end shared by model training and channel estimation:
// mean-normalized log-power rows aligned with RASTA-MFCC rows.
struct FrontEnd {
  SpectraMatrix spectra;  // mean-normalized, warm-up rows removed
  CepstraMatrix cepstra;
};

FrontEnd compute_front_end(const AudioBuffer& audio, const FrameConfig& config);

}  // namespace roomprint
