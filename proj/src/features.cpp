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

#include "roomprint/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "roomprint/error.hpp"
#include "roomprint/fft.hpp"

namespace roomprint {
namespace {

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Orthonormal DCT-II basis, n_out x n_in.
RowMatrix dct_basis(int n_out, int n_in) {
  RowMatrix basis(n_out, n_in);
  for (int k = 0; k < n_out; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n_in) : std::sqrt(2.0 / n_in);
    for (int m = 0; m < n_in; ++m) {
      basis(k, m) = scale * std::cos(M_PI * k * (m + 0.5) / n_in);
    }
  }
  return basis;
}

int resolve_n_fft(const FrameConfig& config, int frame_length) {
  if (config.n_fft > 0) return config.n_fft;
  return static_cast<int>(next_power_of_two(static_cast<std::size_t>(frame_length)));
}

}  // namespace

FrameGeometry frame_geometry(double frame_ms, double overlap, int sample_rate_hz) {
  if (sample_rate_hz <= 0) throw Error(ErrorKind::kInvalidArgument, "sample rate must be positive");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw Error(ErrorKind::kInvalidArgument, "overlap must be in [0, 1)");
  if (!(frame_ms > 0.0)) throw Error(ErrorKind::kInvalidArgument, "frame length must be positive");
  FrameGeometry g;
  g.frame_length = static_cast<int>(std::lround(frame_ms * sample_rate_hz / 1000.0));
  g.hop = static_cast<int>(std::lround(g.frame_length * (1.0 - overlap)));
  if (g.frame_length < 2 || g.hop < 1) throw Error(ErrorKind::kInvalidArgument, "frame too short");
  return g;
}

Eigen::VectorXd hann_window(int n) {
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
  return w;
}

FrameSet frame_and_window(const AudioBuffer& audio, double frame_ms, double overlap_fraction) {
  validate(audio);
  const FrameGeometry g = frame_geometry(frame_ms, overlap_fraction, audio.sample_rate_hz);
  const auto len = static_cast<long>(audio.samples.size());
  if (len < g.frame_length) throw Error(ErrorKind::kSignalTooShort, "audio shorter than one frame");

  const long count = (len - g.frame_length) / g.hop + 1;
  const Eigen::VectorXd window = hann_window(g.frame_length);
  FrameSet out;
  out.hop = g.hop;
  out.sample_rate_hz = audio.sample_rate_hz;
  out.frames.resize(count, g.frame_length);
  for (long l = 0; l < count; ++l) {
    const double* src = audio.samples.data() + l * g.hop;
    for (int n = 0; n < g.frame_length; ++n) out.frames(l, n) = src[n] * window[n];
  }
  return out;
}

std::vector<double> overlap_add(const FrameSet& frames) {
  if (frames.count() == 0) return {};
  const auto n = static_cast<std::size_t>(frames.frame_length());
  const auto hop = static_cast<std::size_t>(frames.hop);
  std::vector<double> out((frames.count() - 1) * hop + n, 0.0);
  for (std::size_t l = 0; l < frames.count(); ++l) {
    for (std::size_t i = 0; i < n; ++i) out[l * hop + i] += frames.frames(static_cast<long>(l), static_cast<long>(i));
  }
  return out;
}

RowMatrix power_spectra(const FrameSet& frames, int n_fft) {
  if (n_fft < frames.frame_length() || !is_power_of_two(static_cast<std::size_t>(n_fft))) {
    throw Error(ErrorKind::kInvalidArgument, "n_fft must be a power of two >= frame length");
  }
  RealFft fft(static_cast<std::size_t>(n_fft));
  const auto bins = static_cast<long>(fft.bins());
  RowMatrix power(frames.frames.rows(), bins);
  std::vector<std::complex<double>> spec(fft.bins());
  for (long l = 0; l < frames.frames.rows(); ++l) {
    fft.forward({frames.frames.row(l).data(), static_cast<std::size_t>(frames.frames.cols())}, spec);
    for (long k = 0; k < bins; ++k) power(l, k) = std::norm(spec[static_cast<std::size_t>(k)]);
  }
  return power;
}

SpectraMatrix log_power_from_power(const RowMatrix& power, double bin_hz, double floor) {
  SpectraMatrix out;
  out.bin_hz = bin_hz;
  out.values.resize(power.rows(), power.cols());
  for (long l = 0; l < power.rows(); ++l) {
    const double peak = power.row(l).maxCoeff();
    const double eps = peak > 0.0 ? floor * peak : floor;
    for (long k = 0; k < power.cols(); ++k) out.values(l, k) = std::log(power(l, k) + eps);
  }
  return out;
}

SpectraMatrix log_power_spectra(const FrameSet& frames, int n_fft, double floor) {
  return log_power_from_power(power_spectra(frames, n_fft),
                              static_cast<double>(frames.sample_rate_hz) / n_fft, floor);
}

SpectraMatrix mean_normalize_rows(const SpectraMatrix& spectra) {
  SpectraMatrix out = spectra;
  for (long l = 0; l < out.values.rows(); ++l) {
    const double mean = out.values.row(l).mean();
    out.values.row(l).array() -= mean;
  }
  out.mean_normalized = true;
  return out;
}

RowMatrix mel_filterbank(int n_mel, int n_fft, int sample_rate_hz) {
  const int bins = n_fft / 2 + 1;
  const double mel_hi = hz_to_mel(sample_rate_hz / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(n_mel + 2));
  for (int i = 0; i < n_mel + 2; ++i) edges[static_cast<std::size_t>(i)] = mel_to_hz(mel_hi * i / (n_mel + 1));

  RowMatrix fb = RowMatrix::Zero(n_mel, bins);
  for (int m = 0; m < n_mel; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double mid = edges[static_cast<std::size_t>(m + 1)];
    const double hi = edges[static_cast<std::size_t>(m + 2)];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate_hz / n_fft;
      if (f > lo && f < hi) fb(m, k) = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
    }
  }
  return fb;
}

RowMatrix mfcc_static(const RowMatrix& power, int n_fft, int sample_rate_hz, int n_mfcc) {
  if (n_mfcc < 1 || n_mfcc > kMelBands) throw Error(ErrorKind::kInvalidArgument, "n_mfcc must be in [1, 26]");
  const RowMatrix fb = mel_filterbank(kMelBands, n_fft, sample_rate_hz);
  RowMatrix mel = power * fb.transpose();
  for (long l = 0; l < mel.rows(); ++l) {
    const double peak = mel.row(l).maxCoeff();
    const double eps = peak > 0.0 ? 1e-12 * peak : 1e-12;
    for (long m = 0; m < mel.cols(); ++m) mel(l, m) = std::log(mel(l, m) + eps);
  }
  return mel * dct_basis(n_mfcc, kMelBands).transpose();
}

RowMatrix rasta_filter(const RowMatrix& tracks) {
  const long rows = tracks.rows();
  if (rows <= static_cast<long>(kRastaWarmup)) {
    throw Error(ErrorKind::kInsufficientFrames, "RASTA needs at least 5 frames");
  }
  constexpr double kNumerator[5] = {0.2, 0.1, 0.0, -0.1, -0.2};
  constexpr double kPole = 0.98;
  constexpr long kWarm = static_cast<long>(kRastaWarmup);
  RowMatrix out(rows - kWarm, tracks.cols());
  for (long c = 0; c < tracks.cols(); ++c) {
    double prev = 0.0;
    for (long n = kWarm; n < rows; ++n) {
      double y = kPole * prev;
      for (long k = 0; k < 5; ++k) y += kNumerator[k] * tracks(n - k, c);
      out(n - kWarm, c) = y;
      prev = y;
    }
  }
  return out;
}

CepstraMatrix mfcc_rasta_from_power(const RowMatrix& power, int n_fft, int sample_rate_hz, int n_mfcc) {
  if (power.rows() <= static_cast<long>(kRastaWarmup)) {
    throw Error(ErrorKind::kInsufficientFrames, "RASTA needs at least 5 frames");
  }
  return {rasta_filter(mfcc_static(power, n_fft, sample_rate_hz, n_mfcc))};
}

CepstraMatrix mfcc_rasta(const FrameSet& frames, int n_mfcc) {
  if (frames.count() == 0) throw Error(ErrorKind::kInsufficientFrames, "no frames");
  const int n_fft = static_cast<int>(next_power_of_two(static_cast<std::size_t>(frames.frame_length())));
  return mfcc_rasta_from_power(power_spectra(frames, n_fft), n_fft, frames.sample_rate_hz, n_mfcc);
}

FrontEnd compute_front_end(const AudioBuffer& audio, const FrameConfig& config) {
  const FrameSet frames = frame_and_window(audio, config.frame_ms, config.overlap);
  const int n_fft = resolve_n_fft(config, frames.frame_length());
  const RowMatrix power = power_spectra(frames, n_fft);
  if (power.rows() <= static_cast<long>(kRastaWarmup)) {
    throw Error(ErrorKind::kSignalTooShort, "no frames left after RASTA warm-up");
  }

  FrontEnd fe;
  fe.cepstra = mfcc_rasta_from_power(power, n_fft, audio.sample_rate_hz, config.n_mfcc);
  SpectraMatrix spectra = mean_normalize_rows(
      log_power_from_power(power.bottomRows(power.rows() - static_cast<long>(kRastaWarmup)),
                           static_cast<double>(audio.sample_rate_hz) / n_fft));
  fe.spectra = std::move(spectra);
  return fe;
}

}  // namespace roomprint
