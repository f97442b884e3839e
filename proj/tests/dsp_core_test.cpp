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

#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "roomprint/audio.hpp"
#include "roomprint/error.hpp"
#include "roomprint/features.hpp"
#include "roomprint/fft.hpp"
#include "roomprint/synth.hpp"
#include "test_support.hpp"

using namespace roomprint;
using roomprint::test::tone;

namespace {

SpectraMatrix spectra_of(std::initializer_list<std::initializer_list<double>> rows) {
  SpectraMatrix s;
  s.values.resize(static_cast<long>(rows.size()), static_cast<long>(rows.begin()->size()));
  long r = 0;
  for (const auto& row : rows) {
    long c = 0;
    for (double v : row) s.values(r, c++) = v;
    ++r;
  }
  return s;
}

FrameSet single_frame(const std::vector<double>& samples, int rate = 16000) {
  FrameSet f;
  f.frames = Eigen::Map<const RowMatrix>(samples.data(), 1, static_cast<long>(samples.size()));
  f.hop = static_cast<int>(samples.size()) / 2;
  f.sample_rate_hz = rate;
  return f;
}

}  // namespace

TEST_CASE("frame geometry at 16 kHz, 128 ms, 50% overlap") {
  const auto g = frame_geometry(128.0, 0.5, 16000);
  CHECK(g.frame_length == 2048);
  CHECK(g.hop == 1024);
}

TEST_CASE("frame count follows floor((len - N) / hop) + 1") {
  AudioBuffer a{std::vector<double>(3072, 0.1), 16000};
  CHECK(frame_and_window(a, 128.0, 0.5).count() == 2);
  a.samples.resize(2048);
  CHECK(frame_and_window(a, 128.0, 0.5).count() == 1);
  a.samples.resize(16000);
  CHECK(frame_and_window(a, 128.0, 0.5).count() == (16000 - 2048) / 1024 + 1);
}

TEST_CASE("zero signal frames are zero") {
  AudioBuffer a{std::vector<double>(4096, 0.0), 16000};
  const auto f = frame_and_window(a, 128.0, 0.5);
  CHECK(f.frames.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("audio shorter than one frame is rejected") {
  AudioBuffer a{std::vector<double>(2047, 0.1), 16000};
  try {
    frame_and_window(a, 128.0, 0.5);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSignalTooShort);
  }
}

TEST_CASE("frames are windowed by a periodic Hann window") {
  AudioBuffer a{std::vector<double>(4096, 1.0), 16000};
  const auto f = frame_and_window(a, 128.0, 0.5);
  for (int n : {0, 1, 512, 1024, 2047}) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / 2048.0);
    CHECK(f.frames(0, n) == doctest::Approx(w).epsilon(1e-14));
  }
}

TEST_CASE("50% Hann overlap-add reconstructs the interior") {
  const auto x = test::white_noise(20000, 16000, 11, 0.3);
  const auto f = frame_and_window(x, 128.0, 0.5);
  const auto y = overlap_add(f);
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 2048; i + 2048 < y.size(); ++i) {
    err += (y[i] - x.samples[i]) * (y[i] - x.samples[i]);
    ref += x.samples[i] * x.samples[i];
  }
  CHECK(std::sqrt(err / ref) < 1e-6);
}

TEST_CASE("impulse frame gives a flat log-power row") {
  std::vector<double> frame(2048, 0.0);
  frame[0] = 1.0;
  const auto s = log_power_spectra(single_frame(frame), 2048);
  REQUIRE(s.values.cols() == 1025);
  CHECK(s.values.maxCoeff() - s.values.minCoeff() < 1e-12);
  CHECK(s.bin_hz == doctest::Approx(16000.0 / 2048.0));
}

TEST_CASE("sinusoid at a bin centre peaks at that bin") {
  const int k0 = 137;
  std::vector<double> frame(2048);
  for (int n = 0; n < 2048; ++n) frame[static_cast<std::size_t>(n)] = std::cos(2.0 * std::numbers::pi * k0 * n / 2048.0);
  const auto s = log_power_spectra(single_frame(frame), 2048);
  long arg = 0;
  s.values.row(0).maxCoeff(&arg);
  CHECK(arg == k0);
}

TEST_CASE("all-zero frame floors at ln(eps)") {
  const auto s = log_power_spectra(single_frame(std::vector<double>(2048, 0.0)), 2048);
  CHECK(s.values.allFinite());
  CHECK(s.values(0, 0) == doctest::Approx(std::log(1e-12)));
  CHECK(s.values.maxCoeff() == s.values.minCoeff());
}

TEST_CASE("floor is relative to the frame peak") {
  std::vector<double> frame(2048, 0.0);
  frame[0] = 1.0;
  frame[1] = -1.0;  // |X(0)| = 0
  const auto s = log_power_spectra(single_frame(frame), 2048);
  const double peak = 4.0;  // |1 - e^{-j pi}|^2
  CHECK(s.values(0, 0) == doctest::Approx(std::log(1e-12 * peak)));
}

TEST_CASE("Parseval: two-sided power sum equals n_fft times frame energy") {
  const auto x = test::white_noise(8192, 16000, 5, 0.2);
  const auto f = frame_and_window(x, 128.0, 0.5);
  const RowMatrix p = power_spectra(f, 2048);
  for (long l = 0; l < p.rows(); ++l) {
    double two_sided = p(l, 0) + p(l, 1024);
    for (long k = 1; k < 1024; ++k) two_sided += 2.0 * p(l, k);
    const double energy = f.frames.row(l).squaredNorm();
    CHECK(two_sided == doctest::Approx(2048.0 * energy).epsilon(1e-6));
  }
}

TEST_CASE("mean normalization") {
  SUBCASE("constant row becomes zero") {
    const auto n = mean_normalize_rows(spectra_of({{3.5, 3.5, 3.5, 3.5}}));
    CHECK(n.values.cwiseAbs().maxCoeff() < 1e-15);
    CHECK(n.mean_normalized);
  }
  SUBCASE("[0, 2] becomes [-1, 1]") {
    const auto n = mean_normalize_rows(spectra_of({{0.0, 2.0}}));
    CHECK(n.values(0, 0) == -1.0);
    CHECK(n.values(0, 1) == 1.0);
  }
  SUBCASE("rows sum to zero and the operation is idempotent") {
    const auto x = test::white_noise(16000, 16000, 9, 0.2);
    const auto s = log_power_spectra(frame_and_window(x, 128.0, 0.5), 2048);
    const auto once = mean_normalize_rows(s);
    auto again_in = once;
    again_in.mean_normalized = false;
    const auto twice = mean_normalize_rows(again_in);
    const double n_bins = static_cast<double>(s.values.cols());
    for (long l = 0; l < once.values.rows(); ++l) CHECK(std::abs(once.values.row(l).sum()) < 1e-9 * n_bins);
    CHECK((twice.values - once.values).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("mel filterbank shape") {
  const RowMatrix m = mel_filterbank(kMelBands, 2048, 16000);
  CHECK(m.rows() == 26);
  CHECK(m.cols() == 1025);
  CHECK(m.minCoeff() >= 0.0);
  CHECK(m.maxCoeff() <= 1.0 + 1e-12);
  for (long r = 0; r < m.rows(); ++r) CHECK(m.row(r).sum() > 0.0);
}

TEST_CASE("RASTA-MFCC output width and warm-up") {
  const auto x = synthesize_speech(3.0, 1, 2);
  const auto f = frame_and_window(x, 128.0, 0.5);
  const auto c = mfcc_rasta(f, 12);
  CHECK(c.values.cols() == 12);
  CHECK(static_cast<std::size_t>(c.values.rows()) == f.count() - kRastaWarmup);
  CHECK(c.values.allFinite());
}

TEST_CASE("RASTA needs at least five frames") {
  AudioBuffer a{std::vector<double>(2048 + 3 * 1024, 0.1), 16000};
  const auto f = frame_and_window(a, 128.0, 0.5);
  REQUIRE(f.count() == 4);
  try {
    mfcc_rasta(f, 12);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInsufficientFrames);
  }
}

TEST_CASE("RASTA removes a constant track") {
  RowMatrix tracks = RowMatrix::Constant(40, 3, 2.5);
  const RowMatrix y = rasta_filter(tracks);
  CHECK(y.rows() == 36);
  CHECK(y.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("RASTA steady-state gain matches its transfer function") {
  using cd = std::complex<double>;
  for (double w : {0.05, 0.2, 0.7, 2.0}) {
    const long n = 3000;
    RowMatrix tracks(n, 1);
    for (long i = 0; i < n; ++i) tracks(i, 0) = std::cos(w * static_cast<double>(i));
    const RowMatrix y = rasta_filter(tracks);
    const cd z1 = std::polar(1.0, -w);
    const cd h = (0.2 + 0.1 * z1 - 0.1 * std::pow(z1, 3) - 0.2 * std::pow(z1, 4)) / (1.0 - 0.98 * z1);
    double amp = 0.0;
    for (long i = y.rows() - 1000; i < y.rows(); ++i) amp = std::max(amp, std::abs(y(i, 0)));
    CHECK(amp == doctest::Approx(std::abs(h)).epsilon(2e-3));
  }
}

TEST_CASE("steady tone gives near-zero RASTA cepstra") {
  const double f0 = 64.0 * 16000.0 / 2048.0;
  const auto x = tone(f0, 0.5, 16000 * 4, 16000);
  const auto frames = frame_and_window(x, 128.0, 0.5);
  const auto c = mfcc_rasta(frames, 12);
  const RowMatrix stat = mfcc_static(power_spectra(frames, 2048), 2048, 16000, 12);
  CHECK(c.values.cwiseAbs().maxCoeff() < 1e-6 * stat.cwiseAbs().maxCoeff());
}

TEST_CASE("RASTA cepstra are invariant to a fixed coloration after warm-up") {
  const auto clean = synthesize_speech(30.0, 4, 77);
  const std::vector<double> g{1.0, -0.6, 0.2};
  AudioBuffer colored{fft_convolve(clean.samples, g), 16000};
  colored.samples.resize(clean.size());
  const auto c0 = mfcc_rasta(frame_and_window(clean, 128.0, 0.5), 12).values;
  const auto c1 = mfcc_rasta(frame_and_window(colored, 128.0, 0.5), 12).values;
  const long start = 250;
  REQUIRE(c0.rows() > start + 100);
  const double err = (c1.bottomRows(c0.rows() - start) - c0.bottomRows(c0.rows() - start)).norm();
  const double ref = c0.bottomRows(c0.rows() - start).norm();
  CHECK(err / ref < 0.05);
}

TEST_CASE("front end rows are aligned and mean-normalized") {
  const auto x = synthesize_speech(3.0, 2, 5);
  const auto fe = compute_front_end(x, FrameConfig{});
  CHECK(fe.spectra.values.rows() == fe.cepstra.values.rows());
  CHECK(fe.spectra.mean_normalized);
  CHECK(fe.spectra.values.cols() == 1025);
  for (long l = 0; l < fe.spectra.values.rows(); ++l) CHECK(std::abs(fe.spectra.values.row(l).sum()) < 1e-9 * 1025);
}

TEST_CASE("real FFT round trip") {
  RealFft fft(64);
  std::vector<double> x(64), back(64);
  for (int i = 0; i < 64; ++i) x[static_cast<std::size_t>(i)] = std::sin(0.3 * i) + 0.1 * i;
  std::vector<std::complex<double>> spec(fft.bins());
  fft.forward(x, spec);
  fft.inverse(spec, back);
  for (int i = 0; i < 64; ++i) CHECK(back[static_cast<std::size_t>(i)] / 64.0 == doctest::Approx(x[static_cast<std::size_t>(i)]));
  CHECK(is_power_of_two(1024));
  CHECK_FALSE(is_power_of_two(1000));
  CHECK(next_power_of_two(1000) == 1024);
}
