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

// Acceptance suite: one PASS/FAIL line per criterion, SKIP for the
// dataset-scale reproduction (see tools/reproduce_full_scale.sh).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <unistd.h>

#include "roomprint/channel.hpp"
#include "roomprint/classifier.hpp"
#include "roomprint/filter_design.hpp"
#include "roomprint/pipeline.hpp"
#include "roomprint/roomprint.hpp"
#include "roomprint/speech_model.hpp"
#include "roomprint/synth.hpp"

using namespace roomprint;
using cd = std::complex<double>;

namespace {

constexpr int kFs = 16000;
constexpr double kPi = std::numbers::pi;

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Filterbank exactness

void filterbank_exactness() {
  Stopwatch clock;
  double worst = 0.0;
  bool identities = true;
  for (int B : {3, 4, 8}) {
    const auto bank = design_filterbank(B, 100.0, 8000.0, kFs);
    for (std::size_t i = 0; i < bank.bands.size(); ++i) {
      const auto& band = bank.bands[i];
      const double x = band.index - 30;
      const double mid = B % 2 ? 1000.0 * std::pow(2.0, x / B) : 1000.0 * std::pow(2.0, (2.0 * x + 1.0) / (2.0 * B));
      const double edge = std::pow(2.0, 1.0 / (2.0 * B));
      worst = std::max({worst, std::abs(band.f_mid / mid - 1.0), std::abs(band.f_lower / (mid / edge) - 1.0),
                        std::abs(band.f_upper / (mid * edge) - 1.0)});
      identities = identities && std::abs(band.f_mid / std::sqrt(band.f_lower * band.f_upper) - 1.0) <= 1e-9;
      if (i + 1 < bank.bands.size()) {
        identities = identities && std::abs(bank.bands[i + 1].f_lower / band.f_upper - 1.0) <= 1e-9 &&
                     bank.bands[i + 1].index == band.index + 1;
      }
    }
  }
  const auto quarter = design_filterbank(4, 100.0, 8000.0, kFs);
  const double t = clock.seconds();
  report(1, "filterbank exactness", worst <= 1e-9 && identities && quarter.bands.size() == 26 && t < 1.0,
         fmt("max relative error %.2e (limit 1e-9), identities %s, B=4 bands %zu (want 26), %.3f s (limit 1 s)", worst,
             identities ? "hold" : "violated", quarter.bands.size(), t));
}

// ---------------------------------------------------------------------------
// 2. RT60 oracle

void rt60_oracle() {
  Stopwatch clock;
  const auto bank = design_filterbank(4, 100.0, 8000.0, kFs);
  double worst = 0.0, worst_rt = 0.0, worst_alpha = 0.0, worst_hz = 0.0;
  bool all_valid = true;
  for (double rt : {0.2, 0.34, 0.64, 1.0, 1.25, 1.5}) {
    // One exponentially decaying tone per band midband.
    const double tau = rt / (3.0 * std::log(10.0));
    const auto n = static_cast<std::size_t>((2.0 * rt + 0.1) * kFs);
    AudioBuffer h{std::vector<double>(n, 0.0), kFs};
    for (std::size_t b = 0; b < bank.bands.size(); ++b) {
      const double phase = 0.7 * static_cast<double>(b * b);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / kFs;
        h.samples[i] += std::cos(2.0 * kPi * bank.bands[b].f_mid * t + phase) * std::exp(-t / tau);
      }
    }
    for (double alpha : {1.0, 1.2, 1.5, 2.0, 3.0}) {
      const auto print = compute_roomprint(h, bank, alpha, false);
      all_valid = all_valid && print.valid;
      for (std::size_t i = 0; i < print.rt60_s.size(); ++i) {
        if (bank.bands[i].f_mid < 200.0) continue;
        const double e = std::abs(print.rt60_s[i] / rt - 1.0);
        if (e > worst) {
          worst = e;
          worst_rt = rt;
          worst_alpha = alpha;
          worst_hz = bank.bands[i].f_mid;
        }
      }
    }
  }
  const double t = clock.seconds();
  report(2, "RT60 oracle", worst < 0.05 && all_valid && t < 30.0,
         fmt("worst error %.2f%% (limit 5%%) at RT60 %.2f s, alpha %.1f, %.0f Hz; %.1f s (limit 30 s)", 100.0 * worst,
             worst_rt, worst_alpha, worst_hz, t));
}

// ---------------------------------------------------------------------------
// 3. Filter-design round trip

std::vector<cd> random_roots(std::mt19937_64& gen, int order, double r_min, double r_max) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<cd> roots;
  while (static_cast<int>(roots.size()) + 2 <= order) {
    const double r = r_min + (r_max - r_min) * u(gen), theta = kPi * u(gen);
    roots.push_back(std::polar(r, theta));
    roots.push_back(std::polar(r, -theta));
  }
  if (static_cast<int>(roots.size()) < order) roots.emplace_back((u(gen) < 0.5 ? -1.0 : 1.0) * (r_min + (r_max - r_min) * u(gen)), 0.0);
  return roots;
}

void filter_round_trip() {
  Stopwatch clock;
  constexpr std::size_t kBins = 1025;
  const double bin_hz = static_cast<double>(kFs) / 2048.0;
  auto in_band = [&](std::size_t k) { return k * bin_hz >= 100.0 && k * bin_hz <= 7600.0; };
  std::mt19937_64 gen(2026);
  std::uniform_int_distribution<int> order(1, 24);
  int done = 0, outside = 0;
  double worst = 0.0;
  while (done < 50) {
    DigitalFilter f;
    f.b = polynomial_from_roots(random_roots(gen, order(gen), 0.2, 0.98));
    const auto a = polynomial_from_roots(random_roots(gen, order(gen), 0.2, 0.95));
    f.a.assign(a.begin() + 1, a.end());
    std::vector<double> lm(kBins);
    double lo = 1e300, hi = -1e300;
    for (std::size_t k = 0; k < kBins; ++k) {
      lm[k] = std::log(std::abs(f.response(kPi * k / (kBins - 1))));
      if (in_band(k)) {
        lo = std::min(lo, lm[k]);
        hi = std::max(hi, lm[k]);
      }
    }
    if ((hi - lo) * 20.0 / std::log(10.0) > 40.0) continue;
    ++done;
    const auto fit = fit_minimum_phase_filter(minimum_phase_target(lm, bin_hz), 24, 24);
    double mae = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < kBins; ++k) {
      if (!in_band(k)) continue;
      mae += std::abs(20.0 * std::log10(std::abs(fit.response(kPi * k / (kBins - 1)))) - lm[k] * 20.0 / std::log(10.0));
      ++n;
    }
    worst = std::max(worst, mae / n);
    for (const auto& r : fit.poles()) outside += std::abs(r) >= 1.0;
    for (const auto& r : fit.zeros()) outside += std::abs(r) >= 1.0;
  }
  const double t = clock.seconds();
  report(3, "filter-design round trip", worst < 1.0 && outside == 0 && t < 60.0,
         fmt("50 filters, worst MAE %.2e dB (limit 1 dB), %d roots on or outside the unit circle, %.1f s (limit 60 s)",
             worst, outside, t));
}

// ---------------------------------------------------------------------------
// 4. Channel-estimator recovery (the model is reused by criteria 5 and 6)

struct SharedModel {
  SpeechModel model;
  TrainingReport report;
  double train_seconds = 0.0;
};

SharedModel train_desk_model() {
  Stopwatch clock;
  std::vector<AudioBuffer> corpus;
  for (int i = 0; i < 300; ++i) corpus.push_back(synthesize_speech(6.0, static_cast<std::uint64_t>(i % 24), static_cast<std::uint64_t>(i), kFs));
  TrainingOptions options;
  options.mixtures = 64;
  options.seed = 1;
  SharedModel out;
  out.model = train_speech_model(corpus, FrameConfig{}, options, &out.report);
  out.train_seconds = clock.seconds();
  return out;
}

AudioBuffer held_out_speech() {
  AudioBuffer dry{{}, kFs};
  for (int i = 0; i < 10; ++i) {
    const auto s = synthesize_speech(6.0, 500 + static_cast<std::uint64_t>(i), 9000 + static_cast<std::uint64_t>(i), kFs);
    dry.samples.insert(dry.samples.end(), s.samples.begin(), s.samples.end());
  }
  return dry;
}

void channel_recovery(const SharedModel& shared) {
  Stopwatch clock;
  const auto dry = held_out_speech();
  const std::vector<double> coloration{1.0, -0.9};
  AudioBuffer wet{fft_convolve(dry.samples, coloration), kFs};
  wet.samples.resize(dry.size());
  const auto est = estimate_channel(wet, shared.model);
  AudioBuffer loud = wet;
  for (auto& v : loud.samples) v *= 3.7;
  const auto est_loud = estimate_channel(loud, shared.model);

  const std::size_t n = est.bins();
  std::vector<double> truth(n);
  double mean = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = kPi * static_cast<double>(k) / static_cast<double>(n - 1);
    truth[k] = std::log(std::abs(1.0 - 0.9 * std::polar(1.0, -w)));
    mean += truth[k];
  }
  mean /= static_cast<double>(n);
  double mae = 0.0, gain = 0.0;
  int count = 0;
  for (std::size_t k = 0; k < n; ++k) {
    gain = std::max(gain, std::abs(est.log_magnitude[k] - est_loud.log_magnitude[k]));
    const double hz = static_cast<double>(k) * est.bin_hz;
    if (hz < 100.0 || hz > 7600.0) continue;
    mae += std::abs(est.log_magnitude[k] - (truth[k] - mean));
    ++count;
  }
  mae /= count;
  const double t = clock.seconds() + shared.train_seconds;
  report(4, "channel-estimator recovery", mae < 0.35 && gain <= 1e-9 && t < 600.0,
         fmt("M=64 on 30 min, MAE %.4f (limit 0.35) over 100 Hz-7.6 kHz, gain invariance %.2e (limit 1e-9), "
             "%.1f s incl. %.1f s training (limit 600 s)",
             mae, gain, t, shared.train_seconds));
}

// ---------------------------------------------------------------------------
// 5. End-to-end desk-scale classification

void end_to_end(const SharedModel& shared, const std::filesystem::path& work) {
  Stopwatch clock;
  const std::vector<std::vector<double>> profiles{{0.33, 0.33, 0.25, 0.25, 0.25, 0.25},
                                                  {0.95, 0.73, 0.73, 0.56, 0.43, 0.33},
                                                  {0.43, 0.56, 0.56, 0.73, 0.56, 0.43},
                                                  {0.73, 0.95, 0.95, 0.95, 0.95, 0.73},
                                                  {0.56, 0.43, 0.33, 0.33, 0.33, 0.56}};
  // tau is proportional to RT60, so the control-point ratio is the tau ratio.
  double min_ratio = 1e300;
  for (std::size_t a = 0; a < profiles.size(); ++a) {
    for (std::size_t b = a + 1; b < profiles.size(); ++b) {
      for (std::size_t k = 0; k < profiles[a].size(); ++k) {
        min_ratio = std::min(min_ratio, std::max(profiles[a][k], profiles[b][k]) / std::min(profiles[a][k], profiles[b][k]));
      }
    }
  }
  constexpr std::uint64_t kSeed = 8;
  BalancedManifestOptions options;
  options.per_room = 40;
  options.utterance_s = 12.0;
  options.speakers = 30;
  options.seed = kSeed;
  for (std::size_t r = 0; r < profiles.size(); ++r) {
    RirSpec spec;
    spec.rt60_s = profiles[r];
    spec.seed = 100 + r + 10 * kSeed;
    options.room_names.push_back("room" + std::to_string(r + 1));
    options.near_rirs.push_back(format_rir_spec(spec));
  }
  const auto data = synth_dataset(build_balanced_manifest(options), work / "rooms");
  const auto result = run_experiment(ExperimentConfig{}, data.recordings, shared.model);
  const double t = clock.seconds();
  report(5, "end-to-end classification",
         result.metrics.accuracy >= 90.0 && min_ratio >= 1.25 && t < 1200.0 && result.train_count + result.skipped.size() == 160,
         fmt("5 rooms x 40, min per-band tau ratio %.2f (want >= 1.25), %zu train / %zu test, %zu skipped, "
             "accuracy %.1f%% (limit 90%%), precision %.1f%%, recall %.1f%%, CV %.1f%% at c=%g gamma=%g, %.0f s (limit 1200 s)",
             min_ratio, result.train_count, result.test_count, result.skipped.size(), result.metrics.accuracy,
             result.metrics.precision, result.metrics.recall, result.training.best.cv_accuracy, result.classifier.c,
             result.classifier.gamma, t));
}

// ---------------------------------------------------------------------------
// 6. Module invariants

void invariants(const SharedModel& shared, const std::filesystem::path& work) {
  Stopwatch clock;
  int violations = 0;
  int checks = 0;
  auto expect = [&](bool ok) {
    ++checks;
    violations += !ok;
  };

  // EM monotonicity of the criterion-4 training run.
  const auto& ll = shared.report.log_likelihood;
  for (std::size_t i = 1; i < ll.size(); ++i) expect(ll[i] >= ll[i - 1] - 1e-9 * std::abs(ll[i - 1]));

  // Posterior row-stochasticity on held-out speech.
  const auto front = compute_front_end(synthesize_speech(20.0, 777, 31337, kFs), shared.model.frame_config);
  const auto post = mixture_posteriors(shared.model, front.cepstra);
  for (long l = 0; l < post.values.rows(); ++l) {
    expect(std::abs(post.values.row(l).sum() - 1.0) <= 1e-9 && post.values.row(l).minCoeff() >= 0.0);
  }

  // EDC monotonicity and Schroeder scale invariance on synthetic RIRs.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RirSpec spec;
    spec.rt60_s = {0.3 + 0.2 * static_cast<double>(seed), 0.4, 0.5};
    spec.seed = seed;
    const auto h = synthesize_rir(spec, kFs);
    const auto curve = schroeder_decay(h);
    expect(curve.edc_db.front() == 0.0);
    for (std::size_t i = 1; i < curve.edc_db.size(); ++i) expect(curve.edc_db[i] <= curve.edc_db[i - 1]);
    AudioBuffer scaled = h;
    for (auto& v : scaled.samples) v *= 8.0;
    expect(schroeder_decay(scaled).edc_db == curve.edc_db);
    for (double alpha : {1.0, 1.5, 3.0}) expect(estimate_rt60(schroeder_decay(scaled), alpha) == estimate_rt60(curve, alpha));
  }

  // Persistence round trips.
  save_speech_model(shared.model, work / "speech.gmm");
  const auto loaded = load_speech_model(work / "speech.gmm");
  expect(model_fingerprint(loaded) == model_fingerprint(shared.model));
  expect((mixture_posteriors(loaded, front.cepstra).values - post.values).cwiseAbs().maxCoeff() <= 1e-12);

  const auto channel = estimate_channel(synthesize_speech(6.0, 900, 900, kFs), shared.model);
  write_channel_csv(work / "channel.csv", channel);
  expect(read_channel_csv(work / "channel.csv").log_magnitude == channel.log_magnitude);

  const auto bank = design_filterbank(4, 100.0, 8000.0, kFs);
  const auto print = compute_roomprint(exponential_rir(0.5, 1.2, kFs, 3), bank, 1.5, false);
  write_roomprint_json(work / "roomprint.json", print);
  expect(read_roomprint_json(work / "roomprint.json").rt60_s == print.rt60_s);

  std::vector<Roomprint> prints;
  std::vector<std::string> labels;
  for (int r = 0; r < 3; ++r) {
    for (std::uint64_t s = 0; s < 6; ++s) {
      prints.push_back(compute_roomprint(exponential_rir(0.3 + 0.3 * r, 1.0, kFs, 10 * r + s), bank, 1.5, false));
      labels.push_back("room" + std::to_string(r));
    }
  }
  ClassifierOptions small;
  small.grid_c = log_grid(-1, 2);
  small.grid_gamma = log_grid(-3, 0);
  small.folds = 3;
  const auto svm = train_classifier(prints, labels, small);
  save_classifier(svm, work / "svm.bin");
  const auto svm_back = load_classifier(work / "svm.bin");
  for (const auto& p : prints) {
    expect(predict_detail(svm_back, p.rt60_s).margins == predict_detail(svm, p.rt60_s).margins);
  }

  const double t = clock.seconds();
  report(6, "module invariants", violations == 0, fmt("%d checks, %d violations (limit 0), %.1f s", checks, violations, t));
}

}  // namespace

int main() {
  const auto work = std::filesystem::temp_directory_path() / ("roomprint_acceptance_" + std::to_string(::getpid()));
  std::filesystem::create_directories(work);
  try {
    filterbank_exactness();
    rt60_oracle();
    filter_round_trip();
    const auto shared = train_desk_model();
    channel_recovery(shared);
    end_to_end(shared, work);
    invariants(shared, work);
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance aborted: %s\n", e.what());
    ++failures;
  }
  std::printf("[SKIP] full-scale reproduction: needs ACE, LibriSpeech and VCTK; run tools/reproduce_full_scale.sh\n");
  std::filesystem::remove_all(work);
  return failures == 0 ? 0 : 1;
}
