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

#include <cstdint>
#include <filesystem>
#include <vector>

#include "roomprint/features.hpp"

namespace roomprint {

// How the per-mixture average speech spectrum is formed from P^t X.
enum class AvgSpectrumMode {
  kNormalized,  // each mixture row divided by its total responsibility mass
  kRaw,         // plain P^t X
};

// Diagonal-covariance GMM over RASTA-MFCCs paired with the per-mixture average
// mean-normalized log-power spectrum.
struct SpeechModel {
  Eigen::VectorXd priors;     // M
  RowMatrix means;            // M x D
  RowMatrix variances;        // M x D, diagonal
  RowMatrix avg_spectrum;     // M x N_bins
  FrameConfig frame_config;
  AvgSpectrumMode avg_mode = AvgSpectrumMode::kNormalized;

  int mixtures() const noexcept { return static_cast<int>(priors.size()); }
  int dims() const noexcept { return static_cast<int>(means.cols()); }
  int bins() const noexcept { return static_cast<int>(avg_spectrum.cols()); }
};

struct TrainingOptions {
  int mixtures = 1024;
  std::uint64_t seed = 1;
  int max_iterations = 200;
  int kmeans_iterations = 10;
  double tolerance = 1e-4;  // per-frame log-likelihood gain
  double variance_floor = 1e-6;
  AvgSpectrumMode avg_mode = AvgSpectrumMode::kNormalized;
};

struct TrainingReport {
  std::vector<double> log_likelihood;  // mean per-frame value at each E-step
  int iterations = 0;
  bool converged = false;
  bool variance_clamped = false;
};

// Relative mixture probabilities, one row per frame.
struct ProbMatrix {
  RowMatrix values;
  std::size_t underflow_rows = 0;  // rows replaced by the uniform 1/M fallback
};

// EM training (k-means++ seeded, diagonal covariances). Throws
// kInsufficientData when fewer than 10*M frames are given and
// kConfigMismatch when cepstra and spectra are not row-aligned.
SpeechModel train_speech_model(const CepstraMatrix& cepstra, const SpectraMatrix& spectra,
                               const TrainingOptions& options, TrainingReport* report = nullptr);

// Convenience: runs the front end on every buffer and trains on the stacked frames.
SpeechModel train_speech_model(const std::vector<AudioBuffer>& corpus, const FrameConfig& config,
                               const TrainingOptions& options, TrainingReport* report = nullptr);

ProbMatrix mixture_posteriors(const SpeechModel& model, const CepstraMatrix& cepstra);

// P * S_X: per-frame expected mean-normalized dry-speech log-power spectrum.
SpectraMatrix ideal_speech_from_posteriors(const SpeechModel& model, const ProbMatrix& posteriors);
SpectraMatrix estimate_ideal_speech(const SpeechModel& model, const CepstraMatrix& cepstra);

// Per-frame log-likelihood under the mixture.
Eigen::VectorXd frame_log_likelihood(const SpeechModel& model, const CepstraMatrix& cepstra);

// Throws kInvalidArgument when the model breaks its invariants.
void validate(const SpeechModel& model);

inline constexpr const char* kSpeechModelMagic = "RPLGMM1";

void save_speech_model(const SpeechModel& model, const std::filesystem::path& path);
SpeechModel load_speech_model(const std::filesystem::path& path);

// Stable content hash over every model array, used for cache keys.
std::uint64_t model_fingerprint(const SpeechModel& model);

}  // namespace roomprint
