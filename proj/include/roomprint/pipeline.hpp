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
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "roomprint/audio.hpp"
#include "roomprint/channel.hpp"
#include "roomprint/classifier.hpp"
#include "roomprint/filter_design.hpp"
#include "roomprint/roomprint.hpp"
#include "roomprint/speech_model.hpp"

namespace roomprint {

// One dry utterance paired with one RIR. `speech_path` is a WAV path or a
// synthetic speech spec; `rir` is a WAV path or a synthetic RIR spec.
// Relative paths resolve against the manifest's directory.
struct ManifestEntry {
  std::string speech_path;
  std::string rir;
  std::string room;
  std::string condition;  // near | far
  std::string split;      // train | test
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  int sample_rate_hz = 16000;
  std::filesystem::path base_dir;
};

inline constexpr const char* kManifestHeader = "speech_path,rir,room,condition,split";

DatasetManifest read_manifest(const std::filesystem::path& path, int sample_rate_hz = 16000);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// Throws kManifestInvalid naming the first offending entry: empty manifest,
// bad condition/split value, speech in both splits, speech paired with two
// rooms, or unequal per-room counts within a (split, condition) group.
void validate_manifest(const DatasetManifest& manifest);

// Balanced synthetic manifest: `rooms` RIR specs, `per_room` utterances per
// room and condition, the first `train_fraction` of each room's utterances in
// the training split. Every utterance uses a distinct speech spec.
struct BalancedManifestOptions {
  std::vector<std::string> room_names;
  std::vector<std::string> near_rirs;  // one per room
  std::vector<std::string> far_rirs;   // optional, one per room
  int per_room = 40;
  double train_fraction = 0.8;
  double utterance_s = 4.0;
  int speakers = 20;
  std::uint64_t seed = 1;
};

DatasetManifest build_balanced_manifest(const BalancedManifestOptions& options);

// Loads the dry speech of an entry (WAV resampled to the manifest rate, or synthesized).
AudioBuffer load_speech(const std::string& speech, const std::filesystem::path& base_dir, int sample_rate_hz);
AudioBuffer load_rir(const std::string& rir, const std::filesystem::path& base_dir, int sample_rate_hz);

// Reverberant recording written by synth_dataset.
struct Recording {
  std::filesystem::path path;
  std::string room;
  std::string condition;
  std::string split;
  std::string speech_path;
};

inline constexpr const char* kRecordingsHeader = "recording_path,room,condition,split,speech_path";

std::vector<Recording> read_recordings(const std::filesystem::path& path);
void write_recordings(const std::filesystem::path& path, const std::vector<Recording>& recordings);

struct SynthReport {
  std::vector<Recording> recordings;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  std::filesystem::path index_path;  // recordings.csv inside out_dir
};

// Validates first, then renders every entry as <out_dir>/<split>/<room>_<condition>_<n>.wav
// and writes the recordings index.
SynthReport synth_dataset(const DatasetManifest& manifest, const std::filesystem::path& out_dir);

// Settings shared by every per-recording stage downstream of the speech model.
struct FeatureOptions {
  int octave_fraction = 4;
  double alpha = 1.5;
  bool log_transform = false;
  FitOptions orders;
  double f_min_hz = 100.0;
  double f_max_hz = 8000.0;  // clamped to Nyquist
};

struct RecordingFeatures {
  ChannelEstimate channel;
  DigitalFilter filter;
  AudioBuffer rir_estimate;
  Roomprint roomprint;
};

Filterbank filterbank_for(const FeatureOptions& options, int sample_rate_hz);

// Channel estimate -> minimum-phase target -> IIR fit -> impulse response.
AudioBuffer rir_from_channel(const ChannelEstimate& channel, const FitOptions& orders, int sample_rate_hz,
                             DigitalFilter* filter_out = nullptr);
Roomprint roomprint_from_channel(const ChannelEstimate& channel, const FeatureOptions& options, int sample_rate_hz);
RecordingFeatures extract_features(const AudioBuffer& recording, const SpeechModel& model, const FeatureOptions& options);

// A file is skipped when more than this many bands fail the fallback ladder.
inline constexpr std::size_t kMaxFailedBands = 2;

struct SkippedFile {
  std::filesystem::path path;
  std::string reason;
};

// Per-recording roomprints with a content-hash cache. Channel estimates are
// cached per (model, audio) and roomprints per (channel, feature options), so
// sweeps over B and alpha reuse the channel stage. Channel estimates are also
// kept in memory for the lifetime of the cache.
class FeatureCache {
 public:
  explicit FeatureCache(std::filesystem::path dir = {}) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const noexcept { return dir_; }
  ChannelEstimate channel(const Recording& rec, const SpeechModel& model, std::uint64_t model_key);
  Roomprint roomprint(const Recording& rec, const SpeechModel& model, std::uint64_t model_key,
                      const FeatureOptions& options);

 private:
  ChannelEstimate compute_channel(const Recording& rec, const SpeechModel& model, std::uint64_t key);

  std::filesystem::path dir_;
  std::map<std::uint64_t, ChannelEstimate> memo_;
  std::mutex mutex_;
};

struct FeatureSet {
  std::vector<Roomprint> roomprints;
  std::vector<std::string> labels;
  std::vector<std::filesystem::path> paths;
  std::vector<SkippedFile> skipped;
};

// Extracts roomprints for the selected recordings in manifest order.
FeatureSet collect_features(const std::vector<Recording>& recordings, const SpeechModel& model,
                            const FeatureOptions& options, FeatureCache& cache);

// near, far or mixed (both merged).
bool condition_matches(const std::string& selection, const std::string& condition);
std::vector<Recording> select_recordings(const std::vector<Recording>& all, const std::string& split,
                                         const std::string& condition);

struct ExperimentConfig {
  FeatureOptions features;
  ClassifierOptions classifier;
  std::string train_condition = "near";
  std::string test_condition = "near";
  std::filesystem::path cache_dir;  // empty disables the on-disk cache
};

struct ExperimentResult {
  Metrics metrics;
  SvmModel classifier;
  TrainingSummary training;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  std::vector<SkippedFile> skipped;
};

// Trains the classifier on the train split of the chosen condition and
// evaluates it on the test split. Failing files are reported, not fatal.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::vector<Recording>& recordings,
                                 const SpeechModel& model);
// Same, sharing `cache` across runs (config.cache_dir is ignored).
ExperimentResult run_experiment(const ExperimentConfig& config, const std::vector<Recording>& recordings,
                                 const SpeechModel& model, FeatureCache& cache);

}  // namespace roomprint
