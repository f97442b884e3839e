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

#include "roomprint/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "roomprint/container.hpp"
#include "roomprint/error.hpp"
#include "roomprint/parallel.hpp"
#include "roomprint/synth.hpp"

namespace roomprint {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string entry_name(std::size_t index, const ManifestEntry& e) {
  return "entry " + std::to_string(index + 2) + " (" + e.speech_path + ")";
}

std::uint64_t hash_values(std::initializer_list<double> values, std::uint64_t seed) {
  const std::vector<double> v(values);
  return fnv1a64(v.data(), v.size() * sizeof(double), seed);
}

}  // namespace

DatasetManifest read_manifest(const std::filesystem::path& path, int sample_rate_hz) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  DatasetManifest m;
  m.sample_rate_hz = sample_rate_hz;
  m.base_dir = path.parent_path();
  std::string line;
  if (!std::getline(f, line) || split_csv_line(line) != split_csv_line(kManifestHeader)) {
    throw Error(ErrorKind::kManifestInvalid, "header must be '" + std::string(kManifestHeader) + "'");
  }
  std::size_t row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 5) throw Error(ErrorKind::kManifestInvalid, "line " + std::to_string(row) + " has " + std::to_string(fields.size()) + " fields");
    m.entries.push_back({fields[0], fields[1], fields[2], fields[3], fields[4]});
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  f << kManifestHeader << "\n";
  for (const auto& e : manifest.entries) {
    f << e.speech_path << "," << e.rir << "," << e.room << "," << e.condition << "," << e.split << "\n";
  }
}

void validate_manifest(const DatasetManifest& manifest) {
  if (manifest.entries.empty()) throw Error(ErrorKind::kManifestInvalid, "manifest has no entries");
  std::map<std::string, std::pair<std::string, std::size_t>> split_of;
  std::map<std::string, std::pair<std::string, std::size_t>> room_of;
  std::set<std::string> rooms;
  std::map<std::pair<std::string, std::string>, std::map<std::string, long>> groups;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    const std::string where = entry_name(i, e);
    if (e.speech_path.empty() || e.rir.empty() || e.room.empty()) throw Error(ErrorKind::kManifestInvalid, where + ": empty field");
    if (e.condition != "near" && e.condition != "far") throw Error(ErrorKind::kManifestInvalid, where + ": condition must be near or far");
    if (e.split != "train" && e.split != "test") throw Error(ErrorKind::kManifestInvalid, where + ": split must be train or test");
    const auto [sit, s_new] = split_of.emplace(e.speech_path, std::pair{e.split, i});
    if (!s_new && sit->second.first != e.split) {
      throw Error(ErrorKind::kManifestInvalid, where + ": speech appears in both splits (also " +
                                                   entry_name(sit->second.second, manifest.entries[sit->second.second]) + ")");
    }
    const auto [rit, r_new] = room_of.emplace(e.speech_path, std::pair{e.room, i});
    if (!r_new && rit->second.first != e.room) {
      throw Error(ErrorKind::kManifestInvalid, where + ": speech paired with rooms '" + rit->second.first + "' and '" + e.room + "'");
    }
    rooms.insert(e.room);
    ++groups[{e.split, e.condition}][e.room];
  }
  for (const auto& [key, counts] : groups) {
    const long expected = counts.begin()->second;
    for (const auto& room : rooms) {
      const auto it = counts.find(room);
      const long got = it == counts.end() ? 0 : it->second;
      if (got != expected) {
        throw Error(ErrorKind::kManifestInvalid, "unbalanced " + key.first + "/" + key.second + ": room '" + room + "' has " +
                                                     std::to_string(got) + " entries, expected " + std::to_string(expected));
      }
    }
  }
}

DatasetManifest build_balanced_manifest(const BalancedManifestOptions& options) {
  const std::size_t rooms = options.room_names.size();
  if (rooms == 0 || options.near_rirs.size() != rooms || (!options.far_rirs.empty() && options.far_rirs.size() != rooms)) {
    throw Error(ErrorKind::kInvalidArgument, "need one near RIR (and optionally one far RIR) per room");
  }
  if (options.per_room < 2 || !(options.train_fraction > 0.0 && options.train_fraction < 1.0) || options.speakers < 1) {
    throw Error(ErrorKind::kInvalidArgument, "bad balanced-manifest options");
  }
  const int n_train = static_cast<int>(std::lround(options.per_room * options.train_fraction));
  DatasetManifest m;
  std::uint64_t utt = options.seed * 1'000'000ULL;
  auto add = [&](const std::vector<std::string>& rirs, const std::string& condition) {
    for (std::size_t r = 0; r < rooms; ++r) {
      for (int i = 0; i < options.per_room; ++i, ++utt) {
        SpeechSpec s;
        s.speaker = utt % static_cast<std::uint64_t>(options.speakers);
        s.utterance = utt;
        s.duration_s = options.utterance_s;
        m.entries.push_back({format_speech_spec(s), rirs[r], options.room_names[r], condition, i < n_train ? "train" : "test"});
      }
    }
  };
  add(options.near_rirs, "near");
  if (!options.far_rirs.empty()) add(options.far_rirs, "far");
  return m;
}

AudioBuffer load_speech(const std::string& speech, const std::filesystem::path& base_dir, int sample_rate_hz) {
  if (is_speech_spec(speech)) {
    const SpeechSpec s = parse_speech_spec(speech);
    return synthesize_speech(s.duration_s, s.speaker, s.utterance, sample_rate_hz);
  }
  return resample(read_audio(resolve(speech, base_dir)), sample_rate_hz);
}

AudioBuffer load_rir(const std::string& rir, const std::filesystem::path& base_dir, int sample_rate_hz) {
  if (is_rir_spec(rir)) return synthesize_rir(parse_rir_spec(rir), sample_rate_hz);
  return resample(read_audio(resolve(rir, base_dir)), sample_rate_hz);
}

std::vector<Recording> read_recordings(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::string line;
  if (!std::getline(f, line) || split_csv_line(line) != split_csv_line(kRecordingsHeader)) {
    throw Error(ErrorKind::kManifestInvalid, "header must be '" + std::string(kRecordingsHeader) + "'");
  }
  std::vector<Recording> out;
  while (std::getline(f, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 5) throw Error(ErrorKind::kManifestInvalid, "bad recordings row: " + line);
    out.push_back({resolve(fields[0], path.parent_path()), fields[1], fields[2], fields[3], fields[4]});
  }
  return out;
}

void write_recordings(const std::filesystem::path& path, const std::vector<Recording>& recordings) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  f << kRecordingsHeader << "\n";
  const auto base = path.parent_path();
  for (const auto& r : recordings) {
    const auto rel = base.empty() ? r.path : r.path.lexically_relative(base);
    f << rel.generic_string() << "," << r.room << "," << r.condition << "," << r.split << "," << r.speech_path << "\n";
  }
}

SynthReport synth_dataset(const DatasetManifest& manifest, const std::filesystem::path& out_dir) {
  validate_manifest(manifest);
  const int fs = manifest.sample_rate_hz;

  // Load every distinct RIR once before writing anything.
  std::map<std::string, AudioBuffer> rirs;
  for (const auto& e : manifest.entries) {
    if (!rirs.count(e.rir)) rirs.emplace(e.rir, load_rir(e.rir, manifest.base_dir, fs));
  }

  std::filesystem::create_directories(out_dir / "train");
  std::filesystem::create_directories(out_dir / "test");
  SynthReport report;
  report.recordings.resize(manifest.entries.size());
  parallel_for(manifest.entries.size(), [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    char name[32];
    std::snprintf(name, sizeof name, "_%05zu.wav", i);
    const auto path = out_dir / e.split / (e.room + "_" + e.condition + name);
    const AudioBuffer speech = load_speech(e.speech_path, manifest.base_dir, fs);
    write_wav(path, convolve_rir(speech, rirs.at(e.rir)));
    report.recordings[i] = {path, e.room, e.condition, e.split, e.speech_path};
  });
  for (const auto& r : report.recordings) (r.split == "train" ? report.train_count : report.test_count)++;
  report.index_path = out_dir / "recordings.csv";
  write_recordings(report.index_path, report.recordings);
  return report;
}

Filterbank filterbank_for(const FeatureOptions& options, int sample_rate_hz) {
  return design_filterbank(options.octave_fraction, options.f_min_hz, std::min(options.f_max_hz, sample_rate_hz / 2.0),
                           sample_rate_hz);
}

AudioBuffer rir_from_channel(const ChannelEstimate& channel, const FitOptions& orders, int sample_rate_hz,
                             DigitalFilter* filter_out) {
  const DigitalFilter filter = fit_minimum_phase_filter(minimum_phase_target(channel), orders);
  if (filter_out) *filter_out = filter;
  return impulse_response(filter, synthesis_length(filter, sample_rate_hz), sample_rate_hz);
}

Roomprint roomprint_from_channel(const ChannelEstimate& channel, const FeatureOptions& options, int sample_rate_hz) {
  const AudioBuffer rir = rir_from_channel(channel, options.orders, sample_rate_hz);
  RoomprintOptions rp;
  rp.alpha = options.alpha;
  rp.log_transform = options.log_transform;
  return compute_roomprint(rir, filterbank_for(options, sample_rate_hz), rp);
}

RecordingFeatures extract_features(const AudioBuffer& recording, const SpeechModel& model, const FeatureOptions& options) {
  RecordingFeatures out;
  out.channel = estimate_channel(recording, model);
  const int fs = model.frame_config.sample_rate_hz;
  out.rir_estimate = rir_from_channel(out.channel, options.orders, fs, &out.filter);
  RoomprintOptions rp;
  rp.alpha = options.alpha;
  rp.log_transform = options.log_transform;
  out.roomprint = compute_roomprint(out.rir_estimate, filterbank_for(options, fs), rp);
  return out;
}

ChannelEstimate FeatureCache::channel(const Recording& rec, const SpeechModel& model, std::uint64_t model_key) {
  const std::string bytes = read_bytes(rec.path);
  const std::uint64_t key = fnv1a64(bytes.data(), bytes.size(), model_key);
  {
    std::lock_guard lock(mutex_);
    const auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
  }
  ChannelEstimate est = compute_channel(rec, model, key);
  std::lock_guard lock(mutex_);
  memo_.emplace(key, est);
  return est;
}

ChannelEstimate FeatureCache::compute_channel(const Recording& rec, const SpeechModel& model, std::uint64_t key) {
  const auto file = dir_.empty() ? std::filesystem::path{} : dir_ / ("channel_" + hex64(key) + ".csv");
  if (!file.empty() && std::filesystem::exists(file)) return read_channel_csv(file);
  ChannelEstimate est = estimate_channel(read_audio(rec.path), model);
  if (!file.empty()) {
    std::filesystem::create_directories(dir_);
    // Write then rename so concurrent readers never see a partial file.
    const auto tmp = file.string() + ".tmp" + std::to_string(std::hash<std::string>{}(rec.path.string()));
    write_channel_csv(tmp, est);
    std::filesystem::rename(tmp, file);
    // Round-trip through the file so cached and fresh runs agree exactly.
    return read_channel_csv(file);
  }
  return est;
}

Roomprint FeatureCache::roomprint(const Recording& rec, const SpeechModel& model, std::uint64_t model_key,
                                  const FeatureOptions& options) {
  const int fs = model.frame_config.sample_rate_hz;
  const ChannelEstimate est = channel(rec, model, model_key);
  std::uint64_t key = fnv1a64(est.log_magnitude.data(), est.log_magnitude.size() * sizeof(double), model_key);
  key = hash_values({static_cast<double>(options.octave_fraction), options.alpha, options.log_transform ? 1.0 : 0.0,
                     static_cast<double>(options.orders.n_b), static_cast<double>(options.orders.n_a),
                     static_cast<double>(options.orders.refinement_passes), options.f_min_hz, options.f_max_hz,
                     static_cast<double>(fs), est.bin_hz},
                    key);
  const auto file = dir_.empty() ? std::filesystem::path{} : dir_ / ("roomprint_" + hex64(key) + ".json");
  if (!file.empty() && std::filesystem::exists(file)) return read_roomprint_json(file);
  Roomprint rp = roomprint_from_channel(est, options, fs);
  if (!file.empty()) {
    const auto tmp = file.string() + ".tmp" + std::to_string(std::hash<std::string>{}(rec.path.string()));
    write_roomprint_json(tmp, rp);
    std::filesystem::rename(tmp, file);
  }
  return rp;
}

FeatureSet collect_features(const std::vector<Recording>& recordings, const SpeechModel& model,
                            const FeatureOptions& options, FeatureCache& cache) {
  const std::uint64_t model_key = model_fingerprint(model);
  std::vector<std::optional<Roomprint>> results(recordings.size());
  std::vector<std::string> reasons(recordings.size());
  parallel_for(recordings.size(), [&](std::size_t i) {
    try {
      Roomprint rp = cache.roomprint(recordings[i], model, model_key, options);
      if (rp.failed_bands.size() > kMaxFailedBands) {
        reasons[i] = std::to_string(rp.failed_bands.size()) + " bands failed RT60 extraction";
        return;
      }
      for (double v : rp.rt60_s) {
        if (!std::isfinite(v) || v <= 0.0) {
          reasons[i] = "band with less than 10 dB of decay";
          return;
        }
      }
      results[i] = std::move(rp);
    } catch (const Error& e) {
      reasons[i] = e.what();
    }
  });

  FeatureSet out;
  for (std::size_t i = 0; i < recordings.size(); ++i) {
    if (results[i]) {
      out.roomprints.push_back(std::move(*results[i]));
      out.labels.push_back(recordings[i].room);
      out.paths.push_back(recordings[i].path);
    } else {
      out.skipped.push_back({recordings[i].path, reasons[i]});
    }
  }
  return out;
}

bool condition_matches(const std::string& selection, const std::string& condition) {
  if (selection == "mixed") return condition == "near" || condition == "far";
  if (selection == "near" || selection == "far") return selection == condition;
  throw Error(ErrorKind::kInvalidArgument, "condition must be near, far or mixed, got '" + selection + "'");
}

std::vector<Recording> select_recordings(const std::vector<Recording>& all, const std::string& split,
                                         const std::string& condition) {
  std::vector<Recording> out;
  for (const auto& r : all) {
    if (r.split == split && condition_matches(condition, r.condition)) out.push_back(r);
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const std::vector<Recording>& recordings,
                                const SpeechModel& model) {
  FeatureCache cache(config.cache_dir);
  return run_experiment(config, recordings, model, cache);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const std::vector<Recording>& recordings,
                                const SpeechModel& model, FeatureCache& cache) {
  if (!(config.features.alpha >= 1.0) || config.features.octave_fraction < 1) {
    throw Error(ErrorKind::kInvalidArgument, "need alpha >= 1 and B >= 1");
  }
  const auto train = select_recordings(recordings, "train", config.train_condition);
  const auto test = select_recordings(recordings, "test", config.test_condition);
  if (train.empty() || test.empty()) throw Error(ErrorKind::kInsufficientData, "no recordings for the selected split/condition");

  FeatureSet train_set = collect_features(train, model, config.features, cache);
  FeatureSet test_set = collect_features(test, model, config.features, cache);

  ExperimentResult result;
  result.skipped = train_set.skipped;
  result.skipped.insert(result.skipped.end(), test_set.skipped.begin(), test_set.skipped.end());
  if (test_set.roomprints.empty()) throw Error(ErrorKind::kInsufficientData, "every test recording was skipped");
  result.train_count = train_set.roomprints.size();
  result.test_count = test_set.roomprints.size();
  result.classifier = train_classifier(train_set.roomprints, train_set.labels, config.classifier, &result.training);
  result.metrics = evaluate(result.classifier, test_set.roomprints, test_set.labels);
  return result;
}

}  // namespace roomprint
