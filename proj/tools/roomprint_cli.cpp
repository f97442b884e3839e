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

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "roomprint/audio.hpp"
#include "roomprint/channel.hpp"
#include "roomprint/classifier.hpp"
#include "roomprint/error.hpp"
#include "roomprint/filter_design.hpp"
#include "roomprint/pipeline.hpp"
#include "roomprint/roomprint.hpp"
#include "roomprint/speech_model.hpp"
#include "roomprint/synth.hpp"

namespace rp = roomprint;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitDegraded = 3;

struct Common {
  int sample_rate = 16000;
  double frame_ms = 128.0;
  double overlap = 0.5;
  int mixtures = 1024;
  int mfcc = 12;
  int octave_fraction = 4;
  double alpha = 1.5;
  std::string orders = "24,24";
  std::uint64_t seed = 1;
  bool log_features = false;
  std::string cache_dir;

  rp::FrameConfig frame_config() const {
    rp::FrameConfig c;
    c.frame_ms = frame_ms;
    c.overlap = overlap;
    c.n_mfcc = mfcc;
    c.sample_rate_hz = sample_rate;
    return c;
  }

  rp::FeatureOptions feature_options() const {
    rp::FeatureOptions f;
    f.octave_fraction = octave_fraction;
    f.alpha = alpha;
    f.log_transform = log_features;
    const auto comma = orders.find(',');
    if (comma == std::string::npos) throw rp::Error(rp::ErrorKind::kInvalidArgument, "--orders expects nb,na");
    try {
      f.orders.n_b = std::stoi(orders.substr(0, comma));
      f.orders.n_a = std::stoi(orders.substr(comma + 1));
    } catch (const std::exception&) {
      throw rp::Error(rp::ErrorKind::kInvalidArgument, "--orders expects nb,na");
    }
    return f;
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void report_skipped(const std::vector<rp::SkippedFile>& skipped) {
  for (const auto& s : skipped) std::fprintf(stderr, "skipped %s: %s\n", s.path.string().c_str(), s.reason.c_str());
}

rp::AudioBuffer read_at(const std::string& path, int rate) { return rp::resample(rp::read_audio(path), rate); }

std::vector<rp::AudioBuffer> synthetic_corpus(double minutes, int speakers, std::uint64_t seed, int rate) {
  std::vector<rp::AudioBuffer> corpus;
  const double utterance_s = 6.0;
  const int count = std::max(1, static_cast<int>(std::ceil(minutes * 60.0 / utterance_s)));
  for (int i = 0; i < count; ++i) {
    corpus.push_back(rp::synthesize_speech(utterance_s, static_cast<std::uint64_t>(i % speakers) + 1000 * seed,
                                           static_cast<std::uint64_t>(i) + 7919 * seed, rate));
  }
  return corpus;
}

rp::ClassifierOptions classifier_options(const Common& common, int folds, int per_decade) {
  rp::ClassifierOptions o;
  o.folds = folds;
  o.seed = common.seed;
  o.grid_c = rp::log_grid(-4, 3, per_decade);
  o.grid_gamma = rp::log_grid(-4, 3, per_decade);
  return o;
}

// Demo rooms: per-band RT60 profiles at 125 Hz .. 4 kHz.
rp::DatasetManifest demo_manifest(int rooms, int per_room, std::uint64_t seed) {
  const std::vector<std::vector<double>> profiles{
      {0.30, 0.28, 0.25, 0.22, 0.20, 0.18}, {0.90, 0.80, 0.70, 0.60, 0.50, 0.40}, {0.45, 0.50, 0.55, 0.60, 0.55, 0.45},
      {1.40, 1.30, 1.20, 1.10, 1.00, 0.90}, {0.60, 0.45, 0.35, 0.30, 0.28, 0.26}, {0.20, 0.30, 0.40, 0.50, 0.60, 0.70},
      {1.00, 1.00, 0.95, 0.90, 0.85, 0.80}};
  if (rooms < 2 || rooms > static_cast<int>(profiles.size())) {
    throw rp::Error(rp::ErrorKind::kInvalidArgument, "--demo-rooms must be in 2.." + std::to_string(profiles.size()));
  }
  rp::BalancedManifestOptions o;
  o.per_room = per_room;
  o.seed = seed;
  for (int r = 0; r < rooms; ++r) {
    rp::RirSpec spec;
    spec.rt60_s = profiles[static_cast<std::size_t>(r)];
    spec.seed = seed * 100 + static_cast<std::uint64_t>(r);
    o.room_names.push_back("room" + std::to_string(r + 1));
    o.near_rirs.push_back(rp::format_rir_spec(spec));
  }
  return rp::build_balanced_manifest(o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind room identification from reverberant speech"};
  app.fallthrough();
  app.require_subcommand(1);
  Common common;
  app.add_option("--sample-rate", common.sample_rate, "Working sample rate (Hz)")->capture_default_str();
  app.add_option("--frame-ms", common.frame_ms, "Analysis frame length (ms)")->capture_default_str();
  app.add_option("--overlap", common.overlap, "Frame overlap fraction")->capture_default_str();
  app.add_option("--mixtures", common.mixtures, "GMM mixture count")->capture_default_str();
  app.add_option("--mfcc", common.mfcc, "Number of cepstral coefficients")->capture_default_str();
  app.add_option("--octave-fraction", common.octave_fraction, "B in 1/B-octave bands")->capture_default_str();
  app.add_option("--alpha", common.alpha, "RT60 interpolation factor")->capture_default_str();
  app.add_option("--orders", common.orders, "Numerator,denominator orders")->capture_default_str();
  app.add_option("--seed", common.seed, "Random seed")->capture_default_str();
  app.add_flag("--log-features", common.log_features, "Use ln(RT60) as classifier features");
  app.add_option("--cache-dir", common.cache_dir, "Directory for cached channel estimates and roomprints");

  // train-gmm
  auto* train_gmm = app.add_subcommand("train-gmm", "Train the speech model");
  std::vector<std::string> corpus_files;
  std::string corpus_list, gmm_out;
  double synth_minutes = 0.0;
  int synth_speakers = 24;
  int max_iterations = 200;
  train_gmm->add_option("wavs", corpus_files, "Dry speech WAV files");
  train_gmm->add_option("--corpus", corpus_list, "Text file with one WAV path per line");
  train_gmm->add_option("--synthetic-minutes", synth_minutes, "Train on generated speech instead");
  train_gmm->add_option("--speakers", synth_speakers, "Speakers in the generated corpus")->capture_default_str();
  train_gmm->add_option("--max-iterations", max_iterations, "EM iteration cap")->capture_default_str();
  train_gmm->add_option("-o,--out", gmm_out, "Model file")->required();

  // synth-dataset
  auto* synth = app.add_subcommand("synth-dataset", "Render reverberant recordings from a manifest");
  std::string manifest_path, out_dir, manifest_out;
  int demo_rooms = 0, demo_per_room = 40;
  synth->add_option("--manifest", manifest_path, "Manifest CSV (speech_path,rir,room,condition,split)");
  synth->add_option("--demo-rooms", demo_rooms, "Generate a synthetic balanced manifest with this many rooms");
  synth->add_option("--per-room", demo_per_room, "Recordings per demo room")->capture_default_str();
  synth->add_option("--write-manifest", manifest_out, "Where to save the generated manifest");
  synth->add_option("--out-dir", out_dir, "Output directory")->required();

  // estimate-channel
  auto* est = app.add_subcommand("estimate-channel", "Blind channel estimate of one recording");
  std::string model_path, input_path, channel_out, filter_out, rir_out;
  est->add_option("--model", model_path, "Speech model")->required();
  est->add_option("-i,--input", input_path, "Reverberant WAV")->required();
  est->add_option("-o,--out", channel_out, "Channel CSV")->required();
  est->add_option("--filter-out", filter_out, "Also write the fitted filter CSV");
  est->add_option("--rir-out", rir_out, "Also write the estimated impulse response WAV");

  // extract-roomprint
  auto* extract = app.add_subcommand("extract-roomprint", "Roomprint from a channel estimate, an RIR or a recording");
  std::string channel_in, rir_in, roomprint_out, roomprint_csv;
  extract->add_option("--channel", channel_in, "Channel CSV from estimate-channel");
  extract->add_option("--rir", rir_in, "Impulse response WAV");
  extract->add_option("-i,--input", input_path, "Reverberant WAV (needs --model)");
  extract->add_option("--model", model_path, "Speech model");
  extract->add_option("-o,--out", roomprint_out, "Roomprint JSON")->required();
  extract->add_option("--csv", roomprint_csv, "Also write the roomprint CSV");

  // train-classifier
  auto* train_svm = app.add_subcommand("train-classifier", "Train the room classifier on a recordings index");
  std::string recordings_path, classifier_path, condition = "near";
  int folds = 5, per_decade = 1;
  train_svm->add_option("--model", model_path, "Speech model")->required();
  train_svm->add_option("--recordings", recordings_path, "recordings.csv from synth-dataset")->required();
  train_svm->add_option("--condition", condition, "near, far or mixed")->capture_default_str();
  train_svm->add_option("--folds", folds, "Cross-validation folds")->capture_default_str();
  train_svm->add_option("--grid-per-decade", per_decade, "Grid points per decade")->capture_default_str();
  train_svm->add_option("-o,--out", classifier_path, "Classifier file")->required();

  // classify
  auto* classify = app.add_subcommand("classify", "Predict the room of a recording or roomprint");
  std::string roomprint_in;
  classify->add_option("--classifier", classifier_path, "Classifier file")->required();
  classify->add_option("--roomprint", roomprint_in, "Roomprint JSON");
  classify->add_option("-i,--input", input_path, "Reverberant WAV (needs --model)");
  classify->add_option("--model", model_path, "Speech model");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Evaluate a classifier on the test split");
  std::string json_out;
  eval->add_option("--classifier", classifier_path, "Classifier file")->required();
  eval->add_option("--model", model_path, "Speech model")->required();
  eval->add_option("--recordings", recordings_path, "recordings.csv")->required();
  eval->add_option("--condition", condition, "near, far or mixed")->capture_default_str();
  eval->add_option("--json", json_out, "Write metrics JSON here");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Train and evaluate over B, alpha and condition pairs");
  std::string fractions = "3,4,8", alphas = "1,1.2,1.5,2,3", pairs = "near/near,far/far,near/far,far/near,mixed/mixed";
  sweep->add_option("--model", model_path, "Speech model")->required();
  sweep->add_option("--recordings", recordings_path, "recordings.csv")->required();
  sweep->add_option("--octave-fractions", fractions, "Comma-separated B values")->capture_default_str();
  sweep->add_option("--alphas", alphas, "Comma-separated alpha values")->capture_default_str();
  sweep->add_option("--pairs", pairs, "Comma-separated train/test conditions")->capture_default_str();
  sweep->add_option("--folds", folds, "Cross-validation folds")->capture_default_str();
  sweep->add_option("--json", json_out, "Write all rows as JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*train_gmm) {
      std::vector<rp::AudioBuffer> corpus;
      if (!corpus_list.empty()) {
        std::ifstream f(corpus_list);
        if (!f) throw rp::Error(rp::ErrorKind::kIo, "cannot open " + corpus_list);
        for (std::string line; std::getline(f, line);) {
          if (!line.empty()) corpus_files.push_back(line);
        }
      }
      for (const auto& p : corpus_files) corpus.push_back(read_at(p, common.sample_rate));
      if (synth_minutes > 0.0) {
        auto generated = synthetic_corpus(synth_minutes, synth_speakers, common.seed, common.sample_rate);
        corpus.insert(corpus.end(), generated.begin(), generated.end());
      }
      if (corpus.empty()) throw rp::Error(rp::ErrorKind::kInvalidArgument, "no training speech given");
      rp::TrainingOptions options;
      options.mixtures = common.mixtures;
      options.seed = common.seed;
      options.max_iterations = max_iterations;
      rp::TrainingReport report;
      const auto model = rp::train_speech_model(corpus, common.frame_config(), options, &report);
      rp::save_speech_model(model, gmm_out);
      std::printf("mixtures %d, iterations %d, converged %s, mean log-likelihood %.6f\n", model.mixtures(),
                  report.iterations, report.converged ? "yes" : "no",
                  report.log_likelihood.empty() ? 0.0 : report.log_likelihood.back());
      return kExitOk;
    }

    if (*synth) {
      rp::DatasetManifest manifest;
      if (demo_rooms > 0) {
        manifest = demo_manifest(demo_rooms, demo_per_room, common.seed);
        manifest.sample_rate_hz = common.sample_rate;
        if (!manifest_out.empty()) rp::write_manifest(manifest_out, manifest);
      } else if (!manifest_path.empty()) {
        manifest = rp::read_manifest(manifest_path, common.sample_rate);
      } else {
        throw rp::Error(rp::ErrorKind::kInvalidArgument, "give --manifest or --demo-rooms");
      }
      const auto report = rp::synth_dataset(manifest, out_dir);
      std::printf("%zu recordings: %zu train, %zu test\nindex: %s\n", report.recordings.size(), report.train_count,
                  report.test_count, report.index_path.string().c_str());
      return kExitOk;
    }

    if (*est) {
      const auto model = rp::load_speech_model(model_path);
      const int rate = model.frame_config.sample_rate_hz;
      const auto channel = rp::estimate_channel(read_at(input_path, rate), model);
      rp::write_channel_csv(channel_out, channel);
      if (!filter_out.empty() || !rir_out.empty()) {
        rp::DigitalFilter filter;
        const auto rir = rp::rir_from_channel(channel, common.feature_options().orders, rate, &filter);
        if (!filter_out.empty()) rp::write_filter_csv(filter_out, filter);
        if (!rir_out.empty()) rp::write_wav(rir_out, rir);
      }
      return kExitOk;
    }

    if (*extract) {
      const auto features = common.feature_options();
      rp::Roomprint roomprint;
      if (!rir_in.empty()) {
        const auto rir = read_at(rir_in, common.sample_rate);
        rp::RoomprintOptions o;
        o.alpha = features.alpha;
        o.log_transform = features.log_transform;
        roomprint = rp::compute_roomprint(rir, rp::filterbank_for(features, common.sample_rate), o);
      } else if (!channel_in.empty()) {
        roomprint = rp::roomprint_from_channel(rp::read_channel_csv(channel_in), features, common.sample_rate);
      } else if (!input_path.empty() && !model_path.empty()) {
        const auto model = rp::load_speech_model(model_path);
        roomprint = rp::extract_features(read_at(input_path, model.frame_config.sample_rate_hz), model, features).roomprint;
      } else {
        throw rp::Error(rp::ErrorKind::kInvalidArgument, "give --rir, --channel, or --input with --model");
      }
      rp::write_roomprint_json(roomprint_out, roomprint);
      if (!roomprint_csv.empty()) rp::write_roomprint_csv(roomprint_csv, roomprint);
      if (!roomprint.valid) {
        std::fprintf(stderr, "roomprint invalid: %zu bands failed the alpha ladder\n", roomprint.failed_bands.size());
        return kExitDegraded;
      }
      return kExitOk;
    }

    if (*train_svm) {
      const auto model = rp::load_speech_model(model_path);
      rp::FeatureCache cache(common.cache_dir);
      const auto train = rp::select_recordings(rp::read_recordings(recordings_path), "train", condition);
      const auto set = rp::collect_features(train, model, common.feature_options(), cache);
      rp::TrainingSummary summary;
      const auto svm = rp::train_classifier(set.roomprints, set.labels, classifier_options(common, folds, per_decade), &summary);
      rp::save_classifier(svm, classifier_path);
      std::printf("%zu roomprints, %zu classes, c = %g, gamma = %g, cv accuracy %.1f%%\n", set.roomprints.size(),
                  svm.classes.size(), svm.c, svm.gamma, summary.best.cv_accuracy);
      report_skipped(set.skipped);
      return set.skipped.empty() ? kExitOk : kExitDegraded;
    }

    if (*classify) {
      const auto svm = rp::load_classifier(classifier_path);
      rp::Roomprint roomprint;
      if (!roomprint_in.empty()) {
        roomprint = rp::read_roomprint_json(roomprint_in);
      } else if (!input_path.empty() && !model_path.empty()) {
        const auto model = rp::load_speech_model(model_path);
        auto features = common.feature_options();
        features.octave_fraction = svm.spec.octave_fraction;
        features.alpha = svm.spec.alpha;
        features.log_transform = svm.spec.log_transformed;
        roomprint = rp::extract_features(read_at(input_path, model.frame_config.sample_rate_hz), model, features).roomprint;
      } else {
        throw rp::Error(rp::ErrorKind::kInvalidArgument, "give --roomprint, or --input with --model");
      }
      std::printf("%s\n", rp::predict(svm, roomprint).c_str());
      return roomprint.valid ? kExitOk : kExitDegraded;
    }

    if (*eval) {
      const auto svm = rp::load_classifier(classifier_path);
      const auto model = rp::load_speech_model(model_path);
      auto features = common.feature_options();
      features.octave_fraction = svm.spec.octave_fraction;
      features.alpha = svm.spec.alpha;
      features.log_transform = svm.spec.log_transformed;
      rp::FeatureCache cache(common.cache_dir);
      const auto test = rp::select_recordings(rp::read_recordings(recordings_path), "test", condition);
      const auto set = rp::collect_features(test, model, features, cache);
      if (set.roomprints.empty()) throw rp::Error(rp::ErrorKind::kInsufficientData, "every test recording was skipped");
      const auto metrics = rp::evaluate(svm, set.roomprints, set.labels);
      std::printf("%s", rp::format_metrics_table({{condition, metrics}}).c_str());
      if (!json_out.empty()) {
        std::ofstream f(json_out);
        f << rp::metrics_to_json(metrics) << "\n";
      }
      report_skipped(set.skipped);
      return set.skipped.empty() ? kExitOk : kExitDegraded;
    }

    if (*sweep) {
      const auto model = rp::load_speech_model(model_path);
      const auto recordings = rp::read_recordings(recordings_path);
      rp::FeatureCache cache(common.cache_dir);
      std::vector<std::pair<std::string, rp::Metrics>> rows;
      nlohmann::json all = nlohmann::json::array();
      bool degraded = false;
      for (const auto& b : split_list(fractions)) {
        for (const auto& a : split_list(alphas)) {
          for (const auto& pair : split_list(pairs)) {
            const auto slash = pair.find('/');
            if (slash == std::string::npos) throw rp::Error(rp::ErrorKind::kInvalidArgument, "pair must be train/test: " + pair);
            rp::ExperimentConfig config;
            config.features = common.feature_options();
            config.features.octave_fraction = std::stoi(b);
            config.features.alpha = std::stod(a);
            config.classifier = classifier_options(common, folds, 1);
            config.train_condition = pair.substr(0, slash);
            config.test_condition = pair.substr(slash + 1);
            const auto result = rp::run_experiment(config, recordings, model, cache);
            const std::string name = "B=" + b + " alpha=" + a + " " + pair;
            rows.emplace_back(name, result.metrics);
            auto j = nlohmann::json::parse(rp::metrics_to_json(result.metrics));
            j["octave_fraction"] = config.features.octave_fraction;
            j["alpha"] = config.features.alpha;
            j["train_condition"] = config.train_condition;
            j["test_condition"] = config.test_condition;
            j["skipped"] = result.skipped.size();
            all.push_back(std::move(j));
            report_skipped(result.skipped);
            degraded = degraded || !result.skipped.empty();
          }
        }
      }
      std::printf("%s", rp::format_metrics_table(rows).c_str());
      if (!json_out.empty()) {
        std::ofstream f(json_out);
        f << all.dump(2) << "\n";
      }
      return degraded ? kExitDegraded : kExitOk;
    }
  } catch (const rp::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  }
  return kExitOk;
}
