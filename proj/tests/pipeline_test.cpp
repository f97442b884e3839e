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

#include <algorithm>
#include <fstream>
#include <map>

#include "roomprint/error.hpp"
#include "roomprint/pipeline.hpp"
#include "roomprint/synth.hpp"
#include "test_support.hpp"

using namespace roomprint;

namespace {

ErrorKind kind_of(auto fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kIo;
}

BalancedManifestOptions three_rooms(int per_room) {
  BalancedManifestOptions o;
  o.room_names = {"A", "B", "C"};
  o.near_rirs = {"synth:0.25:seed=1", "synth:0.6:seed=2", "synth:1.2/0.4:seed=3"};
  o.far_rirs = {"synth:0.25:seed=4:direct=0.2", "synth:0.6:seed=5:direct=0.2", "synth:1.2/0.4:seed=6:direct=0.2"};
  o.per_room = per_room;
  o.utterance_s = 3.0;
  return o;
}

DatasetManifest tiny_manifest() {
  DatasetManifest m;
  m.entries = {{"s1", "r1", "A", "near", "train"},
               {"s2", "r2", "B", "near", "train"},
               {"s3", "r1", "A", "near", "test"},
               {"s4", "r2", "B", "near", "test"}};
  return m;
}

}  // namespace

TEST_CASE("manifest validation") {
  CHECK_NOTHROW(validate_manifest(tiny_manifest()));
  SUBCASE("empty") { CHECK(kind_of([] { validate_manifest(DatasetManifest{}); }) == ErrorKind::kManifestInvalid); }
  SUBCASE("bad condition") {
    auto m = tiny_manifest();
    m.entries[1].condition = "middle";
    CHECK(kind_of([&] { validate_manifest(m); }) == ErrorKind::kManifestInvalid);
  }
  SUBCASE("bad split") {
    auto m = tiny_manifest();
    m.entries[1].split = "dev";
    CHECK(kind_of([&] { validate_manifest(m); }) == ErrorKind::kManifestInvalid);
  }
  SUBCASE("speech in both splits") {
    auto m = tiny_manifest();
    m.entries[2].speech_path = "s1";
    try {
      validate_manifest(m);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kManifestInvalid);
      CHECK(std::string(e.what()).find("s1") != std::string::npos);
    }
  }
  SUBCASE("speech paired with two rooms") {
    auto m = tiny_manifest();
    m.entries.push_back({"s1", "r2", "B", "far", "train"});
    m.entries.push_back({"s5", "r2", "A", "far", "train"});
    CHECK(kind_of([&] { validate_manifest(m); }) == ErrorKind::kManifestInvalid);
  }
  SUBCASE("unbalanced rooms") {
    auto m = tiny_manifest();
    m.entries.push_back({"s5", "r1", "A", "near", "train"});
    CHECK(kind_of([&] { validate_manifest(m); }) == ErrorKind::kManifestInvalid);
  }
}

TEST_CASE("manifest CSV round trip") {
  test::TempDir dir;
  const auto m = build_balanced_manifest(three_rooms(4));
  write_manifest(dir / "m.csv", m);
  const auto back = read_manifest(dir / "m.csv");
  REQUIRE(back.entries.size() == m.entries.size());
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    CHECK(back.entries[i].speech_path == m.entries[i].speech_path);
    CHECK(back.entries[i].rir == m.entries[i].rir);
    CHECK(back.entries[i].room == m.entries[i].room);
    CHECK(back.entries[i].condition == m.entries[i].condition);
    CHECK(back.entries[i].split == m.entries[i].split);
  }
  CHECK(back.base_dir == dir.path());

  std::ofstream(dir / "bad.csv") << "speech,rir\n";
  CHECK(kind_of([&] { read_manifest(dir / "bad.csv"); }) == ErrorKind::kManifestInvalid);
  std::ofstream(dir / "short.csv") << kManifestHeader << "\na,b,c\n";
  CHECK(kind_of([&] { read_manifest(dir / "short.csv"); }) == ErrorKind::kManifestInvalid);
}

TEST_CASE("balanced manifest of 7 rooms and 200 utterances splits 1120/280") {
  BalancedManifestOptions o;
  for (int r = 1; r <= 7; ++r) {
    o.room_names.push_back("R" + std::to_string(r));
    o.near_rirs.push_back("synth:0." + std::to_string(r + 1));
  }
  o.per_room = 200;
  const auto m = build_balanced_manifest(o);
  validate_manifest(m);
  std::map<std::string, int> train, test;
  for (const auto& e : m.entries) (e.split == "train" ? train : test)[e.room]++;
  int n_train = 0, n_test = 0;
  for (const auto& [room, n] : train) {
    CHECK(n == 160);
    n_train += n;
  }
  for (const auto& [room, n] : test) {
    CHECK(n == 40);
    n_test += n;
  }
  CHECK(n_train == 1120);
  CHECK(n_test == 280);

  BalancedManifestOptions bad = o;
  bad.near_rirs.pop_back();
  CHECK(kind_of([&] { build_balanced_manifest(bad); }) == ErrorKind::kInvalidArgument);
  bad = o;
  bad.train_fraction = 1.0;
  CHECK(kind_of([&] { build_balanced_manifest(bad); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("condition selection") {
  CHECK(condition_matches("near", "near"));
  CHECK_FALSE(condition_matches("near", "far"));
  CHECK(condition_matches("mixed", "near"));
  CHECK(condition_matches("mixed", "far"));
  CHECK(kind_of([] { condition_matches("both", "near"); }) == ErrorKind::kInvalidArgument);
  const std::vector<Recording> all{{"a", "A", "near", "train", "s1"}, {"b", "A", "far", "train", "s2"},
                                   {"c", "A", "near", "test", "s3"}, {"d", "A", "far", "test", "s4"}};
  CHECK(select_recordings(all, "train", "near").size() == 1);
  CHECK(select_recordings(all, "train", "mixed").size() == 2);
  CHECK(select_recordings(all, "test", "far").front().path == "d");
}

TEST_CASE("synth_dataset rejects an invalid manifest before writing") {
  test::TempDir dir;
  auto m = tiny_manifest();
  m.entries[3].room = "A";
  CHECK(kind_of([&] { synth_dataset(m, dir / "out"); }) == ErrorKind::kManifestInvalid);
  CHECK_FALSE(std::filesystem::exists(dir / "out"));
}

TEST_CASE("synthetic dataset and experiment") {
  test::TempDir dir;
  const auto manifest = build_balanced_manifest(three_rooms(10));
  const auto report = synth_dataset(manifest, dir / "data");
  CHECK(report.recordings.size() == 60);
  CHECK(report.train_count == 48);
  CHECK(report.test_count == 12);
  for (const auto& r : report.recordings) CHECK(std::filesystem::exists(r.path));
  const auto index = read_recordings(report.index_path);
  REQUIRE(index.size() == report.recordings.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    CHECK(std::filesystem::equivalent(index[i].path, report.recordings[i].path));
    CHECK(index[i].room == report.recordings[i].room);
  }
  const auto first = read_audio(report.recordings.front().path);
  const auto speech = load_speech(manifest.entries.front().speech_path, {}, 16000);
  const auto rir = load_rir(manifest.entries.front().rir, {}, 16000);
  CHECK(first.size() == speech.size() + rir.size() - 1);

  const auto& model = test::small_model();
  ExperimentConfig config;
  config.classifier.grid_c = log_grid(-1, 2);
  config.classifier.grid_gamma = log_grid(-2, 1);
  config.classifier.folds = 4;
  config.cache_dir = dir / "cache";

  const auto a = run_experiment(config, report.recordings, model);
  CHECK(a.train_count + a.skipped.size() <= 24 + 6);
  CHECK(a.metrics.accuracy >= 0.0);
  CHECK(a.metrics.accuracy <= 100.0);
  CHECK(a.metrics.classes.size() == 3);
  CHECK(std::filesystem::exists(dir / "cache"));

  SUBCASE("cached rerun is identical") {
    const auto b = run_experiment(config, report.recordings, model);
    CHECK(b.metrics.confusion == a.metrics.confusion);
    CHECK(b.training.best.c == a.training.best.c);
    CHECK(b.training.best.gamma == a.training.best.gamma);
  }
  SUBCASE("uncached run agrees with the cache") {
    ExperimentConfig fresh = config;
    fresh.cache_dir.clear();
    const auto b = run_experiment(fresh, report.recordings, model);
    CHECK(b.metrics.confusion == a.metrics.confusion);
  }
  SUBCASE("mixed training merges both conditions") {
    ExperimentConfig mixed = config;
    mixed.train_condition = "mixed";
    const auto b = run_experiment(mixed, report.recordings, model);
    CHECK(b.train_count + b.skipped.size() >= 48);
  }
  SUBCASE("an empty selection is insufficient") {
    std::vector<Recording> only_train;
    for (const auto& r : report.recordings)
      if (r.split == "train") only_train.push_back(r);
    CHECK(kind_of([&] { run_experiment(config, only_train, model); }) == ErrorKind::kInsufficientData);
  }
  SUBCASE("roomprints from a channel match the direct path") {
    const auto rec = read_audio(report.recordings[5].path);
    const auto direct = extract_features(rec, model, config.features);
    const auto via = roomprint_from_channel(direct.channel, config.features, 16000);
    CHECK(via.rt60_s == direct.roomprint.rt60_s);
  }
}
