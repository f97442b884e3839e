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
#include <numeric>
#include <random>

#include "roomprint/classifier.hpp"
#include "roomprint/error.hpp"
#include "test_support.hpp"

using namespace roomprint;

namespace {

struct Blobs {
  RowMatrix x;
  std::vector<std::string> labels;
};

// Gaussian blobs with unit spread centred `separation` apart along a diagonal.
Blobs blobs(int classes, int per_class, double separation, int dims, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Blobs b;
  b.x.resize(classes * per_class, dims);
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      const long row = c * per_class + i;
      for (int d = 0; d < dims; ++d) b.x(row, d) = n(gen) + (d == c % dims ? separation * (1 + c / dims) : 0.0);
      b.labels.push_back("class" + std::to_string(c));
    }
  }
  return b;
}

FeatureSpec spec_for(int dims) { return FeatureSpec{dims, 4, 1.5, false}; }

ClassifierOptions small_grid() {
  ClassifierOptions o;
  o.grid_c = log_grid(-1, 2);
  o.grid_gamma = log_grid(-2, 1);
  o.folds = 3;
  return o;
}

double decision(const SvmModel& m, const PairMachine& pm, std::span<const double> x) {
  const Eigen::VectorXd z = m.scaler.apply(x);
  double f = pm.bias;
  for (std::size_t i = 0; i < pm.support.size(); ++i) {
    const Eigen::RowVectorXd sv = m.support_vectors.row(pm.support[i]);
    f += pm.coefficients[i] * std::exp(-m.gamma * (sv.transpose() - z).squaredNorm());
  }
  return f;
}

std::vector<double> row_of(const RowMatrix& x, long r) {
  return std::vector<double>(x.row(r).data(), x.row(r).data() + x.cols());
}

}  // namespace

TEST_CASE("default grid has 64 cells over 1e-4 .. 1e3") {
  const auto g = log_grid(-4, 3);
  REQUIRE(g.size() == 8);
  CHECK(g.front() == doctest::Approx(1e-4));
  CHECK(g.back() == doctest::Approx(1e3));
  CHECK(log_grid(-4, 3, 2).size() == 15);

  const auto b = blobs(2, 15, 10.0, 2, 1);
  TrainingSummary s;
  train_classifier(b.x, b.labels, spec_for(2), ClassifierOptions{}, &s);
  CHECK(s.grid.size() == 64);
  CHECK(s.max_kkt_residual < 1e-3);
  CHECK(s.all_converged);
}

TEST_CASE("well separated blobs are classified perfectly") {
  const auto b = blobs(2, 30, 10.0, 3, 2);
  TrainingSummary s;
  const auto m = train_classifier(b.x, b.labels, spec_for(3), small_grid(), &s);
  CHECK(s.best.cv_accuracy == 100.0);
  CHECK(evaluate(m, b.x, b.labels).accuracy == 100.0);
}

TEST_CASE("grid ties prefer smaller c then smaller gamma") {
  const auto b = blobs(2, 30, 10.0, 3, 2);
  TrainingSummary s;
  train_classifier(b.x, b.labels, spec_for(3), small_grid(), &s);
  for (const auto& cell : s.grid) {
    if (cell.cv_accuracy < s.best.cv_accuracy) continue;
    const bool earlier = cell.c < s.best.c || (cell.c == s.best.c && cell.gamma < s.best.gamma);
    CHECK_FALSE(earlier);
  }
}

TEST_CASE("class support and feature checks") {
  RowMatrix x(2, 2);
  x << 0.0, 1.0, 5.0, 6.0;
  auto o = small_grid();
  o.folds = 2;
  try {
    train_classifier(x, {"a", "b"}, spec_for(2), o);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInsufficientClassSupport);
  }
  RowMatrix one(4, 2);
  one << 0, 1, 1, 0, 2, 2, 1, 1;
  CHECK_THROWS_AS(train_classifier(one, {"a", "a", "a", "a"}, spec_for(2), o), Error);

  std::vector<Roomprint> rps(4);
  for (auto& r : rps) {
    r.rt60_s = {0.5, 0.6};
    r.octave_fraction = 4;
  }
  rps[3].alpha = 2.0;
  try {
    train_classifier(rps, {"a", "a", "b", "b"}, o);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kFeatureMismatch);
  }

  const auto b = blobs(2, 10, 10.0, 2, 3);
  const auto m = train_classifier(b.x, b.labels, spec_for(2), small_grid());
  const std::vector<double> wrong{1.0, 2.0, 3.0};
  try {
    predict(m, wrong);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kFeatureMismatch);
  }
}

TEST_CASE("two classes follow the sign of the decision function") {
  const auto b = blobs(2, 20, 3.0, 2, 4);
  const auto m = train_classifier(b.x, b.labels, spec_for(2), small_grid());
  REQUIRE(m.machines.size() == 1);
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(-3.0, 6.0);
  for (int i = 0; i < 100; ++i) {
    const std::vector<double> x{u(gen), u(gen)};
    const double f = decision(m, m.machines[0], x);
    const auto label = predict(m, x);
    CHECK(label == m.classes[static_cast<std::size_t>(f > 0 ? m.machines[0].first : m.machines[0].second)]);
  }
}

TEST_CASE("training points deep in their region keep their label") {
  const auto b = blobs(4, 15, 12.0, 4, 5);
  const auto m = train_classifier(b.x, b.labels, spec_for(4), small_grid());
  for (int c = 0; c < 4; ++c) {
    std::vector<double> centre(4, 0.0);
    centre[static_cast<std::size_t>(c)] = 12.0;
    CHECK(predict(m, centre) == "class" + std::to_string(c));
  }
}

TEST_CASE("symmetric tie is broken deterministically") {
  // Three classes on an equilateral triangle; the centroid ties every vote.
  RowMatrix x(30, 2);
  std::vector<std::string> labels;
  std::mt19937_64 gen(6);
  std::normal_distribution<double> n(0.0, 0.2);
  for (int c = 0; c < 3; ++c) {
    const double a = 2.0 * std::numbers::pi * c / 3.0;
    for (int i = 0; i < 10; ++i) {
      x(c * 10 + i, 0) = 5.0 * std::cos(a) + n(gen);
      x(c * 10 + i, 1) = 5.0 * std::sin(a) + n(gen);
      labels.push_back(std::string(1, static_cast<char>('a' + c)));
    }
  }
  const auto m1 = train_classifier(x, labels, spec_for(2), small_grid());
  const auto m2 = train_classifier(x, labels, spec_for(2), small_grid());
  const std::vector<double> centre{x.col(0).mean(), x.col(1).mean()};
  const auto p1 = predict_detail(m1, centre);
  const auto p2 = predict_detail(m2, centre);
  CHECK(p1.class_index == p2.class_index);
  CHECK(p1.votes == p2.votes);
  CHECK(p1.margins == p2.margins);
  for (int i = 0; i < 5; ++i) CHECK(predict_detail(m1, centre).class_index == p1.class_index);
  const int top = *std::max_element(p1.votes.begin(), p1.votes.end());
  CHECK(p1.votes[static_cast<std::size_t>(p1.class_index)] == top);
}

TEST_CASE("grid search is deterministic") {
  const auto b = blobs(3, 20, 2.0, 3, 7);
  TrainingSummary s1, s2;
  const auto m1 = train_classifier(b.x, b.labels, spec_for(3), small_grid(), &s1);
  const auto m2 = train_classifier(b.x, b.labels, spec_for(3), small_grid(), &s2);
  CHECK(m1.c == m2.c);
  CHECK(m1.gamma == m2.gamma);
  for (std::size_t i = 0; i < s1.grid.size(); ++i) CHECK(s1.grid[i].cv_accuracy == s2.grid[i].cv_accuracy);
}

TEST_CASE("predictions are invariant to a per-feature affine map") {
  const auto b = blobs(3, 20, 2.5, 3, 9);
  const auto probe = blobs(3, 10, 2.5, 3, 10);
  const std::vector<double> scale{3.0, -0.5, 250.0}, shift{-7.0, 1.0, 1e3};
  auto warp = [&](RowMatrix x) {
    for (long r = 0; r < x.rows(); ++r) {
      for (long d = 0; d < 3; ++d) x(r, d) = scale[static_cast<std::size_t>(d)] * x(r, d) + shift[static_cast<std::size_t>(d)];
    }
    return x;
  };
  const auto m1 = train_classifier(b.x, b.labels, spec_for(3), small_grid());
  const auto m2 = train_classifier(warp(b.x), b.labels, spec_for(3), small_grid());
  CHECK(m1.c == m2.c);
  CHECK(m1.gamma == m2.gamma);
  const RowMatrix warped = warp(probe.x);
  for (long r = 0; r < probe.x.rows(); ++r) CHECK(predict(m1, row_of(probe.x, r)) == predict(m2, row_of(warped, r)));
}

TEST_CASE("dual coefficients respect the box constraint") {
  const auto b = blobs(3, 20, 1.5, 2, 11);
  const auto m = train_classifier(b.x, b.labels, spec_for(2), small_grid());
  for (const auto& pm : m.machines) {
    for (double a : pm.coefficients) CHECK(std::abs(a) <= m.c * (1 + 1e-12));
  }
  for (long d = 0; d < m.scaler.std.size(); ++d) CHECK(m.scaler.std(d) > 0.0);
}

TEST_CASE("classifier persistence round trip") {
  const auto b = blobs(3, 20, 2.0, 4, 12);
  const auto m = train_classifier(b.x, b.labels, spec_for(4), small_grid());
  test::TempDir dir;
  save_classifier(m, dir / "m.svm");
  const auto back = load_classifier(dir / "m.svm");
  CHECK(back.classes == m.classes);
  CHECK(back.spec == m.spec);
  CHECK(back.c == m.c);
  CHECK(back.gamma == m.gamma);
  const auto probe = blobs(3, 15, 2.0, 4, 13);
  for (long r = 0; r < probe.x.rows(); ++r) {
    const auto a = predict_detail(m, row_of(probe.x, r));
    const auto c = predict_detail(back, row_of(probe.x, r));
    CHECK(a.class_index == c.class_index);
    CHECK(a.margins == c.margins);
  }
}

TEST_CASE("SMO solution satisfies the dual constraints") {
  const auto b = blobs(2, 25, 1.0, 2, 14);
  const long n = b.x.rows();
  RowMatrix k(n, n);
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < n; ++j) k(i, j) = std::exp(-0.5 * (b.x.row(i) - b.x.row(j)).squaredNorm());
  }
  std::vector<int> y;
  for (const auto& l : b.labels) y.push_back(l == "class0" ? 1 : -1);
  const auto r = solve_smo(k, y, 1.0, 1e-3);
  CHECK(r.converged);
  CHECK(r.kkt_residual < 1e-3);
  double balance = 0.0;
  for (long i = 0; i < n; ++i) {
    CHECK(r.alpha[static_cast<std::size_t>(i)] >= 0.0);
    CHECK(r.alpha[static_cast<std::size_t>(i)] <= 1.0 + 1e-12);
    balance += y[static_cast<std::size_t>(i)] * r.alpha[static_cast<std::size_t>(i)];
  }
  CHECK(std::abs(balance) < 1e-9);
}

TEST_CASE("stratified folds balance every class") {
  std::vector<int> cls;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 10 + c; ++i) cls.push_back(c);
  }
  const auto f = stratified_folds(cls, 5, 1);
  REQUIRE(f.size() == cls.size());
  for (int c = 0; c < 3; ++c) {
    std::vector<int> counts(5, 0);
    for (std::size_t i = 0; i < cls.size(); ++i) {
      if (cls[i] == c) ++counts[static_cast<std::size_t>(f[i])];
    }
    CHECK(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()) <= 1);
  }
  CHECK(stratified_folds(cls, 5, 1) == f);
}

TEST_CASE("metrics") {
  const std::vector<std::string> classes{"a", "b", "c", "d", "e", "f", "g"};
  std::vector<int> truth;
  for (int c = 0; c < 7; ++c) {
    for (int i = 0; i < 40; ++i) truth.push_back(c);
  }

  SUBCASE("perfect predictor") {
    const auto m = compute_metrics(classes, truth, truth);
    CHECK(m.precision == 100.0);
    CHECK(m.recall == 100.0);
    CHECK(m.accuracy == 100.0);
  }
  SUBCASE("constant predictor on a balanced seven-class set") {
    const std::vector<int> pred(truth.size(), 2);
    const auto m = compute_metrics(classes, truth, pred);
    CHECK(m.accuracy == doctest::Approx(100.0 / 7.0));
    CHECK(m.recall == doctest::Approx(100.0 / 7.0));
    CHECK(m.precision == doctest::Approx(100.0 / 49.0));
    for (std::size_t c = 0; c < 7; ++c) CHECK(std::accumulate(m.confusion[c].begin(), m.confusion[c].end(), 0L) == 40);
    const auto table = format_metrics_table({{"near/near", m}});
    CHECK(table.find("14.3") != std::string::npos);
    CHECK(table.find("Precision") != std::string::npos);
  }
  SUBCASE("JSON carries the confusion matrix") {
    const auto m = compute_metrics(classes, truth, truth);
    const auto j = metrics_to_json(m);
    CHECK(j.find("\"confusion\"") != std::string::npos);
    CHECK(j.find("\"accuracy\": 100.0") != std::string::npos);
  }
}

TEST_CASE("roomprint features train and predict") {
  std::vector<Roomprint> rps;
  std::vector<std::string> labels;
  std::mt19937_64 gen(15);
  std::normal_distribution<double> n(0.0, 0.02);
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < 12; ++i) {
      Roomprint r;
      r.octave_fraction = 3;
      r.rt60_s = {0.3 + 0.4 * c + n(gen), 0.5 + n(gen), 0.7 - 0.3 * c + n(gen)};
      rps.push_back(r);
      labels.push_back(c == 0 ? "dry" : "live");
    }
  }
  const auto m = train_classifier(rps, labels, small_grid());
  CHECK(m.spec.length == 3);
  CHECK(m.spec.octave_fraction == 3);
  CHECK(evaluate(m, rps, labels).accuracy == 100.0);
  Roomprint other = rps[0];
  other.octave_fraction = 4;
  CHECK_THROWS_AS(predict(m, other), Error);
}
