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
#include <span>
#include <string>
#include <vector>

#include "roomprint/features.hpp"
#include "roomprint/roomprint.hpp"

namespace roomprint {

// Per-feature z-score fitted on the training set. A feature with zero
// spread keeps std = 1 so it maps to a constant.
struct Scaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  Eigen::VectorXd apply(std::span<const double> x) const;
  RowMatrix apply(const RowMatrix& x) const;
  static Scaler fit(const RowMatrix& x);
};

// One binary RBF machine of the one-vs-one ensemble. Positive decision
// values vote for `first`.
struct PairMachine {
  int first = 0;
  int second = 0;
  std::vector<int> support;          // rows of SvmModel::support_vectors
  std::vector<double> coefficients;  // y_i alpha_i, |value| <= c
  double bias = 0.0;                 // f(x) = sum coef K(sv, x) + bias
};

// Roomprint configuration the model was trained on.
struct FeatureSpec {
  int length = 0;
  int octave_fraction = 0;
  double alpha = 0.0;
  bool log_transformed = false;

  bool operator==(const FeatureSpec&) const = default;
};

struct SvmModel {
  std::vector<std::string> classes;
  RowMatrix support_vectors;  // standardized
  std::vector<PairMachine> machines;
  double gamma = 0.0;
  double c = 0.0;
  Scaler scaler;
  FeatureSpec spec;
};

// Grid of 10^lo .. 10^hi with `per_decade` points per decade.
std::vector<double> log_grid(int lo_exponent, int hi_exponent, int per_decade = 1);

struct ClassifierOptions {
  std::vector<double> grid_c = log_grid(-4, 3);
  std::vector<double> grid_gamma = log_grid(-4, 3);
  int folds = 5;
  std::uint64_t seed = 1;
  double tolerance = 1e-3;  // SMO stopping gap on the KKT violation
};

struct GridCell {
  double c = 0.0;
  double gamma = 0.0;
  double cv_accuracy = 0.0;  // percent
};

struct TrainingSummary {
  std::vector<GridCell> grid;  // c-major, ascending
  GridCell best;
  double max_kkt_residual = 0.0;  // over every SMO run, CV included
  bool all_converged = true;
};

// Result of one binary SMO solve, exposed for tests.
struct SmoResult {
  std::vector<double> alpha;
  double bias = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Dual soft-margin SVM on a precomputed kernel (row-major n x n) with labels
// +1/-1, solved by SMO with second-order working-set selection.
SmoResult solve_smo(const RowMatrix& kernel, std::span<const int> y, double c, double tolerance,
                    long max_iterations = 10'000'000);

// Stratified k-fold assignment: fold id per sample, shuffled within each class.
std::vector<int> stratified_folds(std::span<const int> class_index, int folds, std::uint64_t seed);

// Grid-searched RBF SVM. Throws kInsufficientClassSupport when a class has
// fewer than `folds` samples or fewer than two classes exist, and
// kFeatureMismatch when roomprints disagree on length, B, alpha or log flag.
SvmModel train_classifier(const std::vector<Roomprint>& features, const std::vector<std::string>& labels,
                          const ClassifierOptions& options = {}, TrainingSummary* summary = nullptr);
SvmModel train_classifier(const RowMatrix& features, const std::vector<std::string>& labels, const FeatureSpec& spec,
                          const ClassifierOptions& options = {}, TrainingSummary* summary = nullptr);

struct Prediction {
  int class_index = 0;
  std::vector<int> votes;        // per class
  std::vector<double> margins;   // per class, summed decision values in its favour
};

Prediction predict_detail(const SvmModel& model, std::span<const double> feature);
std::string predict(const SvmModel& model, const Roomprint& feature);
std::string predict(const SvmModel& model, std::span<const double> feature);

struct Metrics {
  std::vector<std::string> classes;
  double precision = 0.0;  // macro, percent
  double recall = 0.0;     // macro, percent
  double accuracy = 0.0;   // percent
  std::vector<std::vector<long>> confusion;  // [true][predicted]
};

Metrics compute_metrics(const std::vector<std::string>& classes, std::span<const int> truth,
                        std::span<const int> predicted);
Metrics evaluate(const SvmModel& model, const std::vector<Roomprint>& features, const std::vector<std::string>& labels);
Metrics evaluate(const SvmModel& model, const RowMatrix& features, const std::vector<std::string>& labels);

// Aligned text table ("Precision  Recall  Accuracy", one decimal) and JSON.
std::string format_metrics_table(const std::vector<std::pair<std::string, Metrics>>& rows);
std::string metrics_to_json(const Metrics& metrics);

inline constexpr const char* kClassifierMagic = "RPLSVM1";

void save_classifier(const SvmModel& model, const std::filesystem::path& path);
SvmModel load_classifier(const std::filesystem::path& path);

}  // namespace roomprint
