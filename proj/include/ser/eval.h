// include/ser/eval.h

// Copyright 2026  The SER Engine Authors

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

// Accuracy metrics, confusion matrices and fold aggregation.
//
// WA (weighted accuracy) is the overall fraction correct; UA (unweighted
// accuracy) is the macro average of per-class recall over the classes present
// in the reference labels. Fold spread is the sample (n-1) standard deviation.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace ser {

double weighted_accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels);
double unweighted_accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels);
double weighted_accuracy(std::span<const std::string> preds, std::span<const std::string> labels);
double unweighted_accuracy(std::span<const std::string> preds, std::span<const std::string> labels);

struct ConfusionMatrix {
  std::vector<std::string> labels;
  /// counts[true][predicted].
  std::vector<std::vector<std::size_t>> counts;
  /// 100 * counts / row total; rows without samples are all zero.
  std::vector<std::vector<double>> row_percent;
  std::vector<bool> empty_rows;

  std::size_t total() const;
  std::size_t correct() const;

  nlohmann::json to_json() const;
  static ConfusionMatrix from_json(const nlohmann::json& j);
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                          std::vector<std::string> label_order);
ConfusionMatrix confusion(std::span<const std::string> preds, std::span<const std::string> labels,
                          std::vector<std::string> label_order);

/// Element-wise sum of matrices over the same label order.
ConfusionMatrix pool(std::span<const ConfusionMatrix> matrices);

struct FoldResult {
  std::size_t fold = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  double wa = 0.0;
  double ua = 0.0;
  ConfusionMatrix confusion;

  bool operator==(const FoldResult&) const = default;
};

struct RunMetadata {
  std::string dataset;
  std::string checkpoint_id;
  std::string checkpoint_hash;
  std::string split_mode;
  std::uint64_t seed = 0;
  std::string config_hash;
  nlohmann::json config = nlohmann::json::object();

  bool operator==(const RunMetadata&) const = default;
};

struct EvalReport {
  RunMetadata meta;
  std::vector<FoldResult> folds;
  double wa_mean = 0.0;
  double ua_mean = 0.0;
  /// Present only with two or more folds.
  std::optional<double> wa_std;
  std::optional<double> ua_std;
  ConfusionMatrix pooled;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  /// Human-readable tables: summary, per-fold metrics, pooled and per-fold
  /// row-percent confusion matrices.
  std::string render_markdown() const;
  /// e.g. "WA 92.00 ± 2.00 | UA 91.50 ± 1.75".
  std::string summary() const;

  bool operator==(const EvalReport&) const = default;
};

/// Mean and sample standard deviation of WA/UA over folds; all folds must
/// share one label order.
EvalReport aggregate(std::vector<FoldResult> folds, RunMetadata meta);

/// Fraction -> percentage with two decimals ("91.67").
std::string format_percent(double fraction);

/// Result file stem embedding dataset, checkpoint, split mode and seed.
std::string report_stem(const RunMetadata& meta);

}  // namespace ser
