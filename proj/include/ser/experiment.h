// include/ser/experiment.h

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

// End-to-end evaluation over pooled embeddings: partition, train a head per
// fold, score the held-out part and aggregate.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ser/classifier_head.h"
#include "ser/eval.h"

namespace ser {

enum class SplitMode { kHoldout, kKFold, kRepeated };

SplitMode parse_split_mode(const std::string& name);
std::string to_string(SplitMode mode);

struct EvalConfig {
  SplitMode split_mode = SplitMode::kKFold;
  std::size_t folds = 5;       // k for k-fold, repeat count for repeated holdout
  double test_ratio = 0.2;     // holdout and repeated modes
  std::uint64_t seed = 0;
  bool speaker_disjoint = false;
  /// Fraction of each training part held out for early stopping; 0 disables.
  double validation_ratio = 0.1;
  std::size_t jobs = 1;        // folds trained concurrently
  TrainConfig train;

  /// Everything that affects results (jobs excluded).
  nlohmann::json to_json() const;
};

struct EmbeddingSet {
  std::vector<LabeledEmbedding> items;
  std::vector<std::string> speakers;  // parallel to items; may be empty
  std::vector<std::string> label_names;
};

/// Trains a head on `indices`, carving a stratified validation part for early
/// stopping when every class has at least two examples. `stream` decorrelates
/// the seeds used by different folds.
TrainResult fit_head(const EmbeddingSet& data, std::span<const std::size_t> indices,
                     const EvalConfig& config, std::size_t stream);

/// Runs the configured protocol. `meta` supplies dataset and checkpoint
/// provenance plus any extra config keys; split mode, seed, config and config
/// hash are filled in here.
EvalReport run_evaluation(const EmbeddingSet& data, const EvalConfig& config, RunMetadata meta);

/// Two Gaussian clusters in `dim` dimensions, `per_class` points each, centred
/// at +separation/2 and -separation/2 along every axis with unit variance.
EmbeddingSet synthetic_clusters(std::size_t dim, std::size_t per_class, double separation,
                                std::uint64_t seed);

}  // namespace ser
