// src/experiment.cc

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

#include "ser/experiment.h"

#include <algorithm>
#include <future>

#include "ser/datasets.h"
#include "ser/error.h"
#include "ser/hash.h"
#include "ser/random.h"

namespace ser {

SplitMode parse_split_mode(const std::string& name) {
  if (name == "holdout") return SplitMode::kHoldout;
  if (name == "kfold") return SplitMode::kKFold;
  if (name == "repeated") return SplitMode::kRepeated;
  throw ConfigError("unknown split mode '" + name + "' (expected holdout, kfold or repeated)");
}

std::string to_string(SplitMode mode) {
  switch (mode) {
    case SplitMode::kHoldout: return "holdout";
    case SplitMode::kKFold: return "kfold";
    case SplitMode::kRepeated: return "repeated";
  }
  return "unknown";
}

nlohmann::json EvalConfig::to_json() const {
  return {{"split_mode", to_string(split_mode)},
          {"folds", folds},
          {"test_ratio", test_ratio},
          {"seed", seed},
          {"speaker_disjoint", speaker_disjoint},
          {"validation_ratio", validation_ratio},
          {"train", train.to_json()}};
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream * 1000003ull + index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::vector<Split> make_splits(const EmbeddingSet& data, const EvalConfig& config,
                               const std::vector<std::size_t>& labels) {
  if (config.speaker_disjoint) {
    if (data.speakers.size() != data.items.size())
      throw ConfigError("speaker-disjoint evaluation needs a speaker for every utterance");
    switch (config.split_mode) {
      case SplitMode::kKFold: return speaker_kfold(data.speakers, config.folds, config.seed);
      case SplitMode::kHoldout: return {speaker_holdout(data.speakers, config.test_ratio, config.seed)};
      case SplitMode::kRepeated: {
        std::vector<Split> out;
        for (std::size_t r = 0; r < config.folds; ++r)
          out.push_back(speaker_holdout(data.speakers, config.test_ratio, config.seed + r));
        return out;
      }
    }
  }
  switch (config.split_mode) {
    case SplitMode::kKFold: return kfold(labels, config.folds, config.seed);
    case SplitMode::kHoldout: return {stratified_split(labels, config.test_ratio, config.seed)};
    case SplitMode::kRepeated: return repeated_splits(labels, config.test_ratio, config.folds, config.seed);
  }
  throw ConfigError("unknown split mode");
}

}  // namespace

TrainResult fit_head(const EmbeddingSet& data, std::span<const std::size_t> indices,
                     const EvalConfig& config, std::size_t stream) {
  std::vector<LabeledEmbedding> train, validation;
  std::vector<std::size_t> train_labels;
  for (auto i : indices) train_labels.push_back(data.items[i].label);

  bool use_validation = config.validation_ratio > 0.0;
  if (use_validation) {
    std::vector<std::size_t> per_class(data.label_names.size(), 0);
    for (auto l : train_labels) ++per_class[l];
    use_validation = std::all_of(per_class.begin(), per_class.end(), [](std::size_t n) { return n >= 2; });
  }
  if (use_validation) {
    const auto inner = stratified_split(train_labels, config.validation_ratio, derive_seed(config.seed, 1, stream));
    for (auto i : inner.train) train.push_back(data.items[indices[i]]);
    for (auto i : inner.test) validation.push_back(data.items[indices[i]]);
  } else {
    for (auto i : indices) train.push_back(data.items[i]);
  }

  TrainConfig tc = config.train;
  tc.seed = derive_seed(config.seed, 2, stream);
  return train_head(train, tc, data.label_names, validation);
}

namespace {

FoldResult run_fold(const EmbeddingSet& data, const EvalConfig& config, const Split& split, std::size_t fold) {
  const auto trained = fit_head(data, split.train, config, fold);

  std::vector<std::size_t> preds, labels;
  for (auto i : split.test) {
    preds.push_back(classify(trained.head, data.items[i].embedding).index);
    labels.push_back(data.items[i].label);
  }
  FoldResult r;
  r.fold = fold;
  r.train_size = split.train.size();
  r.test_size = split.test.size();
  r.wa = weighted_accuracy(preds, labels);
  r.ua = unweighted_accuracy(preds, labels);
  r.confusion = confusion(preds, labels, data.label_names);
  return r;
}

}  // namespace

EvalReport run_evaluation(const EmbeddingSet& data, const EvalConfig& config, RunMetadata meta) {
  if (data.items.empty()) throw DataError("no embeddings to evaluate");
  std::vector<std::size_t> labels;
  for (const auto& ex : data.items) {
    if (ex.label >= data.label_names.size()) throw LabelError("embedding label out of range");
    labels.push_back(ex.label);
  }
  const auto splits = make_splits(data, config, labels);

  std::vector<FoldResult> folds(splits.size());
  const std::size_t jobs = std::max<std::size_t>(1, config.jobs);
  for (std::size_t start = 0; start < splits.size(); start += jobs) {
    std::vector<std::future<FoldResult>> running;
    for (std::size_t f = start; f < std::min(splits.size(), start + jobs); ++f)
      running.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred,
                                   [&, f] { return run_fold(data, config, splits[f], f); }));
    for (std::size_t i = 0; i < running.size(); ++i) folds[start + i] = running[i].get();
  }

  meta.split_mode = to_string(config.split_mode) + (config.speaker_disjoint ? "-speaker" : "");
  meta.seed = config.seed;
  auto full = config.to_json();
  for (const auto& [key, value] : meta.config.items()) full[key] = value;
  full["label_names"] = data.label_names;
  meta.config = std::move(full);
  meta.config_hash = short_hash(nlohmann::json({{"config", meta.config}, {"checkpoint", meta.checkpoint_hash}}).dump());
  return aggregate(std::move(folds), std::move(meta));
}

EmbeddingSet synthetic_clusters(std::size_t dim, std::size_t per_class, double separation, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingSet set;
  set.label_names = {"negative", "positive"};
  for (std::size_t c = 0; c < 2; ++c) {
    const double centre = (c == 0 ? -0.5 : 0.5) * separation;
    for (std::size_t i = 0; i < per_class; ++i) {
      LabeledEmbedding ex;
      ex.label = c;
      ex.embedding.values.resize(dim);
      for (auto& v : ex.embedding.values) v = static_cast<float>(centre + rng.normal());
      set.items.push_back(std::move(ex));
      set.speakers.push_back("spk" + std::to_string(i % 10));
    }
  }
  return set;
}

}  // namespace ser
