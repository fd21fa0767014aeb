// include/ser/classifier_head.h

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

// Utterance classifier on top of the frozen encoder: time-averaged features
// feed two fully connected layers with a ReLU between them,
//   p = softmax(W2 * relu(W1 * e + b1) + b2).
// The head is the only trained state; gradients are derived by hand.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ser/encoder.h"
#include "ser/tensor.h"

namespace ser {

struct EmbeddingVector {
  std::vector<float> values;
  std::size_t dim() const { return values.size(); }
};

/// Per-dimension mean over frames.
EmbeddingVector mean_pool(const FeatureMatrix& features);

struct ClassifierHead {
  Tensor w1;  // [hidden x input]
  Tensor b1;  // [hidden]
  Tensor w2;  // [classes x hidden]
  Tensor b2;  // [classes]
  std::vector<std::string> label_names;

  std::size_t input_dim() const { return w1.dim(1); }
  std::size_t hidden_size() const { return w1.dim(0); }
  std::size_t num_classes() const { return w2.dim(0); }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  static ClassifierHead initialize(std::size_t input_dim, std::size_t hidden_size,
                                   std::vector<std::string> label_names, std::uint64_t seed);

  /// Throws ShapeError / ConfigError when shapes, label count or values are invalid.
  void validate() const;
  bool operator==(const ClassifierHead& other) const;
};

struct LabeledEmbedding {
  EmbeddingVector embedding;
  std::size_t label = 0;
};

std::vector<float> logits(const ClassifierHead& head, const EmbeddingVector& e);
/// Class probabilities; positive and summing to one.
std::vector<float> forward(const ClassifierHead& head, const EmbeddingVector& e);

struct HeadGradients {
  Tensor w1, b1, w2, b2;
};

struct LossAndGrads {
  double loss = 0.0;  // mean cross-entropy
  HeadGradients grads;
};

LossAndGrads loss_and_grads(const ClassifierHead& head, std::span<const LabeledEmbedding> batch);

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t early_stop_patience = 10;
  std::uint64_t seed = 0;
  double weight_decay = 1e-5;
  std::size_t hidden_size = 256;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  nlohmann::json to_json() const;
  /// Fields absent from `j` keep their defaults.
  static TrainConfig from_json(const nlohmann::json& j);
  void validate() const;
};

struct TrainResult {
  ClassifierHead head;
  /// Mean training cross-entropy per epoch, measured during the epoch.
  std::vector<double> epoch_losses;
  /// Epoch (1-based) of the returned checkpoint; 0 when untrained.
  std::size_t best_epoch = 0;
  double best_validation_ua = 0.0;
};

/// Mini-batch Adam on cross-entropy. With a validation set the checkpoint with
/// the best validation UA is returned and training stops after
/// `early_stop_patience` epochs without improvement; otherwise the final head.
TrainResult train_head(std::span<const LabeledEmbedding> train, const TrainConfig& config,
                       std::vector<std::string> label_names,
                       std::span<const LabeledEmbedding> validation = {});

struct Prediction {
  std::size_t index = 0;
  std::string label;
  std::vector<float> probabilities;
};

/// Argmax with ties going to the lowest class index.
Prediction classify(const ClassifierHead& head, const EmbeddingVector& e);
Prediction predict(const EncoderModel& model, const ClassifierHead& head, const AudioClip& clip);

/// Head checkpoints use the tensor archive container; `metadata` is merged
/// into the manifest (provenance such as encoder hash and config hash).
void save_head(const std::filesystem::path& path, const ClassifierHead& head,
               const nlohmann::json& metadata = nlohmann::json::object());
ClassifierHead load_head(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

}  // namespace ser
