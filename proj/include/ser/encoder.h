// include/ser/encoder.h

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

// Inference-only Wav2Vec2 / HuBERT encoder: convolutional feature extractor,
// feature projection, convolutional positional embedding and a transformer
// stack. Every hyperparameter comes from the archive manifest.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "ser/archive.h"
#include "ser/audio_io.h"
#include "ser/tensor.h"

namespace ser {

enum class ModelFamily { kWav2Vec2, kHubert };
enum class ConvNormMode { kGroupNormFirstLayer, kLayerNormAll };

struct ConvLayerShape {
  std::size_t channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 0;
};

struct EncoderManifest {
  ModelFamily model_family = ModelFamily::kWav2Vec2;
  std::string checkpoint_id;
  std::size_t hidden_dim = 0;
  std::size_t num_layers = 0;
  std::size_t num_heads = 0;
  std::size_t ff_dim = 0;
  std::vector<ConvLayerShape> conv_layers;
  ConvNormMode conv_norm_mode = ConvNormMode::kGroupNormFirstLayer;
  bool conv_bias = false;
  /// Pre-norm ("stable layer norm") transformer blocks when true.
  bool pre_norm = false;
  bool feature_projection_norm = true;
  std::size_t pos_conv_kernel = 0;
  std::size_t pos_conv_groups = 0;
  float layer_norm_eps = 1e-5f;
  float conv_norm_eps = 1e-5f;
  bool normalize_input = false;
  int expected_sample_rate = 16000;

  /// Parses and validates; throws ArchiveError on missing or invalid fields.
  static EncoderManifest from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// Every tensor the forward pass reads, with its exact shape.
  std::map<std::string, std::vector<std::size_t>> expected_tensors() const;

  std::size_t latent_dim() const { return conv_layers.back().channels; }
  /// Fewest samples yielding one latent frame.
  std::size_t receptive_field() const;
  /// Latent frame count for a single unchunked segment (0 if too short).
  std::size_t frames_for(std::size_t samples) const;
};

/// n x d matrix; row t is the feature vector of frame t.
struct FeatureMatrix {
  Tensor values;

  std::size_t frames() const { return values.rows(); }
  std::size_t dim() const { return values.cols(); }
};

/// Called once per (layer, head) with the n x n attention probabilities.
using AttentionObserver =
    std::function<void(std::size_t layer, std::size_t head, const Tensor& probs)>;

/// Longer inputs are encoded in chunks of this length and concatenated.
inline constexpr double kMaxChunkSeconds = 30.0;

/// Move-only: layer bindings point into the owned archive.
class EncoderModel {
 public:
  EncoderModel(const EncoderModel&) = delete;
  EncoderModel& operator=(const EncoderModel&) = delete;
  EncoderModel(EncoderModel&&) = default;
  EncoderModel& operator=(EncoderModel&&) = default;

  /// Reads and validates a tensor archive; the model is immutable afterwards.
  static EncoderModel load(const std::filesystem::path& path);
  static EncoderModel from_archive(TensorArchive archive, std::string checkpoint_hash = {});

  const EncoderManifest& manifest() const { return manifest_; }
  /// SHA-256 of the archive file ("" when built in memory).
  const std::string& checkpoint_hash() const { return checkpoint_hash_; }

  /// Latent frames z_1..z_T, dim = last conv channel count. The clip must be at
  /// the manifest sample rate and at least one receptive field long.
  FeatureMatrix conv_feature_encoder(const AudioClip& clip) const;

  /// Contextual n x hidden_dim features for latent frames.
  FeatureMatrix transformer_context(const FeatureMatrix& latent,
                                    const AttentionObserver& observer = {}) const;

  /// Resample and normalize per manifest, then encode, chunking long clips.
  FeatureMatrix extract(const AudioClip& clip) const;

  /// Frame count extract() produces for a clip of `samples` at the expected rate.
  std::size_t frames_for_samples(std::size_t samples) const;

 private:
  struct ConvBlock {
    const Tensor* weight = nullptr;
    const Tensor* bias = nullptr;
    const Tensor* norm_gamma = nullptr;
    const Tensor* norm_beta = nullptr;
  };
  struct Layer {
    const Tensor *q_w, *q_b, *k_w, *k_b, *v_w, *v_b, *o_w, *o_b;
    const Tensor *ln_g, *ln_b;
    const Tensor *ff1_w, *ff1_b, *ff2_w, *ff2_b;
    const Tensor *final_ln_g, *final_ln_b;
  };

  EncoderModel() = default;
  void bind();
  const Tensor& t(const std::string& name) const { return archive_.tensors.at(name); }
  Tensor attention(const Tensor& x, const Layer& layer, std::size_t index,
                   const AttentionObserver& observer) const;
  Tensor feed_forward(const Tensor& x, const Layer& layer) const;
  Tensor positional_embedding(const Tensor& x) const;

  EncoderManifest manifest_;
  TensorArchive archive_;
  std::string checkpoint_hash_;
  std::vector<ConvBlock> conv_;
  std::vector<Layer> layers_;
};

}  // namespace ser
