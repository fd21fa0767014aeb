// src/encoder.cc

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

#include "ser/encoder.h"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "ser/error.h"
#include "ser/hash.h"

namespace ser {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
T field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ArchiveError(std::string("encoder manifest lacks '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ArchiveError(std::string("encoder manifest field '") + key + "' has the wrong type");
  }
}

template <typename T>
T field_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? field<T>(j, key) : fallback;
}

std::string layer_prefix(std::size_t l) { return "encoder.layers." + std::to_string(l) + "."; }
std::string conv_prefix(std::size_t i) {
  return "feature_extractor.conv_layers." + std::to_string(i) + ".";
}

Tensor add(Tensor a, const Tensor& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

}  // namespace

EncoderManifest EncoderManifest::from_json(const nlohmann::json& j) {
  EncoderManifest m;
  const auto family = field<std::string>(j, "model_family");
  if (family == "wav2vec2")
    m.model_family = ModelFamily::kWav2Vec2;
  else if (family == "hubert")
    m.model_family = ModelFamily::kHubert;
  else
    throw ArchiveError("unknown model_family '" + family + "'");
  m.checkpoint_id = field_or<std::string>(j, "checkpoint_id", "");
  m.hidden_dim = field<std::size_t>(j, "hidden_dim");
  m.num_layers = field<std::size_t>(j, "num_layers");
  m.num_heads = field<std::size_t>(j, "num_heads");
  m.ff_dim = field<std::size_t>(j, "ff_dim");
  for (const auto& c : field<nlohmann::json>(j, "conv_layers")) {
    m.conv_layers.push_back({field<std::size_t>(c, "channels"), field<std::size_t>(c, "kernel"),
                             field<std::size_t>(c, "stride")});
  }
  const auto norm = field<std::string>(j, "conv_norm_mode");
  if (norm == "group_norm_first_layer")
    m.conv_norm_mode = ConvNormMode::kGroupNormFirstLayer;
  else if (norm == "layer_norm_all")
    m.conv_norm_mode = ConvNormMode::kLayerNormAll;
  else
    throw ArchiveError("unknown conv_norm_mode '" + norm + "'");
  m.conv_bias = field<bool>(j, "conv_bias");
  m.pre_norm = field<bool>(j, "pre_norm");
  m.feature_projection_norm = field_or<bool>(j, "feature_projection_norm", true);
  m.pos_conv_kernel = field<std::size_t>(j, "pos_conv_kernel");
  m.pos_conv_groups = field<std::size_t>(j, "pos_conv_groups");
  m.layer_norm_eps = field_or<float>(j, "layer_norm_eps", 1e-5f);
  m.conv_norm_eps = field_or<float>(j, "conv_norm_eps", 1e-5f);
  m.normalize_input = field<bool>(j, "normalize_input");
  m.expected_sample_rate = field<int>(j, "expected_sample_rate");

  if (m.hidden_dim == 0 || m.num_heads == 0 || m.ff_dim == 0)
    throw ArchiveError("encoder dimensions must be positive");
  if (m.hidden_dim % m.num_heads != 0)
    throw ArchiveError("hidden_dim " + std::to_string(m.hidden_dim) + " not divisible by num_heads " +
                       std::to_string(m.num_heads));
  if (m.conv_layers.empty()) throw ArchiveError("conv_layers is empty");
  for (const auto& c : m.conv_layers)
    if (c.channels == 0 || c.kernel == 0 || c.stride == 0)
      throw ArchiveError("conv layer channels, kernel and stride must be >= 1");
  if (m.pos_conv_kernel == 0 || m.pos_conv_groups == 0 || m.hidden_dim % m.pos_conv_groups != 0)
    throw ArchiveError("invalid positional convolution geometry");
  if (m.expected_sample_rate <= 0) throw ArchiveError("expected_sample_rate must be positive");
  return m;
}

nlohmann::json EncoderManifest::to_json() const {
  nlohmann::json conv = nlohmann::json::array();
  for (const auto& c : conv_layers)
    conv.push_back({{"channels", c.channels}, {"kernel", c.kernel}, {"stride", c.stride}});
  return {
      {"model_family", model_family == ModelFamily::kWav2Vec2 ? "wav2vec2" : "hubert"},
      {"checkpoint_id", checkpoint_id},
      {"hidden_dim", hidden_dim},
      {"num_layers", num_layers},
      {"num_heads", num_heads},
      {"ff_dim", ff_dim},
      {"conv_layers", conv},
      {"conv_norm_mode", conv_norm_mode == ConvNormMode::kGroupNormFirstLayer ? "group_norm_first_layer"
                                                                                : "layer_norm_all"},
      {"conv_bias", conv_bias},
      {"pre_norm", pre_norm},
      {"feature_projection_norm", feature_projection_norm},
      {"pos_conv_kernel", pos_conv_kernel},
      {"pos_conv_groups", pos_conv_groups},
      {"layer_norm_eps", layer_norm_eps},
      {"conv_norm_eps", conv_norm_eps},
      {"normalize_input", normalize_input},
      {"expected_sample_rate", expected_sample_rate},
  };
}

std::map<std::string, std::vector<std::size_t>> EncoderManifest::expected_tensors() const {
  std::map<std::string, std::vector<std::size_t>> out;
  std::size_t in_channels = 1;
  for (std::size_t i = 0; i < conv_layers.size(); ++i) {
    const auto& c = conv_layers[i];
    const auto p = conv_prefix(i);
    out[p + "conv.weight"] = {c.channels, in_channels, c.kernel};
    if (conv_bias) out[p + "conv.bias"] = {c.channels};
    if (conv_norm_mode == ConvNormMode::kLayerNormAll || i == 0) {
      out[p + "layer_norm.weight"] = {c.channels};
      out[p + "layer_norm.bias"] = {c.channels};
    }
    in_channels = c.channels;
  }
  const auto d = hidden_dim;
  if (feature_projection_norm) {
    out["feature_projection.layer_norm.weight"] = {latent_dim()};
    out["feature_projection.layer_norm.bias"] = {latent_dim()};
  }
  out["feature_projection.projection.weight"] = {d, latent_dim()};
  out["feature_projection.projection.bias"] = {d};
  out["encoder.pos_conv_embed.conv.weight"] = {d, d / pos_conv_groups, pos_conv_kernel};
  out["encoder.pos_conv_embed.conv.bias"] = {d};
  out["encoder.layer_norm.weight"] = {d};
  out["encoder.layer_norm.bias"] = {d};
  for (std::size_t l = 0; l < num_layers; ++l) {
    const auto p = layer_prefix(l);
    for (const char* proj : {"q_proj", "k_proj", "v_proj", "out_proj"}) {
      out[p + "attention." + proj + ".weight"] = {d, d};
      out[p + "attention." + proj + ".bias"] = {d};
    }
    out[p + "layer_norm.weight"] = {d};
    out[p + "layer_norm.bias"] = {d};
    out[p + "feed_forward.intermediate_dense.weight"] = {ff_dim, d};
    out[p + "feed_forward.intermediate_dense.bias"] = {ff_dim};
    out[p + "feed_forward.output_dense.weight"] = {d, ff_dim};
    out[p + "feed_forward.output_dense.bias"] = {d};
    out[p + "final_layer_norm.weight"] = {d};
    out[p + "final_layer_norm.bias"] = {d};
  }
  return out;
}

std::size_t EncoderManifest::receptive_field() const {
  std::size_t field = 1;
  for (auto it = conv_layers.rbegin(); it != conv_layers.rend(); ++it)
    field = (field - 1) * it->stride + it->kernel;
  return field;
}

std::size_t EncoderManifest::frames_for(std::size_t samples) const {
  std::size_t length = samples;
  for (const auto& c : conv_layers) {
    length = conv_output_length(length, c.kernel, c.stride);
    if (length == 0) return 0;
  }
  return length;
}

EncoderModel EncoderModel::load(const std::filesystem::path& path) {
  auto archive = read_archive(path);
  try {
    return from_archive(std::move(archive), sha256_file(path));
  } catch (const ArchiveError& e) {
    throw ArchiveError(path.string() + ": " + e.what(), e.tensor_name());
  }
}

EncoderModel EncoderModel::from_archive(TensorArchive archive, std::string checkpoint_hash) {
  EncoderModel model;
  model.manifest_ = EncoderManifest::from_json(archive.manifest);
  for (const auto& [name, shape] : model.manifest_.expected_tensors()) archive.require(name, shape);
  for (const auto& [name, tensor] : archive.tensors)
    if (!tensor.all_finite()) throw ArchiveError("tensor '" + name + "' holds non-finite values", name);
  model.archive_ = std::move(archive);
  model.checkpoint_hash_ = std::move(checkpoint_hash);
  model.bind();
  return model;
}

void EncoderModel::bind() {
  const auto& m = manifest_;
  conv_.clear();
  for (std::size_t i = 0; i < m.conv_layers.size(); ++i) {
    const auto p = conv_prefix(i);
    ConvBlock block;
    block.weight = &t(p + "conv.weight");
    if (m.conv_bias) block.bias = &t(p + "conv.bias");
    if (m.conv_norm_mode == ConvNormMode::kLayerNormAll || i == 0) {
      block.norm_gamma = &t(p + "layer_norm.weight");
      block.norm_beta = &t(p + "layer_norm.bias");
    }
    conv_.push_back(block);
  }
  layers_.clear();
  for (std::size_t l = 0; l < m.num_layers; ++l) {
    const auto p = layer_prefix(l);
    const auto a = p + "attention.";
    layers_.push_back(Layer{
        &t(a + "q_proj.weight"), &t(a + "q_proj.bias"), &t(a + "k_proj.weight"),
        &t(a + "k_proj.bias"), &t(a + "v_proj.weight"), &t(a + "v_proj.bias"),
        &t(a + "out_proj.weight"), &t(a + "out_proj.bias"), &t(p + "layer_norm.weight"),
        &t(p + "layer_norm.bias"), &t(p + "feed_forward.intermediate_dense.weight"),
        &t(p + "feed_forward.intermediate_dense.bias"), &t(p + "feed_forward.output_dense.weight"),
        &t(p + "feed_forward.output_dense.bias"), &t(p + "final_layer_norm.weight"),
        &t(p + "final_layer_norm.bias")});
  }
}

FeatureMatrix EncoderModel::conv_feature_encoder(const AudioClip& clip) const {
  const auto& m = manifest_;
  if (clip.sample_rate != m.expected_sample_rate)
    throw ConfigError("encoder expects " + std::to_string(m.expected_sample_rate) + " Hz input, got " +
                      std::to_string(clip.sample_rate) + " Hz");
  const auto min_samples = m.receptive_field();
  if (clip.samples.size() < min_samples)
    throw InputTooShortError("clip of " + std::to_string(clip.samples.size()) +
                                 " samples is shorter than the encoder receptive field (" +
                                 std::to_string(min_samples) + " samples)",
                             min_samples);

  Tensor x({1, clip.samples.size()}, clip.samples);
  for (std::size_t i = 0; i < conv_.size(); ++i) {
    const auto& block = conv_[i];
    const auto stride = m.conv_layers[i].stride;
    x = block.bias ? conv1d(x, *block.weight, *block.bias, stride, 1)
                   : conv1d(x, *block.weight, stride, 1);
    if (block.norm_gamma) {
      if (m.conv_norm_mode == ConvNormMode::kGroupNormFirstLayer)
        x = group_norm(x, x.dim(0), *block.norm_gamma, *block.norm_beta, m.conv_norm_eps);
      else
        x = transpose2d(layer_norm(transpose2d(x), *block.norm_gamma, *block.norm_beta, m.conv_norm_eps));
    }
    gelu_inplace(x);
  }
  return FeatureMatrix{transpose2d(x)};
}

Tensor EncoderModel::positional_embedding(const Tensor& x) const {
  // Zero-pad kernel/2 frames on each side; an even kernel yields one surplus
  // output frame which is dropped so the length is preserved.
  const auto& m = manifest_;
  const auto n = x.dim(0), d = x.dim(1);
  const auto pad = m.pos_conv_kernel / 2;
  Tensor padded({d, n + 2 * pad});
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < d; ++c) padded.at(c, t + pad) = x.at(t, c);
  Tensor conv = conv1d(padded, t("encoder.pos_conv_embed.conv.weight"),
                       t("encoder.pos_conv_embed.conv.bias"), 1, m.pos_conv_groups);
  Tensor out({n, d});
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < d; ++c) out.at(t, c) = gelu(conv.at(c, t));
  return out;
}

Tensor EncoderModel::attention(const Tensor& x, const Layer& layer, std::size_t index,
                               const AttentionObserver& observer) const {
  const auto n = x.dim(0), d = x.dim(1);
  const auto heads = manifest_.num_heads;
  const auto head_dim = d / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(head_dim));

  Tensor q = linear(x, *layer.q_w, *layer.q_b);
  for (float& v : q.data()) v *= scale;
  const Tensor k = linear(x, *layer.k_w, *layer.k_b);
  const Tensor v = linear(x, *layer.v_w, *layer.v_b);

  Eigen::Map<const RowMat> Q(q.raw(), n, d), K(k.raw(), n, d), V(v.raw(), n, d);
  Tensor context({n, d});
  Eigen::Map<RowMat> C(context.raw(), n, d);
  Tensor probs({n, n});
  Eigen::Map<RowMat> P(probs.raw(), n, n);
  for (std::size_t h = 0; h < heads; ++h) {
    const auto col = static_cast<Eigen::Index>(h * head_dim);
    const auto hd = static_cast<Eigen::Index>(head_dim);
    P.noalias() = Q.middleCols(col, hd) * K.middleCols(col, hd).transpose();
    for (std::size_t r = 0; r < n; ++r) softmax_inplace(probs.row(r));
    if (observer) observer(index, h, probs);
    C.middleCols(col, hd).noalias() = P * V.middleCols(col, hd);
  }
  return linear(context, *layer.o_w, *layer.o_b);
}

Tensor EncoderModel::feed_forward(const Tensor& x, const Layer& layer) const {
  Tensor hidden = linear(x, *layer.ff1_w, *layer.ff1_b);
  gelu_inplace(hidden);
  return linear(hidden, *layer.ff2_w, *layer.ff2_b);
}

FeatureMatrix EncoderModel::transformer_context(const FeatureMatrix& latent,
                                                const AttentionObserver& observer) const {
  const auto& m = manifest_;
  if (latent.values.rank() != 2 || latent.dim() != m.latent_dim())
    throw ShapeError("latent features " + shape_string(latent.values.shape()) +
                     " do not match conv output dim " + std::to_string(m.latent_dim()));
  Tensor h = latent.values;
  if (m.feature_projection_norm)
    h = layer_norm(h, t("feature_projection.layer_norm.weight"),
                   t("feature_projection.layer_norm.bias"), m.layer_norm_eps);
  h = linear(h, t("feature_projection.projection.weight"), t("feature_projection.projection.bias"));
  h = add(std::move(h), positional_embedding(h));

  const auto& final_g = t("encoder.layer_norm.weight");
  const auto& final_b = t("encoder.layer_norm.bias");
  const float eps = m.layer_norm_eps;
  if (!m.pre_norm) h = layer_norm(h, final_g, final_b, eps);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (m.pre_norm) {
      h = add(std::move(h), attention(layer_norm(h, *layer.ln_g, *layer.ln_b, eps), layer, l, observer));
      h = add(std::move(h), feed_forward(layer_norm(h, *layer.final_ln_g, *layer.final_ln_b, eps), layer));
    } else {
      h = layer_norm(add(std::move(h), attention(h, layer, l, observer)), *layer.ln_g, *layer.ln_b, eps);
      h = layer_norm(add(h, feed_forward(h, layer)), *layer.final_ln_g, *layer.final_ln_b, eps);
    }
  }
  if (m.pre_norm) h = layer_norm(h, final_g, final_b, eps);
  return FeatureMatrix{std::move(h)};
}

namespace {

// Chunk boundaries as [begin, end) sample ranges. A tail shorter than the
// receptive field is merged into the preceding chunk.
std::vector<std::pair<std::size_t, std::size_t>> chunk_ranges(std::size_t samples, std::size_t chunk,
                                                              std::size_t min_tail) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t begin = 0; begin < samples; begin += chunk)
    out.emplace_back(begin, std::min(samples, begin + chunk));
  if (out.size() > 1 && out.back().second - out.back().first < min_tail) {
    const auto end = out.back().second;
    out.pop_back();
    out.back().second = end;
  }
  return out;
}

std::size_t chunk_samples(int rate) {
  return static_cast<std::size_t>(kMaxChunkSeconds * rate);
}

}  // namespace

std::size_t EncoderModel::frames_for_samples(std::size_t samples) const {
  std::size_t frames = 0;
  for (const auto& [b, e] :
       chunk_ranges(samples, chunk_samples(manifest_.expected_sample_rate), manifest_.receptive_field()))
    frames += manifest_.frames_for(e - b);
  return frames;
}

FeatureMatrix EncoderModel::extract(const AudioClip& clip) const {
  const auto& m = manifest_;
  AudioClip prepared = clip.sample_rate == m.expected_sample_rate ? clip : resample(clip, m.expected_sample_rate);
  if (m.normalize_input) prepared = normalize(prepared);

  const auto ranges = chunk_ranges(prepared.samples.size(), chunk_samples(m.expected_sample_rate),
                                   m.receptive_field());
  if (ranges.size() <= 1) return transformer_context(conv_feature_encoder(prepared));

  std::vector<Tensor> parts;
  std::size_t total = 0;
  for (const auto& [b, e] : ranges) {
    AudioClip piece;
    piece.sample_rate = prepared.sample_rate;
    piece.samples.assign(prepared.samples.begin() + static_cast<std::ptrdiff_t>(b),
                         prepared.samples.begin() + static_cast<std::ptrdiff_t>(e));
    parts.push_back(transformer_context(conv_feature_encoder(piece)).values);
    total += parts.back().rows();
  }
  Tensor out({total, m.hidden_dim});
  std::size_t row = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(row * m.hidden_dim));
    row += p.rows();
  }
  return FeatureMatrix{std::move(out)};
}

}  // namespace ser
