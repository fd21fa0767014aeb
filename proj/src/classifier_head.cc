// src/classifier_head.cc

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

#include "ser/classifier_head.h"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ser/error.h"
#include "ser/eval.h"
#include "ser/random.h"

namespace ser {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;
using ConstVec = Eigen::Map<const Eigen::RowVectorXf>;
using MutVec = Eigen::Map<Eigen::RowVectorXf>;

Tensor uniform_tensor(std::vector<std::size_t> shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
  return t;
}

void check_input(const ClassifierHead& head, const EmbeddingVector& e) {
  if (e.dim() != head.input_dim())
    throw ShapeError("embedding of dim " + std::to_string(e.dim()) + " given to a head expecting " +
                     std::to_string(head.input_dim()));
}

}  // namespace

EmbeddingVector mean_pool(const FeatureMatrix& features) {
  if (features.values.rank() != 2 || features.frames() == 0)
    throw ShapeError("mean_pool needs a non-empty frames x dim matrix");
  const auto n = features.frames(), d = features.dim();
  std::vector<double> acc(d, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    auto row = features.values.row(t);
    for (std::size_t j = 0; j < d; ++j) acc[j] += row[j];
  }
  EmbeddingVector out;
  out.values.resize(d);
  for (std::size_t j = 0; j < d; ++j) out.values[j] = static_cast<float>(acc[j] / static_cast<double>(n));
  return out;
}

ClassifierHead ClassifierHead::initialize(std::size_t input_dim, std::size_t hidden_size,
                                          std::vector<std::string> label_names, std::uint64_t seed) {
  if (label_names.size() < 2) throw ConfigError("a classifier head needs at least two classes");
  if (input_dim == 0 || hidden_size == 0) throw ConfigError("head dimensions must be positive");
  Rng rng(seed);
  const auto classes = label_names.size();
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  ClassifierHead head;
  head.w1 = uniform_tensor({hidden_size, input_dim}, bound1, rng);
  head.b1 = uniform_tensor({hidden_size}, bound1, rng);
  head.w2 = uniform_tensor({classes, hidden_size}, bound2, rng);
  head.b2 = uniform_tensor({classes}, bound2, rng);
  head.label_names = std::move(label_names);
  return head;
}

void ClassifierHead::validate() const {
  if (w1.rank() != 2 || w2.rank() != 2 || b1.rank() != 1 || b2.rank() != 1)
    throw ShapeError("classifier head tensors have the wrong rank");
  if (b1.size() != w1.dim(0) || w2.dim(1) != w1.dim(0) || b2.size() != w2.dim(0))
    throw ShapeError("classifier head tensor shapes are inconsistent");
  if (num_classes() < 2) throw ConfigError("a classifier head needs at least two classes");
  if (label_names.size() != num_classes())
    throw ConfigError("head has " + std::to_string(num_classes()) + " outputs but " +
                      std::to_string(label_names.size()) + " label names");
  for (const Tensor* t : {&w1, &b1, &w2, &b2})
    if (!t->all_finite()) throw ConfigError("classifier head holds non-finite parameters");
}

bool ClassifierHead::operator==(const ClassifierHead& o) const {
  auto same = [](const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
  };
  return same(w1, o.w1) && same(b1, o.b1) && same(w2, o.w2) && same(b2, o.b2) &&
         label_names == o.label_names;
}

std::vector<float> logits(const ClassifierHead& head, const EmbeddingVector& e) {
  check_input(head, e);
  const auto h = head.hidden_size(), d = head.input_dim(), c = head.num_classes();
  Eigen::VectorXf hidden = ConstMap(head.w1.raw(), h, d) * Eigen::Map<const Eigen::VectorXf>(e.values.data(), d);
  hidden += Eigen::Map<const Eigen::VectorXf>(head.b1.raw(), h);
  hidden = hidden.cwiseMax(0.0f);
  std::vector<float> out(c);
  Eigen::Map<Eigen::VectorXf>(out.data(), c) =
      ConstMap(head.w2.raw(), c, h) * hidden + Eigen::Map<const Eigen::VectorXf>(head.b2.raw(), c);
  return out;
}

std::vector<float> forward(const ClassifierHead& head, const EmbeddingVector& e) {
  auto p = logits(head, e);
  softmax_inplace(p);
  return p;
}

LossAndGrads loss_and_grads(const ClassifierHead& head, std::span<const LabeledEmbedding> batch) {
  if (batch.empty()) throw DataError("loss_and_grads needs a non-empty batch");
  const auto n = batch.size(), d = head.input_dim(), h = head.hidden_size(), c = head.num_classes();
  RowMat inputs(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    check_input(head, batch[i].embedding);
    if (batch[i].label >= c)
      throw LabelError("label " + std::to_string(batch[i].label) + " outside [0, " + std::to_string(c) + ")");
    inputs.row(static_cast<Eigen::Index>(i)) = ConstVec(batch[i].embedding.values.data(), d);
  }
  const ConstMap w1(head.w1.raw(), h, d), w2(head.w2.raw(), c, h);
  RowMat pre = inputs * w1.transpose();
  pre.rowwise() += ConstVec(head.b1.raw(), h);
  const RowMat hidden = pre.cwiseMax(0.0f);
  RowMat out = hidden * w2.transpose();
  out.rowwise() += ConstVec(head.b2.raw(), c);

  // out becomes dL/dlogits = (softmax - onehot) / n.
  double loss = 0.0;
  const float inv_n = 1.0f / static_cast<float>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.row(static_cast<Eigen::Index>(i));
    const float peak = row.maxCoeff();
    double total = 0.0;
    for (Eigen::Index j = 0; j < row.size(); ++j) total += std::exp(static_cast<double>(row[j]) - peak);
    const auto y = static_cast<Eigen::Index>(batch[i].label);
    loss += std::log(total) - (static_cast<double>(row[y]) - peak);
    for (Eigen::Index j = 0; j < row.size(); ++j)
      row[j] = static_cast<float>(std::exp(static_cast<double>(row[j]) - peak) / total) * inv_n;
    row[y] -= inv_n;
  }

  LossAndGrads r;
  r.loss = loss / static_cast<double>(n);
  r.grads.w2 = Tensor({c, h});
  r.grads.b2 = Tensor({c});
  r.grads.w1 = Tensor({h, d});
  r.grads.b1 = Tensor({h});
  MutMap(r.grads.w2.raw(), c, h).noalias() = out.transpose() * hidden;
  MutVec(r.grads.b2.raw(), c) = out.colwise().sum();
  RowMat back = out * w2;
  for (Eigen::Index i = 0; i < back.size(); ++i)
    if (pre.data()[i] <= 0.0f) back.data()[i] = 0.0f;
  MutMap(r.grads.w1.raw(), h, d).noalias() = back.transpose() * inputs;
  MutVec(r.grads.b1.raw(), h) = back.colwise().sum();
  return r;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"batch_size", batch_size},
          {"max_epochs", max_epochs},       {"early_stop_patience", early_stop_patience},
          {"seed", seed},                   {"weight_decay", weight_decay},
          {"hidden_size", hidden_size},     {"adam_beta1", adam_beta1},
          {"adam_beta2", adam_beta2},       {"adam_eps", adam_eps}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.seed = j.value("seed", c.seed);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.hidden_size = j.value("hidden_size", c.hidden_size);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0) || batch_size == 0 || early_stop_patience == 0 || hidden_size == 0 ||
      weight_decay < 0 || !(adam_eps > 0) || adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 ||
      adam_beta2 >= 1)
    throw ConfigError("invalid training configuration " + to_json().dump());
}

namespace {

struct AdamState {
  std::vector<double> m, v;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const TrainConfig& cfg,
               std::size_t step, bool decay) {
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    double g = grad[i];
    if (decay) g += cfg.weight_decay * param[i];
    state.m[i] = cfg.adam_beta1 * state.m[i] + (1.0 - cfg.adam_beta1) * g;
    state.v[i] = cfg.adam_beta2 * state.v[i] + (1.0 - cfg.adam_beta2) * g * g;
    const double update = cfg.learning_rate * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + cfg.adam_eps);
    param[i] = static_cast<float>(param[i] - update);
  }
}

double validation_ua(const ClassifierHead& head, std::span<const LabeledEmbedding> data) {
  std::vector<std::size_t> preds, labels;
  for (const auto& ex : data) {
    preds.push_back(classify(head, ex.embedding).index);
    labels.push_back(ex.label);
  }
  return unweighted_accuracy(preds, labels);
}

constexpr std::uint64_t kShuffleStream = 0x9E3779B97F4A7C15ull;

}  // namespace

TrainResult train_head(std::span<const LabeledEmbedding> train, const TrainConfig& config,
                       std::vector<std::string> label_names,
                       std::span<const LabeledEmbedding> validation) {
  config.validate();
  if (train.empty()) throw DataError("no training data");
  const auto classes = label_names.size();
  std::vector<std::size_t> per_class(classes, 0);
  for (const auto& ex : train) {
    if (ex.label >= classes) throw LabelError("training label " + std::to_string(ex.label) + " out of range");
    ++per_class[ex.label];
  }
  for (std::size_t c = 0; c < classes; ++c)
    if (per_class[c] == 0) throw DataError("class '" + label_names[c] + "' has no training examples");

  TrainResult result;
  result.head = ClassifierHead::initialize(train.front().embedding.dim(), config.hidden_size,
                                           std::move(label_names), config.seed);
  ClassifierHead& head = result.head;
  ClassifierHead best = head;
  double best_ua = -1.0, best_loss = 0.0;

  AdamState s_w1(head.w1.size()), s_b1(head.b1.size()), s_w2(head.w2.size()), s_b2(head.b2.size());
  Rng rng(config.seed ^ kShuffleStream);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<LabeledEmbedding> batch;
  std::size_t step = 0, stale = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train[order[i]]);
      const auto lg = loss_and_grads(head, batch);
      epoch_loss += lg.loss * static_cast<double>(batch.size());
      ++step;
      adam_step(head.w1, lg.grads.w1, s_w1, config, step, true);
      adam_step(head.b1, lg.grads.b1, s_b1, config, step, false);
      adam_step(head.w2, lg.grads.w2, s_w2, config, step, true);
      adam_step(head.b2, lg.grads.b2, s_b2, config, step, false);
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(train.size()));

    if (!validation.empty()) {
      const double ua = validation_ua(head, validation);
      const double loss = loss_and_grads(head, validation).loss;
      // Equal UA counts as progress when the validation loss still falls.
      if (ua > best_ua || (ua == best_ua && loss < best_loss)) {
        best_ua = ua;
        best_loss = loss;
        best = head;
        result.best_epoch = epoch;
        stale = 0;
      } else if (++stale >= config.early_stop_patience) {
        break;
      }
    } else {
      result.best_epoch = epoch;
    }
  }
  if (!validation.empty() && result.best_epoch > 0) {
    head = std::move(best);
    result.best_validation_ua = best_ua;
  }
  return result;
}

Prediction classify(const ClassifierHead& head, const EmbeddingVector& e) {
  Prediction p;
  p.probabilities = forward(head, e);
  // max_element returns the first maximum, so ties go to the lowest index.
  p.index = static_cast<std::size_t>(
      std::max_element(p.probabilities.begin(), p.probabilities.end()) - p.probabilities.begin());
  p.label = head.label_names[p.index];
  return p;
}

Prediction predict(const EncoderModel& model, const ClassifierHead& head, const AudioClip& clip) {
  return classify(head, mean_pool(model.extract(clip)));
}

void save_head(const std::filesystem::path& path, const ClassifierHead& head,
               const nlohmann::json& metadata) {
  head.validate();
  TensorArchive archive;
  archive.manifest = metadata.is_object() ? metadata : nlohmann::json::object();
  archive.manifest["kind"] = "classifier_head";
  archive.manifest["label_names"] = head.label_names;
  archive.manifest["input_dim"] = head.input_dim();
  archive.manifest["hidden_size"] = head.hidden_size();
  archive.manifest["num_classes"] = head.num_classes();
  archive.tensors = {{"W1", head.w1}, {"b1", head.b1}, {"W2", head.w2}, {"b2", head.b2}};
  write_archive(path, archive);
}

ClassifierHead load_head(const std::filesystem::path& path, nlohmann::json* metadata) {
  auto archive = read_archive(path);
  const auto& m = archive.manifest;
  if (m.value("kind", "") != "classifier_head")
    throw ArchiveError(path.string() + ": not a classifier head archive");
  ClassifierHead head;
  try {
    head.label_names = m.at("label_names").get<std::vector<std::string>>();
    const auto d = m.at("input_dim").get<std::size_t>();
    const auto h = m.at("hidden_size").get<std::size_t>();
    const auto c = m.at("num_classes").get<std::size_t>();
    head.w1 = archive.require("W1", {h, d});
    head.b1 = archive.require("b1", {h});
    head.w2 = archive.require("W2", {c, h});
    head.b2 = archive.require("b2", {c});
  } catch (const nlohmann::json::exception& e) {
    throw ArchiveError(path.string() + ": malformed head manifest: " + e.what());
  }
  head.validate();
  if (metadata) *metadata = m;
  return head;
}

}  // namespace ser
