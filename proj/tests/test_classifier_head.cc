// tests/test_classifier_head.cc

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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "criteria.h"
#include "ser/classifier_head.h"
#include "ser/error.h"
#include "ser/experiment.h"
#include "ser/random.h"

namespace ser {
namespace {

FeatureMatrix frames(std::size_t n, std::size_t d, std::vector<float> v) { return {Tensor({n, d}, std::move(v))}; }

ClassifierHead zero_head(std::size_t d, std::size_t h, std::size_t c) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < c; ++k) names.push_back("class" + std::to_string(k));
  ClassifierHead head{Tensor({h, d}), Tensor({h}), Tensor({c, h}), Tensor({c}), names};
  return head;
}

EmbeddingVector vec(std::vector<float> v) { return {std::move(v)}; }

TEST(MeanPool, AveragesOverTime) {
  EXPECT_EQ(mean_pool(frames(2, 2, {1, 2, 3, 4})).values, (std::vector<float>{2, 3}));
  EXPECT_EQ(mean_pool(frames(1, 3, {7, -1, 0.5f})).values, (std::vector<float>{7, -1, 0.5f}));
}

TEST(MeanPool, PermutationAndDuplicationInvariant) {
  Rng rng(1);
  std::vector<float> v(40 * 6);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-3, 3));
  const auto base = mean_pool(frames(40, 6, v)).values;
  std::vector<std::size_t> order(40);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span(order));
  std::vector<float> permuted, doubled = v;
  for (auto r : order) permuted.insert(permuted.end(), v.begin() + r * 6, v.begin() + r * 6 + 6);
  doubled.insert(doubled.end(), v.begin(), v.end());
  const auto p = mean_pool(frames(40, 6, permuted)).values, d = mean_pool(frames(80, 6, doubled)).values;
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NEAR(p[i], base[i], 1e-6);
    EXPECT_NEAR(d[i], base[i], 1e-6);
  }
}

TEST(MeanPool, EmptyMatrixRejected) { EXPECT_THROW(mean_pool(FeatureMatrix{}), ShapeError); }

TEST(Forward, CollapsedNetworkIsUniform) {
  for (float v : forward(zero_head(3, 4, 5), vec({1, 2, 3}))) EXPECT_NEAR(v, 0.2, 1e-7);
}

TEST(Forward, BiasDominates) {
  auto head = zero_head(3, 4, 4);
  head.b2[0] = 10;
  EXPECT_GT(forward(head, vec({0.1f, 0.2f, 0.3f}))[0], 0.999);
}

TEST(Forward, ProbabilitiesSumToOne) {
  Rng rng(2);
  for (int n = 0; n < 100; ++n) {
    const auto head = ClassifierHead::initialize(8, 16, {"a", "b", "c"}, rng.next());
    std::vector<float> e(8);
    for (auto& x : e) x = static_cast<float>(rng.uniform(-5, 5));
    const auto p = forward(head, vec(e));
    double s = 0.0;
    for (float v : p) {
      EXPECT_GT(v, 0.0f);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Forward, DimensionMismatch) {
  EXPECT_THROW(forward(zero_head(3, 4, 2), vec({1, 2})), ShapeError);
}

TEST(Initialize, UniformFanInBounds) {
  const auto head = ClassifierHead::initialize(64, 256, {"x", "y"}, 9);
  for (float v : head.w1.data()) EXPECT_LE(std::abs(v), 1.0 / 8.0);
  for (float v : head.w2.data()) EXPECT_LE(std::abs(v), 1.0 / 16.0);
  EXPECT_EQ(head, ClassifierHead::initialize(64, 256, {"x", "y"}, 9));
  EXPECT_FALSE(head == ClassifierHead::initialize(64, 256, {"x", "y"}, 10));
}

TEST(Loss, UniformPredictorGivesLogC) {
  const std::vector<LabeledEmbedding> batch = {{vec({1, 2}), 0}, {vec({-1, 0}), 2}};
  EXPECT_NEAR(loss_and_grads(zero_head(2, 3, 3), batch).loss, std::log(3.0), 1e-6);
}

TEST(Loss, ConfidentCorrectPredictorIsAtOptimum) {
  auto head = zero_head(2, 3, 3);
  head.b2[1] = 30;
  const std::vector<LabeledEmbedding> batch = {{vec({1, 2}), 1}, {vec({3, -1}), 1}};
  const auto lg = loss_and_grads(head, batch);
  EXPECT_LT(lg.loss, 1e-5);
  for (const Tensor* g : {&lg.grads.w1, &lg.grads.b1, &lg.grads.w2, &lg.grads.b2}) {
    double norm = 0.0;
    for (float v : g->data()) norm += double(v) * v;
    EXPECT_LT(std::sqrt(norm), 1e-4);
  }
}

TEST(Loss, RejectsBadBatches) {
  const auto head = zero_head(2, 3, 3);
  EXPECT_THROW(loss_and_grads(head, std::vector<LabeledEmbedding>{{vec({1, 2}), 3}}), LabelError);
  EXPECT_THROW(loss_and_grads(head, std::vector<LabeledEmbedding>{}), DataError);
  EXPECT_THROW(loss_and_grads(head, std::vector<LabeledEmbedding>{{vec({1}), 0}}), ShapeError);
}

TEST(Loss, GradientsMatchFiniteDifferences) {
  const auto outcome = criteria::gradient_check(100, 17);
  EXPECT_TRUE(outcome.passed()) << outcome.detail;
}

std::vector<LabeledEmbedding> clusters(std::size_t per_class, std::uint64_t seed) {
  return synthetic_clusters(8, per_class, 4.0, seed).items;
}

TEST(Train, SeparableClustersReachPerfectTrainingAccuracy) {
  const auto data = clusters(100, 3);
  TrainConfig config;
  config.max_epochs = 50;
  const auto result = train_head(data, config, {"negative", "positive"});
  std::size_t correct = 0;
  for (const auto& ex : data) correct += classify(result.head, ex.embedding).index == ex.label;
  EXPECT_GE(double(correct) / data.size(), 0.99);
  EXPECT_EQ(result.epoch_losses.size(), 50u);
  EXPECT_LT(result.epoch_losses.back(), result.epoch_losses.front());
}

TEST(Train, ZeroEpochsReturnsInitialization) {
  TrainConfig config;
  config.max_epochs = 0;
  config.seed = 44;
  config.hidden_size = 12;
  const auto result = train_head(clusters(10, 4), config, {"negative", "positive"});
  EXPECT_EQ(result.head, ClassifierHead::initialize(8, 12, {"negative", "positive"}, 44));
  EXPECT_TRUE(result.epoch_losses.empty());
}

TEST(Train, SameSeedSameParameters) {
  const auto data = clusters(30, 5), val = clusters(5, 6);
  TrainConfig config;
  config.max_epochs = 15;
  config.seed = 123;
  const auto a = train_head(data, config, {"negative", "positive"}, val);
  const auto b = train_head(data, config, {"negative", "positive"}, val);
  EXPECT_EQ(a.head, b.head);
  EXPECT_EQ(a.epoch_losses, b.epoch_losses);
  config.seed = 124;
  EXPECT_FALSE(train_head(data, config, {"negative", "positive"}, val).head == a.head);
}

TEST(Train, EarlyStoppingKeepsBestValidationCheckpoint) {
  const auto data = clusters(40, 7), val = clusters(10, 8);
  TrainConfig config;
  config.max_epochs = 100;
  config.early_stop_patience = 3;
  config.learning_rate = 1e-2;
  const auto result = train_head(data, config, {"negative", "positive"}, val);
  EXPECT_GE(result.best_epoch, 1u);
  EXPECT_LE(result.best_epoch, result.epoch_losses.size());
  std::size_t correct = 0;
  std::vector<std::size_t> preds, labels;
  for (const auto& ex : val) correct += classify(result.head, ex.embedding).index == ex.label;
  EXPECT_DOUBLE_EQ(result.best_validation_ua, double(correct) / val.size());
}

TEST(Train, MissingClassIsDataError) {
  auto data = clusters(10, 9);
  std::erase_if(data, [](const LabeledEmbedding& e) { return e.label == 1; });
  EXPECT_THROW(train_head(data, TrainConfig{}, {"negative", "positive"}), DataError);
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
  TrainConfig c;
  c.learning_rate = 3e-3;
  c.hidden_size = 64;
  c.seed = 99;
  const auto back = TrainConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  TrainConfig d;
  d.batch_size = 0;
  EXPECT_THROW(d.validate(), ConfigError);
}

TEST(Classify, TiesGoToLowestIndex) {
  auto head = zero_head(2, 2, 4);
  head.b2[1] = 5;
  head.b2[3] = 5;
  const auto p = classify(head, vec({0.3f, 0.1f}));
  EXPECT_EQ(p.index, 1u);
  EXPECT_EQ(p.label, "class1");
}

TEST(Classify, ChosenProbabilityAtLeastUniformAndShiftInvariant) {
  Rng rng(31);
  for (int n = 0; n < 100; ++n) {
    auto head = ClassifierHead::initialize(5, 7, {"a", "b", "c", "d"}, rng.next());
    std::vector<float> e(5);
    for (auto& x : e) x = static_cast<float>(rng.uniform(-2, 2));
    const auto p = classify(head, vec(e));
    EXPECT_GE(p.probabilities[p.index], 0.25f);
    for (auto& b : head.b2.data()) b += 3.5f;
    EXPECT_EQ(classify(head, vec(e)).index, p.index);
  }
}

TEST(HeadArchive, SaveLoadRoundTrip) {
  const auto head = ClassifierHead::initialize(6, 5, {"anger", "joy"}, 77);
  const auto path = std::filesystem::temp_directory_path() / "ser_head_roundtrip.serta";
  save_head(path, head, {{"checkpoint_hash", "abc"}});
  nlohmann::json meta;
  EXPECT_EQ(load_head(path, &meta), head);
  EXPECT_EQ(meta.at("checkpoint_hash"), "abc");
  EXPECT_EQ(meta.at("kind"), "classifier_head");
  std::filesystem::remove(path);
}

TEST(Predict, FixturePipelineMatchesCommittedExpectation) {
  const auto dir = criteria::fixture_dir();
  std::ifstream in(dir / "expected_prediction.json");
  const auto expected = nlohmann::json::parse(in);
  const auto model = EncoderModel::load(dir / expected.at("encoder").get<std::string>());
  const auto head = load_head(dir / expected.at("head").get<std::string>());
  const auto clip = read_wav(dir / expected.at("wav").get<std::string>());
  EXPECT_EQ(model.extract(clip).frames(), expected.at("frames").get<std::size_t>());
  const auto p = predict(model, head, clip);
  EXPECT_EQ(p.label, expected.at("label").get<std::string>());
  const auto probs = expected.at("probabilities").get<std::vector<double>>();
  ASSERT_EQ(p.probabilities.size(), probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) EXPECT_NEAR(p.probabilities[i], probs[i], 1e-5);
}

}  // namespace
}  // namespace ser
