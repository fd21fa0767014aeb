// tests/test_eval.cc

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

#include "criteria.h"
#include "ser/error.h"
#include "ser/eval.h"

namespace ser {
namespace {

using Strings = std::vector<std::string>;

FoldResult fold_with(double wa, std::size_t index = 0, Strings labels = {"A", "B"}) {
  FoldResult f;
  f.fold = index;
  f.wa = f.ua = wa;
  f.confusion = confusion(Strings{labels[0]}, Strings{labels[0]}, labels);
  return f;
}

TEST(Accuracy, HandCountedExample) {
  const Strings labels = {"A", "A", "A", "B"}, preds = {"A", "A", "B", "B"};
  EXPECT_DOUBLE_EQ(weighted_accuracy(preds, labels), 0.75);
  EXPECT_NEAR(unweighted_accuracy(preds, labels), 0.8333333333, 1e-9);
}

TEST(Accuracy, PerfectAndSingleClass) {
  const Strings labels = {"A", "B", "A"};
  EXPECT_EQ(weighted_accuracy(labels, labels), 1.0);
  EXPECT_EQ(unweighted_accuracy(labels, labels), 1.0);
  EXPECT_DOUBLE_EQ(unweighted_accuracy(Strings{"A", "B", "A", "A"}, Strings{"A", "A", "A", "A"}), 0.75);
}

TEST(Accuracy, BalancedClassesGiveEqualWaUa) {
  const Strings labels = {"A", "A", "B", "B", "C", "C"}, preds = {"A", "B", "B", "B", "A", "C"};
  EXPECT_NEAR(weighted_accuracy(preds, labels), unweighted_accuracy(preds, labels), 1e-9);
}

TEST(Accuracy, LengthMismatchAndEmptyRejected) {
  EXPECT_THROW(weighted_accuracy(Strings{"A"}, Strings{"A", "B"}), ShapeError);
  EXPECT_THROW(unweighted_accuracy(Strings{}, Strings{}), ShapeError);
}

TEST(Confusion, HandCountedRows) {
  const auto cm = confusion(Strings{"A", "B", "B"}, Strings{"A", "A", "B"}, {"A", "B"});
  EXPECT_EQ(cm.counts, (std::vector<std::vector<std::size_t>>{{1, 1}, {0, 1}}));
  EXPECT_EQ(cm.row_percent, (std::vector<std::vector<double>>{{50, 50}, {0, 100}}));
  EXPECT_EQ(cm.total(), 3u);
  EXPECT_EQ(cm.correct(), 2u);
}

TEST(Confusion, PerfectDiagonalAndEmptyRows) {
  const auto cm = confusion(Strings{"A", "C"}, Strings{"A", "C"}, {"A", "B", "C"});
  EXPECT_EQ(cm.row_percent[0][0], 100.0);
  EXPECT_EQ(cm.row_percent[2][2], 100.0);
  EXPECT_EQ(cm.row_percent[0][2], 0.0);
  EXPECT_EQ(cm.empty_rows, (std::vector<bool>{false, true, false}));
}

TEST(Confusion, UnknownLabelRejected) {
  EXPECT_THROW(confusion(Strings{"A"}, Strings{"Z"}, {"A", "B"}), LabelError);
}

TEST(Confusion, JsonRoundTripAndPooling) {
  const auto a = confusion(Strings{"A", "B"}, Strings{"A", "A"}, {"A", "B"});
  const auto b = confusion(Strings{"B"}, Strings{"B"}, {"A", "B"});
  EXPECT_EQ(ConfusionMatrix::from_json(a.to_json()), a);
  const std::vector<ConfusionMatrix> both = {a, b};
  const auto pooled = pool(both);
  EXPECT_EQ(pooled.counts, (std::vector<std::vector<std::size_t>>{{1, 1}, {0, 1}}));
}

TEST(Aggregate, MeanAndSampleStd) {
  const auto rep = aggregate({fold_with(0.90, 0), fold_with(0.92, 1), fold_with(0.94, 2)}, {});
  EXPECT_EQ(format_percent(rep.wa_mean), "92.00");
  ASSERT_TRUE(rep.wa_std.has_value());
  EXPECT_EQ(format_percent(*rep.wa_std), "2.00");
}

TEST(Aggregate, SingleFoldOmitsStd) {
  const auto rep = aggregate({fold_with(0.8)}, {});
  EXPECT_FALSE(rep.wa_std.has_value());
  EXPECT_EQ(rep.summary(), "WA 80.00 | UA 80.00");
}

TEST(Aggregate, EqualFoldsZeroStd) {
  const auto rep = aggregate({fold_with(0.7), fold_with(0.7), fold_with(0.7)}, {});
  EXPECT_EQ(format_percent(*rep.wa_std), "0.00");
}

TEST(Aggregate, HeterogeneousLabelSetsRejected) {
  EXPECT_THROW(aggregate({fold_with(0.9, 0, {"A", "B"}), fold_with(0.9, 1, {"A", "C"})}, {}), ConfigError);
  EXPECT_THROW(aggregate({}, {}), ConfigError);
}

TEST(FormatPercent, TwoDecimals) {
  EXPECT_EQ(format_percent(11.0 / 12.0), "91.67");
  EXPECT_EQ(format_percent(1.0), "100.00");
}

TEST(Report, RoundTripMarkdownAndFileStem) {
  RunMetadata meta;
  meta.dataset = "savee";
  meta.checkpoint_id = "facebook/wav2vec2-base";
  meta.checkpoint_hash = "ff00";
  meta.split_mode = "kfold";
  meta.seed = 3;
  meta.config_hash = "0123456789abcdef";
  meta.config = {{"folds", 5}};
  FoldResult f;
  f.confusion = confusion(Strings{"surprise", "anger"}, Strings{"surprise", "surprise"}, {"anger", "surprise"});
  f.wa = 0.5;
  f.ua = 0.5;
  const auto rep = aggregate({f, f}, meta);
  EXPECT_EQ(EvalReport::from_json(nlohmann::json::parse(rep.to_json().dump())), rep);
  const auto md = rep.render_markdown();
  EXPECT_NE(md.find("0123456789abcdef"), std::string::npos);
  EXPECT_NE(md.find("wonder"), std::string::npos);
  EXPECT_NE(md.find("50.00"), std::string::npos);
  EXPECT_EQ(report_stem(meta), "report_savee_facebook-wav2vec2-base_kfold_seed3");
  const auto j = rep.to_json();
  EXPECT_TRUE(j.contains("metric_definitions"));
}

TEST(MetricProperties, RandomizedSuite) {
  const auto outcome = criteria::metric_split_properties(99);
  EXPECT_TRUE(outcome.passed()) << outcome.detail;
}

}  // namespace
}  // namespace ser
