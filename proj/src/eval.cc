// src/eval.cc

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

#include "ser/eval.h"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <map>
#include <sstream>

#include "ser/error.h"

namespace ser {

namespace {

void check_lengths(std::size_t preds, std::size_t labels) {
  if (preds != labels)
    throw ShapeError("prediction count " + std::to_string(preds) + " != label count " +
                     std::to_string(labels));
  if (labels == 0) throw ShapeError("metrics need at least one sample");
}

// Maps strings to indices in order of first appearance over labels then preds.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> index_strings(
    std::span<const std::string> preds, std::span<const std::string> labels) {
  std::map<std::string, std::size_t> ids;
  auto id = [&](const std::string& s) { return ids.emplace(s, ids.size()).first->second; };
  std::vector<std::size_t> l, p;
  for (const auto& s : labels) l.push_back(id(s));
  for (const auto& s : preds) p.push_back(id(s));
  return {p, l};
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

double weighted_accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels) {
  check_lengths(preds.size(), labels.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += preds[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double unweighted_accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels) {
  check_lengths(preds.size(), labels.size());
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> per_class;  // correct, total
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& [correct, total] = per_class[labels[i]];
    correct += preds[i] == labels[i];
    ++total;
  }
  double sum = 0.0;
  for (const auto& [cls, ct] : per_class)
    sum += static_cast<double>(ct.first) / static_cast<double>(ct.second);
  return sum / static_cast<double>(per_class.size());
}

double weighted_accuracy(std::span<const std::string> preds, std::span<const std::string> labels) {
  check_lengths(preds.size(), labels.size());
  auto [p, l] = index_strings(preds, labels);
  return weighted_accuracy(p, l);
}

double unweighted_accuracy(std::span<const std::string> preds, std::span<const std::string> labels) {
  check_lengths(preds.size(), labels.size());
  auto [p, l] = index_strings(preds, labels);
  return unweighted_accuracy(p, l);
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts)
    for (auto c : row) n += c;
  return n;
}

std::size_t ConfusionMatrix::correct() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) n += counts[i][i];
  return n;
}

nlohmann::json ConfusionMatrix::to_json() const {
  return {{"labels", labels}, {"counts", counts}, {"row_percent", row_percent}, {"empty_rows", empty_rows}};
}

ConfusionMatrix ConfusionMatrix::from_json(const nlohmann::json& j) {
  ConfusionMatrix m;
  m.labels = j.at("labels").get<std::vector<std::string>>();
  m.counts = j.at("counts").get<std::vector<std::vector<std::size_t>>>();
  m.row_percent = j.at("row_percent").get<std::vector<std::vector<double>>>();
  m.empty_rows = j.at("empty_rows").get<std::vector<bool>>();
  return m;
}

namespace {

ConfusionMatrix from_counts(std::vector<std::string> label_order,
                            std::vector<std::vector<std::size_t>> counts) {
  ConfusionMatrix m;
  const auto c = label_order.size();
  m.labels = std::move(label_order);
  m.counts = std::move(counts);
  m.row_percent.assign(c, std::vector<double>(c, 0.0));
  m.empty_rows.assign(c, false);
  for (std::size_t i = 0; i < c; ++i) {
    std::size_t row_total = 0;
    for (auto v : m.counts[i]) row_total += v;
    if (row_total == 0) {
      m.empty_rows[i] = true;
      continue;
    }
    for (std::size_t j = 0; j < c; ++j)
      m.row_percent[i][j] = 100.0 * static_cast<double>(m.counts[i][j]) / static_cast<double>(row_total);
  }
  return m;
}

}  // namespace

ConfusionMatrix confusion(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                          std::vector<std::string> label_order) {
  if (preds.size() != labels.size())
    throw ShapeError("prediction count " + std::to_string(preds.size()) + " != label count " +
                     std::to_string(labels.size()));
  const auto c = label_order.size();
  std::vector<std::vector<std::size_t>> counts(c, std::vector<std::size_t>(c, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= c || preds[i] >= c)
      throw LabelError("class index outside label order of size " + std::to_string(c));
    ++counts[labels[i]][preds[i]];
  }
  return from_counts(std::move(label_order), std::move(counts));
}

ConfusionMatrix confusion(std::span<const std::string> preds, std::span<const std::string> labels,
                          std::vector<std::string> label_order) {
  auto lookup = [&](const std::string& s) {
    auto it = std::find(label_order.begin(), label_order.end(), s);
    if (it == label_order.end()) throw LabelError("unknown label '" + s + "'");
    return static_cast<std::size_t>(it - label_order.begin());
  };
  std::vector<std::size_t> p, l;
  for (const auto& s : preds) p.push_back(lookup(s));
  for (const auto& s : labels) l.push_back(lookup(s));
  return confusion(p, l, std::move(label_order));
}

ConfusionMatrix pool(std::span<const ConfusionMatrix> matrices) {
  if (matrices.empty()) return {};
  const auto& labels = matrices.front().labels;
  std::vector<std::vector<std::size_t>> counts(labels.size(), std::vector<std::size_t>(labels.size(), 0));
  for (const auto& m : matrices) {
    if (m.labels != labels) throw ConfigError("cannot pool confusion matrices over different label sets");
    for (std::size_t i = 0; i < labels.size(); ++i)
      for (std::size_t j = 0; j < labels.size(); ++j) counts[i][j] += m.counts[i][j];
  }
  return from_counts(labels, std::move(counts));
}

EvalReport aggregate(std::vector<FoldResult> folds, RunMetadata meta) {
  if (folds.empty()) throw ConfigError("aggregate needs at least one fold");
  for (const auto& f : folds)
    if (f.confusion.labels != folds.front().confusion.labels)
      throw ConfigError("folds disagree on the label set");
  EvalReport r;
  r.meta = std::move(meta);
  std::vector<double> wa, ua;
  std::vector<ConfusionMatrix> matrices;
  for (const auto& f : folds) {
    wa.push_back(f.wa);
    ua.push_back(f.ua);
    matrices.push_back(f.confusion);
  }
  r.wa_mean = mean(wa);
  r.ua_mean = mean(ua);
  if (folds.size() >= 2) {
    r.wa_std = sample_std(wa);
    r.ua_std = sample_std(ua);
  }
  r.pooled = pool(matrices);
  r.folds = std::move(folds);
  return r;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
  return buf;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

std::string with_std(double mean, const std::optional<double>& std) {
  return std ? format_percent(mean) + " ± " + format_percent(*std) : format_percent(mean);
}

}  // namespace

std::string EvalReport::summary() const {
  return "WA " + with_std(wa_mean, wa_std) + " | UA " + with_std(ua_mean, ua_std);
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json folds_json = nlohmann::json::array();
  for (const auto& f : folds)
    folds_json.push_back({{"fold", f.fold},
                          {"train_size", f.train_size},
                          {"test_size", f.test_size},
                          {"wa", f.wa},
                          {"ua", f.ua},
                          {"confusion", f.confusion.to_json()}});
  return {
      {"dataset", meta.dataset},
      {"checkpoint_id", meta.checkpoint_id},
      {"checkpoint_hash", meta.checkpoint_hash},
      {"split_mode", meta.split_mode},
      {"seed", meta.seed},
      {"config_hash", meta.config_hash},
      {"config", meta.config},
      {"metric_definitions",
       {{"wa", "overall fraction of correct predictions"},
        {"ua", "macro average of per-class recall"},
        {"std", "sample standard deviation over folds (n-1 denominator)"}}},
      {"folds", folds_json},
      {"wa_mean", wa_mean},
      {"ua_mean", ua_mean},
      {"wa_std", optional_json(wa_std)},
      {"ua_std", optional_json(ua_std)},
      {"summary", summary()},
      {"pooled_confusion", pooled.to_json()},
  };
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  r.meta.dataset = j.at("dataset").get<std::string>();
  r.meta.checkpoint_id = j.at("checkpoint_id").get<std::string>();
  r.meta.checkpoint_hash = j.at("checkpoint_hash").get<std::string>();
  r.meta.split_mode = j.at("split_mode").get<std::string>();
  r.meta.seed = j.at("seed").get<std::uint64_t>();
  r.meta.config_hash = j.at("config_hash").get<std::string>();
  r.meta.config = j.at("config");
  for (const auto& f : j.at("folds")) {
    FoldResult fold;
    fold.fold = f.at("fold").get<std::size_t>();
    fold.train_size = f.at("train_size").get<std::size_t>();
    fold.test_size = f.at("test_size").get<std::size_t>();
    fold.wa = f.at("wa").get<double>();
    fold.ua = f.at("ua").get<double>();
    fold.confusion = ConfusionMatrix::from_json(f.at("confusion"));
    r.folds.push_back(std::move(fold));
  }
  r.wa_mean = j.at("wa_mean").get<double>();
  r.ua_mean = j.at("ua_mean").get<double>();
  r.wa_std = optional_from(j.at("wa_std"));
  r.ua_std = optional_from(j.at("ua_std"));
  r.pooled = ConfusionMatrix::from_json(j.at("pooled_confusion"));
  return r;
}

namespace {

void render_matrix(std::ostringstream& os, const ConfusionMatrix& m) {
  os << "| true \\ predicted |";
  for (const auto& l : m.labels) os << ' ' << l << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < m.labels.size(); ++i) os << "---:|";
  os << '\n';
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    os << "| " << m.labels[i] << (m.empty_rows[i] ? " (no samples)" : "") << " |";
    for (double v : m.row_percent[i]) os << ' ' << format_percent(v / 100.0) << " |";
    os << '\n';
  }
}

}  // namespace

std::string EvalReport::render_markdown() const {
  std::ostringstream os;
  os << "# Emotion recognition report: " << meta.dataset << "\n\n";
  os << "- checkpoint: " << meta.checkpoint_id << " (" << meta.checkpoint_hash.substr(0, 16) << ")\n";
  os << "- split mode: " << meta.split_mode << ", seed " << meta.seed << "\n";
  os << "- config hash: " << meta.config_hash << "\n";
  os << "- WA = overall accuracy, UA = mean per-class recall, ± = sample std over folds\n\n";
  os << "**" << summary() << "**\n\n";
  os << "| fold | train | test | WA | UA |\n|---:|---:|---:|---:|---:|\n";
  for (const auto& f : folds)
    os << "| " << f.fold << " | " << f.train_size << " | " << f.test_size << " | "
       << format_percent(f.wa) << " | " << format_percent(f.ua) << " |\n";
  os << "\n## Confusion matrix (row %, pooled over folds)\n\n";
  render_matrix(os, pooled);
  for (const auto& f : folds) {
    os << "\n## Fold " << f.fold << " confusion matrix (row %)\n\n";
    render_matrix(os, f.confusion);
  }
  const auto& labels = pooled.labels;
  if (std::find(labels.begin(), labels.end(), "surprise") != labels.end() ||
      std::find(labels.begin(), labels.end(), "surprised") != labels.end())
    os << "\nNote: the surprise class is labelled \"wonder\" in some published tables.\n";
  return os.str();
}

std::string report_stem(const RunMetadata& meta) {
  auto clean = [](std::string s) {
    for (char& c : s)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '-';
    return s;
  };
  return "report_" + clean(meta.dataset) + "_" + clean(meta.checkpoint_id) + "_" +
         clean(meta.split_mode) + "_seed" + std::to_string(meta.seed);
}

}  // namespace ser
