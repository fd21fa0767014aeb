// src/datasets.cc

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

#include "ser/datasets.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "ser/error.h"
#include "ser/random.h"

namespace ser {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

ParseOutcome accepted(DatasetKind kind, std::string label, std::string speaker) {
  ParseOutcome o;
  o.status = ParseStatus::kAccepted;
  o.record.dataset = to_string(kind);
  o.record.label = std::move(label);
  o.record.speaker = std::move(speaker);
  return o;
}

ParseOutcome rejected(ParseStatus status, std::string reason) {
  ParseOutcome o;
  o.status = status;
  o.reason = std::move(reason);
  return o;
}

// 03-01-06-01-02-01-12: modality, vocal channel, emotion, intensity,
// statement, repetition, actor.
ParseOutcome parse_ravdess(const fs::path& rel) {
  static const std::map<std::string, std::string> kEmotion = {
      {"01", "neutral"}, {"02", "calm"},    {"03", "happy"},   {"04", "sad"},
      {"05", "angry"},   {"06", "fearful"}, {"07", "disgust"}, {"08", "surprised"}};
  const std::string stem = rel.stem().string();
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (std::size_t pos; (pos = stem.find('-', start)) != std::string::npos; start = pos + 1)
    fields.push_back(stem.substr(start, pos - start));
  fields.push_back(stem.substr(start));
  if (fields.size() != 7 ||
      !std::all_of(fields.begin(), fields.end(), [](const std::string& f) { return f.size() == 2 && all_digits(f); }))
    return rejected(ParseStatus::kUnparseable, "expected seven hyphenated two-digit fields");
  if (fields[1] == "02") return rejected(ParseStatus::kExcluded, "song recording (vocal channel 02)");
  if (fields[1] != "01") return rejected(ParseStatus::kUnparseable, "unknown vocal channel " + fields[1]);
  auto it = kEmotion.find(fields[2]);
  if (it == kEmotion.end()) return rejected(ParseStatus::kUnparseable, "unknown emotion code " + fields[2]);
  return accepted(DatasetKind::kRavdess, it->second, fields[6]);
}

// 03a01Fa: speaker, text code, emotion letter, version.
ParseOutcome parse_emodb(const fs::path& rel) {
  static const std::map<char, std::string> kEmotion = {
      {'W', "anger"},     {'L', "boredom"}, {'E', "disgust"}, {'A', "fear"},
      {'F', "happiness"}, {'T', "sadness"}, {'N', "neutral"}};
  const std::string stem = rel.stem().string();
  if (stem.size() != 7 || !all_digits(stem.substr(0, 2)) || !std::isalpha(static_cast<unsigned char>(stem[2])) ||
      !all_digits(stem.substr(3, 2)))
    return rejected(ParseStatus::kUnparseable, "expected <speaker:2><text:3><emotion:1><version:1>");
  auto it = kEmotion.find(stem[5]);
  if (it == kEmotion.end()) return rejected(ParseStatus::kUnparseable, std::string("unknown emotion letter ") + stem[5]);
  return accepted(DatasetKind::kEmodb, it->second, stem.substr(0, 2));
}

// <speaker dir>/sa01.wav or DC_sa01.wav.
ParseOutcome parse_savee(const fs::path& rel) {
  static const std::map<std::string, std::string> kEmotion = {
      {"a", "anger"},     {"d", "disgust"}, {"f", "fear"},    {"h", "happiness"},
      {"sa", "sadness"},  {"su", "surprise"}, {"n", "neutral"}};
  std::string stem = rel.stem().string();
  std::string speaker;
  if (auto us = stem.find('_'); us != std::string::npos) {
    speaker = stem.substr(0, us);
    stem = stem.substr(us + 1);
  } else if (rel.has_parent_path()) {
    speaker = rel.parent_path().filename().string();
  }
  const bool speaker_ok = speaker.size() == 2 && std::all_of(speaker.begin(), speaker.end(), [](char c) {
                            return std::isupper(static_cast<unsigned char>(c));
                          });
  if (!speaker_ok) return rejected(ParseStatus::kUnparseable, "no speaker directory or prefix");
  std::size_t digits = 0;
  while (digits < stem.size() && !std::isdigit(static_cast<unsigned char>(stem[digits]))) ++digits;
  auto it = kEmotion.find(stem.substr(0, digits));
  if (it == kEmotion.end() || !all_digits(stem.substr(digits)))
    return rejected(ParseStatus::kUnparseable, "expected <emotion letters><number>");
  return accepted(DatasetKind::kSavee, it->second, speaker);
}

// <emotion dir>/a01 (1).wav; the parenthesised number is the speaker.
ParseOutcome parse_aesdd(const fs::path& rel) {
  const auto& labels = label_set(DatasetKind::kAesdd);
  if (!rel.has_parent_path()) return rejected(ParseStatus::kUnparseable, "not inside an emotion directory");
  const std::string dir = lower(rel.parent_path().filename().string());
  if (std::find(labels.begin(), labels.end(), dir) == labels.end())
    return rejected(ParseStatus::kUnparseable, "unknown emotion directory '" + dir + "'");
  const std::string stem = rel.stem().string();
  std::string speaker = "unknown";
  const auto open = stem.find('('), close = stem.find(')');
  if (open != std::string::npos && close != std::string::npos && close > open + 1 &&
      all_digits(stem.substr(open + 1, close - open - 1)))
    speaker = stem.substr(open + 1, close - open - 1);
  return accepted(DatasetKind::kAesdd, dir, speaker);
}

// F21A01: gender, speaker number, emotion letter, utterance number.
ParseOutcome parse_shemo(const fs::path& rel) {
  static const std::map<char, std::string> kEmotion = {
      {'A', "anger"}, {'H', "happiness"}, {'S', "sadness"}, {'W', "surprise"}, {'N', "neutral"}};
  const std::string stem = rel.stem().string();
  if (stem.size() != 6 || (stem[0] != 'F' && stem[0] != 'M') || !all_digits(stem.substr(1, 2)) ||
      !all_digits(stem.substr(4, 2)))
    return rejected(ParseStatus::kUnparseable, "expected <F|M><speaker:2><emotion:1><number:2>");
  if (stem[3] == 'F') return rejected(ParseStatus::kExcluded, "fear utterances are excluded");
  auto it = kEmotion.find(stem[3]);
  if (it == kEmotion.end()) return rejected(ParseStatus::kUnparseable, std::string("unknown emotion letter ") + stem[3]);
  return accepted(DatasetKind::kShemo, it->second, stem.substr(0, 3));
}

}  // namespace

DatasetKind parse_dataset_kind(std::string_view name) {
  const auto n = lower(name);
  if (n == "ravdess") return DatasetKind::kRavdess;
  if (n == "emodb") return DatasetKind::kEmodb;
  if (n == "savee") return DatasetKind::kSavee;
  if (n == "aesdd") return DatasetKind::kAesdd;
  if (n == "shemo") return DatasetKind::kShemo;
  throw ConfigError("unknown dataset kind '" + std::string(name) +
                    "' (expected ravdess, emodb, savee, aesdd or shemo)");
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kRavdess: return "ravdess";
    case DatasetKind::kEmodb: return "emodb";
    case DatasetKind::kSavee: return "savee";
    case DatasetKind::kAesdd: return "aesdd";
    case DatasetKind::kShemo: return "shemo";
  }
  return "unknown";
}

const std::vector<std::string>& label_set(DatasetKind kind) {
  static const std::vector<std::string> kRavdess = {"neutral", "calm",    "happy",   "sad",
                                                    "angry",   "fearful", "disgust", "surprised"};
  static const std::vector<std::string> kEmodb = {"anger",     "boredom", "disgust", "fear",
                                                  "happiness", "sadness", "neutral"};
  static const std::vector<std::string> kSavee = {"anger",   "disgust",  "fear",   "happiness",
                                                  "sadness", "surprise", "neutral"};
  static const std::vector<std::string> kAesdd = {"anger", "disgust", "fear", "happiness", "sadness"};
  static const std::vector<std::string> kShemo = {"anger", "happiness", "sadness", "surprise", "neutral"};
  switch (kind) {
    case DatasetKind::kRavdess: return kRavdess;
    case DatasetKind::kEmodb: return kEmodb;
    case DatasetKind::kSavee: return kSavee;
    case DatasetKind::kAesdd: return kAesdd;
    case DatasetKind::kShemo: return kShemo;
  }
  throw ConfigError("unknown dataset kind");
}

std::optional<std::size_t> expected_corpus_size(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kRavdess: return 1440;
    case DatasetKind::kEmodb: return 535;
    case DatasetKind::kSavee: return 480;
    case DatasetKind::kAesdd: return 500;
    // Full corpus including the excluded fear class.
    case DatasetKind::kShemo: return 3000;
  }
  return std::nullopt;
}

nlohmann::json UtteranceRecord::to_json() const {
  return {{"path", path}, {"dataset", dataset}, {"label", label}, {"speaker", speaker}};
}

UtteranceRecord UtteranceRecord::from_json(const nlohmann::json& j) {
  return {j.at("path").get<std::string>(), j.at("dataset").get<std::string>(),
          j.at("label").get<std::string>(), j.at("speaker").get<std::string>()};
}

ParseOutcome parse_utterance(DatasetKind kind, const fs::path& relative) {
  switch (kind) {
    case DatasetKind::kRavdess: return parse_ravdess(relative);
    case DatasetKind::kEmodb: return parse_emodb(relative);
    case DatasetKind::kSavee: return parse_savee(relative);
    case DatasetKind::kAesdd: return parse_aesdd(relative);
    case DatasetKind::kShemo: return parse_shemo(relative);
  }
  throw ConfigError("unknown dataset kind");
}

ScanReport scan_dataset(const fs::path& root, DatasetKind kind) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw ConfigError("dataset root " + root.string() + " is not a directory");
  const fs::path base = fs::absolute(root).lexically_normal();
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(base, fs::directory_options::follow_directory_symlink)) {
    if (entry.is_regular_file() && lower(entry.path().extension().string()) == ".wav")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  ScanReport report;
  for (const auto& file : files) {
    auto outcome = parse_utterance(kind, file.lexically_relative(base));
    switch (outcome.status) {
      case ParseStatus::kAccepted:
        outcome.record.path = file.string();
        report.records.push_back(std::move(outcome.record));
        break;
      case ParseStatus::kExcluded:
        report.excluded.push_back({file.string(), outcome.reason});
        break;
      case ParseStatus::kUnparseable:
        report.unparseable.push_back({file.string(), outcome.reason});
        break;
    }
  }
  if (report.records.empty())
    throw EmptyDatasetError("no " + to_string(kind) + " utterances found under " + base.string());
  return report;
}

void write_manifest(const fs::path& path, std::span<const UtteranceRecord> records,
                    const nlohmann::json& header) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write manifest " + path.string());
  nlohmann::json h = header.is_object() ? header : nlohmann::json::object();
  h["type"] = "ser-manifest";
  h["version"] = 1;
  h["count"] = records.size();
  out << h.dump() << '\n';
  for (const auto& r : records) out << r.to_json().dump() << '\n';
  if (!out) throw ConfigError("failed writing manifest " + path.string());
}

std::vector<UtteranceRecord> read_manifest(const fs::path& path, nlohmann::json* header) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  std::string line;
  std::vector<UtteranceRecord> records;
  std::size_t line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      if (line_no == 1) {
        if (j.value("type", "") != "ser-manifest") throw ConfigError(path.string() + " is not an utterance manifest");
        if (header) *header = j;
        continue;
      }
      records.push_back(UtteranceRecord::from_json(j));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
  }
  return records;
}

namespace {

std::map<std::size_t, std::vector<std::size_t>> by_class(std::span<const std::size_t> labels) {
  std::map<std::size_t, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < labels.size(); ++i) classes[labels[i]].push_back(i);
  return classes;
}

Split from_membership(const std::vector<bool>& in_test) {
  Split s;
  for (std::size_t i = 0; i < in_test.size(); ++i) (in_test[i] ? s.test : s.train).push_back(i);
  return s;
}

}  // namespace

Split stratified_split(std::span<const std::size_t> labels, double test_ratio, std::uint64_t seed) {
  if (!(test_ratio > 0.0 && test_ratio < 1.0)) throw StratifyError("test ratio must lie in (0, 1)");
  auto classes = by_class(labels);
  for (const auto& [cls, items] : classes)
    if (items.size() < 2)
      throw StratifyError("class " + std::to_string(cls) + " has fewer than 2 items");

  std::map<std::size_t, std::size_t> quota;
  std::size_t assigned = 0;
  for (const auto& [cls, items] : classes) {
    const auto n = static_cast<long long>(items.size());
    quota[cls] = static_cast<std::size_t>(std::clamp(std::llround(n * test_ratio), 1LL, n - 1));
    assigned += quota[cls];
  }
  const auto target = static_cast<std::size_t>(std::llround(static_cast<double>(labels.size()) * test_ratio));

  std::vector<std::size_t> largest;
  for (const auto& [cls, items] : classes) largest.push_back(cls);
  std::stable_sort(largest.begin(), largest.end(),
                   [&](std::size_t a, std::size_t b) { return classes[a].size() > classes[b].size(); });
  while (assigned != target) {
    bool moved = false;
    for (std::size_t cls : largest) {
      if (assigned == target) break;
      auto& q = quota[cls];
      if (assigned < target && q + 1 < classes[cls].size()) {
        ++q, ++assigned, moved = true;
      } else if (assigned > target && q > 1) {
        --q, --assigned, moved = true;
      }
    }
    if (!moved) break;
  }

  Rng rng(seed);
  std::vector<bool> in_test(labels.size(), false);
  for (auto& [cls, items] : classes) {
    rng.shuffle(std::span<std::size_t>(items));
    for (std::size_t i = 0; i < quota[cls]; ++i) in_test[items[i]] = true;
  }
  return from_membership(in_test);
}

std::vector<Split> kfold(std::span<const std::size_t> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw StratifyError("k-fold needs k >= 2");
  auto classes = by_class(labels);
  for (const auto& [cls, items] : classes)
    if (items.size() < k)
      throw StratifyError("class " + std::to_string(cls) + " has " + std::to_string(items.size()) +
                          " items, fewer than k=" + std::to_string(k));
  Rng rng(seed);
  std::vector<std::size_t> fold_of(labels.size(), 0);
  std::size_t offset = 0;
  for (auto& [cls, items] : classes) {
    rng.shuffle(std::span<std::size_t>(items));
    for (std::size_t i = 0; i < items.size(); ++i) fold_of[items[i]] = (offset + i) % k;
    offset += items.size();
  }
  std::vector<Split> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<bool> in_test(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) in_test[i] = fold_of[i] == f;
    folds[f] = from_membership(in_test);
  }
  return folds;
}

std::vector<Split> repeated_splits(std::span<const std::size_t> labels, double test_ratio,
                                   std::size_t repeats, std::uint64_t base_seed) {
  std::vector<Split> out;
  for (std::size_t r = 0; r < repeats; ++r) out.push_back(stratified_split(labels, test_ratio, base_seed + r));
  return out;
}

namespace {

std::vector<std::string> shuffled_speakers(std::span<const std::string> speakers, std::uint64_t seed) {
  std::vector<std::string> unique(speakers.begin(), speakers.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(unique));
  return unique;
}

}  // namespace

std::vector<Split> speaker_kfold(std::span<const std::string> speakers, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw StratifyError("k-fold needs k >= 2");
  const auto order = shuffled_speakers(speakers, seed);
  if (order.size() < k)
    throw StratifyError(std::to_string(order.size()) + " speakers cannot fill " + std::to_string(k) + " folds");
  std::map<std::string, std::size_t> count;
  for (const auto& s : speakers) ++count[s];
  // Greedy: each speaker joins the currently smallest fold.
  std::vector<std::size_t> fold_size(k, 0);
  std::map<std::string, std::size_t> fold_of;
  for (const auto& s : order) {
    const auto f = static_cast<std::size_t>(std::min_element(fold_size.begin(), fold_size.end()) - fold_size.begin());
    fold_of[s] = f;
    fold_size[f] += count[s];
  }
  std::vector<Split> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<bool> in_test(speakers.size());
    for (std::size_t i = 0; i < speakers.size(); ++i) in_test[i] = fold_of[speakers[i]] == f;
    folds[f] = from_membership(in_test);
  }
  return folds;
}

Split speaker_holdout(std::span<const std::string> speakers, double test_ratio, std::uint64_t seed) {
  if (!(test_ratio > 0.0 && test_ratio < 1.0)) throw StratifyError("test ratio must lie in (0, 1)");
  const auto order = shuffled_speakers(speakers, seed);
  if (order.size() < 2) throw StratifyError("speaker-disjoint split needs at least two speakers");
  std::map<std::string, std::size_t> count;
  for (const auto& s : speakers) ++count[s];
  const auto target = static_cast<std::size_t>(std::llround(static_cast<double>(speakers.size()) * test_ratio));
  std::map<std::string, bool> test_speaker;
  std::size_t taken = 0;
  for (std::size_t i = 0; i + 1 < order.size() && (taken == 0 || taken < target); ++i) {
    test_speaker[order[i]] = true;
    taken += count[order[i]];
  }
  std::vector<bool> in_test(speakers.size());
  for (std::size_t i = 0; i < speakers.size(); ++i) in_test[i] = test_speaker.count(speakers[i]) > 0;
  return from_membership(in_test);
}

}  // namespace ser
