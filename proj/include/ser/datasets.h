// include/ser/datasets.h

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

// Corpus discovery for RAVDESS, EMODB, SAVEE, AESDD and SHEMO, the utterance
// manifest format, and seeded class-stratified partitioning.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ser {

enum class DatasetKind { kRavdess, kEmodb, kSavee, kAesdd, kShemo };

/// Case-insensitive; throws ConfigError for unknown names.
DatasetKind parse_dataset_kind(std::string_view name);
std::string to_string(DatasetKind kind);

/// Ordered class names; the index is the class id used everywhere downstream.
const std::vector<std::string>& label_set(DatasetKind kind);

/// Published corpus size, when the corpus documents one.
std::optional<std::size_t> expected_corpus_size(DatasetKind kind);

struct UtteranceRecord {
  std::string path;
  std::string dataset;
  std::string label;
  std::string speaker;

  nlohmann::json to_json() const;
  static UtteranceRecord from_json(const nlohmann::json& j);
  bool operator==(const UtteranceRecord&) const = default;
};

enum class ParseStatus {
  kAccepted,
  kExcluded,     // valid file deliberately left out (song takes, SHEMO fear)
  kUnparseable,  // does not follow the corpus naming convention
};

struct ParseOutcome {
  ParseStatus status = ParseStatus::kUnparseable;
  UtteranceRecord record;
  std::string reason;
};

/// Labels one file from its path relative to the corpus root.
ParseOutcome parse_utterance(DatasetKind kind, const std::filesystem::path& relative);

struct ScanIssue {
  std::string path;
  std::string reason;
};

struct ScanReport {
  std::vector<UtteranceRecord> records;  // sorted by path
  std::vector<ScanIssue> excluded;
  std::vector<ScanIssue> unparseable;
};

/// Recursively labels every .wav file under root. Throws ConfigError when the
/// root is missing and EmptyDatasetError when nothing is accepted.
ScanReport scan_dataset(const std::filesystem::path& root, DatasetKind kind);

/// JSON-lines manifest: a header object, then one record per utterance.
void write_manifest(const std::filesystem::path& path, std::span<const UtteranceRecord> records,
                    const nlohmann::json& header);
std::vector<UtteranceRecord> read_manifest(const std::filesystem::path& path,
                                           nlohmann::json* header = nullptr);

/// Index sets into the item list, each sorted ascending.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per-class test count is round(count * ratio), clamped to [1, count - 1] and
/// adjusted on the largest classes so the total is round(n * ratio).
Split stratified_split(std::span<const std::size_t> labels, double test_ratio, std::uint64_t seed);

/// Class-stratified k-fold partition; every item is tested exactly once.
std::vector<Split> kfold(std::span<const std::size_t> labels, std::size_t k, std::uint64_t seed);

/// `repeats` stratified holdout splits with seeds base_seed, base_seed+1, ...
std::vector<Split> repeated_splits(std::span<const std::size_t> labels, double test_ratio,
                                   std::size_t repeats, std::uint64_t base_seed);

/// Speaker-disjoint variants: all utterances of a speaker land on one side.
std::vector<Split> speaker_kfold(std::span<const std::string> speakers, std::size_t k, std::uint64_t seed);
Split speaker_holdout(std::span<const std::string> speakers, double test_ratio, std::uint64_t seed);

}  // namespace ser
