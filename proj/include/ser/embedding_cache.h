// include/ser/embedding_cache.h

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

// On-disk cache of pooled utterance embeddings so head training never reruns
// the encoder. One directory holds `embeddings.jsonl`: a header line naming
// the encoder checkpoint and preprocessing, then one record per utterance
// (path, dataset, label, speaker, dim, float32 vector). Records are appended
// as they are computed, so an interrupted extraction resumes where it stopped.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

namespace ser {

struct CacheHeader {
  std::string dataset;
  std::vector<std::string> label_names;
  std::string checkpoint_id;
  std::string checkpoint_hash;
  /// Resample target, normalization flag and chunking that shaped the inputs.
  nlohmann::json preprocessing = nlohmann::json::object();
  std::size_t dim = 0;

  /// Hash over checkpoint hash and preprocessing; reuse requires equality.
  std::string config_hash() const;
  nlohmann::json to_json() const;
  static CacheHeader from_json(const nlohmann::json& j);
};

struct CachedEmbedding {
  std::string path;
  std::string dataset;
  std::string label;
  std::string speaker;
  std::vector<float> vector;
};

class EmbeddingCache {
 public:
  static constexpr const char* kFileName = "embeddings.jsonl";

  /// Opens the cache for appending, creating it when absent. An existing cache
  /// whose config hash differs is refused with ConfigError.
  static EmbeddingCache open(const std::filesystem::path& dir, const CacheHeader& header);

  /// Read-only load. A missing cache raises DataError telling the user to
  /// run `ser extract`.
  static EmbeddingCache load(const std::filesystem::path& dir);

  const CacheHeader& header() const { return header_; }
  bool contains(const std::string& path) const;
  std::size_t size() const;

  /// Appends and flushes one record; safe to call from several threads.
  void append(CachedEmbedding entry);

  /// All records ordered by path.
  std::vector<CachedEmbedding> entries() const;

 private:
  EmbeddingCache() = default;
  void read_file();
  void rewrite() const;

  std::filesystem::path file_;
  CacheHeader header_;
  std::map<std::string, CachedEmbedding> entries_;
  std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
};

}  // namespace ser
