// src/embedding_cache.cc

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

#include "ser/embedding_cache.h"

#include <fstream>

#include "ser/error.h"
#include "ser/hash.h"

namespace ser {

namespace fs = std::filesystem;

namespace {

nlohmann::json record_json(const CachedEmbedding& e) {
  return {{"path", e.path},   {"dataset", e.dataset},       {"label", e.label},
          {"speaker", e.speaker}, {"dim", e.vector.size()}, {"vector", e.vector}};
}

}  // namespace

std::string CacheHeader::config_hash() const {
  const nlohmann::json key = {{"checkpoint_hash", checkpoint_hash}, {"preprocessing", preprocessing}};
  return short_hash(key.dump());
}

nlohmann::json CacheHeader::to_json() const {
  return {{"type", "ser-embedding-cache"},
          {"version", 1},
          {"dataset", dataset},
          {"label_names", label_names},
          {"checkpoint_id", checkpoint_id},
          {"checkpoint_hash", checkpoint_hash},
          {"preprocessing", preprocessing},
          {"dim", dim},
          {"config_hash", config_hash()}};
}

CacheHeader CacheHeader::from_json(const nlohmann::json& j) {
  if (j.value("type", "") != "ser-embedding-cache") throw ConfigError("not an embedding cache header");
  CacheHeader h;
  h.dataset = j.at("dataset").get<std::string>();
  h.label_names = j.at("label_names").get<std::vector<std::string>>();
  h.checkpoint_id = j.at("checkpoint_id").get<std::string>();
  h.checkpoint_hash = j.at("checkpoint_hash").get<std::string>();
  h.preprocessing = j.at("preprocessing");
  h.dim = j.at("dim").get<std::size_t>();
  if (j.contains("config_hash") && j.at("config_hash").get<std::string>() != h.config_hash())
    throw ConfigError("embedding cache header config hash does not match its contents");
  return h;
}

void EmbeddingCache::read_file() {
  std::ifstream in(file_);
  if (!in) throw DataError("cannot open embedding cache " + file_.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) lines.push_back(std::move(line));
  if (lines.empty()) throw ConfigError(file_.string() + " has no header");
  try {
    header_ = CacheHeader::from_json(nlohmann::json::parse(lines.front()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(file_.string() + ": malformed header: " + e.what());
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    try {
      const auto j = nlohmann::json::parse(lines[i]);
      CachedEmbedding e{j.at("path").get<std::string>(), j.at("dataset").get<std::string>(),
                        j.at("label").get<std::string>(), j.at("speaker").get<std::string>(),
                        j.at("vector").get<std::vector<float>>()};
      if (e.vector.size() != j.at("dim").get<std::size_t>() || e.vector.size() != header_.dim)
        throw DataError(file_.string() + ":" + std::to_string(i + 1) + ": vector length disagrees with dim");
      entries_[e.path] = std::move(e);
    } catch (const nlohmann::json::exception& e) {
      // A torn final line is what an interrupted run leaves behind.
      if (i + 1 == lines.size()) break;
      throw DataError(file_.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
}

EmbeddingCache EmbeddingCache::open(const fs::path& dir, const CacheHeader& header) {
  fs::create_directories(dir);
  EmbeddingCache cache;
  cache.file_ = dir / kFileName;
  if (fs::exists(cache.file_)) {
    cache.read_file();
    if (cache.header_.config_hash() != header.config_hash())
      throw ConfigError("embedding cache " + cache.file_.string() + " was built with config " +
                        cache.header_.config_hash() + " (checkpoint " + cache.header_.checkpoint_id +
                        "), refusing to mix it with config " + header.config_hash() +
                        "; use a different --cache-dir");
    if (cache.header_.dataset != header.dataset || cache.header_.label_names != header.label_names)
      throw ConfigError("embedding cache " + cache.file_.string() + " belongs to dataset " + cache.header_.dataset);
    cache.rewrite();
  } else {
    cache.header_ = header;
    std::ofstream out(cache.file_);
    out << header.to_json().dump() << '\n';
    if (!out) throw ConfigError("cannot create embedding cache " + cache.file_.string());
  }
  return cache;
}

void EmbeddingCache::rewrite() const {
  // Drops a torn trailing record left by an interrupted run.
  const fs::path tmp = file_.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << header_.to_json().dump() << '\n';
    for (const auto& [path, e] : entries_) out << record_json(e).dump() << '\n';
    if (!out) throw DataError("cannot rewrite " + file_.string());
  }
  fs::rename(tmp, file_);
}

EmbeddingCache EmbeddingCache::load(const fs::path& dir) {
  EmbeddingCache cache;
  cache.file_ = dir / kFileName;
  if (!fs::exists(cache.file_))
    throw DataError("no embedding cache at " + cache.file_.string() +
                    "; run `ser extract --manifest <manifest> --checkpoint <archive> --cache-dir " +
                    dir.string() + "` first");
  cache.read_file();
  return cache;
}

bool EmbeddingCache::contains(const std::string& path) const {
  std::lock_guard lock(*mutex_);
  return entries_.count(path) > 0;
}

std::size_t EmbeddingCache::size() const {
  std::lock_guard lock(*mutex_);
  return entries_.size();
}

void EmbeddingCache::append(CachedEmbedding entry) {
  if (entry.vector.size() != header_.dim)
    throw ShapeError("embedding of dim " + std::to_string(entry.vector.size()) + " for a cache of dim " +
                     std::to_string(header_.dim));
  const auto j = record_json(entry);
  std::lock_guard lock(*mutex_);
  std::ofstream out(file_, std::ios::app);
  out << j.dump() << '\n';
  out.flush();
  if (!out) throw DataError("failed appending to " + file_.string());
  entries_[entry.path] = std::move(entry);
}

std::vector<CachedEmbedding> EmbeddingCache::entries() const {
  std::lock_guard lock(*mutex_);
  std::vector<CachedEmbedding> out;
  out.reserve(entries_.size());
  for (const auto& [path, e] : entries_) out.push_back(e);
  return out;
}

}  // namespace ser
