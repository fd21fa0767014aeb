// src/cli.cc

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

#include "ser/cli.h"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "ser/classifier_head.h"
#include "ser/datasets.h"
#include "ser/embedding_cache.h"
#include "ser/encoder.h"
#include "ser/error.h"
#include "ser/experiment.h"
#include "ser/hash.h"

namespace ser {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct ScanArgs {
  std::string root, kind, out;
  bool strict = false;
};

struct ExtractArgs {
  std::string manifest, checkpoint, cache_dir;
  std::size_t jobs = 1;
};

struct EvalArgs {
  std::string cache_dir, split = "kfold", out = "results", head_out;
  EvalConfig config;
};

struct PredictArgs {
  std::string checkpoint, head;
  std::vector<std::string> paths;
};

fs::path resolve_cache_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kCacheDirEnv); env && *env) return env;
  throw ConfigError(std::string("no cache directory: pass --cache-dir or set ") + kCacheDirEnv);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
  if (!f.flush()) throw ConfigError("failed writing " + path.string());
}

int cmd_scan(const ScanArgs& a, std::ostream& out, std::ostream& err) {
  const auto kind = parse_dataset_kind(a.kind);
  const auto report = scan_dataset(a.root, kind);
  for (const auto& issue : report.unparseable)
    err << "unparseable: " << issue.path << " (" << issue.reason << ")\n";
  if (a.strict && !report.unparseable.empty()) {
    err << "error: " << report.unparseable.size() << " unparseable file(s); manifest not written\n";
    return kExitPartial;
  }
  // The SHEMO reference size counts the fear utterances that scanning drops.
  const std::size_t found = report.records.size() + (kind == DatasetKind::kShemo ? report.excluded.size() : 0);
  if (const auto expected = expected_corpus_size(kind); expected && *expected != found)
    err << "warning: " << to_string(kind) << " normally has " << *expected << " utterances, found " << found << "\n";

  const json header = {{"dataset", to_string(kind)},
                       {"root", fs::absolute(a.root).lexically_normal().string()},
                       {"label_names", label_set(kind)},
                       {"excluded", report.excluded.size()},
                       {"unparseable", report.unparseable.size()}};
  write_manifest(a.out, report.records, header);
  out << "scanned " << report.records.size() << " utterances (" << report.excluded.size() << " excluded, "
      << report.unparseable.size() << " unparseable) -> " << a.out << "\n";
  return kExitOk;
}

json preprocessing_of(const EncoderModel& model) {
  const auto& m = model.manifest();
  return {{"sample_rate", m.expected_sample_rate},
          {"normalize_input", m.normalize_input},
          {"chunk_seconds", kMaxChunkSeconds},
          {"pooling", "mean"}};
}

int cmd_extract(const ExtractArgs& a, std::ostream& out, std::ostream& err) {
  json mheader;
  const auto records = read_manifest(a.manifest, &mheader);
  const auto kind = parse_dataset_kind(mheader.value("dataset", std::string{}));
  const auto dir = resolve_cache_dir(a.cache_dir);
  const auto model = EncoderModel::load(a.checkpoint);

  CacheHeader header;
  header.dataset = to_string(kind);
  header.label_names = label_set(kind);
  header.checkpoint_id = model.manifest().checkpoint_id;
  header.checkpoint_hash = model.checkpoint_hash();
  header.preprocessing = preprocessing_of(model);
  header.dim = model.manifest().hidden_dim;
  auto cache = EmbeddingCache::open(dir, header);

  std::vector<const UtteranceRecord*> pending;
  for (const auto& r : records)
    if (!cache.contains(r.path)) pending.push_back(&r);
  const std::size_t reused = records.size() - pending.size();

  std::atomic<std::size_t> next{0};
  std::mutex failures_mutex;
  std::vector<std::pair<std::string, std::string>> failures;
  auto worker = [&] {
    for (std::size_t i = next++; i < pending.size(); i = next++) {
      const auto& r = *pending[i];
      try {
        const auto pooled = mean_pool(model.extract(read_wav(r.path)));
        cache.append({r.path, r.dataset, r.label, r.speaker, pooled.values});
      } catch (const std::exception& e) {
        std::lock_guard lock(failures_mutex);
        failures.emplace_back(r.path, e.what());
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(a.jobs, 1, std::max<std::size_t>(1, pending.size()));
  std::vector<std::jthread> threads;
  for (std::size_t j = 1; j < jobs; ++j) threads.emplace_back(worker);
  worker();
  threads.clear();

  std::sort(failures.begin(), failures.end());
  for (const auto& [path, what] : failures) err << "failed: " << path << ": " << what << "\n";
  out << "extracted " << pending.size() - failures.size() << ", reused " << reused << ", failed "
      << failures.size() << " -> " << (dir / EmbeddingCache::kFileName).string() << " (config "
      << header.config_hash() << ")\n";
  return failures.empty() ? kExitOk : kExitPartial;
}

EmbeddingSet embedding_set(const EmbeddingCache& cache) {
  EmbeddingSet set;
  set.label_names = cache.header().label_names;
  for (const auto& e : cache.entries()) {
    const auto it = std::find(set.label_names.begin(), set.label_names.end(), e.label);
    if (it == set.label_names.end()) throw LabelError("cached label '" + e.label + "' not in label set");
    LabeledEmbedding ex;
    ex.embedding.values = e.vector;
    ex.label = static_cast<std::size_t>(it - set.label_names.begin());
    set.items.push_back(std::move(ex));
    set.speakers.push_back(e.speaker);
  }
  return set;
}

RunMetadata cache_metadata(const EmbeddingCache& cache) {
  RunMetadata meta;
  meta.dataset = cache.header().dataset;
  meta.checkpoint_id = cache.header().checkpoint_id;
  meta.checkpoint_hash = cache.header().checkpoint_hash;
  meta.config = {{"cache_config_hash", cache.header().config_hash()},
                 {"preprocessing", cache.header().preprocessing}};
  return meta;
}

int cmd_evaluate(EvalArgs a, std::ostream& out) {
  a.config.split_mode = parse_split_mode(a.split);
  a.config.train.validate();
  const auto cache = EmbeddingCache::load(resolve_cache_dir(a.cache_dir));
  const auto report = run_evaluation(embedding_set(cache), a.config, cache_metadata(cache));

  const fs::path dir(a.out);
  const auto stem = report_stem(report.meta);
  write_text(dir / (stem + ".json"), report.to_json().dump(2) + "\n");
  write_text(dir / (stem + ".md"), report.render_markdown());
  out << report.summary() << "\n" << (dir / (stem + ".json")).string() << "\n";
  return kExitOk;
}

int cmd_train(EvalArgs a, std::ostream& out) {
  if (a.head_out.empty()) throw ConfigError("--out is required for train");
  a.config.train.validate();
  const auto cache = EmbeddingCache::load(resolve_cache_dir(a.cache_dir));
  const auto set = embedding_set(cache);
  std::vector<std::size_t> all(set.items.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto result = fit_head(set, all, a.config, 0);

  auto meta = cache_metadata(cache);
  json config = a.config.train.to_json();
  config["seed"] = a.config.seed;
  config["validation_ratio"] = a.config.validation_ratio;
  json metadata = {{"dataset", meta.dataset},
                   {"checkpoint_id", meta.checkpoint_id},
                   {"checkpoint_hash", meta.checkpoint_hash},
                   {"cache_config_hash", meta.config["cache_config_hash"]},
                   {"train_config", config},
                   {"best_epoch", result.best_epoch}};
  metadata["config_hash"] = short_hash(metadata.dump());
  if (fs::path(a.head_out).has_parent_path()) fs::create_directories(fs::path(a.head_out).parent_path());
  save_head(a.head_out, result.head, metadata);
  out << "trained head on " << set.items.size() << " embeddings (best epoch " << result.best_epoch
      << ") -> " << a.head_out << " (config " << metadata["config_hash"].get<std::string>() << ")\n";
  return kExitOk;
}

std::vector<std::string> expand_paths(const std::vector<std::string>& inputs) {
  std::vector<std::string> files;
  for (const auto& input : inputs) {
    std::error_code ec;
    if (fs::is_directory(input, ec)) {
      std::vector<std::string> found;
      for (const auto& entry : fs::recursive_directory_iterator(input, ec)) {
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (entry.is_regular_file() && ext == ".wav") found.push_back(entry.path().string());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(input);
    }
  }
  return files;
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const auto model = EncoderModel::load(a.checkpoint);
  json metadata;
  const auto head = load_head(a.head, &metadata);
  if (metadata.contains("checkpoint_hash") && metadata["checkpoint_hash"] != model.checkpoint_hash())
    throw ConfigError("head " + a.head + " was trained on encoder " +
                      metadata["checkpoint_hash"].get<std::string>() + ", not " + model.checkpoint_hash());
  if (head.input_dim() != model.manifest().hidden_dim)
    throw ConfigError("head expects " + std::to_string(head.input_dim()) + "-dim embeddings, encoder gives " +
                      std::to_string(model.manifest().hidden_dim));

  int status = kExitOk;
  for (const auto& path : expand_paths(a.paths)) {
    nlohmann::ordered_json line = {{"path", path}};
    try {
      const auto p = predict(model, head, read_wav(path));
      nlohmann::ordered_json probs = nlohmann::ordered_json::object();
      for (std::size_t c = 0; c < head.label_names.size(); ++c) probs[head.label_names[c]] = p.probabilities[c];
      line["label"] = p.label;
      line["probabilities"] = probs;
    } catch (const std::exception& e) {
      line["error"] = e.what();
      status = kExitPartial;
    }
    out << line.dump() << "\n";
  }
  return status;
}

std::string error_kind(const std::exception& e) {
#define SER_KIND(T) \
  if (dynamic_cast<const T*>(&e)) return #T;
  SER_KIND(EmptyDatasetError) SER_KIND(ConfigError) SER_KIND(StratifyError) SER_KIND(DataError)
  SER_KIND(LabelError) SER_KIND(ArchiveError) SER_KIND(VersionError) SER_KIND(InputTooShortError)
  SER_KIND(ShapeError) SER_KIND(EmptyAudioError) SER_KIND(UnsupportedError) SER_KIND(FormatError)
#undef SER_KIND
  return "error";
}

void add_train_options(CLI::App* cmd, EvalArgs& a) {
  auto& t = a.config.train;
  cmd->add_option("--seed", a.config.seed, "Seed for every random choice")->capture_default_str();
  cmd->add_option("--val-ratio", a.config.validation_ratio, "Validation fraction for early stopping (0 disables)")
      ->capture_default_str();
  cmd->add_option("--lr", t.learning_rate, "Adam learning rate")->capture_default_str();
  cmd->add_option("--batch-size", t.batch_size)->capture_default_str();
  cmd->add_option("--epochs", t.max_epochs)->capture_default_str();
  cmd->add_option("--patience", t.early_stop_patience, "Early-stopping patience in epochs")->capture_default_str();
  cmd->add_option("--weight-decay", t.weight_decay)->capture_default_str();
  cmd->add_option("--hidden", t.hidden_size, "Hidden units in the head")->capture_default_str();
  cmd->add_option("--cache-dir", a.cache_dir, std::string("Embedding cache (default $") + kCacheDirEnv + ")");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Speech emotion recognition with frozen self-supervised encoders", "ser"};
  app.require_subcommand(1);

  ScanArgs scan;
  auto* scan_cmd = app.add_subcommand("scan", "Index a corpus into a manifest");
  scan_cmd->add_option("--root", scan.root, "Corpus root directory")->required();
  scan_cmd->add_option("--kind", scan.kind, "ravdess, emodb, savee, aesdd or shemo")->required();
  scan_cmd->add_option("--out", scan.out, "Manifest to write")->required();
  scan_cmd->add_flag("--strict", scan.strict, "Fail if any file name cannot be parsed");

  ExtractArgs extract;
  auto* extract_cmd = app.add_subcommand("extract", "Compute pooled embeddings into the cache");
  extract_cmd->add_option("--manifest", extract.manifest)->required();
  extract_cmd->add_option("--checkpoint", extract.checkpoint, "Encoder archive")->required();
  extract_cmd->add_option("--cache-dir", extract.cache_dir, std::string("Default $") + kCacheDirEnv);
  extract_cmd->add_option("--jobs", extract.jobs, "Parallel workers")->capture_default_str();

  EvalArgs evaluate;
  auto* eval_cmd = app.add_subcommand("evaluate", "Cross-validate heads on cached embeddings");
  eval_cmd->add_option("--split", evaluate.split, "holdout, kfold or repeated")->capture_default_str();
  eval_cmd->add_option("--folds", evaluate.config.folds, "k for kfold, repeats for repeated")->capture_default_str();
  eval_cmd->add_option("--test-ratio", evaluate.config.test_ratio)->capture_default_str();
  eval_cmd->add_flag("--speaker-disjoint", evaluate.config.speaker_disjoint, "Keep each speaker on one side");
  eval_cmd->add_option("--out", evaluate.out, "Report directory")->capture_default_str();
  add_train_options(eval_cmd, evaluate);

  EvalArgs train;
  auto* train_cmd = app.add_subcommand("train", "Fit one head on every cached embedding");
  train_cmd->add_option("--out", train.head_out, "Head archive to write")->required();
  add_train_options(train_cmd, train);

  PredictArgs pred;
  auto* predict_cmd = app.add_subcommand("predict", "Classify wav files or directories");
  predict_cmd->add_option("--checkpoint", pred.checkpoint, "Encoder archive")->required();
  predict_cmd->add_option("--head", pred.head, "Head archive")->required();
  predict_cmd->add_option("paths", pred.paths, "Files or directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*scan_cmd) return cmd_scan(scan, out, err);
    if (*extract_cmd) return cmd_extract(extract, out, err);
    if (*eval_cmd) return cmd_evaluate(evaluate, out);
    if (*train_cmd) return cmd_train(train, out);
    if (*predict_cmd) return cmd_predict(pred, out);
  } catch (const Error& e) {
    // Anything that stops the whole command (bad archive, empty corpus,
    // missing cache, refused provenance) is a configuration problem.
    err << "error: " << error_kind(e) << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitPartial;
  }
  return kExitConfig;
}

}  // namespace ser
