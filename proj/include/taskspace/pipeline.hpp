// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskspace/embedding.hpp"
#include "taskspace/extractors.hpp"
#include "taskspace/oracle.hpp"
#include "taskspace/pool.hpp"

namespace taskspace {

struct LedgerSnapshot {
  std::uint64_t extractor_calls = 0;
  std::uint64_t oracle_calls = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t grid_evaluations = 0;
  std::size_t k_p = 0;
  std::size_t k_d = 0;

  nlohmann::json to_json() const;
  /// Extractor calls equal k_p + k_D.
  bool linear_contract_holds() const { return extractor_calls == k_p + k_d; }
};

/// Per-experiment counters. All increments are atomic.
class InvocationLedger {
 public:
  void record_extraction() { extractor_calls_.fetch_add(1); }
  void record_oracle_calls(std::uint64_t n) { oracle_calls_.fetch_add(n); }
  void record_cache_hit() { cache_hits_.fetch_add(1); }
  void record_grid_evaluation() { grid_.fetch_add(1); }
  void set_shape(std::size_t k_p, std::size_t k_d) {
    k_p_ = k_p;
    k_d_ = k_d;
  }
  LedgerSnapshot snapshot() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::atomic<std::uint64_t> extractor_calls_{0};
  std::atomic<std::uint64_t> oracle_calls_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::atomic<std::uint64_t> grid_{0};
  std::size_t k_p_ = 0;
  std::size_t k_d_ = 0;
};

/// On-disk layout:
///   <root>/surrogate.ckpt, <root>/pool/<id>.jsonl, <root>/emb/<id>.{json,f32},
///   <root>/index.json, <root>/ledger.json
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path emb_dir() const { return root_ / "emb"; }
  std::filesystem::path pool_path(const std::string& id) const { return root_ / "pool" / (id + ".jsonl"); }
  std::filesystem::path surrogate_path() const { return root_ / "surrogate.ckpt"; }

  /// Saves the checkpoint as the store's surrogate (replacing any previous one).
  void register_surrogate(const SurrogateCheckpoint& ckpt);
  std::optional<std::string> surrogate_fingerprint() const;
  SurrogateCheckpoint load_surrogate() const;

  void save_pool(const UnsupervisedPool& pool);
  UnsupervisedPool load_pool(const std::string& id) const;

  bool contains(const std::string& id) const;
  std::optional<TaskEmbedding> get(const std::string& id) const;
  /// Writes atomically. Re-putting an id with a different payload hash raises ContractError.
  void put(const std::string& id, const TaskEmbedding& e);
  std::vector<std::string> ids() const;

 private:
  void flush_index() const;

  std::filesystem::path root_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> index_;  // id -> payload hash
};

/// Store record id for an embedding request.
std::string cache_key(Method method, EmbeddingKind kind, const std::string& fingerprint, const std::string& source_id,
                      const std::string& pool_id, const ExtractorConfig& cfg);

class Pipeline {
 public:
  Pipeline(EmbeddingStore& store, SurrogateCheckpoint surrogate, InvocationLedger& ledger);

  const SurrogateCheckpoint& surrogate() const { return surrogate_; }
  EmbeddingStore& store() { return store_; }
  InvocationLedger& ledger() { return ledger_; }

  TaskEmbedding compute_dte(const LabeledSet& data, const std::string& dataset_id, Method method,
                            const ExtractorConfig& cfg);
  /// Labels every pool text with the oracle, then extracts. Nothing is
  /// persisted if the oracle fails part way.
  TaskEmbedding compute_mte(ModelOracle& oracle, const UnsupervisedPool& pool, Method method,
                            const ExtractorConfig& cfg);

 private:
  TaskEmbedding cached(const std::string& key, const std::function<TaskEmbedding()>& make);

  EmbeddingStore& store_;
  SurrogateCheckpoint surrogate_;
  InvocationLedger& ledger_;
};

struct RankedCandidate {
  std::string id;
  double similarity = 0.0;
};

/// Similarity descending, ties by ascending id. Candidate ids are their source ids.
std::vector<RankedCandidate> rank_candidates(const TaskEmbedding& target, const std::vector<TaskEmbedding>& candidates,
                                             SimilarityMetric metric = SimilarityMetric::Cosine);

/// Runs fn(0..count-1) on at most `jobs` threads. The first exception is
/// rethrown after all started jobs finish; no new jobs start after a failure.
void run_jobs(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace taskspace
