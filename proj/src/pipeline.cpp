// SPDX-License-Identifier: Apache-2.0
#include "taskspace/pipeline.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <future>
#include <thread>

#include "taskspace/errors.hpp"
#include "taskspace/file_util.hpp"
#include "taskspace/hash.hpp"

namespace taskspace {

nlohmann::json LedgerSnapshot::to_json() const {
  return {{"extractor_calls", extractor_calls}, {"oracle_calls", oracle_calls},
          {"cache_hits", cache_hits},           {"grid_evaluations", grid_evaluations},
          {"k_p", k_p},                         {"k_d", k_d}};
}

LedgerSnapshot InvocationLedger::snapshot() const {
  return {extractor_calls_.load(), oracle_calls_.load(), cache_hits_.load(), grid_.load(), k_p_, k_d_};
}

void InvocationLedger::write(const std::filesystem::path& path) const {
  write_text_atomic(path, snapshot().to_json().dump(2) + "\n");
}

// --- store -------------------------------------------------------------------

EmbeddingStore::EmbeddingStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(emb_dir());
  std::filesystem::create_directories(root_ / "pool");
  const auto idx = root_ / "index.json";
  if (std::filesystem::exists(idx)) {
    std::ifstream is(idx);
    try {
      index_ = nlohmann::json::parse(is).get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("corrupt store index " + idx.string() + ": " + e.what());
    }
  }
}

void EmbeddingStore::register_surrogate(const SurrogateCheckpoint& ckpt) {
  std::lock_guard lock(mu_);
  save_checkpoint(ckpt, surrogate_path());
}

std::optional<std::string> EmbeddingStore::surrogate_fingerprint() const {
  if (!std::filesystem::exists(surrogate_path())) return std::nullopt;
  return load_surrogate().fingerprint;
}

SurrogateCheckpoint EmbeddingStore::load_surrogate() const {
  if (!std::filesystem::exists(surrogate_path()))
    throw ConfigError("store " + root_.string() + " has no registered surrogate");
  return load_checkpoint(surrogate_path());
}

void EmbeddingStore::save_pool(const UnsupervisedPool& pool) {
  std::lock_guard lock(mu_);
  write_pool_jsonl(pool, pool_path(pool.id));
}

UnsupervisedPool EmbeddingStore::load_pool(const std::string& id) const {
  const auto path = pool_path(id);
  if (!std::filesystem::exists(path)) throw ConfigError("store has no pool " + id);
  return read_pool_jsonl(path, id);
}

bool EmbeddingStore::contains(const std::string& id) const {
  std::lock_guard lock(mu_);
  return index_.contains(id);
}

std::optional<TaskEmbedding> EmbeddingStore::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  TaskEmbedding e = read_embedding(emb_dir(), id);
  if (e.payload_hash() != it->second) throw Error("store index and payload disagree for " + id);
  return e;
}

void EmbeddingStore::put(const std::string& id, const TaskEmbedding& e) {
  std::lock_guard lock(mu_);
  const std::string hash = e.payload_hash();
  auto it = index_.find(id);
  if (it != index_.end()) {
    if (it->second != hash) throw ContractError("store already holds " + id + " with a different payload");
    return;
  }
  write_embedding(e, emb_dir(), id);
  index_[id] = hash;
  flush_index();
}

std::vector<std::string> EmbeddingStore::ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, _] : index_) out.push_back(id);
  return out;
}

void EmbeddingStore::flush_index() const { write_text_atomic(root_ / "index.json", nlohmann::json(index_).dump(2) + "\n"); }

std::string cache_key(Method method, EmbeddingKind kind, const std::string& fingerprint, const std::string& source_id,
                      const std::string& pool_id, const ExtractorConfig& cfg) {
  const nlohmann::json j = {{"method", to_string(method)}, {"kind", to_string(kind)}, {"surrogate", fingerprint},
                            {"source", source_id},         {"pool", pool_id},         {"cfg", cfg.to_json()}};
  return std::string(to_string(kind)) + "-" + sha256_hex(j.dump()).substr(0, 24);
}

// --- pipeline ------------------------------------------------------------------

Pipeline::Pipeline(EmbeddingStore& store, SurrogateCheckpoint surrogate, InvocationLedger& ledger)
    : store_(store), surrogate_(std::move(surrogate)), ledger_(ledger) {
  const auto registered = store_.surrogate_fingerprint();
  if (!registered) {
    store_.register_surrogate(surrogate_);
  } else if (*registered != surrogate_.fingerprint) {
    throw IncompatibleSpaceError("surrogate " + surrogate_.fingerprint.substr(0, 12) + " does not match the store's " +
                                 registered->substr(0, 12));
  }
}

namespace {
std::mutex inflight_mu;
std::map<std::string, std::shared_future<TaskEmbedding>> inflight;
}  // namespace

TaskEmbedding Pipeline::cached(const std::string& key, const std::function<TaskEmbedding()>& make) {
  const std::string scoped = store_.root().string() + "|" + key;
  std::promise<TaskEmbedding> promise;
  {
    std::lock_guard lock(inflight_mu);
    auto it = inflight.find(scoped);
    if (it != inflight.end()) {
      auto fut = it->second;
      ledger_.record_cache_hit();
      return fut.get();
    }
    if (auto hit = store_.get(key)) {
      ledger_.record_cache_hit();
      return *hit;
    }
    inflight.emplace(scoped, promise.get_future().share());
  }
  try {
    TaskEmbedding e = make();
    store_.put(key, e);
    ledger_.record_extraction();
    promise.set_value(e);
    std::lock_guard lock(inflight_mu);
    inflight.erase(scoped);
    return e;
  } catch (...) {
    promise.set_exception(std::current_exception());
    std::lock_guard lock(inflight_mu);
    inflight.erase(scoped);
    throw;
  }
}

TaskEmbedding Pipeline::compute_dte(const LabeledSet& data, const std::string& dataset_id, Method method,
                                    const ExtractorConfig& cfg) {
  if (dataset_id.empty()) throw ArgumentError("dataset id must not be empty");
  const auto key = cache_key(method, EmbeddingKind::DTE, surrogate_.fingerprint, dataset_id, "", cfg);
  return cached(key, [&] {
    TaskEmbedding e = extract(method, surrogate_, data, cfg);
    e.kind = EmbeddingKind::DTE;
    e.source_id = dataset_id;
    return e;
  });
}

TaskEmbedding Pipeline::compute_mte(ModelOracle& oracle, const UnsupervisedPool& pool, Method method,
                                    const ExtractorConfig& cfg) {
  if (pool.texts.empty()) throw ArgumentError("pool is empty");
  const auto key = cache_key(method, EmbeddingKind::MTE, surrogate_.fingerprint, oracle.id(), pool.id, cfg);
  return cached(key, [&] {
    const auto before = oracle.invocations();
    LabeledSet labeled = predict_pool(oracle, pool.texts);
    ledger_.record_oracle_calls(oracle.invocations() - before);
    TaskEmbedding e = extract(method, surrogate_, labeled, cfg);
    e.kind = EmbeddingKind::MTE;
    e.source_id = oracle.id();
    e.pool_id = pool.id;
    return e;
  });
}

std::vector<RankedCandidate> rank_candidates(const TaskEmbedding& target, const std::vector<TaskEmbedding>& candidates,
                                             SimilarityMetric metric) {
  std::vector<RankedCandidate> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    try {
      require_compatible(target, c);
    } catch (const IncompatibleSpaceError& e) {
      throw IncompatibleSpaceError("candidate '" + c.source_id + "': " + e.what());
    }
    out.push_back({c.source_id, similarity(target, c, metric)});
  }
  std::sort(out.begin(), out.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
  });
  return out;
}

void run_jobs(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(jobs, count); ++t)
    pool.emplace_back([&] {
      for (;;) {
        if (failed.load()) return;
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
          failed.store(true);
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

}  // namespace taskspace
