// SPDX-License-Identifier: Apache-2.0
#include "taskspace/pool.hpp"

#include <fstream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "taskspace/errors.hpp"
#include "taskspace/file_util.hpp"
#include "taskspace/hash.hpp"
#include "taskspace/rng.hpp"

namespace taskspace {

TokenSeq normalize_text(const TokenSeq& text) {
  TokenSeq out;
  out.reserve(text.size());
  for (Token t : text)
    if (t != kPadToken) out.push_back(t);
  return out;
}

std::string pool_content_id(const std::vector<TokenSeq>& texts) {
  Sha256 h;
  for (const auto& t : texts) {
    const auto n = static_cast<std::uint32_t>(t.size());
    h.update(std::string_view(reinterpret_cast<const char*>(&n), sizeof(n)));
    h.update(std::string_view(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(Token)));
  }
  return "pool-" + h.hex().substr(0, 16);
}

UnsupervisedPool build_pool(const std::vector<PoolSource>& sources, std::size_t cap_per_source,
                            const std::vector<TokenSeq>& dedup_against, std::uint64_t seed) {
  if (sources.empty()) throw ArgumentError("build_pool needs at least one source");
  std::set<TokenSeq> blocked;
  for (const auto& t : dedup_against) blocked.insert(normalize_text(t));
  std::set<TokenSeq> seen;
  UnsupervisedPool pool;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const auto& src = sources[s];
    std::vector<std::size_t> order(src.texts.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(Rng::mix(seed, s));
    rng.shuffle(order);
    std::size_t taken = 0;
    for (std::size_t i : order) {
      if (taken == cap_per_source) break;
      TokenSeq norm = normalize_text(src.texts[i]);
      if (norm.empty() || blocked.contains(norm) || seen.contains(norm)) continue;
      seen.insert(norm);
      pool.texts.push_back(std::move(norm));
      pool.provenance.push_back(src.name);
      ++taken;
    }
  }
  if (pool.texts.empty()) throw DegenerateError("unsupervised pool is empty after deduplication");
  pool.id = pool_content_id(pool.texts);
  return pool;
}

void write_pool_jsonl(const UnsupervisedPool& pool, const std::filesystem::path& path) {
  std::string text;
  for (std::size_t i = 0; i < pool.texts.size(); ++i) {
    nlohmann::json line = {{"tokens", pool.texts[i]}};
    if (i < pool.provenance.size()) line["source"] = pool.provenance[i];
    text += line.dump() + "\n";
  }
  write_text_atomic(path, text);
}


std::vector<TokenSeq> read_texts_jsonl(const std::filesystem::path& path) {
  std::vector<TokenSeq> out;
  for (const auto& j : read_jsonl(path)) {
    if (!j.contains("tokens") || !j["tokens"].is_array()) throw ConfigError("pool line without a tokens array");
    out.push_back(j["tokens"].get<TokenSeq>());
  }
  return out;
}

UnsupervisedPool read_pool_jsonl(const std::filesystem::path& path, std::string id) {
  UnsupervisedPool pool;
  for (const auto& j : read_jsonl(path)) {
    if (!j.contains("tokens") || !j["tokens"].is_array()) throw ConfigError("pool line without a tokens array");
    pool.texts.push_back(j["tokens"].get<TokenSeq>());
    pool.provenance.push_back(j.value("source", std::string("file")));
  }
  pool.id = std::move(id);
  return pool;
}

}  // namespace taskspace
