// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "taskspace/label.hpp"

namespace taskspace {

/// Task-agnostic input texts used to probe oracles.
struct UnsupervisedPool {
  std::string id;
  std::vector<TokenSeq> texts;
  std::vector<std::string> provenance;  // source name per text

  std::size_t size() const { return texts.size(); }
  bool empty() const { return texts.empty(); }
};

/// One named supplier of candidate texts (a generator's output or a file).
struct PoolSource {
  std::string name;
  std::vector<TokenSeq> texts;
};

/// Pad tokens removed; the canonical form used for duplicate detection.
TokenSeq normalize_text(const TokenSeq& text);

/// Samples at most `cap_per_source` texts per source (uniform, seeded), drops
/// normalized duplicates and anything that collides with `dedup_against`.
/// Throws DegenerateError when nothing survives.
UnsupervisedPool build_pool(const std::vector<PoolSource>& sources, std::size_t cap_per_source,
                            const std::vector<TokenSeq>& dedup_against, std::uint64_t seed);

/// Content-derived pool id.
std::string pool_content_id(const std::vector<TokenSeq>& texts);

/// One `{"tokens":[...]}` object per line.
void write_pool_jsonl(const UnsupervisedPool& pool, const std::filesystem::path& path);
UnsupervisedPool read_pool_jsonl(const std::filesystem::path& path, std::string id);
std::vector<TokenSeq> read_texts_jsonl(const std::filesystem::path& path);

}  // namespace taskspace
