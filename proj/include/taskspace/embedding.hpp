// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace taskspace {

enum class Method { TaskEmb, TuPaTE, TaskEmbReduced };
enum class EmbeddingKind { DTE, MTE };

std::string_view to_string(Method m);
Method method_from_string(std::string_view s);
std::string_view to_string(EmbeddingKind k);
EmbeddingKind embedding_kind_from_string(std::string_view s);

/// A task embedding. Only embeddings with the same method and surrogate
/// fingerprint are comparable.
struct TaskEmbedding {
  std::vector<float> vector;
  Method method = Method::TaskEmb;
  EmbeddingKind kind = EmbeddingKind::DTE;
  std::string source_id;    // dataset id, or oracle id (with "#prompt" for prompted oracles)
  std::string fingerprint;  // surrogate checkpoint the embedding was computed from
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::string pool_id;      // empty for DTEs

  std::size_t dimension() const { return vector.size(); }
  /// SHA-256 of the little-endian f32 payload.
  std::string payload_hash() const;
  nlohmann::json metadata(std::string_view id) const;
};

/// Writes `<dir>/<id>.f32` then `<dir>/<id>.json`, each via temp file + rename.
void write_embedding(const TaskEmbedding& e, const std::filesystem::path& dir, std::string_view id);
/// Reads the pair back and verifies dimension and payload hash.
TaskEmbedding read_embedding(const std::filesystem::path& dir, std::string_view id);

enum class SimilarityMetric { Cosine, Pearson };

/// Throws IncompatibleSpaceError unless method, fingerprint and dimension agree.
void require_compatible(const TaskEmbedding& a, const TaskEmbedding& b);

/// dot(a,b)/(|a||b|) in double precision. Zero vectors raise DegenerateError.
double cosine_similarity(const TaskEmbedding& a, const TaskEmbedding& b);
double similarity(const TaskEmbedding& a, const TaskEmbedding& b, SimilarityMetric metric);

}  // namespace taskspace
