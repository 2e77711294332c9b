// SPDX-License-Identifier: Apache-2.0
#include "taskspace/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "taskspace/errors.hpp"
#include "taskspace/hash.hpp"

namespace taskspace {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::TaskEmb: return "taskemb";
    case Method::TuPaTE: return "tupate";
    case Method::TaskEmbReduced: return "taskemb-reduced";
  }
  return "?";
}

Method method_from_string(std::string_view s) {
  if (s == "taskemb") return Method::TaskEmb;
  if (s == "tupate") return Method::TuPaTE;
  if (s == "taskemb-reduced") return Method::TaskEmbReduced;
  throw ArgumentError("unknown extraction method: " + std::string(s));
}

std::string_view to_string(EmbeddingKind k) { return k == EmbeddingKind::DTE ? "DTE" : "MTE"; }

EmbeddingKind embedding_kind_from_string(std::string_view s) {
  if (s == "DTE") return EmbeddingKind::DTE;
  if (s == "MTE") return EmbeddingKind::MTE;
  throw ArgumentError("unknown embedding kind: " + std::string(s));
}

std::string TaskEmbedding::payload_hash() const { return Sha256().update_floats(vector).hex(); }

nlohmann::json TaskEmbedding::metadata(std::string_view id) const {
  return {{"id", id},
          {"method", to_string(method)},
          {"kind", to_string(kind)},
          {"source", source_id},
          {"surrogate", fingerprint},
          {"dimension", vector.size()},
          {"payload_sha256", payload_hash()},
          {"seed", seed},
          {"epochs", epochs},
          {"pool", pool_id}};
}

void write_embedding(const TaskEmbedding& e, const std::filesystem::path& dir, std::string_view id) {
  std::filesystem::create_directories(dir);
  const auto bin = dir / (std::string(id) + ".f32");
  const auto meta = dir / (std::string(id) + ".json");
  {
    std::ofstream os(bin.string() + ".tmp", std::ios::binary | std::ios::trunc);
    os.write(reinterpret_cast<const char*>(e.vector.data()), static_cast<std::streamsize>(e.vector.size() * sizeof(float)));
    if (!os) throw Error("failed writing " + bin.string());
  }
  {
    std::ofstream os(meta.string() + ".tmp", std::ios::trunc);
    os << e.metadata(id).dump() << '\n';
    if (!os) throw Error("failed writing " + meta.string());
  }
  // Payload first: a visible .json always has its .f32 in place.
  std::filesystem::rename(bin.string() + ".tmp", bin);
  std::filesystem::rename(meta.string() + ".tmp", meta);
}

TaskEmbedding read_embedding(const std::filesystem::path& dir, std::string_view id) {
  const auto meta_path = dir / (std::string(id) + ".json");
  std::ifstream ms(meta_path);
  if (!ms) throw Error("missing embedding metadata " + meta_path.string());
  const auto meta = nlohmann::json::parse(ms);
  TaskEmbedding e;
  e.method = method_from_string(meta.at("method").get<std::string>());
  e.kind = embedding_kind_from_string(meta.at("kind").get<std::string>());
  e.source_id = meta.at("source").get<std::string>();
  e.fingerprint = meta.at("surrogate").get<std::string>();
  e.seed = meta.at("seed").get<std::uint64_t>();
  e.epochs = meta.at("epochs").get<std::size_t>();
  e.pool_id = meta.at("pool").get<std::string>();
  const auto dim = meta.at("dimension").get<std::size_t>();
  e.vector.resize(dim);
  std::ifstream bs(dir / (std::string(id) + ".f32"), std::ios::binary);
  if (!bs.read(reinterpret_cast<char*>(e.vector.data()), static_cast<std::streamsize>(dim * sizeof(float))))
    throw Error("embedding payload shorter than declared dimension for " + std::string(id));
  if (e.payload_hash() != meta.at("payload_sha256").get<std::string>())
    throw Error("embedding payload hash mismatch for " + std::string(id));
  return e;
}

void require_compatible(const TaskEmbedding& a, const TaskEmbedding& b) {
  if (a.method != b.method)
    throw IncompatibleSpaceError("cannot compare " + std::string(to_string(a.method)) + " embedding '" + a.source_id +
                                 "' with " + std::string(to_string(b.method)) + " embedding '" + b.source_id + "'");
  if (a.fingerprint != b.fingerprint)
    throw IncompatibleSpaceError("embeddings '" + a.source_id + "' and '" + b.source_id +
                                 "' come from different surrogate checkpoints");
  if (a.vector.size() != b.vector.size())
    throw IncompatibleSpaceError("embedding dimensions differ for '" + a.source_id + "' and '" + b.source_id + "'");
}

namespace {
double centered_cosine(const TaskEmbedding& a, const TaskEmbedding& b, bool center) {
  require_compatible(a, b);
  const std::size_t n = a.vector.size();
  double ma = 0.0, mb = 0.0;
  if (center) {
    for (std::size_t i = 0; i < n; ++i) {
      ma += a.vector[i];
      mb += b.vector[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a.vector[i] - ma, y = b.vector[i] - mb;
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0) throw DegenerateError("embedding '" + a.source_id + "' is all-zero");
  if (nb == 0.0) throw DegenerateError("embedding '" + b.source_id + "' is all-zero");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}
}  // namespace

double cosine_similarity(const TaskEmbedding& a, const TaskEmbedding& b) { return centered_cosine(a, b, false); }

double similarity(const TaskEmbedding& a, const TaskEmbedding& b, SimilarityMetric metric) {
  return centered_cosine(a, b, metric == SimilarityMetric::Pearson);
}

}  // namespace taskspace
