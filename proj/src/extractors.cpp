// SPDX-License-Identifier: Apache-2.0
#include "taskspace/extractors.hpp"

#include "taskspace/errors.hpp"
#include "taskspace/json_util.hpp"

namespace taskspace {

nlohmann::json ExtractorConfig::to_json() const {
  return {{"epochs", train.epochs}, {"batch", train.batch},       {"lr", train.lr},
          {"seed", train.seed},     {"prefix_len", prefix_len}, {"prefix_init_std", prefix_init_std}};
}

ExtractorConfig ExtractorConfig::from_json(const nlohmann::json& j, const ExtractorConfig& base) {
  StrictObject o(j, "extractor config", {"epochs", "batch", "lr", "seed", "prefix_len", "prefix_init_std"});
  ExtractorConfig c = base;
  o.get("epochs", c.train.epochs);
  o.get("batch", c.train.batch);
  o.get("lr", c.train.lr);
  o.get("seed", c.train.seed);
  o.get("prefix_len", c.prefix_len);
  o.get("prefix_init_std", c.prefix_init_std);
  return c;
}

std::vector<double> fisher_diagonal(const SurrogateCheckpoint& tuned, const LabeledSet& data) {
  if (data.empty()) throw ArgumentError("cannot extract an embedding from an empty set");
  (void)data.kind();
  std::vector<double> acc(tuned.params.numel(), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    ad::ValueAndGrad vg;
    try {
      vg = ad::value_and_grad(log_prob_objective(tuned.config, data[i]), tuned.params);
    } catch (const NumericError& e) {
      throw NumericError("example " + std::to_string(i) + ": " + e.what());
    }
    std::size_t off = 0;
    for (std::size_t k = 0; k < vg.grad.count(); ++k)
      for (double g : vg.grad[k].vec()) acc[off++] += g * g;
  }
  const double inv = 1.0 / static_cast<double>(data.size());
  for (auto& v : acc) v *= inv;
  return acc;
}

namespace {
TaskEmbedding stamp(Method m, const SurrogateCheckpoint& base, const ExtractorConfig& cfg, std::vector<float> v) {
  TaskEmbedding e;
  e.vector = std::move(v);
  e.method = m;
  e.fingerprint = base.fingerprint;
  e.seed = cfg.train.seed;
  e.epochs = cfg.train.epochs;
  return e;
}
}  // namespace

TaskEmbedding taskemb_extract(const SurrogateCheckpoint& base, const LabeledSet& data, const ExtractorConfig& cfg) {
  if (data.empty()) throw ArgumentError("cannot extract an embedding from an empty set");
  const auto tuned = fine_tune_full(base, data, cfg.train);
  const auto diag = fisher_diagonal(tuned, data);
  return stamp(Method::TaskEmb, base, cfg, std::vector<float>(diag.begin(), diag.end()));
}

TaskEmbedding taskemb_reduced_extract(const SurrogateCheckpoint& base, const LabeledSet& data,
                                      const ExtractorConfig& cfg) {
  if (data.empty()) throw ArgumentError("cannot extract an embedding from an empty set");
  const auto tuned = fine_tune_full(base, data, cfg.train);
  const auto diag = fisher_diagonal(tuned, data);
  std::vector<float> v;
  std::size_t off = 0;
  for (std::size_t k = 0; k < tuned.params.count(); ++k) {
    const std::size_t n = tuned.params[k].size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += diag[off + i];
    off += n;
    v.push_back(static_cast<float>(s / static_cast<double>(n)));
  }
  return stamp(Method::TaskEmbReduced, base, cfg, std::move(v));
}

std::vector<float> prefix_embedding(const PrefixParams& prefix) {
  const std::size_t L = prefix.layers(), n = prefix.length() * prefix.width();
  std::vector<float> out(2 * n);
  for (std::size_t half = 0; half < 2; ++half) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t l = 0; l < L; ++l) s += (half == 0 ? prefix.keys(l) : prefix.values(l))[i];
      out[half * n + i] = static_cast<float>(s / static_cast<double>(L));
    }
  }
  return out;
}

TaskEmbedding tupate_extract(const SurrogateCheckpoint& base, const LabeledSet& data, const ExtractorConfig& cfg) {
  if (data.empty()) throw ArgumentError("cannot extract an embedding from an empty set");
  const auto prefix = fine_tune_prefix(base, data, cfg.prefix_len, cfg.train, cfg.prefix_init_std);
  return stamp(Method::TuPaTE, base, cfg, prefix_embedding(prefix));
}

TaskEmbedding extract(Method method, const SurrogateCheckpoint& base, const LabeledSet& data,
                      const ExtractorConfig& cfg) {
  switch (method) {
    case Method::TaskEmb: return taskemb_extract(base, data, cfg);
    case Method::TuPaTE: return tupate_extract(base, data, cfg);
    case Method::TaskEmbReduced: return taskemb_reduced_extract(base, data, cfg);
  }
  throw ArgumentError("unknown method");
}

}  // namespace taskspace
