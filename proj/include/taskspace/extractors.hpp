// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "taskspace/embedding.hpp"
#include "taskspace/surrogate.hpp"

namespace taskspace {

struct ExtractorConfig {
  TrainConfig train;             // fine-tuning stage before extraction
  std::size_t prefix_len = 4;    // tupate only
  double prefix_init_std = 0.1;  // tupate only

  nlohmann::json to_json() const;
  static ExtractorConfig from_json(const nlohmann::json& j, const ExtractorConfig& base);
  static ExtractorConfig from_json(const nlohmann::json& j) { return from_json(j, ExtractorConfig{}); }
};

/// Empirical Fisher diagonal (1/n) sum_i g_i * g_i with g_i = grad log P(y_i|x_i),
/// computed at `tuned` in double precision, tensors concatenated in canonical order.
std::vector<double> fisher_diagonal(const SurrogateCheckpoint& tuned, const LabeledSet& data);

/// Fine-tune the surrogate on `data`, then take the Fisher diagonal.
TaskEmbedding taskemb_extract(const SurrogateCheckpoint& base, const LabeledSet& data, const ExtractorConfig& cfg);

/// Storage-constrained variant: one mean Fisher value per parameter tensor.
/// Tagged with its own method so it never compares against full TaskEmb vectors.
TaskEmbedding taskemb_reduced_extract(const SurrogateCheckpoint& base, const LabeledSet& data,
                                      const ExtractorConfig& cfg);

/// Prefix-tune on `data` with the backbone frozen, then average K_p and V_p
/// over layers and concatenate: dimension 2 * prefix_len * width.
TaskEmbedding tupate_extract(const SurrogateCheckpoint& base, const LabeledSet& data, const ExtractorConfig& cfg);

/// Layer mean of a prefix, flattened keys then values.
std::vector<float> prefix_embedding(const PrefixParams& prefix);

TaskEmbedding extract(Method method, const SurrogateCheckpoint& base, const LabeledSet& data,
                      const ExtractorConfig& cfg);

}  // namespace taskspace
