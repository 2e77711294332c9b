// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskspace/label.hpp"

namespace taskspace {

/// Synthetic task family. Generation is a pure function of every field.
///
///   majority-class          class = most frequent token mod `classes`
///   parity                  class = (occurrences of token 5) mod 2
///   pair-match              "a SEP b", class = (a == b)
///   token-count-regression  scalar = #tokens in [40, 50) - 0.25 * length
///   fill-mask-seq           periodic text with masked slots; target = first seq_out original tokens
///   sentiment-lexicon       class = 1 if tokens in [10, 20) outnumber tokens in [20, 30), else 0
struct TaskFamily {
  std::string id;
  std::uint64_t seed = 0;
  std::size_t n_train = 200;
  std::size_t n_test = 200;
  double noise_rate = 0.0;  // fraction of corrupted labels
  double vocab_skew = 0.0;  // 0 = uniform filler tokens; larger = heavier head
  std::size_t classes = 8;
  std::size_t seq_out = 8;
  std::size_t vocab = 64;

  nlohmann::json to_json() const;
  static TaskFamily from_json(const nlohmann::json& j);
};

const std::vector<std::string>& family_ids();
LabelKind family_kind(const std::string& id);

struct FamilySplit {
  LabeledSet train;
  LabeledSet test;
};

/// Train and test share no token sequence.
FamilySplit gen_family(const TaskFamily& family);

/// Noise-free labelling rule of a family applied to any input.
Label family_rule(const std::string& id, std::span<const Token> input, std::size_t classes, std::size_t seq_out);

/// Random-label variant of a family's inputs (labels drawn uniformly).
LabeledSet shuffle_labels(const LabeledSet& data, std::size_t classes, std::uint64_t seed);

}  // namespace taskspace
