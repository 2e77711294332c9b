// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace taskspace {

using Token = std::uint32_t;
using TokenSeq = std::vector<Token>;

inline constexpr Token kPadToken = 0;
inline constexpr Token kMaskToken = 1;
inline constexpr Token kSepToken = 2;
inline constexpr Token kFirstContentToken = 3;

enum class LabelKind { Class, Distribution, Scalar, Tokens };

std::string_view to_string(LabelKind kind);
/// Accepts the wire names "class", "distribution", "scalar", "tokens".
LabelKind label_kind_from_string(std::string_view s);

struct ClassLabel {
  std::uint32_t index = 0;
  friend bool operator==(const ClassLabel&, const ClassLabel&) = default;
};
struct DistributionLabel {
  std::vector<double> probs;
  friend bool operator==(const DistributionLabel&, const DistributionLabel&) = default;
};
struct ScalarLabel {
  double value = 0.0;
  friend bool operator==(const ScalarLabel&, const ScalarLabel&) = default;
};
struct TokenSeqLabel {
  TokenSeq tokens;
  friend bool operator==(const TokenSeqLabel&, const TokenSeqLabel&) = default;
};

using Label = std::variant<ClassLabel, DistributionLabel, ScalarLabel, TokenSeqLabel>;

LabelKind kind_of(const Label& label);

/// Limits a label must respect for a given surrogate head layout.
struct LabelLimits {
  std::size_t classes = 8;
  std::size_t seq_out = 8;
  std::size_t vocab = 64;
};

/// Throws ContractError when the label violates its variant's invariant.
void validate_label(const Label& label, const LabelLimits& limits);

struct Example {
  TokenSeq tokens;
  Label label;
};

/// Ordered examples that all share one label kind.
class LabeledSet {
 public:
  LabeledSet() = default;
  explicit LabeledSet(std::vector<Example> examples);

  void push_back(Example ex);
  bool empty() const { return examples_.empty(); }
  std::size_t size() const { return examples_.size(); }
  const Example& operator[](std::size_t i) const { return examples_[i]; }
  const std::vector<Example>& examples() const { return examples_; }
  auto begin() const { return examples_.begin(); }
  auto end() const { return examples_.end(); }
  /// Kind shared by every example; throws ContractError when empty.
  LabelKind kind() const;

 private:
  std::vector<Example> examples_;
};

/// Throws ContractError on empty token lists, ids >= vocab or over-long inputs.
void validate_tokens(std::span<const Token> tokens, std::size_t vocab, std::size_t max_len);

}  // namespace taskspace
