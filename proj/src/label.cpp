// SPDX-License-Identifier: Apache-2.0
#include "taskspace/label.hpp"

#include <cmath>

#include "taskspace/errors.hpp"

namespace taskspace {

std::string_view to_string(LabelKind kind) {
  switch (kind) {
    case LabelKind::Class: return "class";
    case LabelKind::Distribution: return "distribution";
    case LabelKind::Scalar: return "scalar";
    case LabelKind::Tokens: return "tokens";
  }
  return "?";
}

LabelKind label_kind_from_string(std::string_view s) {
  if (s == "class") return LabelKind::Class;
  if (s == "distribution") return LabelKind::Distribution;
  if (s == "scalar") return LabelKind::Scalar;
  if (s == "tokens") return LabelKind::Tokens;
  throw ArgumentError("unknown label kind: " + std::string(s));
}

LabelKind kind_of(const Label& label) { return static_cast<LabelKind>(label.index()); }

void validate_label(const Label& label, const LabelLimits& limits) {
  if (const auto* c = std::get_if<ClassLabel>(&label)) {
    if (c->index >= limits.classes)
      throw ContractError("class index " + std::to_string(c->index) + " exceeds head size " +
                          std::to_string(limits.classes));
  } else if (const auto* d = std::get_if<DistributionLabel>(&label)) {
    if (d->probs.size() != limits.classes)
      throw ContractError("distribution has " + std::to_string(d->probs.size()) + " entries, head has " +
                          std::to_string(limits.classes));
    double s = 0.0;
    for (double p : d->probs) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw ContractError("distribution entries must be finite and non-negative");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-6) throw ContractError("distribution sums to " + std::to_string(s));
  } else if (const auto* r = std::get_if<ScalarLabel>(&label)) {
    if (!std::isfinite(r->value)) throw ContractError("scalar label must be finite");
  } else if (const auto* t = std::get_if<TokenSeqLabel>(&label)) {
    if (t->tokens.size() > limits.seq_out)
      throw ContractError("token label longer than output length " + std::to_string(limits.seq_out));
    for (Token tok : t->tokens)
      if (tok >= limits.vocab) throw ContractError("token label id " + std::to_string(tok) + " out of vocabulary");
  }
}

LabeledSet::LabeledSet(std::vector<Example> examples) {
  examples_.reserve(examples.size());
  for (auto& ex : examples) push_back(std::move(ex));
}

void LabeledSet::push_back(Example ex) {
  if (!examples_.empty() && kind_of(ex.label) != kind_of(examples_.front().label))
    throw ContractError("mixed label kinds in one set: " + std::string(to_string(kind_of(examples_.front().label))) +
                        " and " + std::string(to_string(kind_of(ex.label))));
  if (ex.tokens.empty()) throw ContractError("example with empty token list");
  examples_.push_back(std::move(ex));
}

LabelKind LabeledSet::kind() const {
  if (examples_.empty()) throw ContractError("label kind of an empty set");
  return kind_of(examples_.front().label);
}

void validate_tokens(std::span<const Token> tokens, std::size_t vocab, std::size_t max_len) {
  if (tokens.empty()) throw ContractError("empty token sequence");
  if (tokens.size() > max_len)
    throw ContractError("token sequence of length " + std::to_string(tokens.size()) + " exceeds maximum " +
                        std::to_string(max_len));
  for (Token t : tokens)
    if (t >= vocab) throw ContractError("token id " + std::to_string(t) + " out of vocabulary " + std::to_string(vocab));
}

}  // namespace taskspace
