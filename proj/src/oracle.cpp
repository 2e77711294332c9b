// SPDX-License-Identifier: Apache-2.0
#include "taskspace/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "taskspace/adam.hpp"
#include "taskspace/errors.hpp"
#include "taskspace/rng.hpp"

namespace taskspace {

Label ModelOracle::checked(Label out) const {
  if (kind_of(out) != kind_)
    throw ProtocolError("oracle " + id_ + " declared kind " + std::string(to_string(kind_)) + " but returned " +
                        std::string(to_string(kind_of(out))));
  return out;
}

Label ModelOracle::predict(std::span<const Token> input) {
  calls_.fetch_add(1);
  return checked(do_predict(std::nullopt, input));
}

Label ModelOracle::predict_prompted(std::span<const Token> prompt, std::span<const Token> input) {
  if (!accepts_prompt()) throw ContractError("oracle " + id_ + " does not accept prompts");
  calls_.fetch_add(1);
  return checked(do_predict(TokenSeq(prompt.begin(), prompt.end()), input));
}

LabeledSet predict_pool(ModelOracle& oracle, std::span<const TokenSeq> texts) {
  LabeledSet out;
  for (const auto& t : texts) out.push_back({t, oracle.predict(t)});
  return out;
}

std::uint32_t token_class(Token t, std::size_t classes) {
  if (classes == 0) throw ArgumentError("class count must be positive");
  return static_cast<std::uint32_t>(t % classes);
}

Token majority_token(std::span<const Token> input) {
  std::map<Token, std::size_t> counts;
  for (Token t : input)
    if (t != kPadToken) ++counts[t];
  if (counts.empty()) throw ArgumentError("input has no content tokens");
  Token best = 0;
  std::size_t best_n = 0;
  for (const auto& [t, n] : counts)
    if (n > best_n) best = t, best_n = n;
  return best;
}

OraclePtr make_majority_token_oracle(std::string id, std::size_t classes) {
  return std::make_shared<FunctionOracle>(std::move(id), LabelKind::Class,
                                          [classes](const std::optional<TokenSeq>&, std::span<const Token> in) {
                                            return Label{ClassLabel{token_class(majority_token(in), classes)}};
                                          });
}

OraclePtr make_constant_oracle(std::string id, Label value) {
  const LabelKind kind = kind_of(value);
  return std::make_shared<FunctionOracle>(
      std::move(id), kind, [value](const std::optional<TokenSeq>&, std::span<const Token>) { return value; });
}

Label echo_behavior(LabelKind kind, std::span<const Token> input, std::size_t classes, std::size_t seq_out) {
  const Token first = input.empty() ? kPadToken : input[0];
  switch (kind) {
    case LabelKind::Class:
      return ClassLabel{token_class(first, classes)};
    case LabelKind::Distribution: {
      std::vector<double> p(classes, classes > 1 ? 0.5 / static_cast<double>(classes - 1) : 1.0);
      if (classes > 1) p[token_class(first, classes)] = 0.5;
      return DistributionLabel{std::move(p)};
    }
    case LabelKind::Scalar: {
      if (input.empty()) return ScalarLabel{0.0};
      double s = 0.0;
      for (Token t : input) s += t;
      return ScalarLabel{s / static_cast<double>(input.size())};
    }
    case LabelKind::Tokens: {
      const std::size_t n = std::min(seq_out, input.size());
      return TokenSeqLabel{TokenSeq(input.begin(), input.begin() + static_cast<std::ptrdiff_t>(n))};
    }
  }
  throw ContractError("unsupported label kind");
}

OraclePtr make_echo_oracle(std::string id, LabelKind kind, std::size_t classes, std::size_t seq_out) {
  return std::make_shared<FunctionOracle>(
      std::move(id), kind,
      [=](const std::optional<TokenSeq>&, std::span<const Token> in) { return echo_behavior(kind, in, classes, seq_out); },
      true);
}

// --- bag of tokens ---------------------------------------------------------

BagOfTokensModel::BagOfTokensModel(std::size_t vocab, std::size_t classes, std::size_t seq_out, std::uint64_t seed)
    : vocab_(vocab), classes_(classes), seq_out_(seq_out) {
  if (vocab == 0 || classes == 0) throw ArgumentError("bag-of-tokens model needs vocab and classes");
  Rng rng(seed);
  auto normal = [&](std::size_t r, std::size_t c, double sd) {
    std::vector<double> v(r * c);
    for (auto& x : v) x = sd * rng.normal();
    return Tensor({r, c}, std::move(v));
  };
  const double sd = 1.0 / std::sqrt(static_cast<double>(vocab));
  params_.add("class.w", normal(vocab, classes, sd));
  params_.add("class.b", Tensor({1, classes}, 0.0));
  params_.add("reg.w", normal(vocab, 1, sd));
  params_.add("reg.b", Tensor({1, 1}, 0.0));
  params_.add("seq.table", normal(vocab, vocab, sd));
  params_.add("seq.bag", normal(vocab, vocab, sd));
  params_.add("seq.b", Tensor({1, vocab}, 0.0));
}

namespace {
Tensor bag_features(std::span<const Token> input, std::size_t vocab) {
  Tensor h({1, vocab}, 0.0);
  std::size_t n = 0;
  for (Token t : input) {
    if (t == kPadToken) continue;
    if (t >= vocab) throw ContractError("token id " + std::to_string(t) + " outside vocabulary");
    h[t] += 1.0;
    ++n;
  }
  if (n > 0)
    for (std::size_t i = 0; i < vocab; ++i) h[i] /= static_cast<double>(n);
  return h;
}
}  // namespace

ad::Var BagOfTokensModel::log_prob_on_tape(ad::Tape& tape, std::span<const ad::Var> p, const Example& ex) const {
  validate_label(ex.label, {classes_, seq_out_, vocab_});
  ad::Var h = tape.constant(bag_features(ex.tokens, vocab_));
  switch (kind_of(ex.label)) {
    case LabelKind::Class:
      return ad::pick(ad::log_softmax_rows(ad::add_bias(ad::matmul(h, p[0]), p[1])), std::get<ClassLabel>(ex.label).index);
    case LabelKind::Distribution: {
      const auto& q = std::get<DistributionLabel>(ex.label).probs;
      return ad::dot_const(ad::log_softmax_rows(ad::add_bias(ad::matmul(h, p[0]), p[1])), Tensor({1, q.size()}, q));
    }
    case LabelKind::Scalar: {
      ad::Var mu = ad::add_bias(ad::matmul(h, p[2]), p[3]);
      ad::Var r = ad::sub(mu, tape.constant(Tensor({1, 1}, std::get<ScalarLabel>(ex.label).value)));
      return ad::scale(ad::sum(ad::square(r)), -0.5);
    }
    case LabelKind::Tokens: {
      std::vector<std::uint32_t> ids(seq_out_, kPadToken);
      for (std::size_t i = 0; i < seq_out_ && i < ex.tokens.size(); ++i) ids[i] = ex.tokens[i];
      ad::Var bag = ad::matmul(h, p[5]);
      ad::Var table = ad::embedding(p[4], ids);
      ad::Var logits = table;
      for (std::size_t i = 0; i < seq_out_; ++i) {
        ad::Var row = ad::add_bias(ad::add(ad::slice_rows(table, i, 1), bag), p[6]);
        logits = i == 0 ? row : ad::concat_rows(logits, row);
      }
      const auto& target = std::get<TokenSeqLabel>(ex.label).tokens;
      Tensor onehot({seq_out_, vocab_}, 0.0);
      for (std::size_t j = 0; j < target.size(); ++j)
        if (target[j] != kPadToken) onehot[j * vocab_ + target[j]] = 1.0;
      return ad::dot_const(ad::log_softmax_rows(logits), onehot);
    }
  }
  throw ContractError("unsupported label kind");
}

void BagOfTokensModel::train(const LabeledSet& data, const TrainConfig& cfg) {
  if (data.empty()) throw ArgumentError("training set is empty");
  if (cfg.batch == 0) throw ArgumentError("batch size must be positive");
  AdamHyper hp;
  hp.lr = cfg.lr;
  AdamState state = AdamState::init(params_, hp);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch);
      auto vg = ad::value_and_grad(
          [&](ad::Tape& tape, std::span<const ad::Var> leaves) {
            ad::Var total = log_prob_on_tape(tape, leaves, data[order[start]]);
            for (std::size_t i = start + 1; i < stop; ++i) total = ad::add(total, log_prob_on_tape(tape, leaves, data[order[i]]));
            return ad::scale(total, -1.0 / static_cast<double>(stop - start));
          },
          params_);
      adam_step_inplace(state, params_, vg.grad);
    }
  }
}

double BagOfTokensModel::log_prob(const Example& ex) const {
  return ad::evaluate([&](ad::Tape& tape, std::span<const ad::Var> p) { return log_prob_on_tape(tape, p, ex); }, params_);
}

Label BagOfTokensModel::predict(std::span<const Token> input, LabelKind kind) const {
  const Tensor h = bag_features(input, vocab_);
  auto affine = [&](const Tensor& w, const Tensor& b, std::size_t out) {
    std::vector<double> z(b.vec().begin(), b.vec().end());
    for (std::size_t i = 0; i < vocab_; ++i)
      if (h[i] != 0.0)
        for (std::size_t j = 0; j < out; ++j) z[j] += h[i] * w[i * out + j];
    return z;
  };
  switch (kind) {
    case LabelKind::Class: {
      auto z = affine(params_[0], params_[1], classes_);
      return ClassLabel{static_cast<std::uint32_t>(std::max_element(z.begin(), z.end()) - z.begin())};
    }
    case LabelKind::Distribution: {
      auto z = affine(params_[0], params_[1], classes_);
      const double m = *std::max_element(z.begin(), z.end());
      double s = 0.0;
      for (auto& v : z) s += (v = std::exp(v - m));
      for (auto& v : z) v /= s;
      return DistributionLabel{std::move(z)};
    }
    case LabelKind::Scalar:
      return ScalarLabel{affine(params_[2], params_[3], 1)[0]};
    case LabelKind::Tokens: {
      const auto bag = affine(params_[5], params_[6], vocab_);
      TokenSeq out(seq_out_);
      for (std::size_t i = 0; i < seq_out_; ++i) {
        const Token t = i < input.size() ? input[i] : kPadToken;
        std::size_t best = 0;
        double best_v = -INFINITY;
        for (std::size_t v = 0; v < vocab_; ++v) {
          const double z = bag[v] + params_[4][t * vocab_ + v];
          if (z > best_v) best_v = z, best = v;
        }
        out[i] = static_cast<Token>(best);
      }
      return TokenSeqLabel{std::move(out)};
    }
  }
  throw ContractError("unsupported label kind");
}

// --- prompts ---------------------------------------------------------------

TokenSeq compose_prompted(std::span<const Token> prompt, std::span<const Token> input, std::size_t max_len) {
  if (prompt.empty()) {
    TokenSeq out(input.begin(), input.begin() + static_cast<std::ptrdiff_t>(std::min(input.size(), max_len)));
    return out;
  }
  if (prompt.size() > max_len / 2)
    throw ArgumentError("prompt of length " + std::to_string(prompt.size()) + " exceeds half the context " +
                        std::to_string(max_len));
  const std::size_t room = max_len - prompt.size() - 1;
  if (room == 0) throw ArgumentError("prompt leaves no room for input");
  TokenSeq out(prompt.begin(), prompt.end());
  out.push_back(kSepToken);
  out.insert(out.end(), input.begin(), input.begin() + static_cast<std::ptrdiff_t>(std::min(room, input.size())));
  return out;
}

namespace {
class PromptedOracle : public ModelOracle {
 public:
  PromptedOracle(OraclePtr llm, PromptSpec prompt, std::size_t max_len)
      : ModelOracle(llm->id() + "#" + prompt.id, llm->kind()), llm_(std::move(llm)), prompt_(std::move(prompt)),
        max_len_(max_len) {
    compose_prompted(prompt_.tokens, {}, max_len_);  // validates the prompt length
  }

 protected:
  Label do_predict(const std::optional<TokenSeq>&, std::span<const Token> input) override {
    if (prompt_.tokens.empty()) return llm_->predict(input);
    if (llm_->accepts_prompt()) {
      const std::size_t room = max_len_ - prompt_.tokens.size() - 1;
      return llm_->predict_prompted(prompt_.tokens, input.first(std::min(room, input.size())));
    }
    return llm_->predict(compose_prompted(prompt_.tokens, input, max_len_));
  }

 private:
  OraclePtr llm_;
  PromptSpec prompt_;
  std::size_t max_len_;
};
}  // namespace

OraclePtr as_prompted_model(OraclePtr llm, PromptSpec prompt, std::size_t max_len) {
  if (!llm) throw ArgumentError("prompted model needs an underlying oracle");
  if (prompt.id.empty()) throw ArgumentError("prompt id must not be empty");
  return std::make_shared<PromptedOracle>(std::move(llm), std::move(prompt), max_len);
}

// --- simulated LLM -----------------------------------------------------------

SimulatedLLM::SimulatedLLM(std::string id, std::size_t label_count, std::map<std::string, Behavior> behaviors,
                           std::vector<Route> routes, std::string default_behavior, double default_accuracy,
                           double noise, std::uint64_t seed)
    : ModelOracle(std::move(id), LabelKind::Class),
      label_count_(label_count),
      behaviors_(std::move(behaviors)),
      routes_(std::move(routes)),
      default_behavior_(std::move(default_behavior)),
      default_accuracy_(default_accuracy),
      noise_(noise),
      seed_(seed) {
  if (label_count_ < 2) throw ArgumentError("simulated model needs at least two labels");
  if (noise_ < 0.0 || noise_ > 1.0) throw ArgumentError("noise must lie in [0, 1]");
  auto check = [&](const std::string& b, double acc) {
    if (!behaviors_.contains(b)) throw ArgumentError("unknown behaviour '" + b + "'");
    if (acc < 0.0 || acc > 1.0) throw ArgumentError("accuracy must lie in [0, 1]");
  };
  check(default_behavior_, default_accuracy_);
  for (const auto& r : routes_) check(r.behavior, r.accuracy);
}

Label SimulatedLLM::do_predict(const std::optional<TokenSeq>& prompt, std::span<const Token> input) {
  const TokenSeq none;
  const TokenSeq& p = prompt ? *prompt : none;
  const std::string* behavior = &default_behavior_;
  double accuracy = default_accuracy_;
  for (const auto& r : routes_)
    if (r.prompt == p) {
      behavior = &r.behavior;
      accuracy = r.accuracy;
      break;
    }
  std::uint64_t h = Rng::mix(seed_, p.size());
  for (Token t : p) h = Rng::mix(h, t);
  h = Rng::mix(h, 0xabcdef);
  for (Token t : input) h = Rng::mix(h, t);
  Rng rng(h);
  const std::uint32_t truth = behaviors_.at(*behavior)(input) % label_count_;
  std::uint32_t out = truth;
  if (!rng.bernoulli(accuracy))
    out = static_cast<std::uint32_t>((truth + 1 + rng.below(label_count_ - 1)) % label_count_);
  if (rng.bernoulli(noise_)) out = static_cast<std::uint32_t>(rng.below(label_count_));
  return ClassLabel{out};
}

}  // namespace taskspace
