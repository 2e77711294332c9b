// SPDX-License-Identifier: Apache-2.0
#include "taskspace/families.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "taskspace/errors.hpp"
#include "taskspace/json_util.hpp"
#include "taskspace/hash.hpp"
#include "taskspace/rng.hpp"

namespace taskspace {

namespace {

constexpr Token kParityToken = 5;
constexpr Token kPositiveLo = 10, kNegativeLo = 20, kLexiconSpan = 10;
constexpr Token kHeavyLo = 40, kHeavyHi = 50;

std::uint64_t family_hash(const std::string& id) {
  const std::string h = sha256_hex(id).substr(0, 16);
  return std::stoull(h, nullptr, 16);
}

// Filler token in [lo, vocab); skew > 0 favours low ids.
Token filler(Rng& rng, Token lo, std::size_t vocab, double skew) {
  const std::size_t span = vocab - lo;
  const double u = std::pow(rng.uniform(), 1.0 + skew);
  return static_cast<Token>(lo + std::min(span - 1, static_cast<std::size_t>(u * static_cast<double>(span))));
}

// Filler avoiding the tokens that carry signal for the family.
Token neutral(Rng& rng, const TaskFamily& f) {
  for (;;) {
    const Token t = filler(rng, kFirstContentToken, f.vocab, f.vocab_skew);
    if (f.id == "parity" && t == kParityToken) continue;
    if (f.id == "sentiment-lexicon" && t >= kPositiveLo && t < kNegativeLo + kLexiconSpan) continue;
    if (f.id == "token-count-regression" && t >= kHeavyLo && t < kHeavyHi) continue;
    return t;
  }
}

Token content(Rng& rng, std::size_t vocab) {
  return static_cast<Token>(kFirstContentToken + rng.below(vocab - kFirstContentToken));
}

TokenSeq gen_input(const TaskFamily& f, Rng& rng) {
  TokenSeq t;
  if (f.id == "majority-class") {
    const std::size_t n = 6 + rng.below(11);
    const Token dom = content(rng, f.vocab);
    for (std::size_t i = 0; i < n; ++i) t.push_back(rng.bernoulli(0.45) ? dom : neutral(rng, f));
  } else if (f.id == "parity") {
    const std::size_t n = 4 + rng.below(9);
    for (std::size_t i = 0; i < n; ++i) t.push_back(neutral(rng, f));
    const std::size_t k = rng.below(5);
    for (std::size_t i = 0; i < k; ++i) t.insert(t.begin() + static_cast<std::ptrdiff_t>(rng.below(t.size() + 1)), kParityToken);
  } else if (f.id == "pair-match") {
    const std::size_t n = 2 + rng.below(5);
    TokenSeq a;
    for (std::size_t i = 0; i < n; ++i) a.push_back(neutral(rng, f));
    TokenSeq b = a;
    if (rng.bernoulli(0.5)) {
      if (rng.bernoulli(0.5) || b.size() == 1) {
        const std::size_t j = rng.below(b.size());
        Token r;
        do r = neutral(rng, f);
        while (r == b[j]);
        b[j] = r;
      } else {
        std::swap(b[0], b[b.size() - 1]);
        if (b == a) b.push_back(neutral(rng, f));
      }
    }
    t = a;
    t.push_back(kSepToken);
    t.insert(t.end(), b.begin(), b.end());
  } else if (f.id == "token-count-regression") {
    const std::size_t n = 4 + rng.below(13);
    const double heavy_rate = rng.uniform() * 0.6;
    for (std::size_t i = 0; i < n; ++i)
      t.push_back(rng.bernoulli(heavy_rate) ? static_cast<Token>(kHeavyLo + rng.below(kHeavyHi - kHeavyLo)) : neutral(rng, f));
  } else if (f.id == "fill-mask-seq") {
    const std::size_t period = 2 + rng.below(3);
    TokenSeq pat;
    for (std::size_t i = 0; i < period; ++i) pat.push_back(neutral(rng, f));
    const std::size_t n = std::max<std::size_t>(f.seq_out, 8 + rng.below(9));
    for (std::size_t i = 0; i < n; ++i) t.push_back(pat[i % period]);
    // Mask at most one slot per period so the pattern stays recoverable.
    for (std::size_t i = period; i < n; ++i)
      if (rng.bernoulli(0.25) && t[i - period] != kMaskToken) t[i] = kMaskToken;
  } else if (f.id == "sentiment-lexicon") {
    const std::size_t n = 5 + rng.below(10);
    const bool positive = rng.bernoulli(0.5);
    const std::size_t strong = 2 + rng.below(3);
    const std::size_t weak = rng.below(strong - 1);
    const Token pos_lo = positive ? kPositiveLo : kNegativeLo;
    const Token neg_lo = positive ? kNegativeLo : kPositiveLo;
    for (std::size_t i = 0; i < n; ++i) t.push_back(neutral(rng, f));
    for (std::size_t i = 0; i < strong; ++i)
      t.insert(t.begin() + static_cast<std::ptrdiff_t>(rng.below(t.size() + 1)), static_cast<Token>(pos_lo + rng.below(kLexiconSpan)));
    for (std::size_t i = 0; i < weak; ++i)
      t.insert(t.begin() + static_cast<std::ptrdiff_t>(rng.below(t.size() + 1)), static_cast<Token>(neg_lo + rng.below(kLexiconSpan)));
  } else {
    throw ArgumentError("unknown task family '" + f.id + "'");
  }
  return t;
}

Label corrupt(const Label& y, const TaskFamily& f, Rng& rng) {
  return std::visit(
      [&](const auto& l) -> Label {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, ClassLabel>) {
          const std::size_t k = f.id == "majority-class" ? f.classes : 2;
          return ClassLabel{static_cast<std::uint32_t>((l.index + 1 + rng.below(k - 1)) % k)};
        } else if constexpr (std::is_same_v<T, ScalarLabel>) {
          return ScalarLabel{l.value + 2.0 * rng.normal()};
        } else if constexpr (std::is_same_v<T, TokenSeqLabel>) {
          TokenSeqLabel out = l;
          if (!out.tokens.empty()) out.tokens[rng.below(out.tokens.size())] = content(rng, f.vocab);
          return out;
        } else {
          return l;
        }
      },
      y);
}

}  // namespace

nlohmann::json TaskFamily::to_json() const {
  return {{"id", id},           {"seed", seed},       {"n_train", n_train}, {"n_test", n_test},
          {"noise_rate", noise_rate}, {"vocab_skew", vocab_skew}, {"classes", classes}, {"seq_out", seq_out},
          {"vocab", vocab}};
}

TaskFamily TaskFamily::from_json(const nlohmann::json& j) {
  StrictObject o(j, "task family",
                 {"id", "seed", "n_train", "n_test", "noise_rate", "vocab_skew", "classes", "seq_out", "vocab"});
  if (!o.has("id")) throw ConfigError("task family needs an id");
  TaskFamily f;
  o.get("id", f.id);
  o.get("seed", f.seed);
  o.get("n_train", f.n_train);
  o.get("n_test", f.n_test);
  o.get("noise_rate", f.noise_rate);
  o.get("vocab_skew", f.vocab_skew);
  o.get("classes", f.classes);
  o.get("seq_out", f.seq_out);
  o.get("vocab", f.vocab);
  return f;
}

const std::vector<std::string>& family_ids() {
  static const std::vector<std::string> ids = {"majority-class",         "parity",        "pair-match",
                                               "token-count-regression", "fill-mask-seq", "sentiment-lexicon"};
  return ids;
}

LabelKind family_kind(const std::string& id) {
  if (id == "token-count-regression") return LabelKind::Scalar;
  if (id == "fill-mask-seq") return LabelKind::Tokens;
  if (std::find(family_ids().begin(), family_ids().end(), id) == family_ids().end())
    throw ArgumentError("unknown task family '" + id + "'");
  return LabelKind::Class;
}

Label family_rule(const std::string& id, std::span<const Token> in, std::size_t classes, std::size_t seq_out) {
  if (id == "majority-class") {
    std::map<Token, std::size_t> counts;
    for (Token t : in)
      if (t != kPadToken) ++counts[t];
    Token best = kPadToken;
    std::size_t best_n = 0;
    for (const auto& [t, n] : counts)
      if (n > best_n) best = t, best_n = n;
    return ClassLabel{static_cast<std::uint32_t>(best % classes)};
  }
  if (id == "parity") return ClassLabel{static_cast<std::uint32_t>(std::count(in.begin(), in.end(), kParityToken) % 2)};
  if (id == "pair-match") {
    auto sep = std::find(in.begin(), in.end(), kSepToken);
    TokenSeq a, b;
    if (sep == in.end()) {
      const std::size_t h = in.size() / 2;
      a.assign(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(h));
      b.assign(in.begin() + static_cast<std::ptrdiff_t>(h), in.end());
    } else {
      a.assign(in.begin(), sep);
      b.assign(sep + 1, in.end());
    }
    return ClassLabel{a == b ? 1u : 0u};
  }
  if (id == "token-count-regression") {
    double heavy = 0.0;
    for (Token t : in) heavy += (t >= kHeavyLo && t < kHeavyHi) ? 1.0 : 0.0;
    return ScalarLabel{heavy - 0.25 * static_cast<double>(in.size())};
  }
  if (id == "fill-mask-seq") {
    TokenSeq out(seq_out, kPadToken);
    std::size_t period = 0;
    for (std::size_t p = 1; p <= 4 && period == 0; ++p) {
      bool ok = in.size() > p;
      for (std::size_t i = p; ok && i < in.size(); ++i)
        if (in[i] != kMaskToken && in[i - p] != kMaskToken && in[i] != in[i - p]) ok = false;
      if (ok) period = p;
    }
    for (std::size_t i = 0; i < seq_out && i < in.size(); ++i) {
      Token t = in[i];
      if (t == kMaskToken && period > 0)
        for (std::size_t j = i % period; j < in.size(); j += period)
          if (in[j] != kMaskToken) {
            t = in[j];
            break;
          }
      out[i] = t;
    }
    return TokenSeqLabel{std::move(out)};
  }
  if (id == "sentiment-lexicon") {
    long score = 0;
    for (Token t : in) {
      if (t >= kPositiveLo && t < kPositiveLo + kLexiconSpan) ++score;
      if (t >= kNegativeLo && t < kNegativeLo + kLexiconSpan) --score;
    }
    return ClassLabel{score > 0 ? 1u : 0u};
  }
  throw ArgumentError("unknown task family '" + id + "'");
}

FamilySplit gen_family(const TaskFamily& f) {
  (void)family_kind(f.id);
  if (f.vocab < kHeavyHi + 4) throw ArgumentError("task families need a vocabulary of at least 54 tokens");
  if (f.classes < 2) throw ArgumentError("task families need at least two classes");
  if (f.noise_rate < 0.0 || f.noise_rate > 1.0) throw ArgumentError("noise rate must lie in [0, 1]");
  Rng rng(Rng::mix(family_hash(f.id), f.seed));
  std::set<TokenSeq> seen;
  FamilySplit out;
  const std::size_t total = f.n_train + f.n_test;
  std::size_t attempts = 0;
  while (out.train.size() + out.test.size() < total) {
    if (++attempts > 50 * total + 1000) throw DegenerateError("family " + f.id + " cannot produce enough distinct inputs");
    TokenSeq x = gen_input(f, rng);
    if (!seen.insert(x).second) continue;
    Label y = family_rule(f.id, x, f.classes, f.seq_out);
    if (f.noise_rate > 0.0 && rng.bernoulli(f.noise_rate)) y = corrupt(y, f, rng);
    (out.train.size() < f.n_train ? out.train : out.test).push_back({std::move(x), std::move(y)});
  }
  return out;
}

LabeledSet shuffle_labels(const LabeledSet& data, std::size_t classes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Label> labels;
  for (const auto& ex : data) labels.push_back(ex.label);
  rng.shuffle(labels);
  LabeledSet out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Label y = labels[i];
    if (auto* c = std::get_if<ClassLabel>(&y)) c->index = static_cast<std::uint32_t>(rng.below(classes));
    out.push_back({data[i].tokens, std::move(y)});
  }
  return out;
}

}  // namespace taskspace
