// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "taskspace/errors.hpp"
#include "taskspace/rng.hpp"
#include "taskspace/surrogate.hpp"

using namespace taskspace;

namespace {

SurrogateConfig tiny_config() {
  SurrogateConfig c;
  c.vocab = 12;
  c.width = 4;
  c.layers = 1;
  c.heads = 2;
  c.ff = 6;
  c.max_len = 8;
  c.classes = 3;
  c.seq_out = 3;
  return c;
}

TokenSeq random_tokens(Rng& rng, std::size_t len, std::size_t vocab) {
  TokenSeq t(len);
  for (auto& x : t) x = static_cast<Token>(kFirstContentToken + rng.below(vocab - kFirstContentToken));
  return t;
}

Label random_label(Rng& rng, LabelKind kind, const SurrogateConfig& c) {
  switch (kind) {
    case LabelKind::Class: return ClassLabel{static_cast<std::uint32_t>(rng.below(c.classes))};
    case LabelKind::Distribution: {
      std::vector<double> q(c.classes);
      double s = 0.0;
      for (auto& x : q) s += (x = rng.uniform() + 0.05);
      for (auto& x : q) x /= s;
      return DistributionLabel{q};
    }
    case LabelKind::Scalar: return ScalarLabel{rng.normal()};
    case LabelKind::Tokens: {
      TokenSeq t = random_tokens(rng, c.seq_out, c.vocab);
      t.back() = kPadToken;
      return TokenSeqLabel{t};
    }
  }
  return ClassLabel{0};
}

// Two token families: sequences built from {5,6} are class 0, from {9,10} class 1.
LabeledSet separable_set(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  LabeledSet s;
  for (std::size_t i = 0; i < n; ++i) {
    const bool one = rng.bernoulli(0.5);
    TokenSeq t(4 + rng.below(5));
    for (auto& x : t) x = static_cast<Token>((one ? 9 : 5) + rng.below(2));
    s.push_back({t, ClassLabel{one ? 1u : 0u}});
  }
  return s;
}

double accuracy(const SurrogateCheckpoint& ck, const LabeledSet& s) {
  std::size_t hit = 0;
  for (const auto& ex : s) hit += predict_label(ck, ex.tokens, LabelKind::Class) == ex.label;
  return static_cast<double>(hit) / static_cast<double>(s.size());
}

}  // namespace

TEST(Surrogate, InitIsDeterministic) {
  SurrogateConfig c;
  EXPECT_EQ(init_surrogate(c, 7).fingerprint, init_surrogate(c, 7).fingerprint);
  EXPECT_NE(init_surrogate(c, 7).fingerprint, init_surrogate(c, 8).fingerprint);
}

TEST(Surrogate, DefaultParameterCount) {
  // Tensor-by-tensor for V=64, d=32, L=2, ff=64, T=32, C=8, L_out=8:
  //   token + position embeddings      64*32 + 32*32           = 3072
  //   per layer: 2 norms (4*32) + q,k,v,o (4*(32*32+32)) + ffn (32*64+64 + 64*32+32)
  //            = 128 + 4224 + 4192                              = 8544, x2 = 17088
  //   final norm 64, class head 32*8+8 = 264, regression 33, sequence head 32*64+64 = 2112
  const std::size_t expected = 3072 + 17088 + 64 + 264 + 33 + 2112;
  auto ck = init_surrogate(SurrogateConfig{}, 1);
  EXPECT_EQ(ck.params.numel(), expected);
  EXPECT_EQ(SurrogateConfig{}.parameter_count(), expected);
}

TEST(Surrogate, InvalidConfigRejected) {
  SurrogateConfig c;
  c.heads = 3;
  EXPECT_THROW(init_surrogate(c, 1), ArgumentError);
  c = SurrogateConfig{};
  c.layers = 0;
  EXPECT_THROW(init_surrogate(c, 1), ArgumentError);
  c = SurrogateConfig{};
  c.vocab = 3;
  EXPECT_THROW(init_surrogate(c, 1), ArgumentError);
}

TEST(Surrogate, FingerprintTracksEveryParameterByte) {
  auto ck = init_surrogate(SurrogateConfig{}, 3);
  ParamVector p = ck.params;
  p[5][0] = std::nextafter(p[5][0], 1e9);
  EXPECT_NE(make_checkpoint(ck.config, p).fingerprint, ck.fingerprint);
}

TEST(LogProb, ZeroClassHeadIsUniform) {
  auto ck = init_surrogate(SurrogateConfig{}, 1);
  ParamVector p = ck.params;
  for (auto& v : p.at("head.class.w").vec()) v = 0.0;
  for (auto& v : p.at("head.class.b").vec()) v = 0.0;
  auto zeroed = make_checkpoint(ck.config, p);
  for (std::uint32_t c = 0; c < 8; ++c)
    EXPECT_NEAR(log_prob(zeroed, nullptr, {{4, 9, 17}, ClassLabel{c}}), std::log(1.0 / 8.0), 1e-12);
}

TEST(LogProb, ScalarAtPredictedMeanIsZero) {
  auto ck = init_surrogate(SurrogateConfig{}, 2);
  TokenSeq x{5, 6, 7, 8};
  const double mu = std::get<ScalarLabel>(predict_label(ck, x, LabelKind::Scalar)).value;
  EXPECT_EQ(log_prob(ck, nullptr, {x, ScalarLabel{mu}}), 0.0);
  EXPECT_NEAR(log_prob(ck, nullptr, {x, ScalarLabel{mu + 2.0}}), -2.0, 1e-12);
}

TEST(LogProb, OwnDistributionGivesNegativeEntropy) {
  auto ck = init_surrogate(SurrogateConfig{}, 4);
  TokenSeq x{11, 12, 3};
  auto q = std::get<DistributionLabel>(predict_label(ck, x, LabelKind::Distribution)).probs;
  double entropy = 0.0;
  for (double v : q) entropy -= v * std::log(v);
  EXPECT_NEAR(log_prob(ck, nullptr, {x, DistributionLabel{q}}), -entropy, 1e-12);
}

TEST(LogProb, ClassProbabilitiesNormalize) {
  auto ck = init_surrogate(SurrogateConfig{}, 5);
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    TokenSeq x = random_tokens(rng, 3 + rng.below(10), 64);
    double total = 0.0;
    for (std::uint32_t c = 0; c < 8; ++c) total += std::exp(log_prob(ck, nullptr, {x, ClassLabel{c}}));
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(LogProb, WrongKindIsContractViolation) {
  auto ck = init_surrogate(SurrogateConfig{}, 5);
  EXPECT_THROW(log_prob(ck, nullptr, {{4, 5}, ClassLabel{8}}), ContractError);
  EXPECT_THROW(log_prob(ck, nullptr, {{4, 5}, DistributionLabel{{0.5, 0.5}}}), ContractError);
  EXPECT_THROW(log_prob(ck, nullptr, {{4, 99}, ClassLabel{0}}), ContractError);
}

TEST(LogProb, GradientsMatchFiniteDifferencesForEveryKind) {
  const SurrogateConfig c = tiny_config();
  Rng rng(11);
  for (LabelKind kind : {LabelKind::Class, LabelKind::Distribution, LabelKind::Scalar, LabelKind::Tokens}) {
    for (int trial = 0; trial < 3; ++trial) {
      auto ck = init_surrogate(c, 100 + trial);
      TokenSeq x = random_tokens(rng, 1 + rng.below(c.max_len), c.vocab);
      if (x.size() > 2) x[1] = kPadToken;
      Example ex{x, random_label(rng, kind, c)};
      auto fn = log_prob_objective(c, ex);
      auto analytic = ad::value_and_grad(fn, ck.params);
      auto numeric = ad::finite_diff_grad(fn, ck.params, 1e-5);
      EXPECT_LE(ad::max_relative_error(analytic.grad.flatten(), numeric.flatten()), 1e-6)
          << to_string(kind) << " trial " << trial;

      // Same check with respect to the prefix, backbone held fixed.
      PrefixParams prefix = PrefixParams::random(c.layers, 2, c.width, 0.5, 7 + trial);
      auto pfn = [&](ad::Tape& t, std::span<const ad::Var> pre) {
        std::vector<ad::Var> back;
        for (std::size_t i = 0; i < ck.params.count(); ++i) back.push_back(t.borrow(ck.params[i], false));
        return log_prob_on_tape(t, c, back, pre, ex);
      };
      auto pa = ad::value_and_grad(pfn, prefix.params());
      auto pn = ad::finite_diff_grad(pfn, prefix.params(), 1e-5);
      EXPECT_LE(ad::max_relative_error(pa.grad.flatten(), pn.flatten()), 1e-6) << "prefix " << to_string(kind);
    }
  }
}

TEST(LogProb, EmptyPrefixEqualsVanillaAttention) {
  auto ck = init_surrogate(SurrogateConfig{}, 6);
  PrefixParams empty(ck.config.layers, 0, ck.config.width);
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    Example ex{random_tokens(rng, 2 + rng.below(20), 64), ClassLabel{static_cast<std::uint32_t>(rng.below(8))}};
    EXPECT_EQ(log_prob(ck, &empty, ex), log_prob(ck, nullptr, ex));
  }
}

TEST(LogProb, PrefixChangesTheOutput) {
  auto ck = init_surrogate(SurrogateConfig{}, 6);
  auto prefix = initial_prefix(ck.config, 4, 1, 1.0);
  Example ex{{5, 6, 7}, ClassLabel{1}};
  EXPECT_NE(log_prob(ck, &prefix, ex), log_prob(ck, nullptr, ex));
}

TEST(FineTuneFull, LearnsSeparableToySet) {
  auto ck = init_surrogate(SurrogateConfig{}, 1);
  auto train = separable_set(160, 3);
  auto tuned = fine_tune_full(ck, train, {3, 16, 1e-3, 9});
  EXPECT_GE(accuracy(tuned, train), 0.95);
}

TEST(FineTuneFull, ZeroEpochsAndDeterminism) {
  auto ck = init_surrogate(SurrogateConfig{}, 1);
  auto train = separable_set(20, 4);
  EXPECT_EQ(fine_tune_full(ck, train, {0, 16, 1e-3, 1}).fingerprint, ck.fingerprint);
  EXPECT_EQ(fine_tune_full(ck, train, {1, 8, 1e-3, 1}).fingerprint, fine_tune_full(ck, train, {1, 8, 1e-3, 1}).fingerprint);
  EXPECT_NE(fine_tune_full(ck, train, {1, 8, 1e-3, 1}).fingerprint, fine_tune_full(ck, train, {1, 8, 1e-3, 2}).fingerprint);
}

TEST(FineTuneFull, MixedKindsRejected) {
  LabeledSet s;
  s.push_back({{4, 5}, ClassLabel{0}});
  EXPECT_THROW(s.push_back({{4, 5}, ScalarLabel{1.0}}), ContractError);
  EXPECT_THROW(fine_tune_full(init_surrogate(SurrogateConfig{}, 1), LabeledSet{}, {}), ArgumentError);
}

TEST(FineTunePrefix, BackboneIsFrozen) {
  auto ck = init_surrogate(SurrogateConfig{}, 2);
  const ParamVector before = ck.params;
  auto train = separable_set(32, 5);
  auto prefix = fine_tune_prefix(ck, train, 4, {2, 16, 1e-2, 3});
  EXPECT_EQ(ck.params, before);
  EXPECT_EQ(checkpoint_fingerprint(ck.config, ck.params), ck.fingerprint);
  EXPECT_NE(prefix, initial_prefix(ck.config, 4, 3));
}

TEST(FineTunePrefix, ZeroEpochsReturnsInitialization) {
  auto ck = init_surrogate(SurrogateConfig{}, 2);
  auto train = separable_set(8, 5);
  EXPECT_EQ(fine_tune_prefix(ck, train, 4, {0, 16, 1e-2, 3}), initial_prefix(ck.config, 4, 3));
  EXPECT_THROW(fine_tune_prefix(ck, train, 0, {1, 16, 1e-2, 3}), ArgumentError);
}

TEST(FineTunePrefix, ImprovesTrueLabelLikelihood) {
  auto ck = init_surrogate(SurrogateConfig{}, 2);
  auto train = separable_set(64, 6);
  const TrainConfig cfg{3, 16, 1e-2, 4};
  auto init = initial_prefix(ck.config, 4, cfg.seed);
  auto tuned = fine_tune_prefix(ck, train, 4, cfg);
  double before = 0.0, after = 0.0;
  for (const auto& ex : train) {
    before += log_prob(ck, &init, ex);
    after += log_prob(ck, &tuned, ex);
  }
  EXPECT_GT(after / train.size(), before / train.size());
}

TEST(Pretrain, ReducesHeldOutMaskedLoss) {
  auto ck = init_surrogate(SurrogateConfig{}, 3);
  Rng rng(12);
  UnsupervisedPool pool;
  std::vector<TokenSeq> held;
  // Texts with local structure (runs of repeated tokens) so masking is learnable.
  auto make = [&rng]() {
    TokenSeq t;
    const std::size_t runs = 2 + rng.below(4);
    for (std::size_t r = 0; r < runs; ++r) {
      const Token tok = static_cast<Token>(kFirstContentToken + rng.below(20));
      for (int k = 0; k < 3; ++k) t.push_back(tok);
    }
    return t;
  };
  for (int i = 0; i < 1000; ++i) pool.texts.push_back(make());
  for (int i = 0; i < 100; ++i) held.push_back(make());
  pool.id = "test";
  const double before = masked_token_loss(ck, held, 0.15, 99);
  auto trained = pretrain_masked(ck, pool, {1, 16, 1e-3, 0.15, 1});
  const double after = masked_token_loss(trained, held, 0.15, 99);
  EXPECT_LT(after, before);

  EXPECT_EQ(pretrain_masked(ck, pool, {0, 16, 1e-3, 0.15, 1}).fingerprint, ck.fingerprint);
  UnsupervisedPool small = pool;
  small.texts.resize(64);
  EXPECT_EQ(pretrain_masked(ck, small, {1, 16, 1e-3, 0.15, 5}).fingerprint,
            pretrain_masked(ck, small, {1, 16, 1e-3, 0.15, 5}).fingerprint);
  EXPECT_THROW(pretrain_masked(ck, UnsupervisedPool{}, {}), ArgumentError);
}

TEST(Checkpoint, SaveLoadPreservesFingerprint) {
  auto ck = init_surrogate(SurrogateConfig{}, 9);
  const auto path = std::filesystem::temp_directory_path() / "taskspace_ckpt_test.ckpt";
  save_checkpoint(ck, path);
  auto loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.fingerprint, ck.fingerprint);
  EXPECT_EQ(loaded.params, ck.params);
  std::filesystem::remove(path);
}
