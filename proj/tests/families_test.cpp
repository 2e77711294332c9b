// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <set>

#include "taskspace/errors.hpp"
#include "taskspace/families.hpp"

using namespace taskspace;

namespace {

TaskFamily spec(const std::string& id, std::uint64_t seed = 3) {
  TaskFamily f;
  f.id = id;
  f.seed = seed;
  f.n_train = 120;
  f.n_test = 80;
  return f;
}

std::uint32_t cls(const Label& l) { return std::get<ClassLabel>(l).index; }

bool same(const LabeledSet& a, const LabeledSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].tokens != b[i].tokens || !(a[i].label == b[i].label)) return false;
  return true;
}

}  // namespace

TEST(FamilyRule, ParityCountsTokenFive) {
  EXPECT_EQ(cls(family_rule("parity", TokenSeq{7, 5, 9, 5, 5}, 8, 8)), 1u);
  EXPECT_EQ(cls(family_rule("parity", TokenSeq{5, 5}, 8, 8)), 0u);
  EXPECT_EQ(cls(family_rule("parity", TokenSeq{9}, 8, 8)), 0u);
}

TEST(FamilyRule, PairMatchComparesAroundSeparator) {
  EXPECT_EQ(cls(family_rule("pair-match", TokenSeq{7, 8, kSepToken, 7, 8}, 8, 8)), 1u);
  EXPECT_EQ(cls(family_rule("pair-match", TokenSeq{7, 8, kSepToken, 8, 7}, 8, 8)), 0u);
  // no separator: halves
  EXPECT_EQ(cls(family_rule("pair-match", TokenSeq{4, 9, 4, 9}, 8, 8)), 1u);
}

TEST(FamilyRule, MajorityTakesMostFrequentModClasses) {
  EXPECT_EQ(cls(family_rule("majority-class", TokenSeq{11, 30, 11, 4}, 8, 8)), 11u % 8);
  // ties go to the smallest token
  EXPECT_EQ(cls(family_rule("majority-class", TokenSeq{13, 9, 13, 9}, 8, 8)), 9u % 8);
}

TEST(FamilyRule, SentimentAndRegression) {
  EXPECT_EQ(cls(family_rule("sentiment-lexicon", TokenSeq{12, 15, 22, 40}, 8, 8)), 1u);
  EXPECT_EQ(cls(family_rule("sentiment-lexicon", TokenSeq{12, 22, 25}, 8, 8)), 0u);
  const auto r = std::get<ScalarLabel>(family_rule("token-count-regression", TokenSeq{41, 49, 3, 50}, 8, 8));
  EXPECT_DOUBLE_EQ(r.value, 2.0 - 1.0);
}

TEST(FamilyRule, FillMaskRecoversPeriod) {
  const TokenSeq in{7, 9, kMaskToken, 9, 7, kMaskToken, 7, 9};
  const auto out = std::get<TokenSeqLabel>(family_rule("fill-mask-seq", in, 8, 6));
  EXPECT_EQ(out.tokens, (TokenSeq{7, 9, 7, 9, 7, 9}));
}

TEST(FamilyRule, UnknownFamilyThrows) {
  EXPECT_THROW(family_rule("nope", TokenSeq{3}, 8, 8), ArgumentError);
  EXPECT_THROW(gen_family(spec("nope")), ArgumentError);
}

TEST(GenFamily, DeterministicAndSeedSensitive) {
  for (const auto& id : family_ids()) {
    const auto a = gen_family(spec(id)), b = gen_family(spec(id));
    EXPECT_TRUE(same(a.train, b.train) && same(a.test, b.test)) << id;
    EXPECT_FALSE(same(a.train, gen_family(spec(id, 4)).train)) << id;
  }
}

TEST(GenFamily, SplitsDisjointSizedAndRuleLabelled) {
  for (const auto& id : family_ids()) {
    const auto s = gen_family(spec(id));
    EXPECT_EQ(s.train.size(), 120u) << id;
    EXPECT_EQ(s.test.size(), 80u) << id;
    EXPECT_EQ(s.train.kind(), family_kind(id));
    std::set<TokenSeq> train;
    for (const auto& ex : s.train) train.insert(ex.tokens);
    EXPECT_EQ(train.size(), s.train.size()) << id;
    for (const auto& ex : s.test) EXPECT_FALSE(train.contains(ex.tokens)) << id;
    for (const auto* part : {&s.train, &s.test})
      for (const auto& ex : *part) {
        EXPECT_TRUE(ex.label == family_rule(id, ex.tokens, 8, 8)) << id;
        validate_tokens(ex.tokens, 64, 32);
      }
  }
}

TEST(GenFamily, NoiseCorruptsAboutTheRequestedFraction) {
  auto f = spec("sentiment-lexicon");
  f.n_train = 1000;
  f.n_test = 0;
  f.noise_rate = 0.3;
  const auto s = gen_family(f);
  std::size_t flipped = 0;
  for (const auto& ex : s.train) flipped += !(ex.label == family_rule(f.id, ex.tokens, 8, 8));
  EXPECT_NEAR(static_cast<double>(flipped) / 1000.0, 0.3, 0.05);
}

TEST(GenFamily, RejectsBadKnobs) {
  auto f = spec("parity");
  f.vocab = 20;
  EXPECT_THROW(gen_family(f), ArgumentError);
  f = spec("parity");
  f.noise_rate = 1.5;
  EXPECT_THROW(gen_family(f), ArgumentError);
}

TEST(TaskFamilyJson, RoundTripAndStrictKeys) {
  auto f = spec("pair-match", 11);
  f.noise_rate = 0.125;
  const auto g = TaskFamily::from_json(f.to_json());
  EXPECT_EQ(g.to_json(), f.to_json());
  auto j = f.to_json();
  j["colour"] = "red";
  EXPECT_THROW(TaskFamily::from_json(j), ConfigError);
  j = f.to_json();
  j["seed"] = "eleven";
  EXPECT_THROW(TaskFamily::from_json(j), ConfigError);
  EXPECT_THROW(TaskFamily::from_json(nlohmann::json{{"seed", 1}}), ConfigError);
}

TEST(ShuffleLabels, KeepsInputsAndRange) {
  const auto s = gen_family(spec("majority-class"));
  const auto r = shuffle_labels(s.train, 8, 5);
  ASSERT_EQ(r.size(), s.train.size());
  std::size_t moved = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_EQ(r[i].tokens, s.train[i].tokens);
    EXPECT_LT(cls(r[i].label), 8u);
    moved += !(r[i].label == s.train[i].label);
  }
  EXPECT_GT(moved, r.size() / 2);
}
