// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "taskspace/errors.hpp"
#include "taskspace/metrics.hpp"

using namespace taskspace;

namespace {

// Reference DCG written out term by term.
double hand_dcg(const std::vector<double>& rel_in_order) {
  double s = 0.0;
  for (std::size_t i = 0; i < rel_in_order.size(); ++i) s += rel_in_order[i] / std::log2(static_cast<double>(i) + 2.0);
  return s;
}

std::map<std::string, double> scores(std::size_t n) {
  std::map<std::string, double> m;
  for (std::size_t i = 0; i < n; ++i) m["c" + std::to_string(10 + i)] = static_cast<double>(i);
  return m;
}

}  // namespace

TEST(Ndcg, ReversedThreeItemsMatchesHandFormula) {
  const std::map<std::string, double> rel{{"a", 3}, {"b", 2}, {"c", 1}};
  const double hand = (1.0 / 1.0 + 2.0 / std::log2(3.0) + 3.0 / 2.0) / (3.0 / 1.0 + 2.0 / std::log2(3.0) + 1.0 / 2.0);
  const auto r = ndcg({"c", "b", "a"}, rel);
  EXPECT_NEAR(r.value, hand, 1e-12);
  EXPECT_NEAR(r.value, 0.7899980, 1e-6);
  EXPECT_FALSE(r.degenerate);
}

TEST(Ndcg, IdealOrderIsOne) {
  const std::map<std::string, double> rel{{"a", 0.2}, {"b", 0.9}, {"c", 0.0}, {"d", 0.5}};
  EXPECT_DOUBLE_EQ(ndcg({"b", "d", "a", "c"}, rel).value, 1.0);
}

TEST(Ndcg, EqualRelevancesGiveOneEitherWay) {
  const std::map<std::string, double> rel{{"x", 1}, {"y", 1}};
  EXPECT_DOUBLE_EQ(ndcg({"x", "y"}, rel).value, 1.0);
  EXPECT_DOUBLE_EQ(ndcg({"y", "x"}, rel).value, 1.0);
}

TEST(Ndcg, AllZeroIsFlaggedDegenerate) {
  const auto r = ndcg({"x", "y"}, {{"x", 0}, {"y", 0}});
  EXPECT_TRUE(r.degenerate);
  EXPECT_DOUBLE_EQ(r.value, 1.0);
}

TEST(Ndcg, RandomOrdersAgreeWithReference) {
  const std::map<std::string, double> rel{{"a", 0.1}, {"b", 0.7}, {"c", 0.3}, {"d", 1.0}, {"e", 0.0}};
  std::vector<std::string> order{"a", "b", "c", "d", "e"};
  std::vector<double> ideal{1.0, 0.7, 0.3, 0.1, 0.0};
  do {
    std::vector<double> in_order;
    for (const auto& id : order) in_order.push_back(rel.at(id));
    EXPECT_NEAR(ndcg(order, rel).value, hand_dcg(in_order) / hand_dcg(ideal), 1e-12);
  } while (std::next_permutation(order.begin(), order.end()));
}

TEST(Ndcg, RejectsBadInput) {
  EXPECT_THROW(ndcg({"a"}, {{"a", 1}, {"b", 1}}), ArgumentError);
  EXPECT_THROW(ndcg({"a", "a"}, {{"a", 1}, {"b", 1}}), ArgumentError);
  EXPECT_THROW(ndcg({"a", "b"}, {{"a", -1}, {"b", 1}}), ArgumentError);
}

TEST(AvgRank, PositionOfTrueBest) {
  const std::map<std::string, double> s{{"a", 0.1}, {"b", 0.9}, {"c", 0.4}};
  EXPECT_DOUBLE_EQ(avg_rank({"b", "a", "c"}, s), 1.0);
  EXPECT_DOUBLE_EQ(avg_rank({"a", "c", "b"}, s), 3.0);
  // tie between a and b resolves to a
  EXPECT_DOUBLE_EQ(avg_rank({"b", "a"}, {{"a", 1.0}, {"b", 1.0}}), 2.0);
  EXPECT_DOUBLE_EQ(avg_rank({"only"}, {{"only", -3.0}}), 1.0);
  EXPECT_THROW(avg_rank({"a", "x", "c"}, s), ArgumentError);
}

TEST(PerformanceRate, RatioToBest) {
  EXPECT_DOUBLE_EQ(performance_rate(0.6, {0.6, 0.75, 0.3}), 0.8);
  EXPECT_DOUBLE_EQ(performance_rate(0.75, {0.6, 0.75}), 1.0);
  EXPECT_THROW(performance_rate(0.0, {0.0, -1.0}), DegenerateError);
  EXPECT_THROW(performance_rate(0.0, {}), ArgumentError);
}

TEST(Relevance, MinMaxAndShift) {
  const std::map<std::string, double> g{{"a", -0.2}, {"b", 0.3}, {"c", 0.05}};
  const auto mm = relevance_from_gains(g, RelevanceMapping::MinMax);
  EXPECT_DOUBLE_EQ(mm.at("a"), 0.0);
  EXPECT_DOUBLE_EQ(mm.at("b"), 1.0);
  EXPECT_DOUBLE_EQ(mm.at("c"), 0.5);
  const auto sh = relevance_from_gains(g, RelevanceMapping::Shift);
  EXPECT_DOUBLE_EQ(sh.at("b"), 0.5);
  const auto eq = relevance_from_gains({{"a", 2.0}, {"b", 2.0}}, RelevanceMapping::MinMax);
  EXPECT_DOUBLE_EQ(eq.at("a"), 1.0);
  EXPECT_DOUBLE_EQ(eq.at("b"), 1.0);
}

TEST(RandomBaseline, ExpectedRankIsMidpoint) {
  for (std::size_t n : {2u, 5u, 12u, 26u}) {
    const auto s = scores(n);
    const auto rb = random_ranking_baseline(s, relevance_from_gains(s, RelevanceMapping::MinMax), 1000, 17 + n);
    const double nd = static_cast<double>(n);
    const double sigma = std::sqrt((nd * nd - 1.0) / 12.0 / 1000.0);  // uniform position on 1..n
    EXPECT_NEAR(rb.rho, (nd + 1.0) / 2.0, 4.0 * sigma) << n;
    EXPECT_NEAR(rb.rho_stderr, sigma, 0.25 * sigma) << n;
    EXPECT_GT(rb.ndcg, 0.0);
    EXPECT_LE(rb.ndcg, 1.0);
  }
}

TEST(RandomBaseline, Reproducible) {
  const auto s = scores(6);
  const auto rel = relevance_from_gains(s, RelevanceMapping::MinMax);
  const auto a = random_ranking_baseline(s, rel, 200, 4), b = random_ranking_baseline(s, rel, 200, 4);
  EXPECT_EQ(a.rho, b.rho);
  EXPECT_EQ(a.ndcg, b.ndcg);
  EXPECT_THROW(random_ranking_baseline(s, rel, 0, 4), ArgumentError);
}
