// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "taskspace/errors.hpp"
#include "taskspace/projection.hpp"

using namespace taskspace;

namespace {

TaskEmbedding emb(std::vector<float> v, Method m = Method::TaskEmb, std::string fp = "fp") {
  TaskEmbedding e;
  e.vector = std::move(v);
  e.method = m;
  e.fingerprint = std::move(fp);
  e.source_id = "src";
  return e;
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST(Projection, TwoClustersStaySeparated) {
  // Two tight groups around distant centres in 6 dimensions.
  const auto p = pca_project({{"a1", emb({5, 5, 0, 0, 1, 0})},
                              {"a2", emb({5.1f, 4.9f, 0, 0, 1, 0.05f})},
                              {"b1", emb({0, 0, 5, 5, 0, 1})},
                              {"b2", emb({0.05f, 0, 4.9f, 5.1f, 0, 1})}},
                             2);
  ASSERT_EQ(p.points.size(), 4u);
  const auto& a1 = p.points[0].coords;
  const auto& a2 = p.points[1].coords;
  const auto& b1 = p.points[2].coords;
  const auto& b2 = p.points[3].coords;
  std::vector<double> ca(a1.size()), cb(a1.size());
  for (std::size_t k = 0; k < a1.size(); ++k) {
    ca[k] = (a1[k] + a2[k]) / 2;
    cb[k] = (b1[k] + b2[k]) / 2;
  }
  EXPECT_GT(dist(ca, cb), std::max(dist(a1, a2), dist(b1, b2)));
}

TEST(Projection, DistanceIsPreservedAlongTheOnlyComponent) {
  const auto p = pca_project({{"x", emb({1, 0, 0})}, {"y", emb({0, 3, 4})}}, 2);
  EXPECT_EQ(p.components, 1u);
  EXPECT_TRUE(p.rank_deficient());
  ASSERT_EQ(p.points[0].coords.size(), 1u);
  EXPECT_NEAR(std::abs(p.points[0].coords[0] - p.points[1].coords[0]), std::sqrt(1.0 + 9.0 + 16.0), 1e-6);
  EXPECT_NE(p.points[0].coords[0], p.points[1].coords[0]);
}

TEST(Projection, DuplicatedEmbeddingsShareCoordinates) {
  const auto p = pca_project({{"a", emb({1, 2, 3})}, {"b", emb({1, 2, 3})}, {"c", emb({3, 0, 1})}}, 2);
  EXPECT_EQ(p.points[0].coords, p.points[1].coords);
}

TEST(Projection, SortedByIdWithPositiveLargestCoordinate) {
  const auto p = pca_project({{"z", emb({0, 1, 0})}, {"m", emb({2, 0, 1})}, {"a", emb({-1, -1, 4})}}, 2);
  EXPECT_EQ(p.points[0].id, "a");
  EXPECT_EQ(p.points[2].id, "z");
  for (std::size_t k = 0; k < p.components; ++k) {
    double best = 0.0;
    for (const auto& pt : p.points)
      if (std::abs(pt.coords[k]) > std::abs(best)) best = pt.coords[k];
    EXPECT_GT(best, 0.0);
  }
  EXPECT_FALSE(p.rank_deficient());
  EXPECT_GE(p.variance[0], p.variance[1]);
}

TEST(Projection, DeterministicAcrossInputOrder) {
  const auto p = pca_project({{"b", emb({0, 1, 0})}, {"a", emb({2, 0, 1})}, {"c", emb({1, 1, 4})}}, 2);
  const auto q = pca_project({{"c", emb({1, 1, 4})}, {"a", emb({2, 0, 1})}, {"b", emb({0, 1, 0})}}, 2);
  EXPECT_EQ(p.to_tsv(), q.to_tsv());
}

TEST(Projection, TsvLayout) {
  const auto p = pca_project({{"x", emb({1, 0})}, {"y", emb({0, 1})}}, 2);
  const std::string tsv = p.to_tsv();
  EXPECT_EQ(tsv.substr(0, tsv.find('\n')), "id\tkind\tmethod\tsource\tpc1");
}

TEST(Projection, RejectsBadInput) {
  EXPECT_THROW(pca_project({{"x", emb({1, 0})}}, 2), ArgumentError);
  EXPECT_THROW(pca_project({{"x", emb({1, 0})}, {"x", emb({0, 1})}}, 2), ArgumentError);
  EXPECT_THROW(pca_project({{"x", emb({1, 0})}, {"y", emb({0, 1}, Method::TuPaTE)}}, 2), IncompatibleSpaceError);
  EXPECT_THROW(pca_project({{"x", emb({1, 0})}, {"y", emb({0, 1}, Method::TaskEmb, "other")}}, 2),
               IncompatibleSpaceError);
  EXPECT_THROW(pca_project({{"x", emb({1, 0})}, {"y", emb({0, 1, 2})}}, 2), IncompatibleSpaceError);
}

TEST(Projection, IdenticalPointsHaveNoComponents) {
  const auto p = pca_project({{"x", emb({1, 2})}, {"y", emb({1, 2})}}, 2);
  EXPECT_EQ(p.components, 0u);
  EXPECT_TRUE(p.rank_deficient());
}
