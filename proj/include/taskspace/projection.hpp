// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "taskspace/embedding.hpp"

namespace taskspace {

struct ProjectedPoint {
  std::string id;
  EmbeddingKind kind = EmbeddingKind::DTE;
  Method method = Method::TaskEmb;
  std::string source;
  std::vector<double> coords;
};

struct Projection {
  std::vector<ProjectedPoint> points;  // sorted by id
  std::size_t requested = 0;
  std::size_t components = 0;          // < requested when the centered data has lower rank
  std::vector<double> variance;        // per component, descending
  bool rank_deficient() const { return components < requested; }

  /// id, kind, method, source, pc1..pcK; one row per point.
  std::string to_tsv() const;
};

/// Mean-centered PCA through the n x n Gram matrix. Each component's sign is
/// fixed so that its largest-magnitude coordinate is positive (first such
/// point by id on ties).
Projection pca_project(const std::vector<std::pair<std::string, TaskEmbedding>>& embeddings, std::size_t dims = 2);

}  // namespace taskspace
