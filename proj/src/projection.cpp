// SPDX-License-Identifier: Apache-2.0
#include "taskspace/projection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <Eigen/Dense>

#include "taskspace/errors.hpp"

namespace taskspace {

std::string Projection::to_tsv() const {
  std::string out = "id\tkind\tmethod\tsource";
  for (std::size_t k = 0; k < components; ++k) out += "\tpc" + std::to_string(k + 1);
  out += "\n";
  char buf[40];
  for (const auto& p : points) {
    out += p.id + "\t" + std::string(to_string(p.kind)) + "\t" + std::string(to_string(p.method)) + "\t" + p.source;
    for (double c : p.coords) {
      std::snprintf(buf, sizeof(buf), "\t%.9g", c);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

Projection pca_project(const std::vector<std::pair<std::string, TaskEmbedding>>& embeddings, std::size_t dims) {
  if (embeddings.size() < 2) throw ArgumentError("projection needs at least two embeddings");
  if (dims == 0) throw ArgumentError("projection needs at least one dimension");
  std::vector<std::pair<std::string, TaskEmbedding>> sorted = embeddings;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::set<std::string> seen;
  for (const auto& [id, e] : sorted) {
    if (!seen.insert(id).second) throw ArgumentError("duplicate embedding id '" + id + "'");
    try {
      require_compatible(sorted.front().second, e);
    } catch (const IncompatibleSpaceError& err) {
      throw IncompatibleSpaceError("cannot project '" + id + "' with '" + sorted.front().first + "': " + err.what());
    }
  }

  const auto n = static_cast<Eigen::Index>(sorted.size());
  const auto d = static_cast<Eigen::Index>(sorted.front().second.dimension());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = sorted[static_cast<std::size_t>(i)].second.vector[static_cast<std::size_t>(j)];
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd gram = x * x.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition of the Gram matrix failed");

  const Eigen::VectorXd& vals = eig.eigenvalues();  // ascending
  const double top = std::max(vals(n - 1), 0.0);
  const double tol = 1e-10 * std::max(top, 1e-300) + 1e-300;

  Projection out;
  out.requested = dims;
  for (const auto& [id, e] : sorted) out.points.push_back({id, e.kind, e.method, e.source_id, {}});
  for (Eigen::Index k = n - 1; k >= 0 && out.components < dims; --k) {
    if (!(vals(k) > tol)) break;
    // Axis in feature space, then each row projected on its own: equal rows get equal coordinates.
    const Eigen::VectorXd axis = x.transpose() * eig.eigenvectors().col(k) / std::sqrt(vals(k));
    Eigen::VectorXd coord(n);
    for (Eigen::Index i = 0; i < n; ++i) coord(i) = x.row(i).dot(axis);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (std::abs(coord(i)) > std::abs(coord(arg))) arg = i;
    if (coord(arg) < 0) coord = -coord;
    for (Eigen::Index i = 0; i < n; ++i) out.points[static_cast<std::size_t>(i)].coords.push_back(coord(i));
    out.variance.push_back(vals(k) / static_cast<double>(n));
    ++out.components;
  }
  return out;
}

}  // namespace taskspace
