// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace taskspace {

/// 1-based position of the highest-scoring id within `predicted` (ties in the
/// scores resolve to the smallest id). `predicted` must be a permutation of
/// the keys of `true_scores`.
double avg_rank(const std::vector<std::string>& predicted, const std::map<std::string, double>& true_scores);

struct NdcgResult {
  double value = 1.0;
  bool degenerate = false;  // all relevances zero
};

/// DCG = sum_i rel(pred_i) / log2(i + 1) with 1-based i, divided by the ideal DCG.
NdcgResult ndcg(const std::vector<std::string>& predicted, const std::map<std::string, double>& relevance);

/// selected / max(all). Raises DegenerateError when max(all) <= 0.
double performance_rate(double selected, const std::vector<double>& all);

enum class RelevanceMapping { MinMax, Shift };

/// Per-target relevance from gains. MinMax sends the best gain to 1 and the
/// worst to 0 (all-equal gains give 1 everywhere); Shift subtracts the
/// minimum only.
std::map<std::string, double> relevance_from_gains(const std::map<std::string, double>& gains, RelevanceMapping mapping);

/// Expected metrics of a uniformly random ranking, estimated by Monte Carlo.
struct RandomBaseline {
  double rho = 0.0;
  double ndcg = 0.0;
  double rho_stderr = 0.0;
};
RandomBaseline random_ranking_baseline(const std::map<std::string, double>& true_scores,
                                       const std::map<std::string, double>& relevance, std::size_t trials,
                                       std::uint64_t seed);

}  // namespace taskspace
