// SPDX-License-Identifier: Apache-2.0
#include "taskspace/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "taskspace/errors.hpp"
#include "taskspace/rng.hpp"

namespace taskspace {

namespace {
void require_permutation(const std::vector<std::string>& predicted, const std::map<std::string, double>& scores) {
  if (predicted.size() != scores.size()) throw ArgumentError("predicted ranking is not a permutation of the candidates");
  std::set<std::string> seen;
  for (const auto& id : predicted)
    if (!scores.contains(id) || !seen.insert(id).second)
      throw ArgumentError("predicted ranking is not a permutation of the candidates (at '" + id + "')");
}
}  // namespace

double avg_rank(const std::vector<std::string>& predicted, const std::map<std::string, double>& true_scores) {
  if (true_scores.empty()) throw ArgumentError("no candidates");
  require_permutation(predicted, true_scores);
  auto best = true_scores.begin();
  for (auto it = true_scores.begin(); it != true_scores.end(); ++it)
    if (it->second > best->second) best = it;
  const auto pos = std::find(predicted.begin(), predicted.end(), best->first) - predicted.begin();
  return static_cast<double>(pos + 1);
}

NdcgResult ndcg(const std::vector<std::string>& predicted, const std::map<std::string, double>& relevance) {
  require_permutation(predicted, relevance);
  std::vector<double> ideal;
  for (const auto& [_, r] : relevance) {
    if (r < 0.0 || !std::isfinite(r)) throw ArgumentError("relevance must be finite and non-negative");
    ideal.push_back(r);
  }
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double disc = std::log2(static_cast<double>(i) + 2.0);
    dcg += relevance.at(predicted[i]) / disc;
    idcg += ideal[i] / disc;
  }
  if (idcg == 0.0) return {1.0, true};
  return {dcg / idcg, false};
}

double performance_rate(double selected, const std::vector<double>& all) {
  if (all.empty()) throw ArgumentError("performance rate needs at least one candidate");
  const double best = *std::max_element(all.begin(), all.end());
  if (best <= 0.0) throw DegenerateError("performance rate is undefined when the best performance is not positive");
  return selected / best;
}

std::map<std::string, double> relevance_from_gains(const std::map<std::string, double>& gains, RelevanceMapping mapping) {
  if (gains.empty()) return {};
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& [_, g] : gains) lo = std::min(lo, g), hi = std::max(hi, g);
  std::map<std::string, double> out;
  for (const auto& [id, g] : gains) {
    if (mapping == RelevanceMapping::Shift) out[id] = g - lo;
    else out[id] = hi > lo ? (g - lo) / (hi - lo) : 1.0;
  }
  return out;
}

RandomBaseline random_ranking_baseline(const std::map<std::string, double>& true_scores,
                                       const std::map<std::string, double>& relevance, std::size_t trials,
                                       std::uint64_t seed) {
  if (trials == 0) throw ArgumentError("random baseline needs at least one trial");
  std::vector<std::string> ids;
  for (const auto& [id, _] : true_scores) ids.push_back(id);
  Rng rng(seed);
  double sum = 0.0, sq = 0.0, nd = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    rng.shuffle(ids);
    const double r = avg_rank(ids, true_scores);
    sum += r;
    sq += r * r;
    nd += ndcg(ids, relevance).value;
  }
  const double n = static_cast<double>(trials);
  const double mean = sum / n;
  const double var = std::max(0.0, sq / n - mean * mean);
  return {mean, nd / n, std::sqrt(var / n)};
}

}  // namespace taskspace
