#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "recast/predictive.hpp"
#include "recast/types.hpp"

namespace recast {

inline double rmse(const Vector& predictions, const Vector& truths) {
  if (predictions.size() != truths.size() || predictions.size() == 0)
    throw std::invalid_argument("rmse: need matching nonempty vectors");
  return std::sqrt((predictions - truths).squaredNorm() / static_cast<double>(truths.size()));
}

/// AUC as the Mann-Whitney rank statistic with tie-averaged ranks:
/// P(score_pos > score_neg) + P(equal)/2.
inline double auc(const Vector& scores, const Vector& labels) {
  const Eigen::Index n = scores.size();
  if (labels.size() != n || n == 0) throw std::invalid_argument("auc: need matching nonempty vectors");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&scores](Eigen::Index a, Eigen::Index b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  Eigen::Index n_pos = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);  // 1-based tie-averaged
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1.0) {
        rank_sum_pos += avg_rank;
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const Eigen::Index n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw DataError("auc: both classes must be present in the test set");
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// Fraction of truths inside their prediction set.
inline double empirical_coverage(const std::vector<PredictionSet>& sets, const Vector& truths) {
  if (static_cast<Eigen::Index>(sets.size()) != truths.size() || sets.empty())
    throw std::invalid_argument("empirical_coverage: need matching nonempty inputs");
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < truths.size(); ++i)
    if (sets[static_cast<std::size_t>(i)].contains(truths[i])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(truths.size());
}

/// Per-level coverage over a family of prediction sets indexed by nominal level.
inline std::map<double, double> empirical_coverage(
    const std::map<double, std::vector<PredictionSet>>& sets_by_level, const Vector& truths) {
  std::map<double, double> out;
  for (const auto& [level, sets] : sets_by_level) out[level] = empirical_coverage(sets, truths);
  return out;
}

/// (nominal, empirical) pairs in ascending nominal order, for reliability plots.
inline std::vector<std::pair<double, double>> reliability_curve(
    const std::map<double, std::vector<PredictionSet>>& sets_by_level, const Vector& truths) {
  std::vector<std::pair<double, double>> out;
  out.reserve(sets_by_level.size());
  for (const auto& [level, sets] : sets_by_level)
    out.emplace_back(level, empirical_coverage(sets, truths));
  return out;
}

/// Default nominal grid for reliability curves: 0.50 to 0.99 in steps of 0.01.
inline std::vector<double> default_reliability_grid() {
  std::vector<double> grid;
  for (int i = 50; i <= 99; ++i) grid.push_back(static_cast<double>(i) / 100.0);
  return grid;
}

}  // namespace recast
