#pragma once

// Rank agreement between estimated transferability scores and ground-truth
// fine-tuning performance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "disco/error.hpp"

namespace disco {

struct BenchmarkRecord {
  std::vector<std::string> model_ids;
  std::vector<double> scores;
  std::vector<double> performances;

  std::size_t size() const noexcept { return scores.size(); }
};

namespace detail {

inline void validate(const BenchmarkRecord& record) {
  require(record.scores.size() >= 2, ErrorCode::InsufficientModels,
          "rank correlation needs at least two models");
  require(record.performances.size() == record.scores.size() &&
              (record.model_ids.empty() || record.model_ids.size() == record.scores.size()),
          ErrorCode::InvalidInput, "benchmark vectors are not aligned");
  for (std::size_t i = 0; i < record.scores.size(); ++i) {
    require(std::isfinite(record.scores[i]) && std::isfinite(record.performances[i]),
            ErrorCode::InvalidInput, "benchmark entry " + std::to_string(i) + " is not finite");
  }
}

inline int sgn(double x) noexcept { return (x > 0.0) - (x < 0.0); }

}  // namespace detail

/// 0-based positions in the descending ordering of `values`; tied values
/// share the mean of the positions they span.
inline std::vector<double> descending_mean_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean = 0.5 * static_cast<double>(i + j);
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mean;
    i = j + 1;
  }
  return ranks;
}

inline double kendall_tau(const BenchmarkRecord& record) {
  detail::validate(record);
  const std::size_t m = record.size();
  long long total = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      total += detail::sgn(record.performances[i] - record.performances[j]) *
               detail::sgn(record.scores[i] - record.scores[j]);
    }
  }
  return 2.0 * static_cast<double>(total) / (static_cast<double>(m) * static_cast<double>(m - 1));
}

/// Weighted Kendall tau. Each pair carries 1/(rank_i + 1) + 1/(rank_j + 1)
/// where ranks follow the descending ground-truth ordering, so disagreements
/// among the best models cost the most. Not symmetric in (scores, performances).
inline double weighted_kendall_tau(const BenchmarkRecord& record) {
  detail::validate(record);
  const std::vector<double> ranks = descending_mean_ranks(record.performances);
  const std::size_t m = record.size();
  double numerator = 0.0;
  double denominator = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double w = 1.0 / (ranks[i] + 1.0) + 1.0 / (ranks[j] + 1.0);
      numerator += w * detail::sgn(record.performances[i] - record.performances[j]) *
                   detail::sgn(record.scores[i] - record.scores[j]);
      denominator += w;
    }
  }
  return numerator / denominator;
}

/// Model indices ordered by descending score; equal scores fall back to
/// ascending model id, then to input order.
inline std::vector<std::size_t> score_order(const BenchmarkRecord& record) {
  std::vector<std::size_t> order(record.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (record.scores[a] != record.scores[b]) return record.scores[a] > record.scores[b];
    if (!record.model_ids.empty()) return record.model_ids[a] < record.model_ids[b];
    return false;
  });
  return order;
}

/// 1 when a best ground-truth model is among the k highest-scored models.
inline int top_k_hit(const BenchmarkRecord& record, std::size_t k) {
  detail::validate(record);
  detail::require(k >= 1 && k <= record.size(), ErrorCode::InvalidInput,
                  "k=" + std::to_string(k) + " outside [1, " + std::to_string(record.size()) + "]");
  const double best = *std::max_element(record.performances.begin(), record.performances.end());
  const auto order = score_order(record);
  for (std::size_t t = 0; t < k; ++t) {
    if (record.performances[order[t]] == best) return 1;
  }
  return 0;
}

/// Replaces performances by the mean of their single-linkage group, where
/// consecutive sorted values closer than `tolerance` (absolute units of P)
/// chain into one group.
inline std::vector<double> merge_close_performances(const std::vector<double>& performances,
                                                    double tolerance) {
  detail::require(tolerance >= 0.0 && std::isfinite(tolerance), ErrorCode::InvalidInput,
                  "tie tolerance must be a finite non-negative number");
  std::vector<std::size_t> order(performances.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return performances[a] > performances[b]; });
  std::vector<double> adjusted(performances);
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() &&
           performances[order[j]] - performances[order[j + 1]] <= tolerance) {
      ++j;
    }
    if (j > i) {
      double sum = 0.0;
      for (std::size_t t = i; t <= j; ++t) sum += performances[order[t]];
      const double mean = sum / static_cast<double>(j - i + 1);
      for (std::size_t t = i; t <= j; ++t) adjusted[order[t]] = mean;
    }
    i = j + 1;
  }
  return adjusted;
}

inline double tie_adjusted_tau(const BenchmarkRecord& record, double tolerance) {
  detail::validate(record);
  if (tolerance == 0.0) return weighted_kendall_tau(record);
  BenchmarkRecord adjusted = record;
  adjusted.performances = merge_close_performances(record.performances, tolerance);
  return weighted_kendall_tau(adjusted);
}

}  // namespace disco
