#pragma once

// Thin SVD, grouping of singular triplets into spectral components, and the
// singular-value-ratio / Frobenius-change diagnostics built on top of them.

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "disco/error.hpp"
#include "disco/feature_matrix.hpp"

namespace disco {

/// Z = U diag(sigma) V^T with r = min(N, d) retained triplets, sigma sorted
/// in descending order.
struct SpectralDecomposition {
  Eigen::MatrixXd left;       // N x r
  Eigen::VectorXd singulars;  // r
  Eigen::MatrixXd right;      // d x r

  Index rank_bound() const noexcept { return singulars.size(); }
  Index n_samples() const noexcept { return left.rows(); }
  Index dim() const noexcept { return right.rows(); }
};

/// Half-open range [start, end) of singular-value indices.
struct GroupRange {
  Index start = 0;
  Index end = 0;

  Index size() const noexcept { return end - start; }
  friend bool operator==(const GroupRange&, const GroupRange&) = default;
};

struct SpectralGrouping {
  SpectralDecomposition decomposition;
  std::vector<GroupRange> boundaries;

  std::size_t group_count() const noexcept { return boundaries.size(); }

  const GroupRange& range(std::size_t g) const {
    detail::require(g < boundaries.size(), ErrorCode::InvalidGroupIndex,
                    "group index " + std::to_string(g) + " out of range for " +
                        std::to_string(boundaries.size()) + " groups");
    return boundaries[g];
  }
};

struct SpectralChangeProfile {
  Eigen::VectorXd per_group_frobenius_change;
  Eigen::VectorXd per_group_ratio_before;
  Eigen::VectorXd per_group_ratio_after;
};

inline SpectralDecomposition svd(const FeatureMatrix& features) {
  const Eigen::MatrixXd& z = features.values();
  Eigen::BDCSVD<Eigen::MatrixXd> solver(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::NumericalFailure,
                "divide-and-conquer SVD did not converge on a " + shape_string(z) +
                    " matrix (info=" + std::to_string(static_cast<int>(solver.info())) + ")");
  }
  SpectralDecomposition out{solver.matrixU(), solver.singularValues(), solver.matrixV()};
  detail::require(out.singulars.allFinite() && out.left.allFinite() && out.right.allFinite(),
                  ErrorCode::NumericalFailure, "SVD produced non-finite factors");
  return out;
}

/// Sizes of the G groups for r singular values. Groups hold s = ceil(r/G)
/// values each and the last one takes the remainder. When that would leave
/// trailing groups empty (e.g. r=8, G=6) the sizes are balanced instead so
/// they differ by at most one, larger groups first.
inline std::vector<Index> group_sizes(Index r, std::size_t group_count) {
  const auto g = static_cast<Index>(group_count);
  detail::require(group_count >= 1, ErrorCode::InvalidGroupCount, "group count must be >= 1");
  detail::require(g <= r, ErrorCode::InvalidGroupCount,
                  "group count " + std::to_string(g) + " exceeds the " + std::to_string(r) +
                      " available singular values");
  const Index s = (r + g - 1) / g;
  std::vector<Index> sizes(group_count);
  if ((g - 1) * s < r) {
    std::fill(sizes.begin(), sizes.end() - 1, s);
    sizes.back() = r - (g - 1) * s;
  } else {
    const Index base = r / g;
    const Index extra = r % g;
    for (Index i = 0; i < g; ++i) sizes[static_cast<std::size_t>(i)] = base + (i < extra ? 1 : 0);
  }
  return sizes;
}

inline SpectralGrouping make_grouping(SpectralDecomposition decomp, std::size_t group_count) {
  const auto sizes = group_sizes(decomp.rank_bound(), group_count);
  SpectralGrouping grouping{std::move(decomp), {}};
  grouping.boundaries.reserve(sizes.size());
  Index start = 0;
  for (Index size : sizes) {
    grouping.boundaries.push_back({start, start + size});
    start += size;
  }
  return grouping;
}

/// Coordinates of every sample in the group's singular basis, U_g * Sigma_g
/// (N x s_g). Z_g equals these coordinates times V_g^T.
inline Eigen::MatrixXd component_coordinates(const SpectralGrouping& grouping, std::size_t g) {
  const GroupRange& range = grouping.range(g);
  const auto& d = grouping.decomposition;
  return d.left.middleCols(range.start, range.size()) *
         d.singulars.segment(range.start, range.size()).asDiagonal();
}

/// Truncated reconstruction Z_g = U_g Sigma_g V_g^T (N x d).
inline FeatureMatrix component_matrix(const SpectralGrouping& grouping, std::size_t g) {
  const GroupRange& range = grouping.range(g);
  const auto& d = grouping.decomposition;
  return FeatureMatrix(component_coordinates(grouping, g) *
                       d.right.middleCols(range.start, range.size()).transpose());
}

inline Eigen::VectorXd singular_value_ratios(const SpectralGrouping& grouping) {
  const Eigen::VectorXd& sigma = grouping.decomposition.singulars;
  const double total = sigma.sum();
  detail::require(total > 0.0, ErrorCode::DegenerateSpectrum, "all singular values are zero");
  Eigen::VectorXd ratios(static_cast<Index>(grouping.group_count()));
  for (std::size_t g = 0; g < grouping.group_count(); ++g) {
    const GroupRange& range = grouping.boundaries[g];
    ratios(static_cast<Index>(g)) = sigma.segment(range.start, range.size()).sum() / total;
  }
  return ratios;
}

inline double singular_value_ratio(const SpectralGrouping& grouping, std::size_t g) {
  grouping.range(g);
  return singular_value_ratios(grouping)(static_cast<Index>(g));
}

/// Share of singular-value mass held by the first k groups.
inline double topk_ratio(const SpectralGrouping& grouping, std::size_t k) {
  detail::require(k >= 1 && k <= grouping.group_count(), ErrorCode::InvalidInput,
                  "top-k group count " + std::to_string(k) + " outside [1, " +
                      std::to_string(grouping.group_count()) + "]");
  const Eigen::VectorXd& sigma = grouping.decomposition.singulars;
  const double total = sigma.sum();
  detail::require(total > 0.0, ErrorCode::DegenerateSpectrum, "all singular values are zero");
  const Index end = grouping.boundaries[k - 1].end;
  if (end == sigma.size()) return 1.0;
  return sigma.head(end).sum() / total;
}

inline double relative_frobenius_change(const FeatureMatrix& before, const FeatureMatrix& after) {
  detail::require(before.n_samples() == after.n_samples() && before.dim() == after.dim(),
                  ErrorCode::InvalidInput,
                  "shape mismatch: " + shape_string(before.values()) + " vs " +
                      shape_string(after.values()));
  const double base = before.values().norm();
  detail::require(base > 0.0, ErrorCode::DegenerateComponent,
                  "reference component has zero Frobenius norm");
  return (before.values() - after.values()).norm() / base;
}

/// Per-group Frobenius change and singular-value ratios of a before/after
/// feature pair. Groupings are formed independently on each matrix and
/// aligned by group index, so the two matrices must have the same shape.
inline SpectralChangeProfile spectral_change_profile(const FeatureMatrix& before,
                                                     const FeatureMatrix& after,
                                                     std::size_t group_count) {
  detail::require(before.n_samples() == after.n_samples() && before.dim() == after.dim(),
                  ErrorCode::InvalidInput,
                  "before/after shape mismatch: " + shape_string(before.values()) + " vs " +
                      shape_string(after.values()));
  const SpectralGrouping gb = make_grouping(svd(before), group_count);
  const SpectralGrouping ga = make_grouping(svd(after), group_count);

  SpectralChangeProfile profile;
  profile.per_group_frobenius_change.resize(static_cast<Index>(group_count));
  for (std::size_t g = 0; g < group_count; ++g) {
    profile.per_group_frobenius_change(static_cast<Index>(g)) =
        relative_frobenius_change(component_matrix(gb, g), component_matrix(ga, g));
  }
  profile.per_group_ratio_before = singular_value_ratios(gb);
  profile.per_group_ratio_after = singular_value_ratios(ga);
  return profile;
}

}  // namespace disco
