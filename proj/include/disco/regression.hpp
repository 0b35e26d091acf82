#pragma once

// Pseudo-inverse linear approximation of regression targets per spectral
// component, the ratio-weighted regression score, and the detection-hub
// combination of classification and regression scores.

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "disco/error.hpp"
#include "disco/feature_matrix.hpp"
#include "disco/spectral.hpp"

namespace disco {

/// rcond <= 0 selects the default truncation r * machine epsilon.
inline double effective_rcond(const SpectralDecomposition& decomp, double rcond) {
  if (rcond > 0.0) return rcond;
  return static_cast<double>(decomp.rank_bound()) * std::numeric_limits<double>::epsilon();
}

/// Number of singular values strictly above rcond * sigma_1.
inline Index retained_rank(const SpectralDecomposition& decomp, double rcond = 0.0) {
  if (decomp.rank_bound() == 0) return 0;
  const double cutoff = effective_rcond(decomp, rcond) * decomp.singulars(0);
  return (decomp.singulars.array() > cutoff).count();
}

/// Z^+ = V Sigma^+ U^T (d x N). Singular values at or below rcond * sigma_1
/// are treated as zero.
inline Eigen::MatrixXd pseudo_inverse(const SpectralDecomposition& decomp, double rcond = 0.0) {
  const Index rank = retained_rank(decomp, rcond);
  detail::require(rank > 0 && decomp.singulars(0) > 0.0, ErrorCode::DegenerateSpectrum,
                  "every singular value is below the pseudo-inverse threshold");
  const Eigen::VectorXd inv = decomp.singulars.head(rank).cwiseInverse();
  return decomp.right.leftCols(rank) * inv.asDiagonal() * decomp.left.leftCols(rank).transpose();
}

/// Minimum-norm least-squares coefficients beta = Z^+ * targets.
inline Eigen::MatrixXd regression_coefficients(const SpectralDecomposition& decomp,
                                               const Eigen::MatrixXd& targets,
                                               double rcond = 0.0) {
  detail::require(targets.rows() == decomp.n_samples(), ErrorCode::InvalidInput,
                  "targets have " + std::to_string(targets.rows()) + " rows, features have " +
                      std::to_string(decomp.n_samples()));
  return pseudo_inverse(decomp, rcond) * targets;
}

/// Z_g Z_g^+ targets: orthogonal projection of each target column onto the
/// left singular vectors of group g whose singular values survive rcond.
inline Eigen::MatrixXd approx_targets(const SpectralGrouping& grouping, std::size_t g,
                                      const Eigen::MatrixXd& targets, double rcond = 0.0) {
  const GroupRange& range = grouping.range(g);
  const auto& d = grouping.decomposition;
  detail::require(targets.rows() == d.n_samples(), ErrorCode::InvalidInput,
                  "targets are not aligned with feature rows");
  const Index keep_end = std::min(range.end, retained_rank(d, rcond));
  if (keep_end <= range.start) return Eigen::MatrixXd::Zero(targets.rows(), targets.cols());
  const auto basis = d.left.middleCols(range.start, keep_end - range.start);
  return basis * (basis.transpose() * targets);
}

/// Negated mean squared error of the group-g linear approximation of the
/// K x 4 box matrix. Zero is the best attainable value.
inline double regression_score(const SpectralGrouping& grouping, std::size_t g,
                               const Eigen::MatrixXd& boxes, double rcond = 0.0) {
  detail::require(boxes.rows() >= 1 && boxes.cols() >= 1, ErrorCode::InvalidInput,
                  "empty target matrix");
  const Eigen::MatrixXd residual = boxes - approx_targets(grouping, g, boxes, rcond);
  return -residual.squaredNorm() / static_cast<double>(boxes.size());
}

struct RegressionScoreReport {
  Eigen::VectorXd per_group_lr;
  Eigen::VectorXd per_group_ratio;
  double final = 0.0;
};

inline RegressionScoreReport disco_reg(const SpectralGrouping& grouping,
                                       const Eigen::MatrixXd& boxes, double rcond = 0.0) {
  RegressionScoreReport report;
  report.per_group_ratio = singular_value_ratios(grouping);
  report.per_group_lr.resize(static_cast<Index>(grouping.group_count()));
  for (std::size_t g = 0; g < grouping.group_count(); ++g) {
    report.per_group_lr(static_cast<Index>(g)) = regression_score(grouping, g, boxes, rcond);
  }
  report.final = report.per_group_lr.dot(report.per_group_ratio);
  return report;
}

inline RegressionScoreReport disco_reg(const FeatureMatrix& features, const Eigen::MatrixXd& boxes,
                                       std::size_t group_count, double rcond = 0.0) {
  detail::require(boxes.rows() == features.n_samples(), ErrorCode::InvalidInput,
                  "box matrix rows must match box-level feature rows");
  return disco_reg(make_grouping(svd(features), group_count), boxes, rcond);
}

/// Min-max normalization to [0, 1]. A constant column maps to 0.5.
inline Eigen::VectorXd min_max_normalize(const Eigen::VectorXd& values) {
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  if (!(hi > lo)) return Eigen::VectorXd::Constant(values.size(), 0.5);
  return ((values.array() - lo) / (hi - lo)).matrix();
}

struct HubScoreTable {
  std::vector<std::string> model_ids;
  Eigen::VectorXd cls_scores;
  Eigen::VectorXd reg_scores;
  Eigen::VectorXd combined;
};

/// Fills `combined` with norm(S_cls) + norm(S_reg) across the hub.
inline HubScoreTable combine_detection(HubScoreTable hub) {
  const auto m = static_cast<Index>(hub.model_ids.size());
  detail::require(m >= 2, ErrorCode::InsufficientModels,
                  "detection combination needs at least two models");
  detail::require(hub.cls_scores.size() == m && hub.reg_scores.size() == m,
                  ErrorCode::InvalidInput, "score columns are not aligned with model ids");
  hub.combined = min_max_normalize(hub.cls_scores) + min_max_normalize(hub.reg_scores);
  return hub;
}

}  // namespace disco
