#pragma once

// Nearest-centroid Gaussian scoring of spectral components and the
// ratio-weighted classification score.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "disco/error.hpp"
#include "disco/feature_matrix.hpp"
#include "disco/spectral.hpp"

namespace disco {

struct NccOptions {
  /// Relative shrinkage: Lambda_c += epsilon * tr(Lambda_c) / s * I.
  double shrinkage = 1e-4;
  /// Absolute floor used when a class covariance has zero trace.
  double covariance_floor = 1e-6;
  /// Add -1/2 log det(Lambda_c) to each class score (exact Gaussian
  /// log-posterior). Off by default: the score is the Mahalanobis term plus
  /// log prior only.
  bool include_log_det = false;
};

/// Per-class Gaussian moments in one component's coordinate space.
struct ClassStatistics {
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;  // regularized, strictly PD
  Eigen::VectorXd priors;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> factors;

  std::size_t class_count() const noexcept { return means.size(); }
  Index dim() const noexcept { return means.empty() ? 0 : means.front().size(); }

  /// Builds statistics from already-regularized moments.
  static ClassStatistics from_moments(std::vector<Eigen::VectorXd> means,
                                      std::vector<Eigen::MatrixXd> covariances,
                                      Eigen::VectorXd priors) {
    detail::require(means.size() >= 2, ErrorCode::InvalidLabels, "need at least two classes");
    detail::require(covariances.size() == means.size() &&
                        priors.size() == static_cast<Index>(means.size()),
                    ErrorCode::InvalidInput, "class moment arrays disagree in length");
    detail::require(std::abs(priors.sum() - 1.0) <= 1e-12 && (priors.array() > 0.0).all(),
                    ErrorCode::InvalidInput, "class priors must be positive and sum to 1");
    ClassStatistics stats{std::move(means), std::move(covariances), std::move(priors), {}};
    const Index dim = stats.means.front().size();
    stats.factors.reserve(stats.means.size());
    for (std::size_t c = 0; c < stats.means.size(); ++c) {
      detail::require(stats.means[c].size() == dim && stats.covariances[c].rows() == dim &&
                          stats.covariances[c].cols() == dim,
                      ErrorCode::InvalidInput, "class moments have inconsistent dimensions");
      Eigen::LLT<Eigen::MatrixXd> llt(stats.covariances[c]);
      detail::require(llt.info() == Eigen::Success, ErrorCode::NumericalFailure,
                      "covariance of class " + std::to_string(c) + " is not positive definite");
      stats.factors.push_back(std::move(llt));
    }
    return stats;
  }
};

namespace detail {

/// Validates labels and returns C = max label + 1.
inline std::size_t class_count_of(std::span<const int> labels, Index n_samples) {
  require(static_cast<Index>(labels.size()) == n_samples, ErrorCode::InvalidInput,
          "label count " + std::to_string(labels.size()) + " does not match " +
              std::to_string(n_samples) + " samples");
  require(!labels.empty(), ErrorCode::InvalidLabels, "no labels");
  const auto [lo, hi] = std::minmax_element(labels.begin(), labels.end());
  require(*lo >= 0, ErrorCode::InvalidLabels, "labels must be non-negative");
  const auto count = static_cast<std::size_t>(*hi) + 1;
  require(count >= 2, ErrorCode::InvalidLabels, "need at least two classes, got labels all equal");
  return count;
}

inline std::vector<Index> class_sizes(std::span<const int> labels, std::size_t class_count) {
  std::vector<Index> sizes(class_count, 0);
  for (int y : labels) ++sizes[static_cast<std::size_t>(y)];
  for (std::size_t c = 0; c < class_count; ++c) {
    require(sizes[c] > 0, ErrorCode::MissingClass,
            "class " + std::to_string(c) + " has no samples");
  }
  return sizes;
}

}  // namespace detail

/// Per-class ML mean and covariance of the coordinate rows, with
/// trace-proportional shrinkage, plus empirical priors N_c / N.
inline ClassStatistics class_statistics(const Eigen::MatrixXd& coords, std::span<const int> labels,
                                        const NccOptions& options = {}) {
  const std::size_t class_count = detail::class_count_of(labels, coords.rows());
  const auto sizes = detail::class_sizes(labels, class_count);
  const Index s = coords.cols();
  const double n = static_cast<double>(coords.rows());

  std::vector<Eigen::VectorXd> means(class_count, Eigen::VectorXd::Zero(s));
  for (Index i = 0; i < coords.rows(); ++i) {
    means[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] += coords.row(i).transpose();
  }
  for (std::size_t c = 0; c < class_count; ++c) means[c] /= static_cast<double>(sizes[c]);

  std::vector<Eigen::MatrixXd> covs(class_count, Eigen::MatrixXd::Zero(s, s));
  for (Index i = 0; i < coords.rows(); ++i) {
    const auto c = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
    const Eigen::VectorXd diff = coords.row(i).transpose() - means[c];
    covs[c].selfadjointView<Eigen::Lower>().rankUpdate(diff);
  }
  Eigen::VectorXd priors(static_cast<Index>(class_count));
  for (std::size_t c = 0; c < class_count; ++c) {
    Eigen::MatrixXd cov = covs[c].selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(sizes[c]);
    const double trace = cov.trace();
    if (sizes[c] > 1 && trace > 0.0) {
      cov.diagonal().array() += options.shrinkage * trace / static_cast<double>(s);
    } else {
      cov.diagonal().array() += options.covariance_floor;
    }
    covs[c] = std::move(cov);
    priors(static_cast<Index>(c)) = static_cast<double>(sizes[c]) / n;
  }
  return ClassStatistics::from_moments(std::move(means), std::move(covs), std::move(priors));
}

/// Log-scores of every row of `coords` against every class (N x C):
/// -1/2 (z - mu_c)^T Lambda_c^{-1} (z - mu_c) + log pi_c.
inline Eigen::MatrixXd ncc_log_scores(const Eigen::MatrixXd& coords, const ClassStatistics& stats,
                                      const NccOptions& options = {}) {
  detail::require(coords.cols() == stats.dim(), ErrorCode::InvalidInput,
                  "coordinate dimension " + std::to_string(coords.cols()) +
                      " does not match class statistics dimension " + std::to_string(stats.dim()));
  const auto class_count = static_cast<Index>(stats.class_count());
  Eigen::MatrixXd scores(coords.rows(), class_count);
  for (Index c = 0; c < class_count; ++c) {
    const auto& llt = stats.factors[static_cast<std::size_t>(c)];
    const Eigen::MatrixXd diff =
        (coords.rowwise() - stats.means[static_cast<std::size_t>(c)].transpose()).transpose();
    const Eigen::MatrixXd whitened = llt.matrixL().solve(diff);
    double offset = std::log(stats.priors(c));
    if (options.include_log_det) {
      offset -= llt.matrixLLT().diagonal().array().log().sum();
    }
    scores.col(c) = (-0.5 * whitened.colwise().squaredNorm().transpose()).array() + offset;
  }
  return scores;
}

inline Eigen::VectorXd ncc_log_posterior(const Eigen::VectorXd& z, const ClassStatistics& stats,
                                         const NccOptions& options = {}) {
  return ncc_log_scores(z.transpose(), stats, options).row(0).transpose();
}

/// Max-subtracted softmax.
inline Eigen::VectorXd softmax_normalize(const Eigen::VectorXd& log_scores) {
  detail::require(log_scores.size() >= 1 && log_scores.allFinite(), ErrorCode::InvalidInput,
                  "softmax needs a non-empty finite vector");
  const Eigen::ArrayXd shifted = (log_scores.array() - log_scores.maxCoeff()).exp();
  return (shifted / shifted.sum()).matrix();
}

/// Probability each row assigns to its own label under the given statistics.
inline Eigen::VectorXd ncc_true_class_confidences(const Eigen::MatrixXd& coords,
                                                  std::span<const int> labels,
                                                  const ClassStatistics& stats,
                                                  const NccOptions& options = {}) {
  detail::require(static_cast<Index>(labels.size()) == coords.rows(), ErrorCode::InvalidInput,
                  "label count does not match samples");
  const Eigen::MatrixXd scores = ncc_log_scores(coords, stats, options);
  Eigen::VectorXd confidences(coords.rows());
  for (Index i = 0; i < coords.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    detail::require(y >= 0 && static_cast<std::size_t>(y) < stats.class_count(),
                    ErrorCode::InvalidLabels, "label outside the fitted classes");
    confidences(i) = softmax_normalize(scores.row(i).transpose())(y);
  }
  return confidences;
}

/// Mean true-class probability of an NCC fitted on the same rows.
inline double ncc_confidence(const Eigen::MatrixXd& coords, std::span<const int> labels,
                             const NccOptions& options = {}) {
  const ClassStatistics stats = class_statistics(coords, labels, options);
  return ncc_true_class_confidences(coords, labels, stats, options).mean();
}

inline double ncc_confidence_score(const SpectralGrouping& grouping, std::size_t g,
                                   std::span<const int> labels, const NccOptions& options = {}) {
  return ncc_confidence(component_coordinates(grouping, g), labels, options);
}

struct ClassificationScoreReport {
  Eigen::VectorXd per_group_ncc;
  Eigen::VectorXd per_group_ratio;
  double final = 0.0;
};

inline ClassificationScoreReport disco_cls(const SpectralGrouping& grouping,
                                           std::span<const int> labels,
                                           const NccOptions& options = {}) {
  detail::class_sizes(labels, detail::class_count_of(labels, grouping.decomposition.n_samples()));
  ClassificationScoreReport report;
  report.per_group_ratio = singular_value_ratios(grouping);
  report.per_group_ncc.resize(static_cast<Index>(grouping.group_count()));
  for (std::size_t g = 0; g < grouping.group_count(); ++g) {
    report.per_group_ncc(static_cast<Index>(g)) =
        ncc_confidence_score(grouping, g, labels, options);
  }
  report.final = report.per_group_ncc.dot(report.per_group_ratio);
  return report;
}

inline ClassificationScoreReport disco_cls(const FeatureMatrix& features,
                                           std::span<const int> labels, std::size_t group_count,
                                           const NccOptions& options = {}) {
  return disco_cls(make_grouping(svd(features), group_count), labels, options);
}

/// Baselines from the framework ablation: unweighted sum of component
/// scores, NCC on the whole feature, and the top-k singular-value share.
struct AblationScores {
  double ncc_sum = 0.0;
  double ncc_entire = 0.0;
  double topk = 0.0;
  std::size_t k = 0;
};

inline std::size_t default_topk(std::size_t group_count) {
  return std::max<std::size_t>(1, (group_count + 4) / 5);  // ceil(0.2 G)
}

inline AblationScores ablation_scores(const SpectralGrouping& grouping,
                                      std::span<const int> labels, std::size_t k,
                                      const NccOptions& options = {}) {
  AblationScores out;
  out.k = k;
  for (std::size_t g = 0; g < grouping.group_count(); ++g) {
    out.ncc_sum += ncc_confidence_score(grouping, g, labels, options);
  }
  const auto& d = grouping.decomposition;
  out.ncc_entire = ncc_confidence(d.left * d.singulars.asDiagonal(), labels, options);
  out.topk = topk_ratio(grouping, k);
  return out;
}

inline AblationScores ablation_scores(const FeatureMatrix& features, std::span<const int> labels,
                                      std::size_t group_count, std::size_t k = 0,
                                      const NccOptions& options = {}) {
  return ablation_scores(make_grouping(svd(features), group_count), labels,
                         k == 0 ? default_topk(group_count) : k, options);
}

}  // namespace disco
