#pragma once

// LDA-based hard-example selection used to subsample a dataset before the
// spectral decomposition.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "disco/classification.hpp"
#include "disco/error.hpp"
#include "disco/feature_matrix.hpp"

namespace disco {

struct LdaProjection {
  Eigen::MatrixXd matrix;           // d x p, p <= C - 1
  Eigen::VectorXd eigenvalues;      // p, descending, >= 0
  Eigen::MatrixXd between_scatter;  // d x d
  Eigen::MatrixXd within_scatter;   // d x d, regularized
};

struct LdaOptions {
  double shrinkage = 1e-4;
};

/// Fisher LDA. Directions are generalized eigenvectors of (S_b, S_w) scaled
/// so the projected within-class covariance S_w / N is the identity.
inline LdaProjection lda_fit(const FeatureMatrix& features, std::span<const int> labels,
                             const LdaOptions& options = {}) {
  const Eigen::MatrixXd& z = features.values();
  const std::size_t class_count = detail::class_count_of(labels, z.rows());
  const auto sizes = detail::class_sizes(labels, class_count);
  const Index d = z.cols();

  const Eigen::VectorXd grand = z.colwise().mean().transpose();
  Eigen::MatrixXd class_means = Eigen::MatrixXd::Zero(d, static_cast<Index>(class_count));
  for (Index i = 0; i < z.rows(); ++i) {
    class_means.col(labels[static_cast<std::size_t>(i)]) += z.row(i).transpose();
  }
  for (std::size_t c = 0; c < class_count; ++c) {
    class_means.col(static_cast<Index>(c)) /= static_cast<double>(sizes[c]);
  }

  Eigen::MatrixXd within = Eigen::MatrixXd::Zero(d, d);
  {
    Eigen::MatrixXd centered(z.rows(), d);
    for (Index i = 0; i < z.rows(); ++i) {
      centered.row(i) = z.row(i) - class_means.col(labels[static_cast<std::size_t>(i)]).transpose();
    }
    within.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
    within = within.selfadjointView<Eigen::Lower>();
  }
  Eigen::MatrixXd between = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t c = 0; c < class_count; ++c) {
    const Eigen::VectorXd diff = class_means.col(static_cast<Index>(c)) - grand;
    between.noalias() += static_cast<double>(sizes[c]) * diff * diff.transpose();
  }

  const double trace = within.trace();
  detail::require(trace > 0.0 && std::isfinite(trace), ErrorCode::NumericalFailure,
                  "within-class scatter is zero; LDA is undefined");
  within.diagonal().array() += options.shrinkage * trace / static_cast<double>(d);

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      between, within, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  detail::require(solver.info() == Eigen::Success, ErrorCode::NumericalFailure,
                  "generalized eigenproblem for LDA failed (regularized S_w not PD?)");

  const Index p = std::min<Index>(static_cast<Index>(class_count) - 1, d);
  LdaProjection proj;
  proj.matrix.resize(d, p);
  proj.eigenvalues.resize(p);
  const double scale = std::sqrt(static_cast<double>(z.rows()));
  for (Index j = 0; j < p; ++j) {
    const Index src = d - 1 - j;
    Eigen::VectorXd w = solver.eigenvectors().col(src) * scale;
    Index pivot = 0;
    w.cwiseAbs().maxCoeff(&pivot);
    if (w(pivot) < 0.0) w = -w;
    proj.matrix.col(j) = w;
    proj.eigenvalues(j) = std::max(0.0, solver.eigenvalues()(src));
  }
  proj.between_scatter = std::move(between);
  proj.within_scatter = std::move(within);
  return proj;
}

/// Class posteriors (N x C) of the identity-covariance linear discriminant in
/// the projected space: delta_c = z^T W W^T mu_c - 1/2 mu_c^T W W^T mu_c + log pi_c,
/// followed by a softmax over classes.
inline Eigen::MatrixXd lda_posteriors(const FeatureMatrix& features, std::span<const int> labels,
                                      const LdaProjection& proj) {
  const Eigen::MatrixXd& z = features.values();
  const std::size_t class_count = detail::class_count_of(labels, z.rows());
  const auto sizes = detail::class_sizes(labels, class_count);
  detail::require(proj.matrix.rows() == z.cols(), ErrorCode::InvalidInput,
                  "projection dimension does not match features");

  const Eigen::MatrixXd projected = z * proj.matrix;  // N x p
  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(static_cast<Index>(class_count), projected.cols());
  for (Index i = 0; i < z.rows(); ++i) {
    centroids.row(labels[static_cast<std::size_t>(i)]) += projected.row(i);
  }
  Eigen::VectorXd offsets(static_cast<Index>(class_count));
  for (std::size_t c = 0; c < class_count; ++c) {
    const auto ci = static_cast<Index>(c);
    centroids.row(ci) /= static_cast<double>(sizes[c]);
    offsets(ci) = -0.5 * centroids.row(ci).squaredNorm() +
                  std::log(static_cast<double>(sizes[c]) / static_cast<double>(z.rows()));
  }
  Eigen::MatrixXd delta = projected * centroids.transpose();
  delta.rowwise() += offsets.transpose();
  Eigen::MatrixXd out(delta.rows(), delta.cols());
  for (Index i = 0; i < delta.rows(); ++i) {
    out.row(i) = softmax_normalize(delta.row(i).transpose()).transpose();
  }
  return out;
}

inline Eigen::VectorXd lda_confidence(const FeatureMatrix& features, std::span<const int> labels,
                                      const LdaProjection& proj) {
  const Eigen::MatrixXd post = lda_posteriors(features, labels, proj);
  Eigen::VectorXd out(post.rows());
  for (Index i = 0; i < post.rows(); ++i) out(i) = post(i, labels[static_cast<std::size_t>(i)]);
  return out;
}

struct HardExampleSelection {
  std::vector<Index> indices;  // ascending
  std::vector<Index> per_class_counts;
  Eigen::VectorXd confidences;  // true-class confidence for every input sample
};

/// Number of samples kept from a class of `class_size` at the given ratio.
inline Index hard_example_quota(Index class_size, double ratio) {
  const double raw = ratio * static_cast<double>(class_size);
  const auto quota = static_cast<Index>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  return std::clamp<Index>(quota, 1, class_size);
}

/// Keeps, per class, the ceil(ratio * N_c) samples with the lowest true-class
/// LDA confidence; ties go to the lower original index.
inline HardExampleSelection select_hard_examples(const FeatureMatrix& features,
                                                 std::span<const int> labels, double ratio,
                                                 const LdaOptions& options = {}) {
  detail::require(ratio > 0.0 && ratio <= 1.0, ErrorCode::InvalidInput,
                  "sampling ratio must lie in (0, 1], got " + std::to_string(ratio));
  const std::size_t class_count = detail::class_count_of(labels, features.n_samples());
  const auto sizes = detail::class_sizes(labels, class_count);

  HardExampleSelection sel;
  sel.confidences = lda_confidence(features, labels, lda_fit(features, labels, options));

  std::vector<std::vector<Index>> members(class_count);
  for (Index i = 0; i < features.n_samples(); ++i) {
    members[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].push_back(i);
  }
  sel.per_class_counts.resize(class_count);
  for (std::size_t c = 0; c < class_count; ++c) {
    auto& m = members[c];
    std::stable_sort(m.begin(), m.end(), [&](Index a, Index b) {
      return sel.confidences(a) < sel.confidences(b);
    });
    const Index quota = hard_example_quota(sizes[c], ratio);
    sel.per_class_counts[c] = quota;
    sel.indices.insert(sel.indices.end(), m.begin(), m.begin() + quota);
  }
  std::sort(sel.indices.begin(), sel.indices.end());
  return sel;
}

}  // namespace disco
