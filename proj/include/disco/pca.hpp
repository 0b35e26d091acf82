#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <string>
#include <utility>

#include "disco/error.hpp"
#include "disco/feature_matrix.hpp"

namespace disco {

struct PcaModel {
  Eigen::VectorXd mean;        // d
  Eigen::MatrixXd components;  // d x p, orthonormal columns
  Eigen::VectorXd explained;   // nonincreasing variances (divisor N - 1)
  bool reduced = true;         // false when d <= target_dim and only centering ran
};

struct PcaResult {
  FeatureMatrix transformed;
  PcaModel model;
  std::string note;
};

/// Centers columns and projects onto the top p = min(target_dim, d, N - 1)
/// right singular vectors. When d <= target_dim the centered input is
/// returned unchanged (identity components) and `explained` holds the full
/// covariance spectrum.
inline PcaResult pca_fit_transform(const FeatureMatrix& features, Index target_dim = 128) {
  const Eigen::MatrixXd& z = features.values();
  detail::require(z.rows() >= 2, ErrorCode::InvalidInput, "PCA needs at least two samples");
  detail::require(target_dim >= 1, ErrorCode::InvalidInput, "PCA target dimension must be >= 1");
  const double dof = static_cast<double>(z.rows() - 1);

  PcaModel model;
  model.mean = z.colwise().mean().transpose();
  Eigen::MatrixXd centered = z.rowwise() - model.mean.transpose();

  if (z.cols() <= target_dim) {
    model.reduced = false;
    model.components = Eigen::MatrixXd::Identity(z.cols(), z.cols());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig((centered.transpose() * centered) / dof,
                                                       Eigen::EigenvaluesOnly);
    model.explained = eig.eigenvalues().reverse().cwiseMax(0.0);
    std::string note = "feature dimension " + std::to_string(z.cols()) +
                       " <= PCA target " + std::to_string(target_dim) + "; centered only";
    return {FeatureMatrix(std::move(centered)), std::move(model), std::move(note)};
  }

  const Index p = std::min<Index>({target_dim, z.cols(), z.rows() - 1});
  Eigen::BDCSVD<Eigen::MatrixXd> solver(centered, Eigen::ComputeThinV);
  detail::require(solver.info() == Eigen::Success, ErrorCode::NumericalFailure,
                  "SVD failed during PCA on a " + shape_string(z) + " matrix");
  model.components = solver.matrixV().leftCols(p);
  model.explained = solver.singularValues().head(p).array().square() / dof;
  Eigen::MatrixXd projected = centered * model.components;
  std::string note;
  if (p < target_dim) {
    note = "PCA kept " + std::to_string(p) + " components (limited by sample count)";
  }
  return {FeatureMatrix(std::move(projected)), std::move(model), std::move(note)};
}

}  // namespace disco
