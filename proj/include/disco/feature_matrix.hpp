#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>

#include "disco/error.hpp"

namespace disco {

using Index = Eigen::Index;

/// Dense N x d feature matrix, rows are samples. Construction validates that
/// the matrix is non-empty and every entry is finite.
class FeatureMatrix {
 public:
  explicit FeatureMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
    detail::require(values_.rows() >= 1 && values_.cols() >= 1, ErrorCode::InvalidInput,
                    "feature matrix must have at least one row and one column");
    detail::require(values_.allFinite(), ErrorCode::InvalidInput,
                    "feature matrix contains non-finite entries");
  }

  const Eigen::MatrixXd& values() const noexcept { return values_; }
  Index n_samples() const noexcept { return values_.rows(); }
  Index dim() const noexcept { return values_.cols(); }

  /// Subset of rows in the given order.
  template <typename IndexRange>
  FeatureMatrix rows(const IndexRange& indices) const {
    Eigen::MatrixXd out(static_cast<Index>(std::size(indices)), values_.cols());
    Index r = 0;
    for (auto i : indices) {
      detail::require(static_cast<Index>(i) >= 0 && static_cast<Index>(i) < values_.rows(),
                      ErrorCode::InvalidInput, "row index out of range");
      out.row(r++) = values_.row(static_cast<Index>(i));
    }
    return FeatureMatrix(std::move(out));
  }

 private:
  Eigen::MatrixXd values_;
};

inline std::string shape_string(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace disco
