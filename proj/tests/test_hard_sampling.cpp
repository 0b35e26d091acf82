#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "disco/hard_sampling.hpp"
#include "test_helpers.hpp"

namespace {

using disco::ErrorCode;
using disco::FeatureMatrix;
using disco::testing::random_matrix;

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const disco::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected disco::Error";
  return ErrorCode::InvalidInput;
}

struct Data {
  Eigen::MatrixXd z;
  std::vector<int> labels;
};

Data gaussian_classes(const std::vector<int>& sizes, Eigen::Index d, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const Eigen::MatrixXd means = spread * random_matrix(static_cast<Eigen::Index>(sizes.size()), d, rng);
  Data out;
  const int n = std::accumulate(sizes.begin(), sizes.end(), 0);
  out.z.resize(n, d);
  int row = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    for (int i = 0; i < sizes[c]; ++i, ++row) {
      for (Eigen::Index j = 0; j < d; ++j) out.z(row, j) = means(static_cast<Eigen::Index>(c), j) + normal(rng);
      out.labels.push_back(static_cast<int>(c));
    }
  }
  return out;
}

TEST(LdaFit, TwoClassDirectionMatchesClosedForm) {
  // Four offsets per class give an isotropic within-class scatter.
  const double a = 0.5;
  const Eigen::Vector2d offsets[] = {{a, 0}, {-a, 0}, {0, a}, {0, -a}};
  Eigen::MatrixXd z(8, 2);
  std::vector<int> labels;
  for (int c = 0; c < 2; ++c) {
    for (int k = 0; k < 4; ++k) {
      z.row(4 * c + k) = (Eigen::Vector2d(c == 0 ? 1.0 : -1.0, 0.0) + offsets[k]).transpose();
      labels.push_back(c);
    }
  }
  const auto proj = disco::lda_fit(FeatureMatrix(z), labels);
  ASSERT_EQ(proj.matrix.cols(), 1);
  const Eigen::Vector2d w = proj.matrix.col(0).normalized();
  EXPECT_NEAR(std::abs(w(0)), 1.0, 1e-6);
  EXPECT_NEAR(w(1), 0.0, 1e-6);
}

TEST(LdaFit, OneDimensionalFixedPoint) {
  const Data data = gaussian_classes({15, 15}, 4, 2.0, 301);
  const auto proj = disco::lda_fit(FeatureMatrix(data.z), data.labels);
  const Eigen::MatrixXd projected = data.z * proj.matrix;
  const auto refit = disco::lda_fit(FeatureMatrix(projected), data.labels);
  ASSERT_EQ(refit.matrix.rows(), 1);
  ASSERT_EQ(refit.matrix.cols(), 1);
  EXPECT_GT(std::abs(refit.matrix(0, 0)), 0.0);
}

TEST(LdaFit, ColumnCountAndEigenvalues) {
  const Data data = gaussian_classes({10, 12, 9, 11}, 6, 1.5, 303);
  const auto proj = disco::lda_fit(FeatureMatrix(data.z), data.labels);
  EXPECT_EQ(proj.matrix.cols(), 3);
  for (Eigen::Index j = 0; j < proj.eigenvalues.size(); ++j) {
    EXPECT_GE(proj.eigenvalues(j), 0.0);
    if (j > 0) EXPECT_GE(proj.eigenvalues(j - 1), proj.eigenvalues(j));
  }
  const Data narrow = gaussian_classes({5, 5, 5, 5}, 2, 1.5, 305);
  EXPECT_EQ(disco::lda_fit(FeatureMatrix(narrow.z), narrow.labels).matrix.cols(), 2);
}

TEST(LdaFit, LeadingDirectionMaximizesRayleighQuotient) {
  const Data data = gaussian_classes({20, 20, 20}, 5, 1.0, 307);
  const auto proj = disco::lda_fit(FeatureMatrix(data.z), data.labels);
  auto quotient = [&](const Eigen::VectorXd& w) {
    return w.dot(proj.between_scatter * w) / w.dot(proj.within_scatter * w);
  };
  const double best = quotient(proj.matrix.col(0));
  EXPECT_NEAR(best, proj.eigenvalues(0), 1e-8 * std::max(1.0, best));
  std::mt19937_64 rng(309);
  for (int t = 0; t < 200; ++t) EXPECT_LE(quotient(random_matrix(5, 1, rng)), best * (1 + 1e-12));
}

TEST(LdaFit, Errors) {
  const Data data = gaussian_classes({10}, 3, 1.0, 311);
  EXPECT_EQ(code_of([&] { disco::lda_fit(FeatureMatrix(data.z), data.labels); }), ErrorCode::InvalidLabels);
  Eigen::MatrixXd constant(4, 2);
  constant << 1, 1, 1, 1, 2, 2, 2, 2;
  const std::vector<int> labels{0, 0, 1, 1};
  EXPECT_EQ(code_of([&] { disco::lda_fit(FeatureMatrix(constant), labels); }), ErrorCode::NumericalFailure);
}

TEST(LdaConfidence, SymmetricAndMeanDominance) {
  Eigen::MatrixXd z(6, 1);
  z << -3, -2, -1, 1, 2, 3;
  const FeatureMatrix fit_z(z);
  const std::vector<int> fit_labels{0, 0, 0, 1, 1, 1};
  const auto proj = disco::lda_fit(fit_z, fit_labels);
  const auto conf = disco::lda_confidence(fit_z, fit_labels, proj);
  EXPECT_GT(conf(1), 0.5);  // sample at its class mean
  EXPECT_GT(conf(4), 0.5);

  // Classes mirrored about 0, each holding one sample at 0.
  Eigen::MatrixXd sym(6, 1);
  sym << -3, -1, 0, 3, 1, 0;
  const std::vector<int> sym_labels{0, 0, 0, 1, 1, 1};
  const FeatureMatrix sym_z(sym);
  const auto post = disco::lda_posteriors(sym_z, sym_labels, disco::lda_fit(sym_z, sym_labels));
  EXPECT_NEAR(post(2, 0), 0.5, 1e-12);
  EXPECT_NEAR(post(5, 1), 0.5, 1e-12);
}

TEST(LdaConfidence, MatchesDirectFormula) {
  const Data data = gaussian_classes({12, 9, 14}, 5, 1.2, 313);
  const FeatureMatrix features(data.z);
  const auto proj = disco::lda_fit(features, data.labels);
  const auto conf = disco::lda_confidence(features, data.labels, proj);
  const auto post = disco::lda_posteriors(features, data.labels, proj);

  // Direct evaluation: delta_c = z^T W W^T mu_c - 1/2 mu_c^T W W^T mu_c + log pi_c.
  const Eigen::MatrixXd wwt = proj.matrix * proj.matrix.transpose();
  const int n = static_cast<int>(data.labels.size());
  std::vector<Eigen::VectorXd> mu(3, Eigen::VectorXd::Zero(5));
  std::vector<double> count(3, 0.0);
  for (int i = 0; i < n; ++i) {
    mu[data.labels[i]] += data.z.row(i).transpose();
    count[data.labels[i]] += 1.0;
  }
  for (int c = 0; c < 3; ++c) mu[c] /= count[c];
  for (int i = 0; i < n; ++i) {
    double delta[3];
    double mx = -1e300;
    for (int c = 0; c < 3; ++c) {
      const Eigen::VectorXd z = data.z.row(i).transpose();
      delta[c] = z.dot(wwt * mu[c]) - 0.5 * mu[c].dot(wwt * mu[c]) + std::log(count[c] / n);
      mx = std::max(mx, delta[c]);
    }
    double denom = 0.0;
    for (double dc : delta) denom += std::exp(dc - mx);
    const double expected = std::exp(delta[data.labels[i]] - mx) / denom;
    EXPECT_NEAR(conf(i), expected, 1e-12);
    EXPECT_NEAR(post.row(i).sum(), 1.0, 1e-12);
    EXPECT_GT(post.row(i).minCoeff(), 0.0);
    EXPECT_LT(post.row(i).maxCoeff(), 1.0);
  }
}

TEST(SelectHardExamples, FullRatioKeepsEverything) {
  const Data data = gaussian_classes({7, 5}, 3, 1.0, 315);
  const auto sel = disco::select_hard_examples(FeatureMatrix(data.z), data.labels, 1.0);
  ASSERT_EQ(sel.indices.size(), 12u);
  for (Eigen::Index i = 0; i < 12; ++i) EXPECT_EQ(sel.indices[static_cast<std::size_t>(i)], i);
}

TEST(SelectHardExamples, QuotaArithmetic) {
  const Data data = gaussian_classes({10, 5}, 3, 1.0, 317);
  const auto sel = disco::select_hard_examples(FeatureMatrix(data.z), data.labels, 0.4);
  EXPECT_EQ(sel.per_class_counts, (std::vector<Eigen::Index>{4, 2}));
  EXPECT_EQ(sel.indices.size(), 6u);
  EXPECT_EQ(disco::hard_example_quota(10, 0.3), 3);
  EXPECT_EQ(disco::hard_example_quota(7, 0.01), 1);
  EXPECT_EQ(disco::hard_example_quota(3, 0.7), 3);
}

TEST(SelectHardExamples, CapturesPlantedOutlier) {
  Data data = gaussian_classes({30, 30}, 4, 4.0, 319);
  // Move sample 5 (class 0) into the middle of class 1.
  Eigen::RowVectorXd mean1 = Eigen::RowVectorXd::Zero(4);
  for (int i = 30; i < 60; ++i) mean1 += data.z.row(i) / 30.0;
  data.z.row(5) = mean1;
  const auto sel = disco::select_hard_examples(FeatureMatrix(data.z), data.labels, 0.1);
  EXPECT_TRUE(std::binary_search(sel.indices.begin(), sel.indices.end(), 5));
  double class_min = 1.0;
  for (int i = 0; i < 30; ++i) class_min = std::min(class_min, sel.confidences(i));
  EXPECT_DOUBLE_EQ(sel.confidences(5), class_min);
}

TEST(SelectHardExamples, DeterministicNestedAndSeparating) {
  const Data data = gaussian_classes({25, 18, 31}, 6, 1.0, 321);
  const FeatureMatrix features(data.z);
  const auto again = disco::select_hard_examples(features, data.labels, 0.35);
  EXPECT_EQ(disco::select_hard_examples(features, data.labels, 0.35).indices, again.indices);

  std::vector<Eigen::Index> previous;
  for (double r : {0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    const auto sel = disco::select_hard_examples(features, data.labels, r);
    EXPECT_TRUE(std::includes(sel.indices.begin(), sel.indices.end(), previous.begin(), previous.end()));
    for (auto c : sel.per_class_counts) EXPECT_GE(c, 1);
    // Within each class, selected confidences never exceed unselected ones.
    const std::set<Eigen::Index> chosen(sel.indices.begin(), sel.indices.end());
    for (int c = 0; c < 3; ++c) {
      double max_in = -1.0;
      double min_out = 2.0;
      for (int i = 0; i < static_cast<int>(data.labels.size()); ++i) {
        if (data.labels[i] != c) continue;
        if (chosen.count(i)) max_in = std::max(max_in, sel.confidences(i));
        else min_out = std::min(min_out, sel.confidences(i));
      }
      EXPECT_LE(max_in, min_out);
    }
    previous = sel.indices;
  }
}

TEST(SelectHardExamples, RatioRange) {
  const Data data = gaussian_classes({5, 5}, 2, 1.0, 323);
  EXPECT_EQ(code_of([&] { disco::select_hard_examples(FeatureMatrix(data.z), data.labels, 0.0); }),
            ErrorCode::InvalidInput);
  EXPECT_EQ(code_of([&] { disco::select_hard_examples(FeatureMatrix(data.z), data.labels, 1.5); }),
            ErrorCode::InvalidInput);
}

}  // namespace
