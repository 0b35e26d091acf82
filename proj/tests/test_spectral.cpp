#include <gtest/gtest.h>

#include <random>

#include "disco/spectral.hpp"
#include "test_helpers.hpp"

namespace {

using disco::ErrorCode;
using disco::FeatureMatrix;
using disco::GroupRange;
using disco::testing::random_matrix;
using disco::testing::random_orthonormal;
using disco::testing::relative_error;
using disco::testing::with_singular_values;

disco::SpectralGrouping grouping_with(const Eigen::VectorXd& sigma, std::size_t groups,
                                      std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  const auto n = sigma.size() + 3;
  return disco::make_grouping(disco::svd(FeatureMatrix(with_singular_values(n, sigma.size(), sigma, rng))),
                              groups);
}

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

TEST(FeatureMatrix, RejectsNonFiniteAndEmpty) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Ones(2, 2);
  m(1, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(code_of([&] { FeatureMatrix f(m); }), ErrorCode::InvalidInput);
  EXPECT_EQ(code_of([] { FeatureMatrix f(Eigen::MatrixXd(0, 3)); }), ErrorCode::InvalidInput);
}

TEST(Svd, SmallClosedForms) {
  EXPECT_TRUE(disco::svd(FeatureMatrix(Eigen::MatrixXd::Identity(2, 2))).singulars.isApprox(
      Eigen::Vector2d(1, 1), 1e-14));
  Eigen::Matrix2d diag;
  diag << 3, 0, 0, 4;
  EXPECT_TRUE(disco::svd(FeatureMatrix(diag)).singulars.isApprox(Eigen::Vector2d(4, 3), 1e-14));
  const auto ones = disco::svd(FeatureMatrix(Eigen::MatrixXd::Ones(2, 2)));
  EXPECT_NEAR(ones.singulars(0), 2.0, 1e-14);
  EXPECT_NEAR(ones.singulars(1), 0.0, 1e-14);
}

TEST(Svd, InvariantsOnRandomMatrices) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> size(1, 60);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::MatrixXd z = random_matrix(size(rng), size(rng), rng);
    const auto d = disco::svd(FeatureMatrix(z));
    const auto r = std::min(z.rows(), z.cols());
    ASSERT_EQ(d.singulars.size(), r);
    for (Eigen::Index i = 1; i < r; ++i) EXPECT_GE(d.singulars(i - 1), d.singulars(i));
    EXPECT_GE(d.singulars.minCoeff(), 0.0);
    EXPECT_LT((d.left.transpose() * d.left - Eigen::MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((d.right.transpose() * d.right - Eigen::MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT(relative_error(d.left * d.singulars.asDiagonal() * d.right.transpose(), z), 1e-6);
  }
}

TEST(Svd, OrthogonalAndScaleInvariance) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd z = random_matrix(30, 12, rng);
    const Eigen::MatrixXd q = random_orthonormal(12, 12, rng);
    const auto base = disco::svd(FeatureMatrix(z)).singulars;
    EXPECT_LT((disco::svd(FeatureMatrix(z * q)).singulars - base).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((disco::svd(FeatureMatrix(-3.5 * z)).singulars - 3.5 * base).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Grouping, PartitionExamples) {
  const auto r10 = [](std::size_t g) { return grouping_with(Eigen::VectorXd::LinSpaced(10, 10, 1), g); };
  EXPECT_EQ(r10(5).boundaries,
            (std::vector<GroupRange>{{0, 2}, {2, 4}, {4, 6}, {6, 8}, {8, 10}}));
  EXPECT_EQ(r10(4).boundaries, (std::vector<GroupRange>{{0, 3}, {3, 6}, {6, 9}, {9, 10}}));
  const auto r5 = grouping_with(Eigen::VectorXd::LinSpaced(5, 5, 1), 5);
  for (std::size_t g = 0; g < 5; ++g) EXPECT_EQ(r5.boundaries[g].size(), 1);
}

TEST(Grouping, BalancesWhenCeilingWouldLeaveEmptyGroups) {
  // r=8, G=6: ceil gives s=2 and only four groups; sizes are balanced instead.
  EXPECT_EQ(disco::group_sizes(8, 6), (std::vector<Eigen::Index>{2, 2, 1, 1, 1, 1}));
  EXPECT_EQ(disco::group_sizes(10, 4), (std::vector<Eigen::Index>{3, 3, 3, 1}));
}

TEST(Grouping, CoversEveryIndexForAllCounts) {
  for (Eigen::Index r = 1; r <= 64; ++r) {
    for (std::size_t g = 1; g <= static_cast<std::size_t>(r); ++g) {
      const auto sizes = disco::group_sizes(r, g);
      ASSERT_EQ(sizes.size(), g);
      Eigen::Index sum = 0;
      for (auto s : sizes) {
        EXPECT_GE(s, 1);
        sum += s;
      }
      EXPECT_EQ(sum, r);
    }
  }
}

TEST(Grouping, RejectsTooManyGroups) {
  EXPECT_EQ(code_of([] { grouping_with(Eigen::Vector3d(3, 2, 1), 4); }), ErrorCode::InvalidGroupCount);
  EXPECT_EQ(code_of([] { grouping_with(Eigen::Vector3d(3, 2, 1), 0); }), ErrorCode::InvalidGroupCount);
}

TEST(ComponentMatrix, Examples) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd z = random_matrix(9, 5, rng);
  const auto whole = disco::make_grouping(disco::svd(FeatureMatrix(z)), 1);
  EXPECT_LT(relative_error(disco::component_matrix(whole, 0).values(), z), 1e-10);

  Eigen::Matrix2d diag;
  diag << 3, 0, 0, 4;
  const auto two = disco::make_grouping(disco::svd(FeatureMatrix(diag)), 2);
  Eigen::Matrix2d expected;
  expected << 0, 0, 0, 4;
  EXPECT_LT((disco::component_matrix(two, 0).values() - expected).cwiseAbs().maxCoeff(), 1e-12);

  const auto four = disco::make_grouping(disco::svd(FeatureMatrix(z)), 4);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(9, 5);
  for (std::size_t g = 0; g < 4; ++g) sum += disco::component_matrix(four, g).values();
  EXPECT_LT(relative_error(sum, z), 1e-6);
  EXPECT_EQ(code_of([&] { disco::component_matrix(four, 4); }), ErrorCode::InvalidGroupIndex);
}

TEST(ComponentMatrix, MutuallyOrthogonal) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd z = random_matrix(40, 16, rng);
  const auto g = disco::make_grouping(disco::svd(FeatureMatrix(z)), 5);
  const double scale = z.squaredNorm();
  for (std::size_t a = 0; a < 5; ++a) {
    for (std::size_t b = a + 1; b < 5; ++b) {
      const double inner = disco::component_matrix(g, a).values().cwiseProduct(
          disco::component_matrix(g, b).values()).sum();
      EXPECT_LT(std::abs(inner), 1e-6 * scale);
    }
  }
}

TEST(Ratios, Examples) {
  const auto g = grouping_with(Eigen::Vector4d(4, 3, 2, 1), 2);
  EXPECT_NEAR(disco::singular_value_ratio(g, 0), 0.7, 1e-12);
  EXPECT_NEAR(disco::singular_value_ratio(g, 1), 0.3, 1e-12);
  EXPECT_NEAR(disco::topk_ratio(g, 1), 0.7, 1e-12);
  EXPECT_DOUBLE_EQ(disco::topk_ratio(g, 2), 1.0);

  const auto eq = grouping_with(Eigen::VectorXd::Constant(12, 2.0), 4);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(disco::singular_value_ratio(eq, i), 0.25, 1e-12);

  const auto g4 = grouping_with(Eigen::Vector4d(5, 3, 1, 1), 4);
  EXPECT_NEAR(disco::topk_ratio(g4, 2), 0.8, 1e-12);
  EXPECT_EQ(code_of([&] { disco::topk_ratio(g4, 0); }), ErrorCode::InvalidInput);
  EXPECT_EQ(code_of([&] { disco::topk_ratio(g4, 5); }), ErrorCode::InvalidInput);
}

TEST(Ratios, SumToOneAndScaleFree) {
  std::mt19937_64 rng(9);
  for (std::size_t groups : {1, 2, 3, 7}) {
    const Eigen::MatrixXd z = random_matrix(25, 14, rng);
    const auto a = disco::singular_value_ratios(disco::make_grouping(disco::svd(FeatureMatrix(z)), groups));
    const auto b = disco::singular_value_ratios(disco::make_grouping(disco::svd(FeatureMatrix(-0.01 * z)), groups));
    EXPECT_NEAR(a.sum(), 1.0, 1e-9);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Ratios, DegenerateSpectrum) {
  const auto g = disco::make_grouping(disco::svd(FeatureMatrix(Eigen::MatrixXd::Zero(3, 2))), 1);
  EXPECT_EQ(code_of([&] { disco::singular_value_ratio(g, 0); }), ErrorCode::DegenerateSpectrum);
}

TEST(FrobeniusChange, Examples) {
  std::mt19937_64 rng(13);
  const FeatureMatrix z(random_matrix(6, 4, rng));
  EXPECT_DOUBLE_EQ(disco::relative_frobenius_change(z, z), 0.0);
  EXPECT_NEAR(disco::relative_frobenius_change(z, FeatureMatrix(2.0 * z.values())), 1.0, 1e-14);
  EXPECT_NEAR(disco::relative_frobenius_change(z, FeatureMatrix(Eigen::MatrixXd::Zero(6, 4))), 1.0, 1e-14);
  EXPECT_EQ(code_of([&] { disco::relative_frobenius_change(FeatureMatrix(Eigen::MatrixXd::Zero(6, 4)), z); }),
            ErrorCode::DegenerateComponent);
  EXPECT_EQ(code_of([&] { disco::relative_frobenius_change(z, FeatureMatrix(random_matrix(6, 3, rng))); }),
            ErrorCode::InvalidInput);
}

TEST(ChangeProfile, IdenticalInputs) {
  std::mt19937_64 rng(17);
  const FeatureMatrix z(random_matrix(30, 10, rng));
  const auto p = disco::spectral_change_profile(z, z, 5);
  EXPECT_LT(p.per_group_frobenius_change.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((p.per_group_ratio_before - p.per_group_ratio_after).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(p.per_group_ratio_before.sum(), 1.0, 1e-9);
  EXPECT_NEAR(p.per_group_ratio_after.sum(), 1.0, 1e-9);
}

TEST(ChangeProfile, ConcentratedSpectrumShiftsMassToFirstGroup) {
  std::mt19937_64 rng(19);
  const Eigen::MatrixXd u = random_orthonormal(40, 8, rng);
  const Eigen::MatrixXd v = random_orthonormal(8, 8, rng);
  const Eigen::VectorXd before_sigma = Eigen::VectorXd::LinSpaced(8, 8, 1);
  Eigen::VectorXd after_sigma = Eigen::VectorXd::Ones(8);
  after_sigma(0) = 10.0;
  const FeatureMatrix before(u * before_sigma.asDiagonal() * v.transpose());
  const FeatureMatrix after(u * after_sigma.asDiagonal() * v.transpose());
  const auto p = disco::spectral_change_profile(before, after, 4);
  // Oracle: group ratios straight from the constructed spectra.
  EXPECT_NEAR(p.per_group_ratio_before(0), (8.0 + 7.0) / 36.0, 1e-10);
  EXPECT_NEAR(p.per_group_ratio_after(0), 11.0 / 17.0, 1e-10);
  EXPECT_GT(p.per_group_ratio_after(0), p.per_group_ratio_before(0));
}

TEST(ChangeProfile, SingleGroupIsWholeMatrixChange) {
  std::mt19937_64 rng(23);
  const FeatureMatrix a(random_matrix(12, 6, rng));
  const FeatureMatrix b(a.values() + 0.3 * random_matrix(12, 6, rng));
  const auto p = disco::spectral_change_profile(a, b, 1);
  EXPECT_NEAR(p.per_group_frobenius_change(0), disco::relative_frobenius_change(a, b), 1e-10);
}

TEST(ChangeProfile, ShapeMismatch) {
  std::mt19937_64 rng(29);
  const FeatureMatrix a(random_matrix(12, 6, rng));
  const FeatureMatrix b(random_matrix(12, 7, rng));
  EXPECT_EQ(code_of([&] { disco::spectral_change_profile(a, b, 2); }), ErrorCode::InvalidInput);
}

}  // namespace
