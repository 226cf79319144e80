#include <gtest/gtest.h>

#include <random>

#include "epxhop/error.hpp"
#include "epxhop/saab.hpp"

namespace epxhop {
namespace {

Eigen::MatrixXd random_patches(int m, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(m, n);
  // mild spatial correlation so the spectrum is not flat
  for (int i = 0; i < m; ++i) {
    double prev = g(rng);
    for (int j = 0; j < n; ++j) {
      prev = 0.7 * prev + g(rng);
      x(i, j) = prev + 0.5;
    }
  }
  return x;
}

FeatureMap random_map(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  FeatureMap m(size, 1);
  for (auto& v : m.data) v = u(rng);
  return m;
}

TEST(Neighborhoods, PaddedShapes) {
  const FeatureMap m32 = random_map(32, 1);
  const auto p = extract_neighborhoods(m32, Window{5, 5, 1, 1, 2});
  EXPECT_EQ(p.rows(), 32 * 32);
  EXPECT_EQ(p.cols(), 25);
  // top-left patch: two rows and columns of zero padding
  EXPECT_EQ(p(0, 0), 0.0);
  EXPECT_EQ(p(0, 12), m32.at(0, 0, 0));
  EXPECT_EQ(p(0, 24), m32.at(2, 2, 0));

  const auto q = extract_neighborhoods(random_map(7, 2), Window{3, 3, 1, 1, 0});
  EXPECT_EQ(q.rows(), 25);
  EXPECT_EQ(q.cols(), 9);
}

TEST(Neighborhoods, ConstantMapSinglePatch) {
  const FeatureMap m(3, 1, 0.25f);
  const auto p = extract_neighborhoods(m, Window{3, 3, 1, 1, 0});
  ASSERT_EQ(p.rows(), 1);
  for (int j = 0; j < 9; ++j) EXPECT_EQ(p(0, j), 0.25);
}

TEST(Neighborhoods, StrideAndOversizedWindow) {
  const FeatureMap m = random_map(9, 3);
  const auto p = extract_neighborhoods(m, Window{3, 3, 2, 2, 0});
  EXPECT_EQ(p.rows(), 16);
  EXPECT_EQ(p(5, 0), m.at(2, 2, 0));
  EXPECT_THROW(extract_neighborhoods(FeatureMap(3, 1), Window{5, 5, 1, 1, 0}), Error);
}

TEST(SaabFit, ConstantPatches) {
  Eigen::MatrixXd x(20, 9);
  for (int i = 0; i < 20; ++i) x.row(i).setConstant(0.1 * i - 0.4);
  const SaabNode node = fit_saab(x, 8);
  for (int j = 0; j < node.eigenvalues.size(); ++j) EXPECT_NEAR(node.eigenvalues[j], 0.0, 1e-12);
  const auto coeffs = apply_saab(x, node);
  for (int i = 0; i < 20; ++i) {
    EXPECT_NEAR(coeffs(i, 0), (0.1 * i - 0.4) * 3.0, 1e-12);
    for (int j = 1; j < coeffs.cols(); ++j) EXPECT_NEAR(coeffs(i, j), 0.0, 1e-12);
  }
}

TEST(SaabFit, KnownAcDirection) {
  // Closed-form residual covariance a^2 u u^T has a single nonzero eigenvalue
  // along u.
  Eigen::Vector4d u(1.0, -1.0, 2.0, -2.0);
  u.normalize();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(200, 4);
  double sum_a2 = 0.0, sum_a = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double c = g(rng), a = 2.0 * g(rng);
    x.row(i) = (Eigen::Vector4d::Constant(c) + a * u).transpose();
    sum_a2 += a * a;
    sum_a += a;
  }
  const SaabNode node = fit_saab(x, 3);
  const double var_a = sum_a2 / 200 - (sum_a / 200) * (sum_a / 200);
  EXPECT_NEAR(node.eigenvalues[0], var_a, 1e-9 * var_a);
  EXPECT_NEAR(node.eigenvalues[1], 0.0, 1e-9);
  EXPECT_NEAR(node.eigenvalues[2], 0.0, 1e-9);
  EXPECT_NEAR(std::abs(node.ac_kernels.row(0).dot(u.transpose())), 1.0, 1e-9);
}

TEST(SaabFit, ParsevalWithAllKernels) {
  const auto x = random_patches(300, 25, 7);
  const SaabNode node = fit_saab(x, 24);
  const auto coeffs = apply_saab(x, node);
  for (int i = 0; i < x.rows(); ++i) {
    const double norm2 = x.row(i).squaredNorm();
    EXPECT_NEAR(coeffs.row(i).squaredNorm(), norm2, 1e-6 * norm2);
  }
}

TEST(SaabFit, OrthonormalAndOrthogonalToDc) {
  const auto x = random_patches(200, 9, 8);
  const SaabNode node = fit_saab(x, 6);
  ASSERT_EQ(node.ac_kernels.rows(), 6);
  const Eigen::MatrixXd gram = node.ac_kernels * node.ac_kernels.transpose();
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((node.ac_kernels * node.dc_kernel).cwiseAbs().maxCoeff(), 1e-6);
  for (int j = 0; j < 9; ++j) EXPECT_DOUBLE_EQ(node.dc_kernel[j], 1.0 / 3.0);
}

TEST(SaabFit, EnergiesDescendAndSumBelowParent) {
  const auto x = random_patches(200, 9, 9);
  const SaabNode node = fit_saab(x, 8);
  for (std::size_t j = 2; j < node.child_energies.size(); ++j)
    EXPECT_LE(node.child_energies[j], node.child_energies[j - 1] + 1e-15);
  double sum = 0.0;
  for (double e : node.child_energies) sum += e;
  EXPECT_LE(sum, node.parent_energy + 1e-9);
  EXPECT_NEAR(sum, 1.0, 1e-9);  // all kernels kept
}

TEST(SaabFit, DcShareIsDcVarianceOverTotal) {
  const auto x = random_patches(150, 9, 10);
  const SaabNode node = fit_saab(x, 8);
  const Eigen::VectorXd dc = x * node.dc_kernel;
  const double dc_var = (dc.array() - dc.mean()).square().mean();
  const Eigen::MatrixXd centred = x.rowwise() - x.colwise().mean();
  const double total = centred.array().square().sum() / x.rows();
  EXPECT_NEAR(node.energy_shares[0], dc_var / total, 1e-9);
}

TEST(SaabFit, SignConventionAndDeterminism) {
  const auto x = random_patches(120, 9, 11);
  const SaabNode a = fit_saab(x, 5), b = fit_saab(x, 5);
  EXPECT_EQ(a.ac_kernels, b.ac_kernels);
  for (int r = 0; r < a.ac_kernels.rows(); ++r) {
    Eigen::Index arg = 0;
    a.ac_kernels.row(r).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(a.ac_kernels(r, arg), 0.0);
  }
}

TEST(SaabFit, InsufficientSamples) {
  try {
    fit_saab(random_patches(8, 9, 12), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::insufficient_samples);
  }
}

TEST(SaabApply, UnitAndConstantPatches) {
  const SaabNode node = fit_saab(random_patches(100, 9, 13), 8);
  Eigen::MatrixXd p(2, 9);
  p.row(0) = node.dc_kernel.transpose();
  p.row(1).setConstant(0.4);
  const auto c = apply_saab(p, node);
  EXPECT_NEAR(c(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(c(1, 0), 0.4 * 3.0, 1e-12);
  for (int j = 1; j < 9; ++j) {
    EXPECT_NEAR(c(0, j), 0.0, 1e-12);
    EXPECT_NEAR(c(1, j), 0.0, 1e-12);
  }
}

TEST(SaabApply, MatchesNaiveDotProducts) {
  const SaabNode node = fit_saab(random_patches(100, 25, 14), 10);
  const auto p = random_patches(5, 25, 15);
  const auto c = apply_saab(p, node);
  for (int i = 0; i < 5; ++i) {
    double dc = 0.0;
    for (int j = 0; j < 25; ++j) dc += p(i, j) * node.dc_kernel[j];
    EXPECT_NEAR(c(i, 0), dc, 1e-9);
    for (int k = 0; k < 10; ++k) {
      double ac = 0.0;
      for (int j = 0; j < 25; ++j) ac += p(i, j) * node.ac_kernels(k, j);
      EXPECT_NEAR(c(i, k + 1), ac, 1e-9);
    }
  }
  EXPECT_THROW(apply_saab(random_patches(3, 9, 16), node), Error);
}

TEST(MaxPool, SizesAndValues) {
  EXPECT_EQ(max_pool(random_map(32, 17)).size, 15);
  EXPECT_EQ(max_pool(random_map(15, 18)).size, 7);
  const FeatureMap c(9, 1, 0.3f);
  for (float v : max_pool(c).data) EXPECT_EQ(v, 0.3f);
  const FeatureMap m = random_map(7, 19);
  const FeatureMap pooled = max_pool(m);
  float best = -10.0f;
  for (int r = 2; r < 5; ++r)
    for (int col = 4; col < 7; ++col) best = std::max(best, m.at(r, col, 0));
  EXPECT_EQ(pooled.at(1, 2, 0), best);
  EXPECT_THROW(max_pool(FeatureMap(2, 1)), Error);
}

}  // namespace
}  // namespace epxhop
