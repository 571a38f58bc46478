#include <gtest/gtest.h>

#include "kss/local_field.hpp"
#include "kss/root_locator.hpp"

using namespace kss;

TEST(LocalField, CovarianceOnDiagonalIsOne) {
  const Eigen::Vector2d u(0.3, -0.7);
  EXPECT_NEAR(local_covariance(u, u, 50), 1.0, 1e-14);
  EXPECT_NEAR(limit_covariance(u, u).value, 1.0, 1e-15);
}

TEST(LocalField, ChartDomainIsEnforced) {
  EXPECT_THROW(local_covariance(Eigen::VectorXd::Constant(1, 11.0), Eigen::VectorXd::Zero(1), 100), PreconditionError);
}

TEST(LocalField, ErrorShrinksTenfoldPerDecade) {
  const Eigen::Vector2d u(0.5, -0.2), v(-0.4, 0.3);
  const double g = gamma_kernel(u, v);
  const double e3 = std::abs(local_covariance(u, v, 1000) - g), e4 = std::abs(local_covariance(u, v, 10000) - g);
  EXPECT_NEAR(e3 / e4, 10.0, 1.0);
  const auto conv = local_convergence(2, {100, 1000, 10000});
  EXPECT_NEAR(conv.slope, -1.0, 0.15);
}

TEST(LocalField, FiniteDegreeCovarianceMatchesSampledSystems) {
  const int d = 100, n = 40000;
  const double u = 0.6;  // compare Y_d(0) with Y_d(u)
  const double th = std::asin(u / std::sqrt(static_cast<double>(d)));
  double acc = 0.0, acc2 = 0.0;
  for (int r = 0; r < n; ++r) {
    const CircleEvaluator f(homogenize(sample_system(1, d, 50000 + r)));
    const double v = f.value(0.0) * f.value(th);
    acc += v;
    acc2 += v * v;
  }
  const double mean = acc / n, se = std::sqrt((acc2 / n - mean * mean) / n);
  EXPECT_NEAR(mean, local_covariance(Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, u), d), 3 * se);
}

TEST(LocalField, HessianStructure) {
  const Eigen::Vector2d zero = Eigen::Vector2d::Zero();
  const auto at0 = limit_covariance(zero, zero);
  EXPECT_NEAR(at0.hessian(0, 0), -1.0, 1e-15);
  EXPECT_NEAR(at0.hessian(1, 0), 0.0, 1e-15);
  const Eigen::Vector2d u(0.4, -0.9);
  const auto a = limit_covariance(u, zero);
  const double h = 1e-4;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      Eigen::Vector2d ei = Eigen::Vector2d::Zero(), ej = Eigen::Vector2d::Zero();
      ei(i) = h;
      ej(j) = h;
      const double fd = (gamma_kernel(u + ei + ej, zero) - gamma_kernel(u + ei - ej, zero) - gamma_kernel(u - ei + ej, zero) +
                         gamma_kernel(u - ei - ej, zero)) / (4 * h * h);
      EXPECT_NEAR(a.hessian(i, j), fd, 1e-6);
    }
}

TEST(LocalField, StationarityAndGramPsd) {
  NormalStream rng(9, 0, 0);
  for (int i = 0; i < 20; ++i) {
    Eigen::Vector2d u(rng.normal(), rng.normal()), v(rng.normal(), rng.normal()), w(rng.normal(), rng.normal());
    EXPECT_NEAR(gamma_kernel(u, v), gamma_kernel(u + w, v + w), 1e-14);
  }
  const auto g = gamma_gram(GridSpec{2, 1.0, 9}.points());
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues().minCoeff(), -1e-10);
}

TEST(LocalField, SampledFieldHasTheRightCovariance) {
  const auto s = sample_limit_field(GridSpec{2, 1.0, 4}, 21, 10000);
  const auto ck = field_covariance_check(s);
  EXPECT_LT(ck.max_z_cov, 3.5);
  EXPECT_LT(ck.max_z_variance, 3.5);
  EXPECT_LT(ck.max_z_cross, 4.0);
}

TEST(LocalField, IntegrabilityCheck) {
  const auto a = integrability_check(0.5, 1), b = integrability_check(0.25, 1);
  EXPECT_TRUE(std::isfinite(a.value));
  EXPECT_LT(a.refinement_rel, 1e-3);
  EXPECT_GT(a.value, b.value);
  EXPECT_NEAR(a.small_radius_slope, 2.0, 0.01);
  EXPECT_THROW(integrability_check(0.0, 1), PreconditionError);
}

TEST(LocalField, OneDimensionalMeanCountIsOneOverPi) {
  const auto r = limit_variance_mc(1, 10000, 3);
  EXPECT_NEAR(r.mean, 1.0 / std::numbers::pi, 3 * r.mean_se);
  EXPECT_GE(r.variance, 0.0);
}

TEST(LocalField, OneDimensionalVarianceMatchesKacRice) {
  const auto r = limit_variance_mc(1, 20000, 4);
  const double kr = limit_variance_kac_rice_m1();
  EXPECT_NEAR(r.variance, kr, 0.05 * kr);
}

TEST(LocalField, ChainIdentityCountsAgree) {
  // Zeros of Y on an arc around the pole equal zeros of the rescaled field on the image interval.
  const int d = 400;
  const double w = 0.2;
  for (int r = 0; r < 200; ++r) {
    const auto h = homogenize(sample_system(1, d, 90000 + r));
    const long on_arc = count_in_subset(h, Arc{0.0, w}).sphere_count;
    const long local = count_local_field_m1(CircleEvaluator(h), std::sqrt(static_cast<double>(d)) * std::sin(w), 1e-3);
    EXPECT_EQ(on_arc, local) << "replicate " << r;
  }
}
