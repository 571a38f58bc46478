#include <gtest/gtest.h>

#include "kss/covariance.hpp"

using namespace kss;

namespace {

struct ProfileOracle {
  double theta;
  int d;
  double C, A, B, D, sigma2, rho;
};

// Reference values computed with 50-digit arithmetic.
const ProfileOracle kOracles[] = {
    {1e-3, 100, 0.99995000124164625, -0.0099995033455844668, 0.99985100612552659, 0.99995050121685519, 4.9499199749324466e-5, -0.99998366679733022},
    {0.3, 6, 0.76021808299412904, -0.57602938253978342, 0.39649586414265747, 0.79575949589231785, 0.21384828279927135, -0.94062428099566908},
    {0.5, 8, 0.35180651649709892, -0.54360326055176603, -0.38316122755357026, 0.40088138914164803, 0.66275547357147215, -0.75715112075945645},
    {0.7, 10, 0.068504381265480378, -0.18246482615209207, -0.36889934315208292, 0.089566687617872848, 0.96654960954398687, -0.38403703005838133},
};

}  // namespace

TEST(Covariance, ProfileMatchesHighPrecisionOracles) {
  for (const auto& o : kOracles) {
    const auto p = profile(o.theta, o.d);
    const double tol = 1e-13;
    EXPECT_NEAR(p.C, o.C, tol * std::abs(o.C) + 1e-16);
    EXPECT_NEAR(p.A, o.A, tol * std::abs(o.A) + 1e-16);
    EXPECT_NEAR(p.B, o.B, tol * std::abs(o.B) + 1e-16);
    EXPECT_NEAR(p.D, o.D, tol * std::abs(o.D) + 1e-16);
    EXPECT_NEAR(p.sigma2, o.sigma2, 1e-11 * std::abs(o.sigma2));
    EXPECT_NEAR(p.rho, o.rho, 1e-11);
  }
}

TEST(Covariance, ThetaZeroIsDegenerate) {
  const auto p = profile(0.0, 10);
  EXPECT_TRUE(p.degenerate);
  EXPECT_DOUBLE_EQ(p.C, 1.0);
}

TEST(Covariance, JointMatrixIsPsdWithUnitDiagonal) {
  for (double th : {0.05, 0.4, 1.2})
    for (int m : {1, 2, 3}) {
      const auto jc = joint_matrix(th, 12, m);
      for (Eigen::Index i = 0; i < jc.matrix.rows(); ++i) EXPECT_NEAR(jc.matrix(i, i), 1.0, 1e-14);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jc.matrix);
      EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
    }
}

TEST(Covariance, CrossBlockStructure) {
  // Per equation: [[C, A, 0], [-A, B, 0], [0, 0, D]] for m = 2
  const auto p = profile(0.5, 8);
  const Eigen::MatrixXd r = equation_cross_block(p, 2);
  EXPECT_DOUBLE_EQ(r(0, 0), p.C);
  EXPECT_DOUBLE_EQ(r(0, 1), p.A);
  EXPECT_DOUBLE_EQ(r(1, 0), -p.A);
  EXPECT_DOUBLE_EQ(r(1, 1), p.B);
  EXPECT_DOUBLE_EQ(r(2, 2), p.D);
  EXPECT_DOUBLE_EQ(r(0, 2), 0.0);
}

TEST(Covariance, RegressionBlocksReproduceConditionalCovariance) {
  const int m = 2;
  const double th = 0.45;
  const int d = 9;
  const auto jc = joint_matrix(th, d, m);
  const auto rb = regression_blocks(th, d, m);
  // Schur complement of (Y(s), Y(t)) for equation 0 derivatives
  const int n = 2 * (m + 1);
  Eigen::MatrixXd s = jc.matrix.block(0, 0, n, n);
  const Eigen::MatrixXd cyy = s.block(0, 0, 2, 2), cdy = s.block(2, 0, 2 * m, 2), cdd = s.block(2, 2, 2 * m, 2 * m);
  const Eigen::MatrixXd cond = cdd - cdy * cyy.inverse() * cdy.transpose();
  const Eigen::MatrixXd full = rb.full();
  EXPECT_LE((cond - full).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Covariance, DecayBoundsHoldOnGrid) {
  for (int d : {50, 400, 5000})
    for (int i = 0; i <= 100; ++i) EXPECT_TRUE(check_bounds(0.1 * i, d, 0.2).all()) << "d=" << d << " z=" << 0.1 * i;
}

TEST(Covariance, PsiIsTheMaximalAbsoluteRowSum) {
  // The full cross-covariance has rows (C, A), (-A, B) and (D) per equation,
  // so psi = max(|C|+|A|, |A|+|B|, |D|). It differs from |C|+|A| in general.
  const double th = 0.6;
  const int d = 10;
  const auto p = profile(th, d);
  const double expect = std::max({std::abs(p.C) + std::abs(p.A), std::abs(p.A) + std::abs(p.B), std::abs(p.D)});
  EXPECT_NEAR(arcones_psi(th, d, 2), expect, 1e-14);
  EXPECT_NEAR(arcones_psi(th, d, 1), std::max(std::abs(p.C) + std::abs(p.A), std::abs(p.A) + std::abs(p.B)), 1e-14);
}

TEST(Covariance, ArconesRadiusExistsBelowTwo) {
  for (int d : {10, 100, 1000}) {
    const auto r = arcones_radius(d, 1, false);
    EXPECT_LT(r.a, 2.0);
    EXPECT_LT(r.r0, 1.0);
  }
}
