#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "kss/chaos.hpp"

using namespace kss;

TEST(Chaos, HermitePolynomials) {
  for (double x : {-1.3, 0.0, 0.7, 2.1}) {
    EXPECT_NEAR(hermite_eval(4, x), x * x * x * x - 6 * x * x + 3, 1e-12);
    EXPECT_NEAR(hermite_eval(5, x), std::pow(x, 5) - 10 * std::pow(x, 3) + 15 * x, 1e-12);
  }
  EXPECT_THROW(hermite_eval(-1, 0.0), PreconditionError);
}

TEST(Chaos, DeltaCoefficients) {
  const double c = 1.0 / std::sqrt(2 * std::numbers::pi);
  EXPECT_NEAR(b_coeff({0}), c, 1e-16);
  EXPECT_NEAR(b_coeff({2}), -0.5 * c, 1e-16);
  EXPECT_NEAR(b_coeff({4}), 0.125 * c, 1e-16);
  EXPECT_EQ(b_coeff({1}), 0.0);
  EXPECT_NEAR(b_coeff({2, 2}), 0.25 * c * c, 1e-16);
}

TEST(Chaos, AbsoluteValueCoefficientsMatchQuadrature) {
  // f_n = E[|Z| H_n(Z)] / n!
  for (int n : {0, 2, 4, 6}) {
    auto integrand = [n](double x) {
      return std::abs(x) * hermite_eval(n, x) * std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi);
    };
    const double e = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -12.0, 0.0) +
                     boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, 12.0);
    EXPECT_NEAR(f_coeff_scalar(n), e / std::tgamma(n + 1.0), 1e-12);
  }
  EXPECT_NEAR(f_coeff_scalar(2), 1.0 / std::sqrt(2 * std::numbers::pi), 1e-15);
}

TEST(Chaos, MatrixCoefficientsObeyParityWithinError) {
  const auto cc = build_coefficients(2, 4, 200000, 17);
  EXPECT_NEAR(cc.f_raw.at({0, 0, 0, 0}).value, 1.0, 4 * cc.f_raw.at({0, 0, 0, 0}).error);  // E|det| = 1
  for (const auto& [beta, est] : cc.f_raw)
    if (!beta_is_even(beta, 2)) {
      EXPECT_LE(std::abs(est.value), 4.5 * est.error + 1e-12);
      EXPECT_EQ(cc.f.at(beta).value, 0.0);
    }
}

TEST(Chaos, MehlerScalarCases) {
  Eigen::MatrixXd r(1, 1);
  r(0, 0) = 0.3;
  EXPECT_NEAR(mehler_expectation({2}, {2}, r), 2 * 0.09, 1e-15);
  EXPECT_NEAR(mehler_expectation({4}, {4}, r), 24 * std::pow(0.3, 4), 1e-15);
  EXPECT_EQ(mehler_expectation({2}, {4}, r), 0.0);
}

TEST(Chaos, MehlerTwoByTwoAgainstExplicitSum) {
  // E[H_1(X1) H_1(X2) H_2(Y1)] with Cov(X_i, Y_1) = r_i equals 2 r_1 r_2
  Eigen::MatrixXd r(2, 1);
  r << 0.4, -0.7;
  EXPECT_NEAR(mehler_expectation({1, 1}, {2}, r), 2 * 0.4 * -0.7, 1e-15);
}

TEST(Chaos, MehlerRejectsExcessiveDegree) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(1, 1);
  EXPECT_THROW(mehler_expectation({14}, {14}, r), BudgetError);
}

TEST(Chaos, FactorizedAndFullMehlerSumsAgree) {
  const auto c1 = build_coefficients(1, 6);
  for (double th : {0.2, 0.6})
    for (int q : {2, 4, 6}) EXPECT_NEAR(H_qd(th, 20, c1, q), H_qd_unfactorized(th, 20, c1, q), 1e-15);
  const auto c2 = build_coefficients(2, 2, 100000, 3);
  EXPECT_NEAR(H_qd(0.3, 30, c2, 2), H_qd_unfactorized(0.3, 30, c2, 2), 1e-15);
}

TEST(Chaos, ChaosComponentsAreEvenAndSumToTwoPointFunction) {
  const auto cc = build_coefficients(1, 10);
  double sum = 0.0;
  for (int q = 0; q <= 10; q += 2) {
    EXPECT_NEAR(H_qd(0.5, 20, cc, q), H_qd(std::numbers::pi - 0.5, 20, cc, q), 1e-12);
    sum += H_qd(0.5, 20, cc, q);
  }
  EXPECT_NEAR(sum, h_function(0.5, 20, 1).value, 1e-6);
  EXPECT_EQ(H_qd(0.5, 20, cc, 3), 0.0);
}

TEST(Chaos, PartialSumsStayBelowTotalVariance) {
  const auto cc = build_coefficients(1, 8);
  const double total = variance_quadrature(400, 1).variance_over_dm2;
  double partial = 0.0, prev = -1.0;
  for (int q = 1; q <= 8; ++q) {
    partial += chaos_variance(q, 400, cc);
    EXPECT_GE(partial, prev);
    prev = partial;
  }
  EXPECT_LE(partial, total * 1.02);
  EXPECT_GT(partial, 0.5 * total);
}

TEST(Chaos, ComponentNormsBoundedByFunctionalNorm) {
  const auto cc = build_coefficients(1, 8);
  for (int q = 1; q <= 8; ++q) EXPECT_TRUE(g_norm_bound_check(cc, q).holds);
}

TEST(Chaos, ArconesTailBoundVanishes) {
  EXPECT_GT(arcones_tail_bound(2, 1, 1.3, 0.5), 0.0);
  EXPECT_LT(arcones_tail_bound(200, 1, 1.3, 0.5), 1e-12);
  EXPECT_LT(arcones_tail_bound(20, 1, 1.3, 0.5), arcones_tail_bound(10, 1, 1.3, 0.5));
  EXPECT_THROW(arcones_tail_bound(5, 1, 1.0, 1.0), PreconditionError);
}

TEST(Chaos, ContractionIntegralMatchesAdaptiveQuadrature) {
  for (int d : {100, 1000}) {
    const double ref = std::cbrt(static_cast<double>(d)) *
                       boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                           [d](double t) { return std::pow(std::cos(t), d); }, 0.0, std::numbers::pi / 2, 15, 1e-14);
    EXPECT_NEAR(contraction_integral(0, d, 1), ref, 1e-8 * ref);
    // closed form d^{1/3} sqrt(pi) Gamma((d+1)/2) / (2 Gamma(d/2 + 1))
    const double closed = std::cbrt(static_cast<double>(d)) * std::sqrt(std::numbers::pi) *
                          std::exp(std::lgamma((d + 1) / 2.0) - std::lgamma(d / 2.0 + 1)) / 2;
    EXPECT_NEAR(contraction_integral(0, d, 1), closed, 1e-8 * closed);
  }
}

TEST(Chaos, RawDerivativeContractionsGrow) {
  // Without standardization the first two derivatives carry factors d and d^2.
  EXPECT_GT(contraction_integral(1, 10000, 1, ContractionNormalization::raw),
            contraction_integral(1, 100, 1, ContractionNormalization::raw));
}

TEST(Chaos, MonteCarloCrossMomentAgrees) {
  const auto cc = build_coefficients(1, 2);
  const auto mc = mehler_mc_m1({0.15}, 20, cc, 2, 100000, 77);
  EXPECT_NEAR(mc[0].mean, H_qd(0.15, 20, cc, 2), 3.5 * mc[0].se);
}
