#include <gtest/gtest.h>

#include "kss/kac_rice.hpp"

using namespace kss;

TEST(KacRice, ExpectedCountIsSquareRootOfBezout) {
  EXPECT_DOUBLE_EQ(expected_count(1, 400), 20.0);
  EXPECT_DOUBLE_EQ(expected_count(2, 4), 4.0);
  EXPECT_DOUBLE_EQ(expected_sphere_count(1, 100), 20.0);
}

TEST(KacRice, MeanAbsoluteDeterminant) {
  EXPECT_NEAR(mean_abs_det_exact(1), std::sqrt(2.0 / std::numbers::pi), 1e-15);
  EXPECT_NEAR(mean_abs_det_exact(2), 1.0, 1e-15);
}

TEST(KacRice, IndependentTwoPointValue) {
  EXPECT_NEAR(h_independent(1).value, 1.0 / (std::numbers::pi * std::numbers::pi), 1e-15);
  const auto h2 = h_independent(2, 400000);
  EXPECT_NEAR(h2.value, 1.0 / (4 * std::numbers::pi * std::numbers::pi), 4 * h2.mc_error + 1e-12);
}

TEST(KacRice, MeanAbsProductLimits) {
  EXPECT_NEAR(mean_abs_product(1.0, 0.0), 2.0 / std::numbers::pi, 1e-15);
  EXPECT_NEAR(mean_abs_product(1.0, 1.0), 1.0, 1e-15);
}

TEST(KacRice, VarianceMatchesExactLowDegreeValues) {
  // For d = 2 and d = 3 the variance of the real root count is known in closed form.
  EXPECT_NEAR(variance_quadrature(2, 1, {128, std::numbers::pi * std::sqrt(2.0) / 2, 0, 0, true}).variance_over_dm2, 2.0 - std::sqrt(2.0), 1e-8);
  EXPECT_NEAR(variance_quadrature(3, 1, {128, std::numbers::pi * std::sqrt(3.0) / 2, 0, 0, true}).variance_over_dm2, 4.0 - 2.0 * std::sqrt(3.0), 1e-8);
}

TEST(KacRice, VarianceIsStableInNodesAndCutoff) {
  const auto a = variance_quadrature(400, 1, {128, 10.0, 0, 0, true});
  const auto b = variance_quadrature(400, 1, {256, 20.0, 0, 0, true});
  EXPECT_NEAR(a.variance_over_dm2, b.variance_over_dm2, 1e-9);
  EXPECT_NEAR(a.variance_over_dm2, 0.5713508191840264, 1e-9);
  EXPECT_LT(a.refinement_change, 1e-10);
}

TEST(KacRice, VInfinityStabilizes) {
  const auto r = v_infinity(1, {10000, 40000});
  EXPECT_TRUE(r.converging);
  EXPECT_NEAR(r.estimate, 0.57173, 1e-4);
}

TEST(KacRice, TwoVariableVarianceIsPositiveAndFinite) {
  QuadratureConfig q;
  q.n_mc = 20000;
  const auto v = variance_quadrature(100, 2, q);
  EXPECT_GT(v.variance_over_dm2, 0.0);
  EXPECT_TRUE(std::isfinite(v.variance_over_dm2));
}

TEST(KacRice, TwoPointFunctionIsEvenAboutHalfPi) {
  for (double th : {0.2, 0.5, 1.0}) {
    EXPECT_NEAR(h_function(th, 20, 1).value, h_function(std::numbers::pi - th, 20, 1).value, 1e-12);
  }
}

TEST(KacRice, DominationConstantIsFinite) {
  const auto r = domination_constant(200, 1);
  EXPECT_TRUE(std::isfinite(r.fitted_constant));
  EXPECT_GT(r.fitted_constant, 0.0);
}
