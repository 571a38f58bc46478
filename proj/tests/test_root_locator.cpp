#include <gtest/gtest.h>

#include "kss/root_locator.hpp"

using namespace kss;

namespace {

KssSystem univariate(std::vector<double> coeffs) {
  const int d = static_cast<int>(coeffs.size()) - 1;
  return KssSystem::from_coefficients(1, d, {std::move(coeffs)});
}

}  // namespace

TEST(RootLocator, ProductOfCoordinatesHasFourSphereZerosAndOneAffineRoot) {
  // t0 t1 on the circle vanishes at (+-1, 0) and (0, +-1); only t = 0 is affine.
  const auto sys = univariate({0.0, 1.0, 0.0});
  const auto rc = count_roots_circle(homogenize(sys));
  EXPECT_EQ(rc.sphere_count, 4);
  EXPECT_EQ(rc.count, 1);
  EXPECT_TRUE(rc.certified);
  EXPECT_EQ(count_roots_companion(sys).count, 1);
}

TEST(RootLocator, SumOfSquaresHasNoZeros) {
  const auto sys = univariate({1.0, 0.0, 1.0});
  const auto rc = count_roots_circle(homogenize(sys));
  EXPECT_EQ(rc.sphere_count, 0);
  EXPECT_EQ(rc.count, 0);
  EXPECT_EQ(count_roots_companion(sys).count, 0);
}

TEST(RootLocator, KnownCubic) {
  // (t - 1)(t + 2)(t - 3) = t^3 - 2t^2 - 5t + 6
  const auto sys = univariate({6.0, -5.0, -2.0, 1.0});
  EXPECT_EQ(count_roots_circle(homogenize(sys)).count, 3);
  EXPECT_EQ(count_roots_companion(sys).count, 3);
}

TEST(RootLocator, CircleScanAgreesWithCompanionOnRandomSystems) {
  for (int d : {5, 17, 64, 128})
    for (int r = 0; r < 40; ++r) {
      const auto sys = sample_system(1, d, 1000 * d + r);
      const auto a = count_roots_circle(homogenize(sys));
      EXPECT_TRUE(a.certified);
      EXPECT_EQ(a.count, count_roots_companion(sys).count) << "d=" << d << " r=" << r;
      EXPECT_EQ(a.count % 2, d % 2);
      EXPECT_LE(a.residual_max, 1e-6);
    }
}

TEST(RootLocator, SphereCountIsTwiceAffineCount) {
  const auto sys = sample_system(1, 33, 5);
  const auto rc = count_roots_circle(homogenize(sys));
  EXPECT_EQ(rc.sphere_count, 2 * rc.count);
}

TEST(RootLocator, SphereRootsAreZeros) {
  const auto h = homogenize(sample_system(1, 50, 8));
  for (const auto& p : count_roots_circle(h).sphere_roots) {
    const std::vector<double> t(p.data(), p.data() + 2);
    EXPECT_LE(std::abs(evaluate(h, t)[0]), 1e-6);
  }
}

TEST(RootLocator, TwoVariableCountIsEvenOnSphereAndBounded) {
  for (int r = 0; r < 20; ++r) {
    const auto rc = count_roots_sphere_m2(homogenize(sample_system(2, 4, 300 + r)));
    EXPECT_EQ(rc.sphere_count % 2, 0);
    EXPECT_EQ(rc.sphere_count, 2 * rc.count);
    EXPECT_LE(rc.count, 16);  // Bezout
    EXPECT_FALSE(rc.certified);
  }
}

TEST(RootLocator, TwoVariableMeanMatchesKacRice) {
  const int n = 300;
  double acc = 0.0, acc2 = 0.0;
  for (int r = 0; r < n; ++r) {
    const double c = static_cast<double>(count_roots_sphere_m2(homogenize(sample_system(2, 4, 7000 + r))).count);
    acc += c;
    acc2 += c * c;
  }
  const double mean = acc / n, se = std::sqrt((acc2 / n - mean * mean) / n);
  EXPECT_NEAR(mean, 4.0, 3.5 * se);
}

TEST(RootLocator, SubsetCountsPartitionTheCircle) {
  const auto h = homogenize(sample_system(1, 60, 21));
  const auto all = count_roots_circle(h);
  long total = 0;
  for (int k = 0; k < 4; ++k) total += count_in_subset(h, Arc{k * std::numbers::pi / 2 + std::numbers::pi / 4, std::numbers::pi / 4}).sphere_count;
  EXPECT_EQ(total, all.sphere_count);
}

TEST(RootLocator, ScanConfigValidation) {
  ScanConfig cfg;
  cfg.oversample = 2;
  EXPECT_THROW(cfg.validate(), PreconditionError);
  EXPECT_THROW(count_roots_companion(sample_system(1, 600, 1)), PreconditionError);
}
