#include <gtest/gtest.h>

#include "kss/sphere_partition.hpp"

using namespace kss;

TEST(Partition, HypersphericalRoundTrip) {
  const std::vector<double> th = {0.7, 2.1, 5.5};
  const auto x = hyperspherical_to_cartesian(th);
  EXPECT_NEAR(x.norm(), 1.0, 1e-15);
  const auto back = cartesian_to_hyperspherical(x);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(back[k], th[k], 1e-13);
}

TEST(Partition, GeodesicDistanceIsAccurateNearAndFar) {
  const Eigen::Vector3d a(1, 0, 0);
  const Eigen::Vector3d b(std::cos(1e-9), std::sin(1e-9), 0);
  EXPECT_NEAR(geodesic_distance(a, b), 1e-9, 1e-22);
  EXPECT_NEAR(geodesic_distance(a, -a), std::numbers::pi, 1e-15);
  EXPECT_NEAR(geodesic_distance(a, Eigen::Vector3d(0, 1, 0)), std::numbers::pi / 2, 1e-15);
}

TEST(Partition, TangentBasisIsOrthonormalAndTangent) {
  const std::vector<double> c = {1.1, 0.4, 2.0};
  const auto x = hyperspherical_to_cartesian(c);
  const auto b = tangent_basis(c);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(b[i].dot(x), 0.0, 1e-14);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(b[i].dot(b[j]), i == j ? 1.0 : 0.0, 1e-14);
  }
}

TEST(Partition, ChartRejectsPointsOutsideUnitBall) {
  EXPECT_THROW(cap_chart(Eigen::Vector2d(0.8, 0.8)), PreconditionError);
  EXPECT_NEAR(cap_chart(Eigen::Vector2d(0.3, 0.4)).norm(), 1.0, 1e-15);
  EXPECT_NEAR(cap_chart_jacobian(Eigen::Vector2d(0.0, 0.0)), 1.0, 1e-15);
}

TEST(Partition, Preconditions) {
  EXPECT_THROW(build_partition(2, 100, 0.6), PreconditionError);  // alpha >= 1/m
  EXPECT_THROW(build_partition(2, 3, 0.4), PreconditionError);    // r > rbar/2
  EXPECT_THROW(build_partition(5, 100, 0.1), PreconditionError);
}

TEST(Partition, CirclePartitionIsExact) {
  const auto p = build_partition(1, 400, 0.4);
  double total = 0.0;
  for (const auto& r : p.rectangles) total += r.radii[0];
  EXPECT_NEAR(total, 2 * std::numbers::pi, 1e-12);
  EXPECT_NEAR(p.exceptional_volume, 0.0, 1e-12);
}

TEST(Partition, VolumesAndCoverageAgree) {
  const auto p = build_partition(2, 1000, default_alpha(2));
  double vol = 0.0;
  for (const auto& r : p.rectangles) vol += rectangle_volume(r);
  EXPECT_NEAR(vol + p.exceptional_volume, 4 * std::numbers::pi, 1e-9);
  const auto cov = coverage_check(p, 40000, 5);
  EXPECT_EQ(cov.multiply_covered, 0);
  EXPECT_NEAR(cov.mc_exceptional_volume, p.exceptional_volume, 4 * cov.mc_standard_error);
}

TEST(Partition, LocateAgreesWithMembership) {
  const auto p = build_partition(2, 400, default_alpha(2));
  NormalStream rng(3, 0, 0);
  for (int i = 0; i < 2000; ++i) {
    const auto x = uniform_sphere_point(2, rng);
    const auto idx = p.locate(x);
    if (idx) {
      EXPECT_TRUE(in_rectangle(p.rectangles[*idx], x));
    }
  }
}

TEST(Partition, ThreeSphereBuilds) {
  const auto p = build_partition(3, 400, default_alpha(3));
  double vol = 0.0;
  for (const auto& r : p.rectangles) vol += rectangle_volume(r);
  EXPECT_NEAR(vol + p.exceptional_volume, kappa(3), 1e-8);
  EXPECT_EQ(static_cast<long>(p.rectangles.size()), count_rectangles(3, 400, default_alpha(3)));
}

TEST(Partition, CountScalesLinearlyInDegree) {
  const double c2 = static_cast<double>(count_rectangles(2, 1000, 0.4)) / 1000;
  const double c3 = static_cast<double>(count_rectangles(2, 10000, 0.4)) / 10000;
  EXPECT_LT(std::max(c2, c3), 2 * std::min(c2, c3));
}

TEST(Partition, NeighborsTouch) {
  const auto p = build_partition(2, 1000, default_alpha(2));
  const auto rep = neighbor_separation(p, 200, 4, PairSampling::near);
  EXPECT_GT(rep.neighbor_pairs_checked, 0);
  EXPECT_LT(rep.max_neighbor_distance, 1e-8);
}

TEST(Partition, RectangleDiameterIsOrderR) {
  const auto p = build_partition(2, 1000, default_alpha(2));
  for (auto i : sample_rectangles(p, 20, 2)) EXPECT_LT(rectangle_diameter(p.rectangles[i]), 2.0 * p.r);
}

TEST(Partition, ProjectionApproachesUnitSquare) {
  double prev = 1e9;
  for (int d : {100, 1000, 10000}) {
    const auto p = build_partition(2, d, default_alpha(2));
    double worst = 0.0;
    for (auto i : sample_rectangles(p, 30, 6)) worst = std::max(worst, project_and_rescale(p.rectangles[i], p.r).hausdorff);
    EXPECT_LT(worst, prev);
    prev = worst;
  }
  EXPECT_LT(prev, 0.05);
}
