#include <gtest/gtest.h>

#include "kss/experiment.hpp"

using namespace kss;

TEST(Stats, SummaryMoments) {
  const auto s = summarize({1, 2, 3, 4, 5});
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_DOUBLE_EQ(s.variance, 2.5);
  EXPECT_NEAR(s.skewness, 0.0, 1e-15);
  EXPECT_NEAR(s.excess_kurtosis, -1.3, 1e-12);
}

TEST(Stats, KolmogorovTail) {
  EXPECT_NEAR(kolmogorov_sf(1.0), 0.26999967167735456, 1e-12);
  EXPECT_NEAR(kolmogorov_sf(0.5), 0.96394524366487511, 1e-12);
  EXPECT_NEAR(kolmogorov_sf(1.36), 0.049485876755377884, 1e-12);
  EXPECT_DOUBLE_EQ(kolmogorov_sf(0.0), 1.0);
}

TEST(Stats, NormalSelfTestAndPower) {
  NormalStream rng(1, 2, 3);
  std::vector<double> x(10000);
  for (double& v : x) v = rng.normal();
  const auto ok = normality_suite(x, 1.0);
  EXPECT_GT(ok.ks.p_value, 1e-3);
  EXPECT_TRUE(ok.pass);
  for (double& v : x) v += 0.2;
  EXPECT_LT(normality_suite(x, 1.0).ks.p_value, 1e-6);
  EXPECT_THROW(normality_suite(std::vector<double>(100, 0.0), 1.0), PreconditionError);
}

TEST(Stats, LatticeJitterRestoresContinuity) {
  // A Gaussian rounded to a lattice fails KS, the jittered version passes.
  NormalStream rng(5, 0, 0);
  const double h = 0.35;
  std::vector<double> x(5000);
  for (double& v : x) v = h * std::round(rng.normal() / h);
  EXPECT_LT(ks_normal(x, 1.0).p_value, 1e-3);
  EXPECT_GT(normality_suite(x, 1.0, h).ks.p_value, 1e-3);
}

TEST(Experiment, ConfigRoundTripAndValidation) {
  ExperimentConfig c;
  c.d = {10, 20};
  c.replicates = 7;
  ExperimentConfig back;
  apply_json(back, to_json(c));
  EXPECT_EQ(back.d, c.d);
  EXPECT_EQ(back.replicates, 7);
  EXPECT_THROW(apply_json(back, json{{"bogus", 1}}), PreconditionError);
  back.replicates = 0;
  EXPECT_THROW(back.validate(), PreconditionError);
}

TEST(Experiment, MonteCarloIsDeterministicAcrossThreadCounts) {
  const auto a = run_monte_carlo(1, 60, 64, 11, {}, 1);
  const auto b = run_monte_carlo(1, 60, 64, 11, {}, 3);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].seed, b.records[i].seed);
    EXPECT_EQ(a.records[i].count, b.records[i].count);
  }
  EXPECT_EQ(a.count_summary.mean, b.count_summary.mean);
}

TEST(Experiment, StandardizationIsCentered) {
  const auto r = run_monte_carlo(1, 100, 2000, 12, {}, 2);
  EXPECT_EQ(r.excluded, 0);
  EXPECT_NEAR(r.standardized_summary.mean, 0.0, 3 * r.standardized_summary.mean_se);
  EXPECT_NEAR((r.counts[0] - 10.0) / std::sqrt(10.0), r.standardized[0], 1e-15);
}

TEST(Experiment, ReplicateCsvHeader) {
  const auto r = run_monte_carlo(1, 20, 5, 1, {}, 1);
  const auto path = std::filesystem::temp_directory_path() / "kss_replicates_test.csv";
  write_replicates_csv(path, {&r});
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "seed,d,m,count,certified,residual_max,wall_time_ms");
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 5);
}
