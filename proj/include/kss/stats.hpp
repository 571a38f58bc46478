#pragma once

// Sample summaries and the normality suite used on standardized root counts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "kss/errors.hpp"
#include "kss/rng.hpp"

namespace kss {

struct SampleSummary {
  long n = 0;
  double mean = 0.0, variance = 0.0, sd = 0.0;
  double skewness = 0.0, excess_kurtosis = 0.0;
  double mean_se = 0.0;
  double mean_ci_lo = 0.0, mean_ci_hi = 0.0;
  double variance_se = 0.0;
  double variance_ci_lo = 0.0, variance_ci_hi = 0.0;
};

inline SampleSummary summarize(const std::vector<double>& x) {
  require(x.size() >= 2, "summarize: need at least two observations");
  SampleSummary s;
  s.n = static_cast<long>(x.size());
  const double n = static_cast<double>(s.n);
  double sum = 0.0;
  for (double v : x) sum += v;
  s.mean = sum / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double e = v - s.mean, e2 = e * e;
    m2 += e2;
    m3 += e2 * e;
    m4 += e2 * e2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  s.variance = m2 * n / (n - 1);
  s.sd = std::sqrt(s.variance);
  s.skewness = m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0;
  s.excess_kurtosis = m2 > 0 ? m4 / (m2 * m2) - 3.0 : 0.0;
  s.mean_se = std::sqrt(s.variance / n);
  s.mean_ci_lo = s.mean - 1.96 * s.mean_se;
  s.mean_ci_hi = s.mean + 1.96 * s.mean_se;
  // large-sample standard error of the variance, kurtosis aware
  s.variance_se = std::sqrt(std::max(0.0, (m4 - m2 * m2) / n));
  s.variance_ci_lo = s.variance - 1.96 * s.variance_se;
  s.variance_ci_hi = s.variance + 1.96 * s.variance_se;
  return s;
}

inline double normal_cdf(double x, double variance = 1.0) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance));
}

// P(K > lambda) for the Kolmogorov distribution. The two classical series are
// used on the side where each converges quickly.
inline double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.0) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double t = std::exp(-(2.0 * k - 1) * (2.0 * k - 1) * pi2 / (8.0 * lambda * lambda));
      cdf += t;
      if (t < 1e-17 * cdf) break;
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sf = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double t = std::exp(-2.0 * k * k * lambda * lambda);
    sf += (k % 2 ? 2.0 : -2.0) * t;
    if (t < 1e-18) break;
  }
  return std::clamp(sf, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// One-sample KS against N(0, variance), with Stephens' finite-n scaling.
inline KsResult ks_normal(std::vector<double> x, double variance) {
  require(x.size() >= 2 && variance > 0.0, "ks_normal: need data and a positive variance");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = normal_cdf(x[i], variance);
    dmax = std::max({dmax, (i + 1) / n - f, f - i / n});
  }
  const double sn = std::sqrt(n);
  return {dmax, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * dmax)};
}

struct NormalityVerdict {
  long n = 0;
  double v_hat = 0.0;
  double lattice_spacing = 0.0;
  double ks_variance = 0.0;  // v_hat plus the uniform jitter variance
  KsResult ks;
  double skewness = 0.0, skewness_z = 0.0;
  double excess_kurtosis = 0.0, kurtosis_z = 0.0;
  double ks_threshold = 1e-3;
  double z_threshold = 4.0;
  bool ks_pass = false, moments_pass = false, pass = false;
};

// KS against N(0, V_hat) plus moment z-scores. Counts with fixed parity put
// the standardized statistic on a lattice; a uniform jitter of one lattice
// cell turns it into a continuous variable whose law has variance V_hat + h^2/12.
inline NormalityVerdict normality_suite(const std::vector<double>& samples, double v_hat, double lattice_spacing = 0.0,
                                        std::uint64_t jitter_seed = 0x7177E5) {
  require(samples.size() >= 500, "normality_suite: need at least 500 samples");
  require(v_hat > 0.0, "normality_suite: V_hat must be positive");
  require(lattice_spacing >= 0.0, "normality_suite: lattice spacing must be >= 0");
  NormalityVerdict v;
  v.n = static_cast<long>(samples.size());
  v.v_hat = v_hat;
  v.lattice_spacing = lattice_spacing;
  std::vector<double> x(samples);
  if (lattice_spacing > 0.0) {
    NormalStream rng(jitter_seed, 0x71, 0);
    for (double& e : x) e += lattice_spacing * (rng.uniform() - 0.5);
  }
  v.ks_variance = v_hat + lattice_spacing * lattice_spacing / 12.0;
  v.ks = ks_normal(x, v.ks_variance);
  const auto s = summarize(samples);
  const double n = static_cast<double>(v.n);
  v.skewness = s.skewness;
  v.excess_kurtosis = s.excess_kurtosis;
  v.skewness_z = s.skewness / std::sqrt(6.0 / n);
  v.kurtosis_z = s.excess_kurtosis / std::sqrt(24.0 / n);
  v.ks_pass = v.ks.p_value > v.ks_threshold;
  v.moments_pass = std::abs(v.skewness_z) < v.z_threshold && std::abs(v.kurtosis_z) < v.z_threshold;
  v.pass = v.ks_pass && v.moments_pass;
  return v;
}

}  // namespace kss
