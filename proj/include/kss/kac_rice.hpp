#pragma once

// One- and two-point Kac-Rice intensities of the KSS field on S^m and the
// resulting variance of the number of affine roots.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "kss/covariance.hpp"
#include "kss/errors.hpp"
#include "kss/quadrature.hpp"
#include "kss/rng.hpp"

namespace kss {

enum class IntensityMethod { closed_form, gauss_mc };

inline const char* to_string(IntensityMethod m) { return m == IntensityMethod::closed_form ? "closed_form" : "gauss_mc"; }

struct IntensityResult {
  double value = 0.0;
  double mc_error = 0.0;
  IntensityMethod method = IntensityMethod::closed_form;
};

// E N_P = d^{m/2}; the sphere count has twice that mean.
inline double expected_count(int m, int d) {
  require(m >= 1 && d >= 2, "expected_count: need m >= 1, d >= 2");
  return std::pow(static_cast<double>(d), m / 2.0);
}
inline double expected_sphere_count(int m, int d) { return 2.0 * expected_count(m, d); }

// E|det G| for an m x m standard Gaussian matrix: product of chi means.
inline double mean_abs_det_exact(int m) {
  double v = 1.0;
  for (int k = 1; k <= m; ++k) v *= std::sqrt(2.0) * std::exp(std::lgamma((k + 1) / 2.0) - std::lgamma(k / 2.0));
  return v;
}

// E|xi eta| for centered normals with common variance v and correlation rho.
inline double mean_abs_product(double v, double rho) {
  rho = std::clamp(rho, -1.0, 1.0);
  return v * (2.0 / std::numbers::pi) * (std::sqrt(1.0 - rho * rho) + rho * std::asin(rho));
}

// Common-random-number sampler for E|det M_s det M_t| where, per equation l
// and column k, (M_s(l,k), M_t(l,k)) is a centered pair with variances
// B11(k,k) and covariance B12(k,k). The same normals serve every angle.
class DetPairSampler {
 public:
  DetPairSampler(int m, long n, std::uint64_t seed) : m_(m), n_(n), z_(static_cast<std::size_t>(n) * 2 * m * m) {
    require(m >= 1 && n >= 2, "DetPairSampler: need m >= 1 and n >= 2");
    NormalStream rng(seed, 0xDE7u, static_cast<std::uint32_t>(m));
    for (auto& x : z_) x = rng.normal();
  }

  int m() const { return m_; }
  long size() const { return n_; }

  // Returns (mean, standard error) of |det M_s det M_t|.
  std::pair<double, double> mean_abs_det_product(double sigma2, double rho, double D) const {
    const int m = m_;
    const double s0 = std::sqrt(std::max(sigma2, 0.0));
    const double r0 = std::clamp(rho, -1.0, 1.0), c0 = std::sqrt(1.0 - r0 * r0);
    const double rd = std::clamp(D, -1.0, 1.0), cd = std::sqrt(1.0 - rd * rd);
    Eigen::MatrixXd ms(m, m), mt(m, m);
    double sum = 0.0, sum2 = 0.0;
    const double* z = z_.data();
    for (long i = 0; i < n_; ++i) {
      for (int l = 0; l < m; ++l)
        for (int k = 0; k < m; ++k) {
          const double xi = *z++, eta = *z++;
          if (k == 0) {
            ms(l, k) = s0 * xi;
            mt(l, k) = s0 * (r0 * xi + c0 * eta);
          } else {
            ms(l, k) = xi;
            mt(l, k) = rd * xi + cd * eta;
          }
        }
      const double v = std::abs(ms.determinant() * mt.determinant());
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / n_;
    const double var = std::max(0.0, sum2 / n_ - mean * mean);
    return {mean, std::sqrt(var / (n_ - 1))};
  }

 private:
  int m_;
  long n_;
  std::vector<double> z_;
};

// H_d(1,0,0,0) = (E|det G|)^2 (2 pi)^{-m}.
inline IntensityResult h_independent(int m, long n_mc = 1000000, std::uint64_t seed = 0x1D) {
  require(m >= 1, "h_independent: m must be >= 1");
  const double norm = std::pow(2.0 * std::numbers::pi, -m);
  if (m == 1) return {(2.0 / std::numbers::pi) * norm, 0.0, IntensityResult{}.method};
  NormalStream rng(seed, 0x1DEu, static_cast<std::uint32_t>(m));
  Eigen::MatrixXd g(m, m);
  double sum = 0.0, sum2 = 0.0;
  for (long i = 0; i < n_mc; ++i) {
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) g(a, b) = rng.normal();
    const double v = std::abs(g.determinant());
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n_mc;
  const double se = std::sqrt(std::max(0.0, sum2 / n_mc - mean * mean) / (n_mc - 1));
  return {mean * mean * norm, 2.0 * mean * se * norm, IntensityMethod::gauss_mc};
}

// Two-point function H_d at angle theta, from a precomputed profile.
inline IntensityResult h_from_profile(const CovarianceProfile& p, int m, const DetPairSampler* sampler) {
  if (p.degenerate) throw DegenerateAngleError("h_function: regression blocks undefined at theta=" + std::to_string(p.theta));
  const double pre = std::pow(2.0 * std::numbers::pi, -m) * std::pow(p.one_minus_c2, -m / 2.0);
  if (m == 1) return {pre * mean_abs_product(p.sigma2, p.rho), 0.0, IntensityMethod::closed_form};
  require(sampler != nullptr && sampler->m() == m, "h_function: need a determinant sampler for m >= 2");
  const auto [mean, se] = sampler->mean_abs_det_product(p.sigma2, p.rho, p.D);
  return {pre * mean, pre * se, IntensityMethod::gauss_mc};
}

inline IntensityResult h_function(double theta, int d, int m, long n_mc = 20000, std::uint64_t seed = 0xC0DE) {
  const auto p = profile(theta, d);
  if (m == 1) return h_from_profile(p, 1, nullptr);
  const DetPairSampler sampler(m, n_mc, seed);
  return h_from_profile(p, m, &sampler);
}

struct IntegrandNode {
  double z = 0.0;
  double h = 0.0;         // H_d at theta = z / sqrt(d)
  double h_error = 0.0;
  double integrand = 0.0;  // d^{(m-1)/2} sin^{m-1}(z/sqrt d) (H_d - H_0)
};

struct VarianceEstimate {
  int d = 0, m = 0;
  double variance_over_dm2 = 0.0;  // Var(N_P) / d^{m/2}
  double mc_error = 0.0;
  int quadrature_nodes = 0;
  double z_max = 0.0;
  double h_independent = 0.0;
  double refinement_change = 0.0;  // relative change when nodes are doubled
  std::vector<IntegrandNode> table;
};

struct QuadratureConfig {
  int nodes = 128;
  double z_max = 10.0;
  long n_mc = 20000;  // m >= 2 only
  std::uint64_t seed = 0xC0DE;
  bool check_refinement = true;
};

namespace detail {

// Integral over [0, z_hi] of the scaled variance integrand with `nodes` Gauss points.
inline double variance_integral(int d, int m, double z_hi, int nodes, double h0, const DetPairSampler* sampler,
                                std::vector<IntegrandNode>* table, double* err2) {
  const int panels = std::max(1, nodes / 16);
  const QuadratureRule rule = composite_gauss(0.0, z_hi, panels, 16);
  const double sqd = std::sqrt(static_cast<double>(d));
  const double scale = std::pow(static_cast<double>(d), (m - 1) / 2.0);
  auto node_value = [&](double z, double* se) {
    const auto p = profile(z / sqd, d);
    const auto h = h_from_profile(p, m, sampler);
    const double w = scale * std::pow(std::sin(z / sqd), m - 1);
    if (se) *se = w * h.mc_error;
    return IntegrandNode{z, h.value, h.mc_error, w * (h.value - h0)};
  };
  constexpr double kGuard = 1e-3;
  double acc = 0.0, e2 = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double z = rule.nodes[i];
    IntegrandNode nd;
    double se = 0.0;
    if (z < kGuard) {
      // Linear extrapolation from z = 1e-3 and 2e-3, where sigma2 and rho are well defined.
      const auto a = node_value(kGuard, nullptr), b = node_value(2 * kGuard, nullptr);
      nd = a;
      nd.z = z;
      nd.integrand = a.integrand + (z - kGuard) / kGuard * (b.integrand - a.integrand);
    } else {
      nd = node_value(z, &se);
    }
    acc += rule.weights[i] * nd.integrand;
    e2 += rule.weights[i] * rule.weights[i] * se * se;
    if (table) table->push_back(nd);
  }
  if (err2) *err2 = e2;
  return acc;
}

}  // namespace detail

// Var(N_P)/d^{m/2} = 1 + (kappa_m kappa_{m-1}/2) d^{(m-1)/2}
//                    * int_0^{Zmax} sin^{m-1}(z/sqrt d) [H_d - H_0] dz.
// The leading 1 is E N_P / d^{m/2}: counting affine roots means counting
// sphere zeros in one open hemisphere, so the antipodal partner of a zero
// never enters the pair integral. (On the full sphere that partner adds a
// second diagonal term; the exact values 2 - sqrt(2) at d = 2 and
// 4p(1-p)/sqrt(3), p = (sqrt(3)-1)/2, at d = 3 pin this down.)
// For m >= 2 the same normals are used at every node and for H_0.
inline VarianceEstimate variance_quadrature(int d, int m, const QuadratureConfig& cfg = {}) {
  require(m >= 1 && d >= 2, "variance_quadrature: need m >= 1, d >= 2");
  require(cfg.nodes >= 16, "variance_quadrature: need at least 16 nodes");
  const double zcap = std::sqrt(static_cast<double>(d)) * std::numbers::pi / 2.0;
  require(cfg.z_max > 0.0 && cfg.z_max <= zcap + 1e-12, "variance_quadrature: Z_max must lie in (0, sqrt(d) pi/2]");
  std::unique_ptr<DetPairSampler> sampler;
  double h0 = h_independent(1).value;
  if (m >= 2) {
    sampler = std::make_unique<DetPairSampler>(m, cfg.n_mc, cfg.seed);
    const auto [mean, se] = sampler->mean_abs_det_product(1.0, 0.0, 0.0);
    (void)se;
    h0 = std::pow(2.0 * std::numbers::pi, -m) * mean;
  }
  const double k = kappa(m) * kappa(m - 1) / 2.0;
  VarianceEstimate est;
  est.d = d;
  est.m = m;
  est.quadrature_nodes = cfg.nodes;
  est.z_max = cfg.z_max;
  est.h_independent = h0;
  double e2 = 0.0;
  const double integral = detail::variance_integral(d, m, cfg.z_max, cfg.nodes, h0, sampler.get(), &est.table, &e2);
  est.variance_over_dm2 = 1.0 + k * integral;
  est.mc_error = k * std::sqrt(e2);
  if (cfg.check_refinement) {
    const double fine = 1.0 + k * detail::variance_integral(d, m, cfg.z_max, 2 * cfg.nodes, h0, sampler.get(), nullptr, nullptr);
    est.refinement_change = std::abs(fine - est.variance_over_dm2) / std::abs(fine);
    if (est.refinement_change > 0.01)
      throw RefinementError("variance_quadrature: node doubling changed the result by " +
                            std::to_string(100 * est.refinement_change) + "%");
  }
  return est;
}

struct VInfinityReport {
  int m = 0;
  std::vector<VarianceEstimate> sequence;
  std::vector<double> relative_differences;  // between consecutive d
  double estimate = 0.0;
  bool converging = false;  // last relative difference below 1%
};

inline VInfinityReport v_infinity(int m, const std::vector<int>& d_sequence, const QuadratureConfig& cfg = {}) {
  require(d_sequence.size() >= 2, "v_infinity: need at least two degrees");
  for (std::size_t i = 1; i < d_sequence.size(); ++i)
    require(d_sequence[i] > d_sequence[i - 1], "v_infinity: degrees must increase");
  VInfinityReport rep;
  rep.m = m;
  for (int d : d_sequence) {
    QuadratureConfig c = cfg;
    c.z_max = std::min(cfg.z_max, std::sqrt(static_cast<double>(d)) * std::numbers::pi / 2.0);
    rep.sequence.push_back(variance_quadrature(d, m, c));
  }
  for (std::size_t i = 1; i < rep.sequence.size(); ++i) {
    const double a = rep.sequence[i - 1].variance_over_dm2, b = rep.sequence[i].variance_over_dm2;
    rep.relative_differences.push_back(std::abs(b - a) / std::abs(b));
  }
  rep.estimate = rep.sequence.back().variance_over_dm2;
  rep.converging = rep.relative_differences.back() < 0.01 && std::isfinite(rep.estimate) && rep.estimate > 0.0;
  return rep;
}

struct DominationReport {
  double fitted_constant = 0.0;  // max |H - H_0| / (1 - sigma2 + |C| + |rho| + |D|)
  double worst_theta = 0.0;
  int grid_points = 0;
};

inline DominationReport domination_constant(int d, int m, int grid = 200, long n_mc = 20000) {
  DominationReport rep;
  rep.grid_points = grid;
  std::unique_ptr<DetPairSampler> sampler;
  double h0 = h_independent(1).value;
  if (m >= 2) {
    sampler = std::make_unique<DetPairSampler>(m, n_mc, 0xD0);
    h0 = std::pow(2.0 * std::numbers::pi, -m) * sampler->mean_abs_det_product(1.0, 0.0, 0.0).first;
  }
  for (int i = 1; i <= grid; ++i) {
    const double th = (std::numbers::pi / 2.0) * i / (grid + 1.0);
    const auto p = profile(th, d);
    if (p.degenerate) continue;
    const double h = h_from_profile(p, m, sampler.get()).value;
    const double denom = 1.0 - p.sigma2 + std::abs(p.C) + std::abs(p.rho) + std::abs(p.D);
    const double ratio = std::abs(h - h0) / denom;
    if (ratio > rep.fitted_constant) {
      rep.fitted_constant = ratio;
      rep.worst_theta = th;
    }
  }
  return rep;
}

}  // namespace kss
