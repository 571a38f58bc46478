#pragma once

// Two-point covariance structure of the KSS field Y_d on S^m, as functions of
// the angle theta between the two points.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>

#include "kss/errors.hpp"

namespace kss {

struct CovarianceProfile {
  double theta = 0.0;
  int d = 0;
  double A = 0.0, B = 0.0, C = 0.0, D = 0.0;
  double sigma2 = std::numeric_limits<double>::quiet_NaN();
  double rho = std::numeric_limits<double>::quiet_NaN();
  double one_minus_c2 = 0.0;  // 1 - C^2, accurate for small theta
  double rho_denominator = 0.0;  // 1 - C^2 - A^2
  bool degenerate = true;  // sigma2 or rho undefined

  double z() const { return theta * std::sqrt(static_cast<double>(d)); }
};

namespace detail {

// 1 - e^{-x}(1+x)
inline double one_minus_exp_times_1px(double x) {
  if (x > 0.5) return 1.0 - std::exp(-x) * (1.0 + x);
  double term = 1.0, sum = 0.0;
  for (int n = 1; n < 60; ++n) {
    term *= -x / n;  // (-x)^n / n!
    if (n >= 2) {
      const double t = (n - 1) * term;
      sum += t;
      if (std::abs(t) < 1e-18 * std::abs(sum)) break;
    }
  }
  return sum;
}

// e^{-x} - 1 + x
inline double expm1_plus_x(double x) {
  if (x > 0.5) return std::expm1(-x) + x;
  double term = 1.0, sum = 0.0;
  for (int n = 1; n < 60; ++n) {
    term *= -x / n;
    if (n >= 2) {
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
  }
  return sum;
}

// t - log(1+t)
inline double t_minus_log1p(double t) {
  if (t > 0.1) return t - std::log1p(t);
  double p = t, sum = 0.0;
  for (int n = 2; n < 60; ++n) {
    p *= -t;  // (-t)^n / (-1)... tracks (-1)^{n+1} t^n
    const double term = -p / n;
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

inline double signed_cos_power(double lc, double sign, int k) {
  if (k == 0) return 1.0;
  const double mag = std::exp(k * lc);
  return (k & 1) ? sign * mag : mag;
}

}  // namespace detail

inline CovarianceProfile profile(double theta, int d) {
  require(d >= 2, "profile: d must be >= 2");
  require(theta >= 0.0 && theta < std::numbers::pi, "profile: theta must lie in [0, pi)");
  CovarianceProfile p;
  p.theta = theta;
  p.d = d;
  const double c = std::cos(theta), s = std::sin(theta);
  // log|cos| via log1p(-sin^2) keeps full relative accuracy near theta = 0 and pi.
  const double lc = std::abs(c) > 0.5 ? 0.5 * std::log1p(-s * s) : std::log(std::abs(c));
  const double sg = c < 0 ? -1.0 : 1.0;
  const double sqd = std::sqrt(static_cast<double>(d));
  p.C = detail::signed_cos_power(lc, sg, d);
  p.D = detail::signed_cos_power(lc, sg, d - 1);
  p.A = -sqd * p.D * s;
  p.B = p.C - (d - 1.0) * detail::signed_cos_power(lc, sg, d - 2) * s * s;

  const double x = -2.0 * d * lc;  // C^2 = e^{-x}
  const double e1 = -std::expm1(-x);
  p.one_minus_c2 = e1;
  if (e1 < 1e-14) return p;

  if (x < 1.0) {
    // Small-angle branch: every cancelling difference is expanded in series.
    const double t = (s * s) / (c * c);
    const double delta = d * detail::t_minus_log1p(t);
    const double ex = std::exp(-x);
    const double num = detail::one_minus_exp_times_1px(x) - ex * delta;  // 1 - C^2 - A^2
    p.rho_denominator = num;
    p.sigma2 = num / e1;
    if (num >= 1e-14) {
      p.rho = p.C * (-detail::expm1_plus_x(x) + t * e1 - delta) / num;
      p.degenerate = false;
    }
  } else {
    const double num = e1 - p.A * p.A;
    p.rho_denominator = num;
    p.sigma2 = num / e1;
    if (num >= 1e-14) {
      p.rho = (p.B * e1 - p.A * p.A * p.C) / num;
      p.degenerate = false;
    }
  }
  return p;
}

// Per-equation cross-covariance Cov(Z(s), Z(t)) with Z = (Y, Ybar'_1..m).
inline Eigen::MatrixXd equation_cross_block(const CovarianceProfile& p, int m) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(m + 1, m + 1);
  r(0, 0) = p.C;
  r(0, 1) = p.A;
  r(1, 0) = -p.A;
  r(1, 1) = p.B;
  for (int k = 2; k <= m; ++k) r(k, k) = p.D;
  return r;
}

// Cross-covariance of the full m(1+m) vectors Z(s), Z(t); equations independent.
inline Eigen::MatrixXd cross_covariance(double theta, int d, int m) {
  const auto p = profile(theta, d);
  const int n = m + 1;
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(m * n, m * n);
  const Eigen::MatrixXd blk = equation_cross_block(p, m);
  for (int l = 0; l < m; ++l) r.block(l * n, l * n, n, n) = blk;
  return r;
}

struct JointCovariance {
  double theta = 0.0;
  int d = 0, m = 0;
  // Per equation: (Y(s), Y(t), Ybar'(s)_1..m, Ybar'(t)_1..m); equations stacked.
  Eigen::MatrixXd matrix;
  double min_eigenvalue = 0.0;
};

inline JointCovariance joint_matrix(double theta, int d, int m) {
  require(m >= 1, "joint_matrix: m must be >= 1");
  const auto p = profile(theta, d);
  const int n = 2 * (m + 1);
  JointCovariance jc{theta, d, m, Eigen::MatrixXd::Identity(m * n, m * n), 0.0};
  for (int l = 0; l < m; ++l) {
    auto blk = jc.matrix.block(l * n, l * n, n, n);
    const int ys = 0, yt = 1, gs = 2, gt = 2 + m;
    blk(ys, yt) = blk(yt, ys) = p.C;
    blk(ys, gt) = blk(gt, ys) = p.A;   // Cov(Y(s), Ybar'_1(t))
    blk(yt, gs) = blk(gs, yt) = -p.A;  // Cov(Y(t), Ybar'_1(s))
    blk(gs, gt) = blk(gt, gs) = p.B;
    for (int k = 1; k < m; ++k) blk(gs + k, gt + k) = blk(gt + k, gs + k) = p.D;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jc.matrix, Eigen::EigenvaluesOnly);
  jc.min_eigenvalue = es.eigenvalues().minCoeff();
  if (jc.min_eigenvalue < -1e-10) throw NumericalError("joint_matrix: covariance is not positive semidefinite");
  return jc;
}

struct RegressionBlocks {
  Eigen::MatrixXd B11, B12;

  // [[B11, B12], [B12^T, B11]]
  Eigen::MatrixXd full() const {
    const auto m = B11.rows();
    Eigen::MatrixXd f(2 * m, 2 * m);
    f << B11, B12, B12.transpose(), B11;
    return f;
  }
};

inline RegressionBlocks regression_blocks_from(const CovarianceProfile& p, int m) {
  if (p.one_minus_c2 <= 1e-14 || p.degenerate)
    throw DegenerateAngleError("regression_blocks: 1 - C^2 too small at this angle");
  RegressionBlocks rb{Eigen::MatrixXd::Identity(m, m), Eigen::MatrixXd::Zero(m, m)};
  rb.B11(0, 0) = p.sigma2;
  rb.B12(0, 0) = p.sigma2 * p.rho;
  for (int k = 1; k < m; ++k) rb.B12(k, k) = p.D;
  return rb;
}

inline RegressionBlocks regression_blocks(double theta, int d, int m) {
  return regression_blocks_from(profile(theta, d), m);
}

struct BoundsReport {
  double z = 0.0;
  bool a_bound = false, b_bound = false, cd_bound = false, sigma_bound = false, rho_bound = false;
  bool all() const { return a_bound && b_bound && cd_bound && sigma_bound && rho_bound; }
};

// The five small-angle decay bounds in the scaled variable z = theta sqrt(d).
inline BoundsReport check_bounds(double z, int d, double alpha, double constant = 10.0) {
  require(alpha > 0.0 && alpha < 0.5, "check_bounds: alpha must lie in (0, 1/2)");
  const double theta = z / std::sqrt(static_cast<double>(d));
  require(z >= 0.0 && theta < std::numbers::pi / 2, "check_bounds: need 0 <= z/sqrt(d) < pi/2");
  const auto p = profile(theta, d);
  const double g = std::exp(-alpha * z * z), g2 = g * g;
  const double tol = 1e-12;
  // At theta = 0 the regression quantities take their limits sigma2 -> 0, rho -> -1.
  const double sigma2 = p.degenerate ? 0.0 : p.sigma2;
  const double rho = p.degenerate ? -1.0 : p.rho;
  BoundsReport r;
  r.z = z;
  r.a_bound = std::abs(p.A) <= z * g + tol;
  r.b_bound = std::abs(p.B) <= (1.0 + z * z) * g + tol;
  r.cd_bound = std::abs(p.C) <= std::abs(p.D) + tol && std::abs(p.D) <= g + tol;
  r.sigma_bound = 1.0 - sigma2 >= -tol && 1.0 - sigma2 <= constant * g2 + tol;
  r.rho_bound = std::abs(rho) <= constant * (1.0 + z * z) * (1.0 + z * z) * g2 + tol;
  return r;
}

// Largest absolute row or column sum of Cov(Z(s), Z(t)), read off joint_matrix.
inline double arcones_psi(double theta, int d, int m) {
  const auto jc = joint_matrix(theta, d, m);
  const int n = 2 * (m + 1);
  std::vector<int> s_idx, t_idx;
  for (int l = 0; l < m; ++l) {
    s_idx.push_back(l * n);
    t_idx.push_back(l * n + 1);
    for (int k = 0; k < m; ++k) {
      s_idx.push_back(l * n + 2 + k);
      t_idx.push_back(l * n + 2 + m + k);
    }
  }
  const auto q = static_cast<Eigen::Index>(s_idx.size());
  Eigen::MatrixXd r(q, q);
  for (Eigen::Index i = 0; i < q; ++i)
    for (Eigen::Index j = 0; j < q; ++j) r(i, j) = jc.matrix(s_idx[i], t_idx[j]);
  const Eigen::MatrixXd a = r.cwiseAbs();
  return std::max(a.rowwise().sum().maxCoeff(), a.colwise().sum().maxCoeff());
}

struct ArconesRadius {
  int d = 0;
  double a = 0.0;   // smallest grid point with sup_{z >= a} f(z) < 1
  double r0 = 0.0;  // sup_{z >= a} f(z)
};

// For f = |C| + |A| (or the full psi when use_matrix_psi), locate the first
// grid point a past which f stays below 1, and the supremum r0 there.
// If `fixed_a` is nonnegative the supremum is taken from that point instead.
inline ArconesRadius arcones_radius(int d, int m, bool use_matrix_psi, double fixed_a = -1.0, double step = 1e-3) {
  const double zmax = std::sqrt(static_cast<double>(d)) * std::numbers::pi / 2.0;
  const double zcut = std::min(zmax * (1.0 - 1e-9), 40.0);
  const int n = static_cast<int>(zcut / step) + 1;
  std::vector<double> z(n), f(n);
  for (int i = 0; i < n; ++i) {
    z[i] = i * step;
    const double th = z[i] / std::sqrt(static_cast<double>(d));
    if (use_matrix_psi) {
      f[i] = arcones_psi(th, d, m);
    } else {
      const auto p = profile(th, d);
      f[i] = std::abs(p.C) + std::abs(p.A);
    }
  }
  std::vector<double> suffix(n);
  suffix[n - 1] = f[n - 1];
  for (int i = n - 2; i >= 0; --i) suffix[i] = std::max(f[i], suffix[i + 1]);
  ArconesRadius out{d, 0.0, 1.0};
  if (fixed_a >= 0.0) {
    const int i = std::min(n - 1, static_cast<int>(std::ceil(fixed_a / step - 1e-9)));
    out.a = fixed_a;
    out.r0 = suffix[i];
    return out;
  }
  for (int i = 0; i < n; ++i)
    if (suffix[i] < 1.0) {
      out.a = z[i];
      out.r0 = suffix[i];
      return out;
    }
  out.a = zcut;
  return out;
}

}  // namespace kss
