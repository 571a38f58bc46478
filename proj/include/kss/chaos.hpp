#pragma once

// Hermite (Wiener chaos) decomposition of the Kac-Rice counting functional.
//
// The integrand delta(Y) |det Ybar'| is expanded in products of
// probabilists' Hermite polynomials of Z = (Y_l, Ybar'_{lk}):
//   c_gamma = b_alpha f_beta,  gamma = (alpha, beta), alpha in N^m, beta in N^{m x m}.
// Cross moments between Z(s) and Z(t) follow from Mehler's formula, which
// reduces to a sum over nonnegative integer matrices with fixed margins.

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "kss/covariance.hpp"
#include "kss/errors.hpp"
#include "kss/kac_rice.hpp"
#include "kss/kss_model.hpp"
#include "kss/multi_index.hpp"
#include "kss/quadrature.hpp"
#include "kss/rng.hpp"

namespace kss {

inline double hermite_eval(int n, double x) {
  require(n >= 0, "hermite_eval: n must be >= 0");
  if (n == 0) return 1.0;
  double h0 = 1.0, h1 = x;
  for (int k = 1; k < n; ++k) {
    const double h2 = x * h1 - k * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

// H_0(x) .. H_n(x)
inline std::vector<double> hermite_all(int n, double x) {
  std::vector<double> h(n + 1);
  h[0] = 1.0;
  if (n >= 1) h[1] = x;
  for (int k = 1; k < n; ++k) h[k + 1] = x * h[k] - k * h[k - 1];
  return h;
}

// b_alpha = prod_j b_{alpha_j}, b_{2i} = (2 pi)^{-1/2} (-1/2)^i / i!, zero for odd entries.
inline double b_coeff(const MultiIndex& alpha) {
  double v = 1.0;
  for (int a : alpha) {
    require(a >= 0, "b_coeff: negative index");
    if (a % 2) return 0.0;
    const int i = a / 2;
    v *= std::pow(-0.5, i) * std::exp(-log_factorial(i)) / std::sqrt(2.0 * std::numbers::pi);
  }
  return v;
}

// f_n = E[|Z| H_n(Z)] / n! for one standard normal Z.
inline double f_coeff_scalar(int n) {
  require(n >= 0, "f_coeff_scalar: n must be >= 0");
  const double phi0 = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  if (n % 2) return 0.0;
  if (n == 0) return 2.0 * phi0;
  return 2.0 * phi0 * (hermite_eval(n, 0.0) + n * hermite_eval(n - 2, 0.0)) * std::exp(-log_factorial(n));
}

struct CoefficientEstimate {
  double value = 0.0;
  double error = 0.0;
};

// Row-major m x m multi-indices beta with |beta| <= q_max.
inline std::vector<MultiIndex> enumerate_beta(int m, int q_max) {
  std::vector<MultiIndex> out;
  for (int q = 0; q <= q_max; ++q)
    for (auto& b : enumerate_exact_degree(m * m, q)) out.push_back(std::move(b));
  return out;
}

// Parity rule: |det| is invariant under negating any row or column of the
// matrix argument, so f_beta vanishes unless every row and column sum of beta is even.
inline bool beta_is_even(const MultiIndex& beta, int m) {
  for (int l = 0; l < m; ++l) {
    int row = 0, col = 0;
    for (int k = 0; k < m; ++k) {
      row += beta[l * m + k];
      col += beta[k * m + l];
    }
    if (row % 2 || col % 2) return false;
  }
  return true;
}

struct ChaosCoefficients {
  int m = 0;
  int q_max = 0;
  long n_mc = 0;  // 0 when closed forms were used
  std::uint64_t seed = 0;
  std::map<MultiIndex, double> b;
  std::map<MultiIndex, CoefficientEstimate> f;      // as estimated
  std::map<MultiIndex, CoefficientEstimate> f_raw;  // Monte Carlo before the parity rule
  double f_norm2 = 0.0;                             // ||f||^2 = E[det(G)^2] = m!

  double f_value(const MultiIndex& beta) const {
    const auto it = f.find(beta);
    return it == f.end() ? 0.0 : it->second.value;
  }

  // c_gamma, gamma = alpha (m entries) followed by beta (m*m entries).
  double c(const MultiIndex& gamma) const {
    const MultiIndex alpha(gamma.begin(), gamma.begin() + m), beta(gamma.begin() + m, gamma.end());
    return b_coeff(alpha) * f_value(beta);
  }
};

// Monte Carlo estimates of f_beta = E[|det G| H_beta(G)] / beta! with one
// batch of Gaussian matrices shared by every beta.
inline std::map<MultiIndex, CoefficientEstimate> f_coeff_mc(int m, int q_max, long n_mc, std::uint64_t seed) {
  require(m >= 1 && q_max >= 0 && n_mc >= 2, "f_coeff_mc: invalid arguments");
  const auto betas = enumerate_beta(m, q_max);
  std::vector<double> sum(betas.size(), 0.0), sum2(betas.size(), 0.0);
  NormalStream rng(seed, 0xF0Fu, static_cast<std::uint32_t>(m));
  Eigen::MatrixXd g(m, m);
  std::vector<std::vector<double>> herm(m * m);
  for (long i = 0; i < n_mc; ++i) {
    for (int e = 0; e < m * m; ++e) {
      g(e / m, e % m) = rng.normal();
      herm[e] = hermite_all(q_max, g(e / m, e % m));
    }
    const double ad = std::abs(g.determinant());
    for (std::size_t t = 0; t < betas.size(); ++t) {
      double v = ad;
      for (int e = 0; e < m * m; ++e) v *= herm[e][betas[t][e]];
      sum[t] += v;
      sum2[t] += v * v;
    }
  }
  std::map<MultiIndex, CoefficientEstimate> out;
  for (std::size_t t = 0; t < betas.size(); ++t) {
    const double fact = index_factorial(betas[t]);
    const double mean = sum[t] / n_mc;
    const double se = std::sqrt(std::max(0.0, sum2[t] / n_mc - mean * mean) / (n_mc - 1));
    out[betas[t]] = {mean / fact, se / fact};
  }
  return out;
}

// Coefficient tables. m = 1 uses the closed form for f; m >= 2 uses Monte
// Carlo and then applies the parity rule exactly.
inline ChaosCoefficients build_coefficients(int m, int q_max, long n_mc = 1000000, std::uint64_t seed = 0xC4A05) {
  require(m >= 1 && q_max >= 0, "build_coefficients: invalid arguments");
  ChaosCoefficients cc;
  cc.m = m;
  cc.q_max = q_max;
  cc.seed = seed;
  double mfact = 1.0;
  for (int k = 2; k <= m; ++k) mfact *= k;
  cc.f_norm2 = mfact;
  for (int q = 0; q <= q_max; ++q)
    for (const auto& a : enumerate_exact_degree(m, q)) cc.b[a] = b_coeff(a);
  if (m == 1) {
    for (int n = 0; n <= q_max; ++n) cc.f[{n}] = {f_coeff_scalar(n), 0.0};
    cc.f_raw = cc.f;
    return cc;
  }
  cc.n_mc = n_mc;
  cc.f_raw = f_coeff_mc(m, q_max, n_mc, seed);
  for (const auto& [beta, est] : cc.f_raw) cc.f[beta] = beta_is_even(beta, m) ? est : CoefficientEstimate{0.0, est.error};
  return cc;
}

namespace detail {

inline constexpr int kMehlerMaxDegree = 12;

inline std::uint64_t factorial_exact(int n) { return factorial_u64(n); }

}  // namespace detail

// E[H_gamma(X) H_gamma'(Y)] for standard Gaussian vectors X, Y with
// Cov(X_i, Y_j) = R(i, j):
//   sum over N >= 0 with row sums gamma and column sums gamma' of
//   prod gamma_i! prod gamma'_j! / prod N_ij!  *  prod R_ij^{N_ij}.
// The combinatorial factor is formed in exact 64-bit integer arithmetic.
inline double mehler_expectation(const MultiIndex& gamma, const MultiIndex& gamma_p, const Eigen::MatrixXd& R) {
  const int n1 = static_cast<int>(gamma.size()), n2 = static_cast<int>(gamma_p.size());
  require(R.rows() == n1 && R.cols() == n2, "mehler_expectation: R has the wrong shape");
  const int q = degree(gamma);
  if (q != degree(gamma_p)) return 0.0;
  if (q > detail::kMehlerMaxDegree) throw BudgetError("mehler_expectation: degree exceeds the combinatorial budget");
  std::uint64_t margins = 1;
  for (int a : gamma) margins *= detail::factorial_exact(a);
  std::vector<int> row(gamma), col(gamma_p);
  double total = 0.0;
  // Cells are visited row-major; the last cell of each row is forced by the row sum.
  auto rec = [&](auto&& self, int i, int j, std::uint64_t denom, double weight) -> void {
    if (i == n1) {
      for (int c : col)
        if (c != 0) return;
      // margins * prod gamma'_j! / prod N_ij!: the row part divides exactly.
      double prod_col = 1.0;
      for (int c : gamma_p) prod_col *= static_cast<double>(detail::factorial_exact(c));
      total += static_cast<double>(margins / denom) * prod_col * weight;
      return;
    }
    if (j == n2 - 1) {
      const int nij = row[i];
      if (nij > col[j]) return;
      if (nij > 0 && R(i, j) == 0.0) return;
      col[j] -= nij;
      const int saved = row[i];
      row[i] = 0;
      self(self, i + 1, 0, denom * detail::factorial_exact(nij), weight * std::pow(R(i, j), nij));
      row[i] = saved;
      col[j] += nij;
      return;
    }
    const int hi = std::min(row[i], col[j]);
    for (int nij = 0; nij <= hi; ++nij) {
      if (nij > 0 && R(i, j) == 0.0) break;
      row[i] -= nij;
      col[j] -= nij;
      self(self, i, j + 1, denom * detail::factorial_exact(nij), weight * std::pow(R(i, j), nij));
      row[i] += nij;
      col[j] += nij;
    }
  };
  rec(rec, 0, 0, 1, 1.0);
  return total;
}

// Multi-indices gamma = (alpha, beta) with |gamma| = q and c_gamma != 0.
inline std::vector<std::pair<MultiIndex, double>> active_gammas(const ChaosCoefficients& cc, int q) {
  std::vector<std::pair<MultiIndex, double>> out;
  const int m = cc.m;
  for (const auto& gamma : enumerate_exact_degree(m + m * m, q)) {
    const double c = cc.c(gamma);
    if (c != 0.0) out.emplace_back(gamma, c);
  }
  return out;
}

namespace detail {

// Z ordering used by the chaos code: (Y_1..Y_m, Ybar'_{11}, Ybar'_{12}, ..., Ybar'_{mm}).
// Per equation l the cross-covariance couples (Y_l, Ybar'_{l1}) through
// [[C, A], [-A, B]] and Ybar'_{lk}, k >= 2, through D on the diagonal.
inline double per_equation_moment(const MultiIndex& g, const MultiIndex& gp, int m, int l, const CovarianceProfile& p) {
  const int ya = g[l], yb = gp[l];
  const int da = g[m + l * m], db = gp[m + l * m];
  Eigen::Matrix2d r;
  r << p.C, p.A, -p.A, p.B;
  double v = mehler_expectation({ya, da}, {yb, db}, r);
  if (v == 0.0) return 0.0;
  for (int k = 1; k < m; ++k) {
    const int a = g[m + l * m + k], b = gp[m + l * m + k];
    if (a != b) return 0.0;
    v *= index_factorial({a}) * std::pow(p.D, a);
  }
  return v;
}

}  // namespace detail

// Full cross-covariance R(theta) in the chaos ordering.
inline Eigen::MatrixXd chaos_cross_covariance(const CovarianceProfile& p, int m) {
  const int n = m + m * m;
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
  for (int l = 0; l < m; ++l) {
    const int y = l, d1 = m + l * m;
    r(y, y) = p.C;
    r(y, d1) = p.A;
    r(d1, y) = -p.A;
    r(d1, d1) = p.B;
    for (int k = 1; k < m; ++k) r(d1 + k, d1 + k) = p.D;
  }
  return r;
}

// H_{q,d}(theta) = E[G_q(Z(s)) G_q(Z(t))] using the per-equation factorization.
inline double H_qd_from_profile(const CovarianceProfile& p, const ChaosCoefficients& cc, int q) {
  if (q % 2) return 0.0;
  const int m = cc.m;
  const auto act = active_gammas(cc, q);
  double total = 0.0;
  for (const auto& [g, cg] : act)
    for (const auto& [gp, cgp] : act) {
      double v = cg * cgp;
      for (int l = 0; l < m && v != 0.0; ++l) v *= detail::per_equation_moment(g, gp, m, l, p);
      total += v;
    }
  return total;
}

inline double H_qd(double theta, int d, const ChaosCoefficients& cc, int q) {
  require(q <= cc.q_max, "H_qd: q exceeds q_max of the coefficient table");
  return H_qd_from_profile(profile(theta, d), cc, q);
}

// Same quantity through the unfactorized Mehler sum over the full R; used as a cross-check.
inline double H_qd_unfactorized(double theta, int d, const ChaosCoefficients& cc, int q) {
  const auto p = profile(theta, d);
  const Eigen::MatrixXd r = chaos_cross_covariance(p, cc.m);
  const auto act = active_gammas(cc, q);
  double total = 0.0;
  for (const auto& [g, cg] : act)
    for (const auto& [gp, cgp] : act) total += cg * cgp * mehler_expectation(g, gp, r);
  return total;
}

// G_q(z) = sum_{|gamma| = q} c_gamma H_gamma(z), z in the chaos ordering.
inline double G_q(const std::vector<std::pair<MultiIndex, double>>& active, const std::vector<double>& z) {
  double total = 0.0;
  for (const auto& [g, c] : active) {
    double v = c;
    for (std::size_t i = 0; i < z.size(); ++i) v *= hermite_eval(g[i], z[i]);
    total += v;
  }
  return total;
}

// ||G_q||^2 = sum_{|alpha| + |beta| = q} b_alpha^2 alpha! f_beta^2 beta!
inline double g_norm2(const ChaosCoefficients& cc, int q) {
  double total = 0.0;
  for (const auto& [g, c] : active_gammas(cc, q)) total += c * c * index_factorial(g);
  return total;
}

struct GNormCheck {
  int q = 0;
  double g_norm2 = 0.0;
  double f_norm2 = 0.0;
  bool holds = false;
};

inline GNormCheck g_norm_bound_check(const ChaosCoefficients& cc, int q) {
  GNormCheck r{q, g_norm2(cc, q), cc.f_norm2, false};
  r.holds = r.g_norm2 <= r.f_norm2;
  return r;
}

// Var(I_q) = (kappa_m kappa_{m-1}/2) d^{(m-1)/2} int_0^{Zmax} sin^{m-1}(z/sqrt d) H_{q,d} dz,
// the variance of the q-th chaos of (N_Y - 2 d^{m/2}) / (2 d^{m/4}).
inline double chaos_variance(int q, int d, const ChaosCoefficients& cc, const QuadratureConfig& cfg = {}) {
  require(q >= 1 && q <= cc.q_max, "chaos_variance: need 1 <= q <= q_max");
  if (q % 2) return 0.0;
  const int m = cc.m;
  const double sqd = std::sqrt(static_cast<double>(d));
  const double z_hi = std::min(cfg.z_max, sqd * std::numbers::pi / 2.0);
  const double scale = std::pow(static_cast<double>(d), (m - 1) / 2.0);
  auto integral = [&](int nodes) {
    const QuadratureRule rule = composite_gauss(0.0, z_hi, std::max(1, nodes / 16), 16);
    return integrate(rule, [&](double z) {
      return scale * std::pow(std::sin(z / sqd), m - 1) * H_qd_from_profile(profile(z / sqd, d), cc, q);
    });
  };
  const double k = kappa(m) * kappa(m - 1) / 2.0;
  const double v = k * integral(cfg.nodes);
  if (cfg.check_refinement) {
    const double fine = k * integral(2 * cfg.nodes);
    if (std::abs(fine - v) > 0.01 * std::abs(fine) + 1e-14)
      throw RefinementError("chaos_variance: node doubling changed the result by more than 1%");
  }
  return v;
}

// sum_{q >= Q} of the off-diagonal Arcones bound:
//   (kappa_m kappa_{m-1}/2) ||f||^2 sum_{q >= Q} r0^{q-1} int_a^inf z^{m-1}(1+z) e^{-alpha z^2} dz.
inline double arcones_tail_bound(int Q, int m, double a, double r0, double alpha = 0.2, double f_norm2 = -1.0) {
  require(r0 >= 0.0 && r0 < 1.0, "arcones_tail_bound: r0 must lie in [0, 1)");
  require(Q >= 1 && a >= 0.0 && alpha > 0.0, "arcones_tail_bound: invalid arguments");
  if (f_norm2 < 0) {
    f_norm2 = 1.0;
    for (int k = 2; k <= m; ++k) f_norm2 *= k;
  }
  // int_a^inf z^k e^{-alpha z^2} dz = Gamma((k+1)/2, alpha a^2) / (2 alpha^{(k+1)/2})
  auto moment = [&](int k) {
    const double s = (k + 1) / 2.0;
    return boost::math::tgamma(s, alpha * a * a) / (2.0 * std::pow(alpha, s));
  };
  const double spatial = moment(m - 1) + moment(m);
  const double geometric = std::pow(r0, Q - 1) / (1.0 - r0);
  return kappa(m) * kappa(m - 1) / 2.0 * f_norm2 * geometric * spatial;
}

enum class ContractionNormalization { standardized, raw };

// d^{m/3} int_0^{pi/2} sin^{m-1}(theta) |r^{(k)}| d theta. The standardized
// version uses the covariances of the unit-variance vector Z (|C|, |A|, |B|
// for k = 0, 1, 2); the raw version uses x^d, d x^{d-1}, d(d-1) x^{d-2} at x = cos theta.
inline double contraction_integral(int k, int d, int m,
                                   ContractionNormalization norm = ContractionNormalization::standardized) {
  require(k >= 0 && k <= 2, "contraction_integral: k must be 0, 1 or 2");
  require(d >= 2 && m >= 1, "contraction_integral: need d >= 2, m >= 1");
  const double sqd = std::sqrt(static_cast<double>(d));
  const double z_hi = std::min(sqd * std::numbers::pi / 2.0, 40.0);
  const QuadratureRule rule = composite_gauss(0.0, z_hi, 256, 16);
  const double dd = d;
  const double val = integrate(rule, [&](double z) {
    const double th = z / sqd;
    const double w = std::pow(std::sin(th), m - 1);
    if (norm == ContractionNormalization::standardized) {
      const auto p = profile(th, d);
      const double r = k == 0 ? p.C : (k == 1 ? p.A : p.B);
      return w * std::abs(r);
    }
    const double lc = std::log(std::cos(th));
    const double r = k == 0 ? std::exp(dd * lc) : (k == 1 ? dd * std::exp((dd - 1) * lc) : dd * (dd - 1) * std::exp((dd - 2) * lc));
    return w * r;
  });
  return std::pow(dd, m / 3.0) * val / sqd;
}

// Monte Carlo E[G_q(Z(s)) G_q(Z(t))] for m = 1 from n standardized KSS
// coefficient draws, s = e_0, t = (cos theta, sin theta).
struct MehlerMcResult {
  double mean = 0.0;
  double se = 0.0;
};

inline std::vector<MehlerMcResult> mehler_mc_m1(const std::vector<double>& thetas, int d, const ChaosCoefficients& cc, int q,
                                                long n, std::uint64_t seed) {
  require(cc.m == 1, "mehler_mc_m1: requires m = 1");
  const auto act = active_gammas(cc, q);
  std::vector<double> sum(thetas.size(), 0.0), sum2(thetas.size(), 0.0);
  std::vector<double> g(d + 1);
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j <= d; ++j) g[j] = normal_at(seed, 0, static_cast<std::uint64_t>(i) * (d + 1) + j, 0x3E);
    const CircleEvaluator f(d, g);
    // At s = e_0: Y = g_0 and Ybar'_1 = dY/dtheta / sqrt(d) = g_1.
    const double gs = G_q(act, {g[0], g[1]});
    for (std::size_t t = 0; t < thetas.size(); ++t) {
      const auto [y, dy] = f.value_and_derivative(thetas[t]);
      const double v = gs * G_q(act, {y, dy / std::sqrt(static_cast<double>(d))});
      sum[t] += v;
      sum2[t] += v * v;
    }
  }
  std::vector<MehlerMcResult> out;
  for (std::size_t t = 0; t < thetas.size(); ++t) {
    const double mean = sum[t] / n;
    out.push_back({mean, std::sqrt(std::max(0.0, sum2[t] / n - mean * mean) / (n - 1))});
  }
  return out;
}

}  // namespace kss
