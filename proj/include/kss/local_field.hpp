#pragma once

// Local scaling limit of the KSS field near the pole e_0.
//
// The rescaled field Y_d(u) = Y(phi^{-1}(u / sqrt d)) uses the orthogonal
// projection chart phi^{-1}(x) = (sqrt(1 - |x|^2), x). Its covariance tends to
// the Bargmann-Fock kernel exp(-|u - v|^2 / 2) at rate O(1/d).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "kss/covariance.hpp"
#include "kss/errors.hpp"
#include "kss/kss_model.hpp"
#include "kss/quadrature.hpp"
#include "kss/rng.hpp"
#include "kss/sphere_partition.hpp"

namespace kss {

inline double local_covariance(const Eigen::VectorXd& u, const Eigen::VectorXd& v, int d) {
  require(u.size() == v.size() && u.size() >= 1, "local_covariance: dimension mismatch");
  require(d >= 1, "local_covariance: d must be >= 1");
  const double sqd = std::sqrt(static_cast<double>(d));
  const Eigen::VectorXd p = cap_chart(u / sqd), q = cap_chart(v / sqd);
  const double ip = p.dot(q);
  if (ip <= 0.0) return std::pow(ip, d);
  return std::exp(d * std::log(ip));
}

struct LimitCovariance {
  Eigen::VectorXd u, v;
  double value = 0.0;
  Eigen::MatrixXd hessian;  // second derivatives of Gamma(. , v) at u
};

inline LimitCovariance limit_covariance(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  require(u.size() == v.size(), "limit_covariance: dimension mismatch");
  LimitCovariance r;
  r.u = u;
  r.v = v;
  const Eigen::VectorXd w = u - v;
  r.value = std::exp(-0.5 * w.squaredNorm());
  // diagonal e^{-|w|^2/2} H_2(w_i), off-diagonal e^{-|w|^2/2} H_1(w_i) H_1(w_j)
  r.hessian = r.value * (w * w.transpose() - Eigen::MatrixXd::Identity(w.size(), w.size()));
  return r;
}

inline double gamma_kernel(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  return std::exp(-0.5 * (u - v).squaredNorm());
}

struct GridSpec {
  int m = 1;
  double length = 1.0;  // box [-L/2, L/2]^m
  int points_per_axis = 11;

  double spacing() const { return points_per_axis > 1 ? length / (points_per_axis - 1) : 0.0; }

  void validate(int d = 0) const {
    require(m >= 1 && m <= 3, "GridSpec: m must be 1, 2 or 3");
    require(length > 0.0 && points_per_axis >= 2, "GridSpec: need a positive box and at least two points per axis");
    if (d > 0) {
      // the whole box must map inside the chart domain |x| < 1
      const double corner = 0.5 * length * std::sqrt(static_cast<double>(m));
      require(corner / std::sqrt(static_cast<double>(d)) < 1.0, "GridSpec: box leaves the chart domain");
    }
  }

  std::vector<Eigen::VectorXd> points() const {
    validate();
    std::vector<Eigen::VectorXd> out;
    long total = 1;
    for (int k = 0; k < m; ++k) total *= points_per_axis;
    for (long i = 0; i < total; ++i) {
      Eigen::VectorXd u(m);
      long rest = i;
      for (int k = m - 1; k >= 0; --k) {
        u(k) = -0.5 * length + spacing() * static_cast<double>(rest % points_per_axis);
        rest /= points_per_axis;
      }
      out.push_back(u);
    }
    return out;
  }
};

inline Eigen::MatrixXd gamma_gram(const std::vector<Eigen::VectorXd>& pts) {
  const int n = static_cast<int>(pts.size());
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) g(i, j) = g(j, i) = gamma_kernel(pts[i], pts[j]);
  return g;
}

struct FieldSamples {
  std::vector<Eigen::VectorXd> points;
  int m = 1;  // number of independent coordinates per draw
  // values[draw](coordinate, point)
  std::vector<Eigen::MatrixXd> values;
  double min_eigenvalue = 0.0;
  bool jitter_applied = false;
};

// Draws of the R^m-valued limit field on the grid. The Gram matrix is factored
// as V diag(sqrt(lambda)) so near-singular grids are handled without pivoting.
inline FieldSamples sample_limit_field(const GridSpec& grid, std::uint64_t seed, int n_fields) {
  grid.validate();
  require(n_fields >= 1, "sample_limit_field: n_fields must be >= 1");
  FieldSamples out;
  out.points = grid.points();
  out.m = grid.m;
  Eigen::MatrixXd g = gamma_gram(out.points);
  const int n = static_cast<int>(g.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  out.min_eigenvalue = es.eigenvalues().minCoeff();
  if (out.min_eigenvalue < -1e-10) {
    g.diagonal().array() += 1e-10;
    es.compute(g);
    out.jitter_applied = true;
    if (es.eigenvalues().minCoeff() < -1e-10)
      throw NumericalError("sample_limit_field: Gram matrix is not PSD after jitter");
  }
  const Eigen::MatrixXd factor = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  out.values.reserve(n_fields);
  Eigen::VectorXd xi(n);
  for (int r = 0; r < n_fields; ++r) {
    Eigen::MatrixXd vals(grid.m, n);
    for (int l = 0; l < grid.m; ++l) {
      for (int i = 0; i < n; ++i)
        xi(i) = normal_at(seed, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(l) * n + i, 0x1F);
      vals.row(l) = (factor * xi).transpose();
    }
    out.values.push_back(std::move(vals));
  }
  return out;
}

struct FieldCovarianceCheck {
  double max_z_cov = 0.0;        // max |emp - Gamma| / SE over point pairs
  double max_z_variance = 0.0;   // max |emp var - 1| / SE over points
  double max_z_cross = 0.0;      // max |emp cross-coordinate cov| / SE
  double max_abs_error = 0.0;
  long comparisons = 0;
};

// Empirical second moments of the draws against Gamma. The z-scores use the
// Gaussian product variance Var(XY) = 1 + Gamma^2.
inline FieldCovarianceCheck field_covariance_check(const FieldSamples& s) {
  FieldCovarianceCheck r;
  const int n = static_cast<int>(s.points.size());
  const double nf = static_cast<double>(s.values.size());
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const double gam = gamma_kernel(s.points[i], s.points[j]);
      for (int l = 0; l < s.m; ++l) {
        double acc = 0.0;
        for (const auto& v : s.values) acc += v(l, i) * v(l, j);
        const double emp = acc / nf;
        const double se = std::sqrt((1.0 + gam * gam) / nf);
        const double z = std::abs(emp - gam) / se;
        r.max_abs_error = std::max(r.max_abs_error, std::abs(emp - gam));
        if (i == j) r.max_z_variance = std::max(r.max_z_variance, z);
        r.max_z_cov = std::max(r.max_z_cov, z);
        ++r.comparisons;
      }
      for (int l = 0; l < s.m; ++l)
        for (int k = l + 1; k < s.m; ++k) {
          double acc = 0.0;
          for (const auto& v : s.values) acc += v(l, i) * v(k, j);
          r.max_z_cross = std::max(r.max_z_cross, std::abs(acc / nf) / std::sqrt(1.0 / nf));
        }
    }
  return r;
}

struct IntegrabilityReport {
  int m = 1;
  double delta = 0.0;
  double value = 0.0;
  double refined_value = 0.0;
  double refinement_rel = 0.0;
  double small_radius_slope = 0.0;  // log-log slope of |Gamma''(u) - Gamma''(0)| near 0
};

// |Gamma''(u) - Gamma''(0)| depends on |u| only; evaluated along the first axis.
inline double hessian_deviation(int m, double r) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m), zero = Eigen::VectorXd::Zero(m);
  u(0) = r;
  const Eigen::MatrixXd diff = limit_covariance(u, zero).hessian - limit_covariance(zero, zero).hessian;
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(diff, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();
}

// int_{B(0, delta)} |Gamma''(u) - Gamma''(0)| / |u|^m du in polar coordinates:
// |S^{m-1}| int_0^delta g(r) / r dr.
inline IntegrabilityReport integrability_check(double delta, int m = 1, int nodes = 64) {
  require(delta > 0.0 && delta <= 1.0, "integrability_check: delta must lie in (0, 1]");
  require(m >= 1, "integrability_check: m must be >= 1");
  IntegrabilityReport rep;
  rep.m = m;
  rep.delta = delta;
  const double area = kappa(m - 1);
  auto radial = [&](int n) {
    return area * integrate(composite_gauss(0.0, delta, std::max(1, n / 16), 16),
                            [&](double r) { return hessian_deviation(m, r) / r; });
  };
  rep.value = radial(nodes);
  rep.refined_value = radial(2 * nodes);
  rep.refinement_rel = std::abs(rep.refined_value - rep.value) / std::abs(rep.refined_value);
  const double r1 = 1e-3, r2 = 1e-2;
  rep.small_radius_slope = std::log(hessian_deviation(m, r2) / hessian_deviation(m, r1)) / std::log(r2 / r1);
  return rep;
}

// Sup over the 5^m x 5^m pairs of the grid {-1, -1/2, 0, 1/2, 1}^m.
inline double local_covariance_sup_error(int d, int m) {
  const GridSpec g{m, 2.0, 5};
  const auto pts = g.points();
  double sup = 0.0;
  for (const auto& u : pts)
    for (const auto& v : pts) sup = std::max(sup, std::abs(local_covariance(u, v, d) - gamma_kernel(u, v)));
  return sup;
}

struct ConvergenceReport {
  std::vector<int> d;
  std::vector<double> sup_error;
  double slope = 0.0;
};

inline ConvergenceReport local_convergence(int m, const std::vector<int>& ds) {
  require(ds.size() >= 2, "local_convergence: need at least two degrees");
  ConvergenceReport r;
  r.d = ds;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int d : ds) {
    const double e = local_covariance_sup_error(d, m);
    r.sup_error.push_back(e);
    const double x = std::log(static_cast<double>(d)), y = std::log(e);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(ds.size());
  r.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return r;
}

// Bargmann-Fock series field exp(-|u|^2/2) sum_k xi_k u^k / sqrt(k!),
// truncated at total degree `order`; the neglected tail is far below 1e-15 on |u_i| <= 1.
class BargmannFockField {
 public:
  BargmannFockField(int m, int order, std::uint64_t seed, std::uint64_t draw, int coordinate) : m_(m), order_(order) {
    require(m == 1 || m == 2, "BargmannFockField: m must be 1 or 2");
    const int per_axis = order + 1;
    coef_.resize(m == 1 ? per_axis : per_axis * per_axis, 0.0);
    std::uint64_t k = 0;
    for (std::size_t i = 0; i < coef_.size(); ++i) {
      const int a = static_cast<int>(i % per_axis), b = static_cast<int>(i / per_axis);
      if (a + b > order) continue;
      const double xi = normal_at(seed, draw, static_cast<std::uint64_t>(coordinate) * coef_.size() + i, 0xBF);
      coef_[i] = xi * std::exp(-0.5 * (log_factorial(a) + log_factorial(b)));
      ++k;
    }
  }

  // value and gradient at u
  std::pair<double, Eigen::Vector2d> eval(double x, double y = 0.0) const {
    const int per_axis = order_ + 1;
    const double w = std::exp(-0.5 * (x * x + y * y));
    if (m_ == 1) {
      double p = 0.0, dp = 0.0;
      for (int a = order_; a >= 0; --a) {
        dp = dp * x + p;
        p = p * x + coef_[a];
      }
      return {w * p, Eigen::Vector2d(w * (dp - x * p), 0.0)};
    }
    double p = 0.0, px = 0.0, py = 0.0;
    double yb = 1.0, yb_prev = 0.0;
    for (int b = 0; b <= order_; ++b) {
      double q = 0.0, dq = 0.0;
      for (int a = order_ - b; a >= 0; --a) {
        dq = dq * x + q;
        q = q * x + coef_[b * per_axis + a];
      }
      p += yb * q;
      px += yb * dq;
      py += b * yb_prev * q;
      yb_prev = yb;
      yb *= y;
    }
    return {w * p, Eigen::Vector2d(w * (px - x * p), w * (py - y * p))};
  }

 private:
  int m_;
  int order_;
  std::vector<double> coef_;
};

// Sign changes of a scalar function on [lo, hi] at spacing h.
template <class F>
int count_sign_changes(F&& f, double lo, double hi, double h) {
  const int n = std::max(1, static_cast<int>(std::ceil((hi - lo) / h)));
  int count = 0;
  double prev = f(lo);
  for (int i = 1; i <= n; ++i) {
    const double cur = f(lo + (hi - lo) * i / n);
    if ((prev < 0) != (cur < 0)) ++count;
    prev = cur;
  }
  return count;
}

// Zeros of (F_1, F_2) in the box [-1/2, 1/2]^2 by Newton from a seed grid.
inline int count_zeros_m2(const BargmannFockField& f1, const BargmannFockField& f2, double h) {
  std::vector<Eigen::Vector2d> found;
  const int n = static_cast<int>(std::ceil(1.4 / h));
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      Eigen::Vector2d u(-0.7 + 1.4 * i / n, -0.7 + 1.4 * j / n);
      bool ok = false;
      for (int it = 0; it < 40; ++it) {
        const auto [a, ga] = f1.eval(u(0), u(1));
        const auto [b, gb] = f2.eval(u(0), u(1));
        Eigen::Matrix2d jac;
        jac.row(0) = ga.transpose();
        jac.row(1) = gb.transpose();
        const double det = jac.determinant();
        if (std::abs(det) < 1e-14) break;
        Eigen::Vector2d step = jac.inverse() * Eigen::Vector2d(a, b);
        if (step.norm() > h) step *= h / step.norm();
        u -= step;
        if (u.cwiseAbs().maxCoeff() > 1.0) break;
        if (step.norm() < 1e-13) {
          ok = std::abs(a) + std::abs(b) < 1e-10;
          break;
        }
      }
      if (!ok || u.cwiseAbs().maxCoeff() > 0.5) continue;
      bool dup = false;
      for (const auto& v : found)
        if ((v - u).norm() < 1e-7) dup = true;
      if (!dup) found.push_back(u);
    }
  return static_cast<int>(found.size());
}

struct LimitVarianceReport {
  int m = 1;
  int n_fields = 0;
  double spacing = 0.0;
  double mean = 0.0, mean_se = 0.0;
  double variance = 0.0, variance_se = 0.0;
  double expected_mean = 0.0;  // stationary Kac-Rice closed form
  int refinement_disagreements = 0;  // draws whose count changed when the spacing was halved
  bool widened = false;
};

// Monte Carlo law of the zero count of the limit field on [-1/2, 1/2]^m.
inline LimitVarianceReport limit_variance_mc(int m, int n_fields, std::uint64_t seed, double spacing = 0.01) {
  require(m == 1 || m == 2, "limit_variance_mc: m must be 1 or 2");
  require(n_fields >= 2 && spacing > 0.0, "limit_variance_mc: need n_fields >= 2 and positive spacing");
  LimitVarianceReport rep;
  rep.m = m;
  rep.n_fields = n_fields;
  rep.spacing = spacing;
  rep.expected_mean = m == 1 ? 1.0 / std::numbers::pi : 1.0 / (2.0 * std::numbers::pi);
  const int order = 40;
  double s = 0.0, s2 = 0.0, s4 = 0.0;
  std::vector<int> counts(n_fields);
  for (int r = 0; r < n_fields; ++r) {
    int c, c_fine;
    if (m == 1) {
      const BargmannFockField f(1, order, seed, r, 0);
      auto g = [&](double x) { return f.eval(x).first; };
      c = count_sign_changes(g, -0.5, 0.5, spacing);
      c_fine = count_sign_changes(g, -0.5, 0.5, spacing / 2);
    } else {
      const BargmannFockField f1(2, 24, seed, r, 0), f2(2, 24, seed, r, 1);
      // Newton seeds are spaced well above the mean zero separation
      const double h2 = std::max(spacing, 0.1);
      c = count_zeros_m2(f1, f2, h2);
      c_fine = count_zeros_m2(f1, f2, h2 / 2);
    }
    if (c != c_fine) ++rep.refinement_disagreements;
    counts[r] = c_fine;
    s += c_fine;
  }
  const double n = n_fields;
  rep.mean = s / n;
  for (int c : counts) {
    const double dv = c - rep.mean;
    s2 += dv * dv;
    s4 += dv * dv * dv * dv;
  }
  rep.variance = s2 / (n - 1);
  rep.mean_se = std::sqrt(rep.variance / n);
  const double m4 = s4 / n;
  rep.variance_se = std::sqrt(std::max(0.0, (m4 - rep.variance * rep.variance) / n));
  if (rep.refinement_disagreements > 0) {
    rep.widened = true;
    rep.variance_se += rep.refinement_disagreements / n;
  }
  return rep;
}

// Two-point function of the stationary limit field for m = 1 at lag tau.
inline double limit_two_point_m1(double tau) {
  const double e = std::exp(-0.5 * tau * tau);
  const double c = e, a = -tau * e, b = (1.0 - tau * tau) * e;
  const double omc2 = -std::expm1(-tau * tau);
  const double sigma2 = 1.0 - a * a / omc2;
  const double cond = b - a * a * c / omc2;
  const double rho = std::clamp(cond / sigma2, -1.0, 1.0);
  const double prod = 2.0 * sigma2 / std::numbers::pi * (std::sqrt(1.0 - rho * rho) + rho * std::asin(rho));
  return prod / (2.0 * std::numbers::pi * std::sqrt(omc2));
}

// Var N on [-1/2, 1/2] for the m = 1 limit field:
//   1/pi + 2 int_0^1 (1 - tau)(K(tau) - 1/pi^2) d tau.
inline double limit_variance_kac_rice_m1(int nodes = 256) {
  const double k0 = 1.0 / (std::numbers::pi * std::numbers::pi);
  const double tau_min = 1e-3;
  auto integrand = [&](double t) { return (1.0 - t) * (limit_two_point_m1(t) - k0); };
  // below tau_min the integrand is linear in tau to high accuracy
  const double f1 = integrand(tau_min), f2 = integrand(2 * tau_min);
  const double f0 = 2 * f1 - f2;
  const double head = 0.5 * (f0 + f1) * tau_min;
  const double tail = integrate(composite_gauss(tau_min, 1.0, std::max(1, nodes / 16), 16), integrand);
  return 1.0 / std::numbers::pi + 2.0 * (head + tail);
}

// Zeros of u -> Y(phi^{-1}(u / sqrt d)) on [-u_max, u_max] via sign changes.
inline int count_local_field_m1(const CircleEvaluator& f, double u_max, double h) {
  const double sqd = std::sqrt(static_cast<double>(f.degree()));
  require(u_max < sqd, "count_local_field_m1: interval leaves the chart domain");
  return count_sign_changes([&](double u) { return f.value(std::asin(u / sqd)); }, -u_max, u_max, h);
}

}  // namespace kss
