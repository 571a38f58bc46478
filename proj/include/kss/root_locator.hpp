#pragma once

// Real-root counting for KSS systems.
//
// m = 1: the restriction F(th) = Y(cos th, sin th) is a trigonometric
// polynomial of degree d. Its Fourier coefficients (exact from one FFT of
// N > 2d samples) bound |F''| by M2 = sum |c_k| k^2. On a cell of width h a
// sign-preserving derivative with |F'(a)| + |F'(b)| > M2 h proves
// monotonicity, and two concave quadratic minorants prove nonvanishing;
// anything else is bisected. Every cell of [0, pi) ends up certified or
// flagged.
//
// m = 2: heuristic Newton from a Fibonacci grid on S^2 with deduplication.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <unsupported/Eigen/FFT>
#include <vector>

#include "kss/errors.hpp"
#include "kss/kss_model.hpp"
#include "kss/sphere_partition.hpp"

namespace kss {

struct ScanConfig {
  int oversample = 64;
  int refine_depth = 60;
  double newton_tol = 1e-10;
  double dedup_radius = 0.25;

  void validate() const {
    require(oversample >= 8, "ScanConfig: oversample must be >= 8");
    require(refine_depth >= 1, "ScanConfig: refine_depth must be >= 1");
    require(newton_tol > 0.0, "ScanConfig: newton_tol must be positive");
    require(dedup_radius > 0.0 && dedup_radius < 0.5, "ScanConfig: dedup_radius must lie in (0, 0.5)");
  }
};

enum class CountMethod { circle_scan, companion, sphere_newton };

inline const char* to_string(CountMethod m) {
  switch (m) {
    case CountMethod::circle_scan: return "circle_scan";
    case CountMethod::companion: return "companion";
    case CountMethod::sphere_newton: return "sphere_newton";
  }
  return "?";
}

struct RootCount {
  long count = 0;         // affine real roots
  long sphere_count = 0;  // zeros of Y on S^m
  CountMethod method = CountMethod::circle_scan;
  bool certified = true;
  double residual_max = 0.0;
  long uncertified_cells = 0;
  bool deflated = false;  // companion: leading coefficient numerically zero
  std::vector<Eigen::VectorXd> sphere_roots;
};

namespace detail {

inline int next_pow2(long n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

struct CircleScanner {
  const CircleEvaluator& f;
  const ScanConfig& cfg;
  double m2 = 0.0;
  long uncertified = 0;
  std::vector<double> roots;
  double residual = 0.0;

  static constexpr double kSlack = 1.0 + 1e-9;

  // Safeguarded Newton inside a bracket [a, b] on which F is monotone.
  double refine(double a, double b, double fa) {
    double lo = a, hi = b, flo = fa;
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
      const auto [fx, dfx] = f.value_and_derivative(x);
      if (fx == 0.0) return x;
      if ((fx < 0) == (flo < 0)) {
        lo = x;
        flo = fx;
      } else {
        hi = x;
      }
      double next = dfx != 0.0 ? x - fx / dfx : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - x) < 1e-15) return next;
      x = next;
    }
    return 0.5 * (lo + hi);
  }

  void add_root(double x) {
    roots.push_back(x);
    residual = std::max(residual, std::abs(f.value(x)));
  }

  bool nonvanishing(double h, double fa, double da, double fb, double db) const {
    if (fa * fb <= 0.0) return false;
    const double s = fa > 0 ? 1.0 : -1.0;
    fa *= s; da *= s; fb *= s; db *= s;
    const double k = 0.5 * m2 * kSlack;
    auto q1 = [&](double t) { return fa + da * t - k * t * t; };
    auto q2 = [&](double t) { const double u = h - t; return fb - db * u - k * u * u; };
    auto lower = [&](double t) { return std::max(q1(t), q2(t)); };
    double worst = std::min(lower(0.0), lower(h));
    const double c0 = fa - fb + db * h + k * h * h;
    const double c1 = da - db - 2.0 * k * h;
    if (c1 != 0.0) {
      const double t = -c0 / c1;
      if (t > 0.0 && t < h) worst = std::min(worst, lower(t));
    }
    return worst > 0.0;
  }

  void cell(double a, double b, double fa, double da, double fb, double db, int depth) {
    const double h = b - a;
    if (fa == 0.0) {
      add_root(a);
      if (da * db > 0.0 && std::abs(da) + std::abs(db) > m2 * h * kSlack) return;
    } else {
      if (da * db > 0.0 && std::abs(da) + std::abs(db) > m2 * h * kSlack) {
        if (fa * fb < 0.0) add_root(refine(a, b, fa));
        return;
      }
      if (nonvanishing(h, fa, da, fb, db)) return;
    }
    if (depth >= cfg.refine_depth) {
      ++uncertified;
      if (fa * fb < 0.0) add_root(0.5 * (a + b));
      return;
    }
    const double mid = 0.5 * (a + b);
    const auto [fm, dm] = f.value_and_derivative(mid);
    cell(a, mid, fa, da, fm, dm, depth + 1);
    cell(mid, b, fm, dm, fb, db, depth + 1);
  }
};

}  // namespace detail

// Zeros of th -> F(th) on [0, pi); the full-circle count is twice that.
inline RootCount scan_circle(const CircleEvaluator& f, const ScanConfig& cfg = {}) {
  cfg.validate();
  const int d = f.degree();
  const long want = std::max<long>(2L * d + 2, static_cast<long>(std::ceil(2.0 * cfg.oversample * std::sqrt(d))));
  const int n = std::max(64, detail::next_pow2(want));
  const int half = n / 2;
  std::vector<double> vals(n), ders(half + 1);
  for (int i = 0; i <= half; ++i) {
    const auto [v, dv] = f.value_and_derivative(std::numbers::pi * i / half);
    if (i < half) vals[i] = v;
    ders[i] = dv;
  }
  const double parity = (d & 1) ? -1.0 : 1.0;
  for (int i = 0; i < half; ++i) vals[i + half] = parity * vals[i];
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, vals);
  double m2 = 0.0;
  for (int k = 1; k <= std::min(d, half); ++k) {
    const double kk = static_cast<double>(k) * k;
    m2 += kk * (std::abs(spec[k]) + std::abs(spec[n - k])) / n;
  }
  detail::CircleScanner sc{f, cfg, m2 * (1.0 + 1e-9) + 1e-300, 0, {}, 0.0};
  const double h = std::numbers::pi / half;
  for (int i = 0; i < half; ++i) {
    const double fb = i + 1 < half ? vals[i + 1] : parity * vals[0];
    sc.cell(i * h, (i + 1) * h, vals[i], ders[i], fb, ders[i + 1], 0);
  }
  RootCount rc;
  rc.method = CountMethod::circle_scan;
  rc.uncertified_cells = sc.uncertified;
  rc.certified = sc.uncertified == 0;
  rc.residual_max = sc.residual;
  rc.sphere_count = 2 * static_cast<long>(sc.roots.size());
  for (double th : sc.roots) {
    if (std::abs(std::cos(th)) >= 1e-12) ++rc.count;
    Eigen::VectorXd p(2);
    p << std::cos(th), std::sin(th);
    rc.sphere_roots.push_back(p);
    rc.sphere_roots.push_back(-p);
  }
  return rc;
}

inline RootCount count_roots_circle(const HomogeneousSystem& sys, const ScanConfig& cfg = {}) {
  require(sys.m == 1, "count_roots_circle: requires m = 1");
  return scan_circle(CircleEvaluator(sys), cfg);
}

namespace detail {

// Parlett-Reinsch diagonal balancing by powers of two.
inline void balance(Eigen::MatrixXd& a) {
  const double radix = 2.0, sqrdx = radix * radix;
  const Eigen::Index n = a.rows();
  bool done = false;
  while (!done) {
    done = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = a.row(i).cwiseAbs().sum() - std::abs(a(i, i));
      const double c = a.col(i).cwiseAbs().sum() - std::abs(a(i, i));
      if (r == 0.0 || c == 0.0) continue;
      double g = r / radix, f = 1.0, cc = c;
      const double s = c + r;
      while (cc < g) {
        f *= radix;
        cc *= sqrdx;
      }
      g = r * radix;
      while (cc > g) {
        f /= radix;
        cc /= sqrdx;
      }
      if ((cc + r) / f < 0.95 * s) {
        done = false;
        a.row(i) /= f;
        a.col(i) *= f;
      }
    }
  }
}

}  // namespace detail

// Real roots of P(t) = sum_j a_j t^j from the eigenvalues of the balanced companion matrix.
inline RootCount count_roots_companion(const KssSystem& sys) {
  require(sys.m == 1, "count_roots_companion: requires m = 1");
  require(sys.d <= 512, "count_roots_companion: d must be <= 512");
  const int d = sys.d;
  std::vector<double> g(d + 1);
  double gmax = 0.0;
  for (int j = 0; j <= d; ++j) {
    g[j] = sys.coeffs[0][j] * std::exp(-0.5 * sys.table->log_variance[j]);
    gmax = std::max(gmax, std::abs(g[j]));
  }
  RootCount rc;
  rc.method = CountMethod::companion;
  int n = d;
  while (n > 0 && std::abs(g[n]) <= 1e-14 * gmax) --n;
  rc.deflated = n < d;
  if (n == 0) return rc;
  const double lead = sys.coeffs[0][n];
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) c(i, i - 1) = 1.0;
  for (int i = 0; i < n; ++i) c(i, n - 1) = -sys.coeffs[0][i] / lead;
  detail::balance(c);
  Eigen::EigenSolver<Eigen::MatrixXd> es(c, false);
  if (es.info() != Eigen::Success) throw NumericalError("count_roots_companion: eigenvalue iteration failed");
  const CircleEvaluator circle(homogenize(sys));
  for (const auto& lam : es.eigenvalues())
    if (std::abs(lam.imag()) <= 1e-8 * (1.0 + std::abs(lam))) {
      ++rc.count;
      rc.residual_max = std::max(rc.residual_max, std::abs(circle.value(std::atan2(lam.real(), 1.0))));
    }
  rc.sphere_count = 2 * rc.count;
  return rc;
}

namespace detail {

// Points of the spherical Fibonacci lattice with n points.
inline std::vector<Eigen::Vector3d> fibonacci_sphere(long n) {
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (long i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double rad = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    pts.emplace_back(z, rad * std::cos(phi), rad * std::sin(phi));
  }
  return pts;
}

inline void tangent_pair(const Eigen::Vector3d& p, Eigen::Vector3d& e1, Eigen::Vector3d& e2) {
  Eigen::Index axis;
  p.cwiseAbs().minCoeff(&axis);
  Eigen::Vector3d a = Eigen::Vector3d::Zero();
  a(axis) = 1.0;
  e1 = (a - a.dot(p) * p).normalized();
  e2 = p.cross(e1);
}

}  // namespace detail

inline RootCount count_roots_sphere_m2(const HomogeneousSystem& sys, const ScanConfig& cfg = {}) {
  require(sys.m == 2, "count_roots_sphere_m2: requires m = 2");
  require(sys.d <= 16, "count_roots_sphere_m2: d must be <= 16");
  cfg.validate();
  const double sqd = std::sqrt(static_cast<double>(sys.d));
  const double spacing = 0.25 / sqd;
  const long n_seeds = static_cast<long>(std::ceil(4.0 * std::numbers::pi / (spacing * spacing)));
  const double radius = cfg.dedup_radius / sqd;
  const double max_step = 1.0 / sqd;
  RootCount rc;
  rc.method = CountMethod::sphere_newton;
  std::vector<Eigen::Vector3d> found;
  for (const auto& seed : detail::fibonacci_sphere(n_seeds)) {
    Eigen::Vector3d p = seed;
    bool converged = false;
    double res = INFINITY;
    for (int it = 0; it < 50; ++it) {
      const auto y = evaluate(sys, std::span<const double>(p.data(), 3));
      res = std::max(std::abs(y[0]), std::abs(y[1]));
      if (res < cfg.newton_tol) {
        converged = true;
        break;
      }
      const Eigen::MatrixXd g = euclidean_gradient(sys, std::span<const double>(p.data(), 3));
      Eigen::Vector3d e1, e2;
      detail::tangent_pair(p, e1, e2);
      Eigen::Matrix2d j;
      j << g.row(0).dot(e1), g.row(0).dot(e2), g.row(1).dot(e1), g.row(1).dot(e2);
      const double det = j.determinant();
      if (!std::isfinite(det) || std::abs(det) < 1e-300) break;
      Eigen::Vector2d u = j.partialPivLu().solve(Eigen::Vector2d(-y[0], -y[1]));
      if (u.norm() > max_step) u *= max_step / u.norm();
      p = (p + u(0) * e1 + u(1) * e2).normalized();
    }
    if (!converged) continue;
    bool dup = false;
    for (const auto& q : found)
      if (geodesic_distance(p, q) < radius) {
        dup = true;
        break;
      }
    if (dup) continue;
    found.push_back(p);
    rc.residual_max = std::max(rc.residual_max, res);
  }
  rc.sphere_count = static_cast<long>(found.size());
  if (rc.sphere_count % 2 != 0)
    throw SymmetryViolation("count_roots_sphere_m2: odd sphere count " + std::to_string(rc.sphere_count));
  long finite = 0;
  for (const auto& q : found) {
    if (std::abs(q(0)) >= 1e-12) ++finite;
    rc.sphere_roots.emplace_back(q);
  }
  rc.count = finite / 2;
  rc.certified = false;
  return rc;
}

// Roots of Y on S^m lying in a region.
inline RootCount count_in_subset(const HomogeneousSystem& sys, const Region& region, const ScanConfig& cfg = {}) {
  RootCount all = sys.m == 1 ? count_roots_circle(sys, cfg) : count_roots_sphere_m2(sys, cfg);
  RootCount out = all;
  out.sphere_roots.clear();
  out.sphere_count = 0;
  out.count = 0;
  for (const auto& p : all.sphere_roots)
    if (in_region(region, p)) {
      out.sphere_roots.push_back(p);
      ++out.sphere_count;
    }
  out.count = out.sphere_count;  // on a subset the count is of sphere zeros
  return out;
}

}  // namespace kss
