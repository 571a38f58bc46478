#pragma once

// KSS random polynomial systems: storage, sampling, homogenization and
// evaluation on the sphere.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "kss/errors.hpp"
#include "kss/multi_index.hpp"
#include "kss/rng.hpp"

namespace kss {

// Affine index table shared by every system with the same (m, d). Ranks are
// positions in the lexicographic enumeration of {j : |j| <= d}.
struct IndexTable {
  int m = 0;
  int d = 0;
  std::vector<MultiIndex> indices;
  std::vector<double> log_variance;  // log Var(a_j) per rank

  static std::shared_ptr<const IndexTable> make(int m, int d) {
    auto t = std::make_shared<IndexTable>();
    t->m = m;
    t->d = d;
    t->indices = enumerate_affine_indices(m, d);
    t->log_variance.reserve(t->indices.size());
    for (const auto& j : t->indices) t->log_variance.push_back(log_multinomial_variance(d, j));
    return t;
  }

  std::size_t size() const { return indices.size(); }
};

struct KssSystem {
  int m = 0;
  int d = 0;
  std::uint64_t seed = 0;
  std::shared_ptr<const IndexTable> table;
  std::vector<std::vector<double>> coeffs;  // coeffs[equation][rank]

  // Builds a system from explicit coefficients given in table order.
  static KssSystem from_coefficients(int m, int d, std::vector<std::vector<double>> coeffs, std::uint64_t seed = 0) {
    require(m >= 1 && d >= 1, "KssSystem: need m >= 1 and d >= 1");
    KssSystem s;
    s.m = m;
    s.d = d;
    s.seed = seed;
    s.table = IndexTable::make(m, d);
    require(static_cast<int>(coeffs.size()) == m, "KssSystem: need one coefficient vector per equation");
    for (const auto& c : coeffs) {
      require(c.size() == s.table->size(), "KssSystem: coefficient vector has wrong length");
      for (double v : c) require(std::isfinite(v), "KssSystem: non-finite coefficient");
    }
    s.coeffs = std::move(coeffs);
    return s;
  }
};

// Homogeneous form: the coefficient of t_0^{d-|j|} t^j equals the affine a_j,
// so the storage is shared with the affine table.
struct HomogeneousSystem {
  int m = 0;
  int d = 0;
  std::shared_ptr<const IndexTable> table;
  std::vector<std::vector<double>> coeffs;

  // Homogeneous exponent (j_0, j_1, ..., j_m) of a rank.
  MultiIndex exponent(std::size_t rank) const {
    const auto& j = table->indices[rank];
    MultiIndex e(m + 1);
    e[0] = d - degree(j);
    for (int k = 0; k < m; ++k) e[k + 1] = j[k];
    return e;
  }
};

class SpherePoint {
 public:
  explicit SpherePoint(Eigen::VectorXd x, double tol = 1e-12) : x_(std::move(x)) {
    require(x_.size() >= 2, "SpherePoint: need at least 2 coordinates");
    require(std::abs(x_.norm() - 1.0) <= tol, "SpherePoint: coordinates are not a unit vector");
  }
  static SpherePoint normalized(const Eigen::VectorXd& x) {
    const double n = x.norm();
    require(n > 0.0, "SpherePoint: zero vector");
    return SpherePoint(x / n);
  }
  const Eigen::VectorXd& coords() const { return x_; }
  int m() const { return static_cast<int>(x_.size()) - 1; }

 private:
  Eigen::VectorXd x_;
};

inline KssSystem sample_system(int m, int d, std::uint64_t seed) {
  require(m >= 1, "sample_system: m must be >= 1");
  require(d >= 1, "sample_system: d must be >= 1");
  KssSystem s;
  s.m = m;
  s.d = d;
  s.seed = seed;
  s.table = IndexTable::make(m, d);
  double max_lv = 0.0;
  for (double lv : s.table->log_variance) max_lv = std::max(max_lv, lv);
  require(0.5 * max_lv < 700.0, "sample_system: coefficient standard deviations overflow double precision");
  s.coeffs.assign(m, std::vector<double>(s.table->size()));
  for (int l = 0; l < m; ++l)
    for (std::size_t r = 0; r < s.table->size(); ++r)
      s.coeffs[l][r] = std::exp(0.5 * s.table->log_variance[r]) * normal_at(seed, static_cast<std::uint32_t>(l), r);
  return s;
}

inline HomogeneousSystem homogenize(const KssSystem& sys) {
  return HomogeneousSystem{sys.m, sys.d, sys.table, sys.coeffs};
}

namespace detail {

// powers[k][e] = x_k^e for e = 0..d
inline std::vector<std::vector<double>> power_table(std::span<const double> x, int d) {
  std::vector<std::vector<double>> p(x.size(), std::vector<double>(d + 1, 1.0));
  for (std::size_t k = 0; k < x.size(); ++k)
    for (int e = 1; e <= d; ++e) p[k][e] = p[k][e - 1] * x[k];
  return p;
}

}  // namespace detail

// P(t) for t in R^m.
inline std::vector<double> eval_affine(const KssSystem& sys, std::span<const double> t) {
  require(static_cast<int>(t.size()) == sys.m, "eval_affine: wrong point dimension");
  const auto pw = detail::power_table(t, sys.d);
  std::vector<double> out(sys.m, 0.0);
  for (std::size_t r = 0; r < sys.table->size(); ++r) {
    const auto& j = sys.table->indices[r];
    double mono = 1.0;
    for (int k = 0; k < sys.m; ++k) mono *= pw[k][j[k]];
    for (int l = 0; l < sys.m; ++l) out[l] += sys.coeffs[l][r] * mono;
  }
  return out;
}

// Y(t) for an arbitrary t in R^{m+1} (no sphere constraint).
inline std::vector<double> evaluate(const HomogeneousSystem& sys, std::span<const double> t) {
  require(static_cast<int>(t.size()) == sys.m + 1, "evaluate: wrong point dimension");
  const auto pw = detail::power_table(t, sys.d);
  std::vector<double> out(sys.m, 0.0);
  for (std::size_t r = 0; r < sys.table->size(); ++r) {
    const auto& j = sys.table->indices[r];
    double mono = pw[0][sys.d - degree(j)];
    for (int k = 0; k < sys.m; ++k) mono *= pw[k + 1][j[k]];
    for (int l = 0; l < sys.m; ++l) out[l] += sys.coeffs[l][r] * mono;
  }
  return out;
}

inline std::vector<double> eval_homogeneous(const HomogeneousSystem& sys, const SpherePoint& t) {
  return evaluate(sys, std::span<const double>(t.coords().data(), t.coords().size()));
}

// Euclidean Jacobian: m x (m+1), row l = grad Y_l(t).
inline Eigen::MatrixXd euclidean_gradient(const HomogeneousSystem& sys, std::span<const double> t) {
  require(static_cast<int>(t.size()) == sys.m + 1, "euclidean_gradient: wrong point dimension");
  const int n = sys.m + 1;
  const auto pw = detail::power_table(t, sys.d);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(sys.m, n);
  std::vector<int> e(n);
  std::vector<double> partial(n);
  for (std::size_t r = 0; r < sys.table->size(); ++r) {
    const auto& j = sys.table->indices[r];
    e[0] = sys.d - degree(j);
    for (int k = 0; k < sys.m; ++k) e[k + 1] = j[k];
    for (int k = 0; k < n; ++k) {
      if (e[k] == 0) {
        partial[k] = 0.0;
        continue;
      }
      double v = e[k] * pw[k][e[k] - 1];
      for (int i = 0; i < n; ++i)
        if (i != k) v *= pw[i][e[i]];
      partial[k] = v;
    }
    for (int l = 0; l < sys.m; ++l)
      for (int k = 0; k < n; ++k) g(l, k) += sys.coeffs[l][r] * partial[k];
  }
  return g;
}

// Standardized spherical Jacobian: entry (l,k) = <grad Y_l(t), basis_k> / sqrt(d).
inline Eigen::MatrixXd eval_gradient_sphere(const HomogeneousSystem& sys, const SpherePoint& t,
                                            const std::vector<Eigen::VectorXd>& basis) {
  require(static_cast<int>(basis.size()) == sys.m, "eval_gradient_sphere: need m basis vectors");
  for (std::size_t a = 0; a < basis.size(); ++a) {
    require(basis[a].size() == sys.m + 1, "eval_gradient_sphere: basis vector has wrong dimension");
    require(std::abs(basis[a].dot(t.coords())) <= 1e-10, "eval_gradient_sphere: basis vector not tangent");
    for (std::size_t b = 0; b < basis.size(); ++b) {
      const double target = a == b ? 1.0 : 0.0;
      require(std::abs(basis[a].dot(basis[b]) - target) <= 1e-10, "eval_gradient_sphere: basis not orthonormal");
    }
  }
  const Eigen::MatrixXd g = euclidean_gradient(sys, std::span<const double>(t.coords().data(), t.coords().size()));
  Eigen::MatrixXd out(sys.m, sys.m);
  for (int l = 0; l < sys.m; ++l)
    for (int k = 0; k < sys.m; ++k) out(l, k) = g.row(l).dot(basis[k]) / std::sqrt(static_cast<double>(sys.d));
  return out;
}

// Orthonormal basis of the tangent space at p (any completion works).
inline std::vector<Eigen::VectorXd> tangent_frame(const Eigen::VectorXd& p) {
  const Eigen::Index n = p.size();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(p);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  std::vector<Eigen::VectorXd> basis;
  for (Eigen::Index k = 1; k < n; ++k) basis.emplace_back(q.col(k));
  return basis;
}

inline double scalar_covariance(const SpherePoint& s, const SpherePoint& t, int d) {
  require(s.coords().size() == t.coords().size(), "scalar_covariance: dimension mismatch");
  return std::pow(s.coords().dot(t.coords()), d);
}

// Fast evaluation of an m = 1 system along the circle (cos th, sin th).
// With g_j = a_j / sqrt(C(d,j)), Y = sum_j g_j w_j(th) where
// w_j = sqrt(C(d,j)) cos^{d-j} sin^j. Only the weights within 1e-18 of the
// largest one are visited, starting from the binomial mode and walking out by
// the ratio recurrence, so no power of tan or large binomial is ever formed.
class CircleEvaluator {
 public:
  explicit CircleEvaluator(const HomogeneousSystem& sys) : d_(sys.d) {
    require(sys.m == 1, "CircleEvaluator: system must have m = 1");
    g_.resize(d_ + 1);
    for (int j = 0; j <= d_; ++j) g_[j] = sys.coeffs[0][j] * std::exp(-0.5 * sys.table->log_variance[j]);
    init_tables();
  }
  CircleEvaluator(int d, std::vector<double> standardized) : d_(d), g_(std::move(standardized)) {
    require(static_cast<int>(g_.size()) == d + 1, "CircleEvaluator: need d+1 coefficients");
    init_tables();
  }

  int degree() const { return d_; }
  const std::vector<double>& standardized() const { return g_; }

  double value(double theta) const {
    double acc = 0.0;
    for_each_weight(d_, std::cos(theta), std::sin(theta), [&](int j, double w) { acc += g_[j] * w; });
    return acc;
  }

  // Returns (Y, dY/dtheta). With v the degree d-1 weights,
  //   S1 = sum_j g_j sqrt(d-j) v_j,  S2 = sum_i g_{i+1} sqrt(i+1) v_i,
  // one has Y = (c S1 + s S2)/sqrt(d) and dY/dth = sqrt(d) (c S2 - s S1),
  // so a single pass over the window gives both.
  std::pair<double, double> value_and_derivative(double theta) const {
    const double c = std::cos(theta), s = std::sin(theta);
    double s1 = 0.0, s2 = 0.0;
    for_each_weight(d_ - 1, c, s, [&](int i, double v) {
      s1 += g_[i] * sqrt_[d_ - i] * v;
      s2 += g_[i + 1] * sqrt_[i + 1] * v;
    });
    return {(c * s1 + s * s2) / sqrt_[d_], sqrt_[d_] * (c * s2 - s * s1)};
  }

 private:
  void init_tables() {
    lfact_.resize(d_ + 2);
    sqrt_.resize(d_ + 2);
    for (int k = 0; k <= d_ + 1; ++k) {
      lfact_[k] = log_factorial(k);
      sqrt_[k] = std::sqrt(static_cast<double>(k));
    }
    // up[n][j] = sqrt((n-j)/(j+1)) = w_{j+1}/w_j at tan = 1; down[n][j] = w_{j-1}/w_j at tan = 1.
    for (int which = 0; which < 2; ++which) {
      const int n = d_ - which;
      up_[which].assign(std::max(n, 0) + 1, 0.0);
      down_[which].assign(std::max(n, 0) + 1, 0.0);
      for (int j = 0; j <= n; ++j) {
        if (j < n) up_[which][j] = std::sqrt(static_cast<double>(n - j) / (j + 1));
        if (j > 0) down_[which][j] = std::sqrt(static_cast<double>(j) / (n - j + 1));
      }
    }
  }

  template <class F>
  void for_each_weight(int n, double c, double s, F&& f) const {
    if (n == 0) {
      f(0, 1.0);
      return;
    }
    const double ac = std::abs(c), as = std::abs(s);
    const double sc = c < 0 ? -1.0 : 1.0, ss = s < 0 ? -1.0 : 1.0;
    int mode = static_cast<int>(std::lround(n * as * as));
    if (ac == 0.0) mode = n;
    if (as == 0.0) mode = 0;
    mode = std::clamp(mode, 0, n);
    double lw = 0.5 * (lfact_[n] - lfact_[mode] - lfact_[n - mode]);
    if (n - mode > 0) lw += (n - mode) * std::log(ac);
    if (mode > 0) lw += mode * std::log(as);
    const double peak = std::exp(lw);
    const double floor = peak * 1e-18;
    auto sign = [&](int j) {
      double sg = ((n - j) & 1) ? sc : 1.0;
      if (j & 1) sg *= ss;
      return sg;
    };
    // Consecutive weights differ in sign by sign(c) sign(s), folded into the ratio.
    const double flip = sc * ss;
    f(mode, sign(mode) * peak);
    const double* up = up_[d_ - n].data();
    const double* down = down_[d_ - n].data();
    if (ac > 0.0) {
      const double t = flip * as / ac;
      double w = sign(mode) * peak;
      for (int j = mode; j < n; ++j) {
        w *= up[j] * t;
        if (std::abs(w) < floor) break;
        f(j + 1, w);
      }
    }
    if (as > 0.0) {
      const double t = flip * ac / as;
      double w = sign(mode) * peak;
      for (int j = mode; j > 0; --j) {
        w *= down[j] * t;
        if (std::abs(w) < floor) break;
        f(j - 1, w);
      }
    }
  }

  int d_;
  std::vector<double> g_;
  std::vector<double> lfact_, sqrt_;
  std::vector<double> up_[2], down_[2];
};

inline nlohmann::json to_json(const KssSystem& sys) {
  return nlohmann::json{{"m", sys.m}, {"d", sys.d}, {"seed", sys.seed}, {"coeffs", sys.coeffs}};
}

inline KssSystem system_from_json(const nlohmann::json& j) {
  return KssSystem::from_coefficients(j.at("m").get<int>(), j.at("d").get<int>(),
                                      j.at("coeffs").get<std::vector<std::vector<double>>>(),
                                      j.value("seed", std::uint64_t{0}));
}

}  // namespace kss
