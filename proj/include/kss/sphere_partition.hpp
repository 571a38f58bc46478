#pragma once

// Hyperspherical coordinates on S^m and the two-speed partition of the
// sphere into hyperspherical rectangles (HSR): m-1 polar angles restricted
// away from the poles, plus a full azimuthal angle. What is not covered by
// rectangles forms the exceptional set E.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kss/errors.hpp"
#include "kss/kss_model.hpp"
#include "kss/quadrature.hpp"
#include "kss/rng.hpp"

namespace kss {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// x_0 = cos th_1, x_1 = sin th_1 cos th_2, ..., x_m = prod_k sin th_k.
inline Eigen::VectorXd hyperspherical_to_cartesian(const std::vector<double>& theta) {
  const int m = static_cast<int>(theta.size());
  require(m >= 1, "hyperspherical_to_cartesian: need at least one angle");
  Eigen::VectorXd x(m + 1);
  double prod = 1.0;
  for (int k = 0; k < m; ++k) {
    x(k) = prod * std::cos(theta[k]);
    prod *= std::sin(theta[k]);
  }
  x(m) = prod;
  return x;
}

// Inverse map: polar angles in [0, pi], last angle in [0, 2 pi).
inline std::vector<double> cartesian_to_hyperspherical(const Eigen::VectorXd& x) {
  const int m = static_cast<int>(x.size()) - 1;
  std::vector<double> th(m);
  for (int k = 0; k < m - 1; ++k) th[k] = std::atan2(x.tail(m - k).norm(), x(k));
  double last = std::atan2(x(m), x(m - 1));
  if (last < 0) last += kTwoPi;
  if (last >= kTwoPi) last -= kTwoPi;
  th[m - 1] = last;
  return th;
}

// arccos of the inner product, evaluated through the chord length so that
// it stays accurate for nearly equal and nearly antipodal points.
inline double geodesic_distance(const Eigen::VectorXd& s, const Eigen::VectorXd& t) {
  const double ip = std::clamp(s.dot(t), -1.0, 1.0);
  if (ip > 0.5) return 2.0 * std::asin(std::min(1.0, 0.5 * (s - t).norm()));
  if (ip < -0.5) return std::numbers::pi - 2.0 * std::asin(std::min(1.0, 0.5 * (s + t).norm()));
  return std::acos(ip);
}

// T_k = (d x / d th_k) / prod_{j<k} sin th_j, k = 1..m.
inline std::vector<Eigen::VectorXd> tangent_basis(const std::vector<double>& center) {
  const int m = static_cast<int>(center.size());
  std::vector<Eigen::VectorXd> basis;
  for (int k = 0; k < m; ++k) {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(m + 1);
    t(k) = -std::sin(center[k]);
    if (k + 1 < m) {
      const std::vector<double> rest(center.begin() + k + 1, center.end());
      t.tail(m - k) = std::cos(center[k]) * hyperspherical_to_cartesian(rest);
    } else {
      t(m) = std::cos(center[k]);
    }
    basis.push_back(t);
  }
  return basis;
}

struct HsrRectangle {
  std::vector<double> center_angles;
  std::vector<double> radii;  // side lengths of the angular box
  std::vector<int> index_path;

  double lo(int k) const { return center_angles[k] - 0.5 * radii[k]; }
  double hi(int k) const { return center_angles[k] + 0.5 * radii[k]; }
};

struct Cap {
  Eigen::VectorXd center;
  double angular_radius = 0.0;
};

struct Arc {  // m = 1 only
  double center = 0.0;
  double half_width = 0.0;
};

struct WholeSphere {};

using Region = std::variant<WholeSphere, Arc, Cap, HsrRectangle>;

inline double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0 ? a + kTwoPi : a;
}

inline bool in_rectangle(const HsrRectangle& r, const Eigen::VectorXd& x) {
  const auto th = cartesian_to_hyperspherical(x);
  const int m = static_cast<int>(th.size());
  for (int k = 0; k < m - 1; ++k)
    if (th[k] < r.lo(k) || th[k] >= r.hi(k)) return false;
  const double off = wrap_angle(th[m - 1] - r.lo(m - 1));
  return off < r.radii[m - 1];
}

inline bool in_region(const Region& region, const Eigen::VectorXd& x) {
  return std::visit(
      [&](const auto& g) -> bool {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, WholeSphere>) {
          return true;
        } else if constexpr (std::is_same_v<T, Arc>) {
          const double a = std::atan2(x(1), x(0));
          const double off = std::abs(std::remainder(a - g.center, kTwoPi));
          return off < g.half_width;
        } else if constexpr (std::is_same_v<T, Cap>) {
          return geodesic_distance(g.center, x) < g.angular_radius;
        } else {
          return in_rectangle(g, x);
        }
      },
      region);
}

// phi^{-1}(u) = (sqrt(1 - |u|^2), u)
inline Eigen::VectorXd cap_chart(const Eigen::VectorXd& u) {
  const double n2 = u.squaredNorm();
  if (n2 >= 1.0) throw PreconditionError("cap_chart: |u| must be < 1");
  Eigen::VectorXd x(u.size() + 1);
  x(0) = std::sqrt(1.0 - n2);
  x.tail(u.size()) = u;
  return x;
}

inline double cap_chart_jacobian(const Eigen::VectorXd& u) {
  const double n2 = u.squaredNorm();
  if (n2 >= 1.0) throw PreconditionError("cap_chart_jacobian: |u| must be < 1");
  return 1.0 / std::sqrt(1.0 - n2);
}

// Integral of sin^p over [a, b] for p in 0..3.
inline double sin_power_integral(int p, double a, double b) {
  auto prim = [p](double t) {
    switch (p) {
      case 0: return t;
      case 1: return -std::cos(t);
      case 2: return 0.5 * (t - std::sin(t) * std::cos(t));
      case 3: { const double c = std::cos(t); return -c + c * c * c / 3.0; }
      default: throw PreconditionError("sin_power_integral: power must be <= 3");
    }
  };
  return prim(b) - prim(a);
}

inline double rectangle_volume(const HsrRectangle& r) {
  const int m = static_cast<int>(r.center_angles.size());
  double v = 1.0;
  for (int k = 0; k < m; ++k) v *= sin_power_integral(m - 1 - k, r.lo(k), r.hi(k));
  return v;
}

class HsrPartition {
 public:
  int m = 0;
  int d = 0;
  double alpha = 0.0;
  double r = 0.0;      // fine scale 1/sqrt(d)
  double rbar = 0.0;   // coarse scale r^alpha
  std::vector<HsrRectangle> rectangles;
  double exceptional_volume = 0.0;
  double max_polar_step_over_rbar = 0.0;  // max over levels < m and the azimuthal step of r_j / rbar
  int steps_above_half_rbar = 0;          // steps that exceed rbar/2

  // Index of the rectangle containing x, or nullopt when x lies in E.
  std::optional<std::size_t> locate(const Eigen::VectorXd& x) const {
    const auto th = cartesian_to_hyperspherical(x);
    const Slab* slab = &root_;
    for (int k = 0; k < m; ++k) {
      double off = th[k] - slab->lo;
      if (k == m - 1) off = wrap_angle(off);
      if (off < 0) return std::nullopt;
      auto i = static_cast<long>(std::floor(off / slab->width));
      if (k == m - 1) i = std::min<long>(i, slab->count - 1);
      if (i >= slab->count) return std::nullopt;
      if (k == m - 1) return slab->first + static_cast<std::size_t>(i);
      slab = &slab->children[i];
    }
    return std::nullopt;
  }

  // Closures share a boundary point: every angular interval intersects,
  // the last one in the circular sense.
  bool are_neighbors(std::size_t a, std::size_t b) const {
    const auto& ra = rectangles[a];
    const auto& rb = rectangles[b];
    const double tol = 1e-12;
    for (int k = 0; k < m - 1; ++k)
      if (ra.hi(k) < rb.lo(k) - tol || rb.hi(k) < ra.lo(k) - tol) return false;
    const int k = m - 1;
    const double ab = wrap_angle(rb.lo(k) - ra.lo(k));
    const double ba = wrap_angle(ra.lo(k) - rb.lo(k));
    return ab <= ra.radii[k] + tol || ba <= rb.radii[k] + tol || ab >= kTwoPi - tol || ba >= kTwoPi - tol;
  }

  friend HsrPartition build_partition(int m, int d, double alpha);

 private:
  struct Slab {
    double lo = 0.0;
    double width = 0.0;
    long count = 0;
    std::size_t first = 0;
    std::vector<Slab> children;
  };
  Slab root_;
};

inline double default_alpha(int m) { return std::min(0.4, 0.9 / m); }

namespace detail {

inline void check_partition_preconditions(int m, int d, double alpha, double r, double rbar) {
  require(m >= 1 && m <= 4, "build_partition: m must lie in 1..4");
  require(d >= 2, "build_partition: d must be >= 2");
  require(alpha > 0.0 && alpha < 1.0 / m, "build_partition: alpha must lie in (0, 1/m)");
  if (!(r <= rbar / 2.0))
    throw PreconditionError("build_partition: violated r <= rbar/2 (r=" + std::to_string(r) +
                            ", rbar=" + std::to_string(rbar) + ")");
  if (!(std::sin(rbar / 2.0) >= rbar / 4.0))
    throw PreconditionError("build_partition: violated sin(rbar/2) >= rbar/4");
}

// Number of intervals of width `step` in the symmetric polar window reaching within rbar of the poles.
inline long polar_half_count(double step, double rbar) {
  return static_cast<long>(std::ceil((std::numbers::pi / 2.0 - rbar) / step - 1e-12));
}

}  // namespace detail

inline HsrPartition build_partition(int m, int d, double alpha) {
  HsrPartition p;
  p.m = m;
  p.d = d;
  p.alpha = alpha;
  p.r = 1.0 / std::sqrt(static_cast<double>(d));
  p.rbar = std::pow(p.r, alpha);
  detail::check_partition_preconditions(m, d, alpha, p.r, p.rbar);

  std::vector<double> center(m), radii(m);
  std::vector<int> path(m);
  double covered = 0.0;
  auto note_step = [&](double step) {
    p.max_polar_step_over_rbar = std::max(p.max_polar_step_over_rbar, step / p.rbar);
    if (step > p.rbar / 2.0 + 1e-15) ++p.steps_above_half_rbar;
  };
  // Returns the volume factor contributed by this slab and its descendants.
  auto build = [&](auto&& self, HsrPartition::Slab& slab, int level, double step) -> double {
    note_step(step);
    if (level == m - 1) {
      const long n = static_cast<long>(std::ceil(kTwoPi / step - 1e-12));
      slab.lo = 0.0;
      slab.width = kTwoPi / n;
      slab.count = n;
      slab.first = p.rectangles.size();
      for (long i = 0; i < n; ++i) {
        center[level] = (i + 0.5) * slab.width;
        radii[level] = slab.width;
        path[level] = static_cast<int>(i);
        p.rectangles.push_back({center, radii, path});
      }
      return kTwoPi;
    }
    const long a = detail::polar_half_count(step, p.rbar);
    slab.lo = std::numbers::pi / 2.0 - a * step;
    slab.width = step;
    slab.count = 2 * a;
    slab.children.resize(2 * a);
    double vol = 0.0;
    for (long i = 0; i < 2 * a; ++i) {
      const double lo = slab.lo + i * step;
      center[level] = lo + 0.5 * step;
      radii[level] = step;
      path[level] = static_cast<int>(i);
      const double next = step / std::sin(center[level]);
      vol += sin_power_integral(m - 1 - level, lo, lo + step) * self(self, slab.children[i], level + 1, next);
    }
    return vol;
  };
  covered = build(build, p.root_, 0, p.r);
  p.exceptional_volume = std::max(0.0, kappa(m) - covered);
  return p;
}

// Rectangle count without materializing the partition.
inline long count_rectangles(int m, int d, double alpha) {
  const double r = 1.0 / std::sqrt(static_cast<double>(d));
  const double rbar = std::pow(r, alpha);
  detail::check_partition_preconditions(m, d, alpha, r, rbar);
  auto rec = [&](auto&& self, int level, double step) -> long {
    if (level == m - 1) return static_cast<long>(std::ceil(kTwoPi / step - 1e-12));
    const long a = detail::polar_half_count(step, rbar);
    const double lo = std::numbers::pi / 2.0 - a * step;
    long total = 0;
    for (long i = 0; i < 2 * a; ++i) total += self(self, level + 1, step / std::sin(lo + (i + 0.5) * step));
    return total;
  };
  return rec(rec, 0, r);
}

// Uniform point on S^m.
inline Eigen::VectorXd uniform_sphere_point(int m, NormalStream& rng) {
  Eigen::VectorXd x(m + 1);
  for (int k = 0; k <= m; ++k) x(k) = rng.normal();
  return x / x.norm();
}

struct CoverageReport {
  long samples = 0;
  long in_rectangles = 0;
  long in_exceptional = 0;
  long multiply_covered = 0;  // points inside more than one rectangle (should be 0)
  double mc_exceptional_volume = 0.0;
  double mc_standard_error = 0.0;
};

// Membership sampling. `check_disjoint` additionally tests every point against
// the rectangles adjacent in index space to the located one.
inline CoverageReport coverage_check(const HsrPartition& p, long samples, std::uint64_t seed, bool check_disjoint = true) {
  NormalStream rng(seed, 0x5EC7u);
  CoverageReport rep;
  rep.samples = samples;
  for (long i = 0; i < samples; ++i) {
    const Eigen::VectorXd x = uniform_sphere_point(p.m, rng);
    const auto idx = p.locate(x);
    if (!idx) {
      ++rep.in_exceptional;
      continue;
    }
    ++rep.in_rectangles;
    if (!in_rectangle(p.rectangles[*idx], x)) ++rep.multiply_covered;  // lookup disagrees with membership
    if (check_disjoint) {
      const std::size_t lo = *idx >= 3 ? *idx - 3 : 0;
      const std::size_t hi = std::min(p.rectangles.size(), *idx + 4);
      for (std::size_t j = lo; j < hi; ++j)
        if (j != *idx && in_rectangle(p.rectangles[j], x)) ++rep.multiply_covered;
    }
  }
  const double frac = static_cast<double>(rep.in_exceptional) / samples;
  rep.mc_exceptional_volume = kappa(p.m) * frac;
  rep.mc_standard_error = kappa(p.m) * std::sqrt(std::max(frac * (1 - frac), 1.0 / samples) / samples);
  return rep;
}

inline Eigen::VectorXd rectangle_point(const HsrRectangle& r, const std::vector<double>& u) {
  std::vector<double> th(r.center_angles.size());
  for (std::size_t k = 0; k < th.size(); ++k) th[k] = r.center_angles[k] + u[k] * r.radii[k];
  return hyperspherical_to_cartesian(th);
}

// Geodesic distance between the closures of two rectangles, minimized over
// the box parameters u, v in [-1/2, 1/2]^m by projected gradient descent on
// the squared chord length from corner and random starts.
inline double rectangle_distance(const HsrRectangle& a, const HsrRectangle& b, std::uint64_t seed = 1, int random_starts = 16) {
  const int m = static_cast<int>(a.center_angles.size());
  const int n = 2 * m;
  auto chord2 = [&](const std::vector<double>& w) {
    const std::vector<double> u(w.begin(), w.begin() + m), v(w.begin() + m, w.end());
    return (rectangle_point(a, u) - rectangle_point(b, v)).squaredNorm();
  };
  std::vector<std::vector<double>> starts;
  for (int mask = 0; mask < (1 << n); ++mask) {
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = (mask >> i) & 1 ? 0.5 : -0.5;
    starts.push_back(w);
  }
  NormalStream rng(seed, 0xD157u);
  for (int s = 0; s < random_starts; ++s) {
    std::vector<double> w(n);
    for (auto& x : w) x = rng.uniform() - 0.5;
    starts.push_back(w);
  }
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t s = 0; s < starts.size(); ++s) ranked.emplace_back(chord2(starts[s]), s);
  std::sort(ranked.begin(), ranked.end());
  double best = ranked.front().first;
  const std::size_t polish = std::min<std::size_t>(4, ranked.size());
  for (std::size_t s = 0; s < polish; ++s) {
    std::vector<double> w = starts[ranked[s].second];
    double f = ranked[s].first;
    double step = 0.25;
    for (int it = 0; it < 300 && step > 1e-12; ++it) {
      std::vector<double> g(n);
      for (int i = 0; i < n; ++i) {
        const double h = 1e-6;
        auto wp = w, wm = w;
        wp[i] += h;
        wm[i] -= h;
        g[i] = (chord2(wp) - chord2(wm)) / (2 * h);
      }
      const double gn = std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0));
      if (gn == 0.0) break;
      bool improved = false;
      while (step > 1e-12) {
        auto trial = w;
        for (int i = 0; i < n; ++i) trial[i] = std::clamp(trial[i] - step * g[i] / gn, -0.5, 0.5);
        const double ft = chord2(trial);
        if (ft < f) {
          w = trial;
          f = ft;
          step *= 1.5;
          improved = true;
          break;
        }
        step *= 0.5;
      }
      if (!improved) break;
    }
    best = std::min(best, f);
  }
  return 2.0 * std::asin(std::min(1.0, 0.5 * std::sqrt(best)));
}

enum class PairSampling { uniform, near };

struct SeparationViolation {
  std::size_t a = 0, b = 0;
  double distance = 0.0;
};

struct SeparationReport {
  PairSampling sampling = PairSampling::near;
  long pairs = 0;
  double threshold = 0.0;  // (1 - 1e-6)/sqrt(d)
  double min_distance_ratio = 0.0;  // min over pairs of distance * sqrt(d)
  std::vector<SeparationViolation> violations;
  long neighbor_pairs_checked = 0;
  double max_neighbor_distance = 0.0;  // must be 0 for neighbors
  double max_diameter_ratio = 0.0;  // max sampled diameter * sqrt(d)
};

inline double rectangle_diameter(const HsrRectangle& r) {
  const int m = static_cast<int>(r.center_angles.size());
  std::vector<Eigen::VectorXd> corners;
  for (int mask = 0; mask < (1 << m); ++mask) {
    std::vector<double> u(m);
    for (int k = 0; k < m; ++k) u[k] = (mask >> k) & 1 ? 0.5 : -0.5;
    corners.push_back(rectangle_point(r, u));
  }
  double best = 0.0;
  for (std::size_t i = 0; i < corners.size(); ++i)
    for (std::size_t j = i + 1; j < corners.size(); ++j) best = std::max(best, geodesic_distance(corners[i], corners[j]));
  return best;
}

// Samples non-neighbor pairs and measures closure distances. `near` sampling
// draws the second rectangle among those whose centers lie within a few
// rectangle diameters of the first, which is where the separation claim has
// content; `uniform` sampling draws both rectangles uniformly.
inline SeparationReport neighbor_separation(const HsrPartition& p, long pairs, std::uint64_t seed,
                                            PairSampling sampling = PairSampling::near) {
  SeparationReport rep;
  rep.sampling = sampling;
  rep.threshold = (1.0 - 1e-6) / std::sqrt(static_cast<double>(p.d));
  rep.min_distance_ratio = INFINITY;
  const std::size_t n = p.rectangles.size();
  std::vector<Eigen::VectorXd> centers;
  centers.reserve(n);
  for (const auto& r : p.rectangles) centers.push_back(hyperspherical_to_cartesian(r.center_angles));
  NormalStream rng(seed, 0x5E9Au);
  auto pick = [&](std::size_t hi) { return std::min(hi - 1, static_cast<std::size_t>(rng.uniform() * hi)); };
  const double radius = 4.0 * p.r * std::max(1.0, p.max_polar_step_over_rbar * p.rbar / p.r);
  long attempts = 0;
  while (rep.pairs < pairs && attempts < 100 * pairs) {
    ++attempts;
    const std::size_t a = pick(n);
    std::size_t b = a;
    if (sampling == PairSampling::uniform) {
      b = pick(n);
    } else {
      std::vector<std::size_t> near;
      for (std::size_t j = 0; j < n; ++j)
        if (j != a && geodesic_distance(centers[a], centers[j]) < radius) near.push_back(j);
      if (near.empty()) continue;
      b = near[pick(near.size())];
    }
    if (a == b) continue;
    const double dist = rectangle_distance(p.rectangles[a], p.rectangles[b], seed + attempts);
    if (p.are_neighbors(a, b)) {
      ++rep.neighbor_pairs_checked;
      rep.max_neighbor_distance = std::max(rep.max_neighbor_distance, dist);
      continue;
    }
    ++rep.pairs;
    rep.min_distance_ratio = std::min(rep.min_distance_ratio, dist * std::sqrt(static_cast<double>(p.d)));
    if (dist < rep.threshold) rep.violations.push_back({a, b, dist});
    rep.max_diameter_ratio = std::max(rep.max_diameter_ratio, rectangle_diameter(p.rectangles[a]) / p.r);
  }
  return rep;
}

struct ProjectionResult {
  std::vector<Eigen::VectorXd> image;  // rescaled tangent coordinates of the grid
  double hausdorff = 0.0;
  std::vector<double> axis_error;  // per coordinate: max |P_k(u_k e_k) - u_k| on the axis grid
};

// Maps a parameter grid on [-1/2,1/2]^m into the rectangle, projects onto the
// tangent basis at the center, rescales by 1/r and compares with the grid.
inline ProjectionResult project_and_rescale(const HsrRectangle& rect, double r, int n_grid = 11) {
  const int m = static_cast<int>(rect.center_angles.size());
  const auto basis = tangent_basis(rect.center_angles);
  const Eigen::VectorXd x0 = hyperspherical_to_cartesian(rect.center_angles);
  auto project = [&](const std::vector<double>& u) {
    const Eigen::VectorXd dx = rectangle_point(rect, u) - x0;
    Eigen::VectorXd y(m);
    for (int k = 0; k < m; ++k) y(k) = dx.dot(basis[k]) / r;
    return y;
  };
  std::vector<Eigen::VectorXd> grid;
  ProjectionResult out;
  long total = 1;
  for (int k = 0; k < m; ++k) total *= n_grid;
  for (long idx = 0; idx < total; ++idx) {
    std::vector<double> u(m);
    long rem = idx;
    Eigen::VectorXd g(m);
    for (int k = 0; k < m; ++k) {
      u[k] = -0.5 + static_cast<double>(rem % n_grid) / (n_grid - 1);
      g(k) = u[k];
      rem /= n_grid;
    }
    grid.push_back(g);
    out.image.push_back(project(u));
  }
  auto directed = [](const std::vector<Eigen::VectorXd>& from, const std::vector<Eigen::VectorXd>& to) {
    double h = 0.0;
    for (const auto& a : from) {
      double best = INFINITY;
      for (const auto& b : to) best = std::min(best, (a - b).norm());
      h = std::max(h, best);
    }
    return h;
  };
  out.hausdorff = std::max(directed(out.image, grid), directed(grid, out.image));
  out.axis_error.assign(m, 0.0);
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < n_grid; ++i) {
      std::vector<double> u(m, 0.0);
      u[k] = -0.5 + static_cast<double>(i) / (n_grid - 1);
      out.axis_error[k] = std::max(out.axis_error[k], std::abs(project(u)(k) - u[k]));
    }
  return out;
}

// Indices of a deterministic sample of rectangles: the one nearest to a pole
// (where distortion is largest) plus `count - 1` uniform picks.
inline std::vector<std::size_t> sample_rectangles(const HsrPartition& p, int count, std::uint64_t seed) {
  std::vector<std::size_t> out;
  std::size_t polar = 0;
  for (std::size_t i = 0; i < p.rectangles.size(); ++i)
    if (p.rectangles[i].center_angles[0] < p.rectangles[polar].center_angles[0]) polar = i;
  out.push_back(polar);
  NormalStream rng(seed, 0x5A3Bu);
  while (static_cast<int>(out.size()) < count && out.size() < p.rectangles.size())
    out.push_back(std::min(p.rectangles.size() - 1, static_cast<std::size_t>(rng.uniform() * p.rectangles.size())));
  return out;
}

}  // namespace kss
