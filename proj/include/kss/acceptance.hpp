#pragma once

// The ten acceptance criteria. Each returns a verdict with the quantitative
// evidence behind it. Monte Carlo campaigns go through a shared cache so the
// report command can reuse its own runs.

#include <functional>
#include <map>
#include <string>

#include "kss/experiment.hpp"

namespace kss {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  json detail;
};

inline json to_json(const CriterionResult& c) {
  return json{{"id", c.id}, {"name", c.name}, {"pass", c.pass}, {"detail", c.detail}};
}

class AcceptanceContext {
 public:
  explicit AcceptanceContext(std::uint64_t seed = 20240601, int threads = default_threads()) : seed_(seed), threads_(threads) {}

  std::uint64_t seed() const { return seed_; }
  int threads() const { return threads_; }

  const MonteCarloResult& monte_carlo(int m, int d, long replicates) {
    const auto key = std::make_pair(m, d);
    auto it = cache_.find(key);
    if (it == cache_.end() || static_cast<long>(it->second.records.size()) < replicates)
      it = cache_.insert_or_assign(key, run_monte_carlo(m, d, replicates, seed_, ScanConfig{}, threads_)).first;
    return it->second;
  }

  void store(MonteCarloResult r) { cache_.insert_or_assign(std::make_pair(r.m, r.d), std::move(r)); }

  const VarianceEstimate& quadrature(int m, int d) {
    const auto key = std::make_pair(m, d);
    auto it = quad_.find(key);
    if (it == quad_.end()) {
      QuadratureConfig q;
      q.z_max = std::min(q.z_max, std::sqrt(static_cast<double>(d)) * std::numbers::pi / 2.0);
      it = quad_.emplace(key, variance_quadrature(d, m, q)).first;
    }
    return it->second;
  }

 private:
  std::uint64_t seed_;
  int threads_;
  std::map<std::pair<int, int>, MonteCarloResult> cache_;
  std::map<std::pair<int, int>, VarianceEstimate> quad_;
};

inline CriterionResult criterion_mean_law(AcceptanceContext& ctx) {
  CriterionResult c{1, "mean law", true, json::object()};
  for (auto [m, d, R] : {std::tuple{1, 400, 5000L}, std::tuple{2, 4, 500L}}) {
    const auto& mc = ctx.monte_carlo(m, d, R);
    const double mean = mc.count_summary.mean, target = expected_count(m, d);
    const double tol = 3.0 * mc.count_summary.sd / std::sqrt(static_cast<double>(mc.counts.size()));
    const bool ok = std::abs(mean - target) <= tol;
    c.pass = c.pass && ok;
    c.detail["m" + std::to_string(m) + "_d" + std::to_string(d)] = {
        {"replicates", mc.counts.size()}, {"mean", mean}, {"target", target}, {"tolerance", tol}, {"pass", ok}};
  }
  return c;
}

inline CriterionResult criterion_variance_law(AcceptanceContext& ctx) {
  CriterionResult c{2, "variance law", true, json::object()};
  json rows = json::array();
  for (auto [d, R] : {std::pair{100, 20000L}, std::pair{400, 20000L}, std::pair{1600, 10000L}}) {
    const auto& mc = ctx.monte_carlo(1, d, R);
    const double q = ctx.quadrature(1, d).variance_over_dm2;
    const double rel = std::abs(mc.var_over_dm2 - q) / q;
    const bool ok = rel <= 0.05;
    c.pass = c.pass && ok;
    rows.push_back({{"d", d},
                    {"replicates", mc.counts.size()},
                    {"mc_var_over_sqrt_d", mc.var_over_dm2},
                    {"mc_se", mc.count_summary.variance_se / std::sqrt(static_cast<double>(d))},
                    {"quadrature", q},
                    {"relative_difference", rel},
                    {"pass", ok}});
  }
  c.detail["monte_carlo"] = rows;
  const double v1 = ctx.quadrature(1, 10000).variance_over_dm2, v2 = ctx.quadrature(1, 40000).variance_over_dm2;
  const double rel = std::abs(v2 - v1) / std::abs(v2);
  const bool stable = rel < 0.01 && v2 > 0.0 && std::isfinite(v2);
  c.pass = c.pass && stable;
  c.detail["stabilization"] = {{"d", {10000, 40000}}, {"values", {v1, v2}}, {"relative_difference", rel}, {"pass", stable}};
  return c;
}

inline CriterionResult criterion_clt(AcceptanceContext& ctx) {
  CriterionResult c{3, "central limit theorem", false, json::object()};
  const int d = 1024;
  const auto& mc = ctx.monte_carlo(1, d, 5000);
  const double v_hat = ctx.quadrature(1, d).variance_over_dm2;
  const auto v = normality_suite(mc.standardized, v_hat, 2.0 / std::pow(static_cast<double>(d), 0.25));
  c.pass = v.pass;
  c.detail = to_json(v);
  c.detail["d"] = d;
  c.detail["standardized_mean"] = mc.standardized_summary.mean;
  return c;
}

inline CriterionResult criterion_oracle_equivalence(AcceptanceContext& ctx) {
  CriterionResult c{4, "circle scan and companion matrix agree", false, json::object()};
  long total = 0, agree = 0, uncertified = 0;
  json per_d = json::array();
  for (int d : {8, 16, 32, 64, 128}) {
    long ok_d = 0;
    for (long r = 0; r < 200; ++r) {
      const auto sys = sample_system(1, d, replicate_seed(derive_seed(ctx.seed(), 4), d, r));
      const auto a = count_roots_circle(homogenize(sys));
      const auto b = count_roots_companion(sys);
      if (!a.certified) ++uncertified;
      if (a.count == b.count) ++ok_d;
    }
    total += 200;
    agree += ok_d;
    per_d.push_back({{"d", d}, {"agree", ok_d}, {"replicates", 200}});
  }
  c.pass = agree == total;
  c.detail = {{"total", total}, {"agree", agree}, {"uncertified", uncertified}, {"per_degree", per_d}};
  return c;
}

inline CriterionResult criterion_mehler(AcceptanceContext& ctx) {
  CriterionResult c{5, "Mehler cross moments", true, json::object()};
  const int d = 20;
  const long draws = 1000000;
  const auto cc = build_coefficients(1, 4);
  NormalStream rng(derive_seed(ctx.seed(), 5), 0x5, 0);
  std::vector<double> thetas(10);
  for (double& t : thetas) t = 0.05 + 0.95 * rng.uniform();
  double max_even = 0.0;
  json rows = json::array();
  for (int q : {2, 4}) {
    const auto mc = mehler_mc_m1(thetas, d, cc, q, draws, derive_seed(ctx.seed(), 50 + q));
    for (std::size_t i = 0; i < thetas.size(); ++i) {
      const double exact = H_qd(thetas[i], d, cc, q);
      const double z = std::abs(mc[i].mean - exact) / mc[i].se;
      const double even = std::abs(exact - H_qd(std::numbers::pi - thetas[i], d, cc, q));
      max_even = std::max(max_even, even);
      const bool ok = z <= 3.0;
      c.pass = c.pass && ok;
      rows.push_back({{"q", q}, {"theta", thetas[i]}, {"mehler", exact}, {"mc", mc[i].mean}, {"se", mc[i].se}, {"z", z}, {"pass", ok}});
    }
  }
  const bool even_ok = max_even <= 1e-10;
  c.pass = c.pass && even_ok;
  c.detail = {{"d", d}, {"draws", draws}, {"comparisons", rows}, {"max_evenness_error", max_even}, {"evenness_pass", even_ok}};
  return c;
}

inline CriterionResult criterion_parseval(AcceptanceContext& ctx) {
  CriterionResult c{6, "Parseval squeeze", false, json::object()};
  const int d = 400;
  const auto cc = build_coefficients(1, 8);
  const double v = ctx.quadrature(1, d).variance_over_dm2;
  double partial = 0.0;
  bool monotone = true;
  json rows = json::array();
  for (int q = 1; q <= 8; ++q) {
    const double vq = chaos_variance(q, d, cc);
    if (vq < 0.0) monotone = false;
    partial += vq;
    rows.push_back({{"q", q}, {"variance", vq}, {"partial_sum", partial}});
  }
  const bool bounded = partial <= v * 1.02;
  c.pass = bounded && monotone;
  c.detail = {{"d", d}, {"quadrature", v}, {"partial_sums", rows}, {"ratio", partial / v}, {"nondecreasing", monotone}, {"bounded", bounded}};
  return c;
}

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline CriterionResult criterion_contraction(AcceptanceContext&) {
  CriterionResult c{7, "contraction integrals", true, json{{"integrals", json::array()}}};
  const std::vector<double> ds = {1e2, 1e3, 1e4, 1e5};
  for (int m : {1, 2})
    for (int k = 0; k <= 2; ++k) {
      std::vector<double> vals;
      for (double d : ds) vals.push_back(contraction_integral(k, static_cast<int>(d), m));
      bool decreasing = true;
      for (std::size_t i = 1; i < vals.size(); ++i) decreasing = decreasing && vals[i] < vals[i - 1];
      const double slope = loglog_slope(ds, vals), target = -m / 6.0;
      const bool ok = decreasing && std::abs(slope - target) <= 0.05;
      c.pass = c.pass && ok;
      c.detail["integrals"].push_back({{"m", m}, {"k", k}, {"values", vals}, {"slope", slope}, {"target", target}, {"decreasing", decreasing}, {"pass", ok}});
    }
  return c;
}

inline CriterionResult criterion_arcones(AcceptanceContext&) {
  CriterionResult c{8, "Arcones coefficient", true, json::object()};
  json rows = json::array(), radii = json::array();
  for (int d : {10, 100, 1000}) {
    double worst = 0.0, worst_theta = 0.0;
    for (int i = 1; i <= 200; ++i) {
      const double th = (std::numbers::pi / 2.0) * i / 201.0;
      const auto p = profile(th, d);
      const double diff = std::abs(arcones_psi(th, d, 1) - (std::abs(p.C) + std::abs(p.A)));
      if (diff > worst) {
        worst = diff;
        worst_theta = th;
      }
    }
    const bool ok = worst <= 1e-12;
    c.pass = c.pass && ok;
    rows.push_back({{"d", d}, {"max_abs_difference", worst}, {"worst_theta", worst_theta}, {"pass", ok}});
    const auto r = arcones_radius(d, 1, true);
    const bool rok = r.a < 2.0 && r.r0 < 1.0;
    c.pass = c.pass && rok;
    radii.push_back({{"d", d}, {"a", r.a}, {"r0", r.r0}, {"pass", rok}});
  }
  c.detail = {{"identity", rows}, {"radius", radii}};
  return c;
}

inline CriterionResult criterion_partition(AcceptanceContext& ctx) {
  CriterionResult c{9, "sphere partition", true, json::object()};
  const int m = 2;
  const double alpha = default_alpha(m);
  std::vector<double> hausdorff;
  json counts = json::array();
  std::vector<double> constants;
  for (int d : {100, 1000, 10000}) {
    const auto p = build_partition(m, d, alpha);
    double worst = 0.0;
    for (auto i : sample_rectangles(p, 50, derive_seed(ctx.seed(), 9))) worst = std::max(worst, project_and_rescale(p.rectangles[i], p.r).hausdorff);
    hausdorff.push_back(worst);
    constants.push_back(static_cast<double>(p.rectangles.size()) / d);
    counts.push_back({{"d", d}, {"rectangles", p.rectangles.size()}, {"C", constants.back()}, {"worst_hausdorff", worst},
                      {"steps_above_half_rbar", p.steps_above_half_rbar}, {"max_polar_step_over_rbar", p.max_polar_step_over_rbar}});
    if (d == 10000) {
      json sep = json::object();
      for (auto s : {PairSampling::uniform, PairSampling::near}) {
        const auto rep = neighbor_separation(p, 1000, derive_seed(ctx.seed(), 90), s);
        sep[s == PairSampling::near ? "near" : "uniform"] = {{"pairs", rep.pairs},
                                                             {"violations", rep.violations.size()},
                                                             {"min_distance_over_r", rep.min_distance_ratio}};
        if (s == PairSampling::near) {
          const bool ok = rep.violations.empty() && rep.pairs == 1000;
          c.pass = c.pass && ok;
          sep["pass"] = ok;
        }
      }
      c.detail["separation"] = sep;
    }
  }
  const double cmax = *std::max_element(constants.begin(), constants.end());
  const double cmin = *std::min_element(constants.begin(), constants.end());
  const bool stable = cmax <= 2.0 * cmin;
  bool monotone = true;
  for (std::size_t i = 1; i < hausdorff.size(); ++i) monotone = monotone && hausdorff[i] < hausdorff[i - 1];
  const bool small = hausdorff.back() < 0.05;
  c.pass = c.pass && stable && monotone && small;
  c.detail["counts"] = counts;
  c.detail["count_constant_stable"] = stable;
  c.detail["hausdorff_decreasing"] = monotone;
  c.detail["hausdorff_below_0.05"] = small;
  return c;
}

inline CriterionResult criterion_local_limit(AcceptanceContext& ctx) {
  CriterionResult c{10, "local limit field", true, json::object()};
  json conv = json::array();
  for (int m : {1, 2}) {
    const auto r = local_convergence(m, {100, 1000, 10000});
    const bool ok = std::abs(r.slope + 1.0) <= 0.15;
    c.pass = c.pass && ok;
    conv.push_back({{"m", m}, {"d", r.d}, {"sup_error", r.sup_error}, {"slope", r.slope}, {"pass", ok}});
  }
  c.detail["convergence"] = conv;
  const auto s = sample_limit_field({1, 1.0, 11}, derive_seed(ctx.seed(), 10), 10000);
  const auto ck = field_covariance_check(s);
  const bool cov_ok = ck.max_z_cov <= 3.0;
  c.pass = c.pass && cov_ok;
  c.detail["field_covariance"] = {{"draws", 10000}, {"max_z", ck.max_z_cov}, {"max_abs_error", ck.max_abs_error}, {"pass", cov_ok}};
  const auto lv = limit_variance_mc(1, 20000, derive_seed(ctx.seed(), 11));
  const double z = std::abs(lv.mean - 1.0 / std::numbers::pi) / lv.mean_se;
  const bool mean_ok = z <= 3.0;
  c.pass = c.pass && mean_ok;
  c.detail["mean_count"] = {{"fields", lv.n_fields}, {"mean", lv.mean}, {"se", lv.mean_se}, {"target", 1.0 / std::numbers::pi}, {"z", z}, {"pass", mean_ok}};
  return c;
}

using CriterionFn = std::function<CriterionResult(AcceptanceContext&)>;

inline const std::vector<CriterionFn>& all_criteria() {
  static const std::vector<CriterionFn> fns = {criterion_mean_law,        criterion_variance_law, criterion_clt,
                                               criterion_oracle_equivalence, criterion_mehler,     criterion_parseval,
                                               criterion_contraction,     criterion_arcones,      criterion_partition,
                                               criterion_local_limit};
  return fns;
}

inline CriterionResult run_criterion(int id, AcceptanceContext& ctx) {
  require(id >= 1 && id <= static_cast<int>(all_criteria().size()), "run_criterion: unknown criterion id");
  return all_criteria()[id - 1](ctx);
}

}  // namespace kss
