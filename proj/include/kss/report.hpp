#pragma once

// Builders behind each CLI subcommand. Each writes its artifacts into the
// output directory and returns the report.json document.

#include <filesystem>
#include <string>

#include "kss/acceptance.hpp"
#include "kss/experiment.hpp"

namespace kss {

namespace fs = std::filesystem;

inline json run_simulate(const ExperimentConfig& cfg, const fs::path& dir) {
  json rep = report_envelope(cfg);
  json mc_rows = json::array();
  std::vector<MonteCarloResult> runs;
  for (int d : cfg.d) {
    runs.push_back(run_monte_carlo(cfg.m, d, cfg.replicates, cfg.seed, cfg.scan, cfg.threads));
    QuadratureConfig q = quadrature_config(cfg);
    q.z_max = std::min(q.z_max, std::sqrt(static_cast<double>(d)) * std::numbers::pi / 2.0);
    mc_rows.push_back(monte_carlo_section(runs.back(), variance_quadrature(d, cfg.m, q)));
    // first system of the campaign, for replay
    write_json(dir / ("system_d" + std::to_string(d) + "_r0.json"), to_json(sample_system(cfg.m, d, replicate_seed(cfg.seed, d, 0))));
  }
  std::vector<const MonteCarloResult*> ptrs;
  for (const auto& r : runs) ptrs.push_back(&r);
  write_replicates_csv(dir / "replicates.csv", ptrs);
  rep["sections"]["monte_carlo"] = mc_rows;
  return rep;
}

inline json run_kac_rice(const ExperimentConfig& cfg, const fs::path& dir) {
  json rep = report_envelope(cfg);
  json rows = json::array();
  for (int d : cfg.d) {
    QuadratureConfig q = quadrature_config(cfg);
    q.z_max = std::min(q.z_max, std::sqrt(static_cast<double>(d)) * std::numbers::pi / 2.0);
    const auto v = variance_quadrature(d, cfg.m, q);
    write_json(dir / ("kac_rice_d" + std::to_string(d) + ".json"), to_json(v, true));
    write_profile_csv(dir / ("profile_d" + std::to_string(d) + ".csv"), d, cfg.m, 400);
    json row = to_json(v);
    row["expected_count"] = expected_count(cfg.m, d);
    // small-angle decay bounds on a z grid
    long checked = 0, failed = 0;
    const double zhi = std::min(10.0, std::sqrt(static_cast<double>(d)) * std::numbers::pi / 2.0 * 0.999);
    for (int i = 0; i <= 200; ++i) {
      ++checked;
      if (!check_bounds(zhi * i / 200.0, d, cfg.bound_alpha, cfg.constant).all()) ++failed;
    }
    row["decay_bounds"] = {{"alpha", cfg.bound_alpha}, {"constant", cfg.constant}, {"points", checked}, {"failures", failed}};
    const auto dom = domination_constant(d, cfg.m, 200, cfg.n_mc);
    row["domination"] = {{"fitted_constant", dom.fitted_constant}, {"worst_theta", dom.worst_theta}};
    rows.push_back(row);
  }
  rep["sections"]["variance"] = rows;
  if (cfg.d.size() >= 2) {
    std::vector<int> ds = cfg.d;
    std::sort(ds.begin(), ds.end());
    ds.erase(std::unique(ds.begin(), ds.end()), ds.end());
    if (ds.size() >= 2) {
      const auto vi = v_infinity(cfg.m, ds, quadrature_config(cfg));
      rep["sections"]["v_infinity"] = {{"estimate", vi.estimate}, {"relative_differences", vi.relative_differences}, {"converging", vi.converging}};
    }
  }
  return rep;
}

inline json contraction_table(int m) {
  json rows = json::array();
  const std::vector<double> ds = {1e2, 1e3, 1e4, 1e5};
  for (int k = 0; k <= 2; ++k) {
    std::vector<double> v;
    for (double d : ds) v.push_back(contraction_integral(k, static_cast<int>(d), m));
    rows.push_back({{"k", k}, {"d", ds}, {"values", v}, {"slope", loglog_slope(ds, v)}, {"target_slope", -m / 6.0}});
  }
  return rows;
}

inline json run_chaos(const ExperimentConfig& cfg, const fs::path& dir) {
  json rep = report_envelope(cfg);
  // the Mehler sums grow quickly with the number of Z coordinates
  const int q_eff = cfg.m == 1 ? cfg.q_max : std::min(cfg.q_max, 4);
  const auto cc = build_coefficients(cfg.m, q_eff, cfg.chaos_n_mc, derive_seed(cfg.seed, 0xCC));
  write_json(dir / "chaos_coefficients.json", to_json(cc));
  std::ostringstream csv;
  csv << "q,d,value\n";
  QuadratureConfig qc = quadrature_config(cfg);
  json per_d = json::array();
  for (int d : cfg.d) {
    QuadratureConfig q = qc;
    q.z_max = std::min(q.z_max, std::sqrt(static_cast<double>(d)) * std::numbers::pi / 2.0);
    double partial = 0.0;
    bool monotone = true;
    json sums = json::array();
    for (int k = 1; k <= q_eff; ++k) {
      const double v = chaos_variance(k, d, cc, q);
      csv << k << ',' << d << ',' << fmt(v) << '\n';
      monotone = monotone && v >= 0.0;
      partial += v;
      sums.push_back({{"q", k}, {"variance", v}, {"partial_sum", partial}});
    }
    const double total = variance_quadrature(d, cfg.m, q).variance_over_dm2;
    const auto rad = arcones_radius(d, cfg.m, false);
    const auto rad_psi = arcones_radius(d, cfg.m, true);
    per_d.push_back({{"d", d},
                     {"partial_sums", sums},
                     {"nondecreasing", monotone},
                     {"quadrature_variance", total},
                     {"parseval_ratio", partial / total},
                     {"arcones",
                      {{"Q", cfg.arcones_q},
                       {"c_plus_a", {{"a", rad.a}, {"r0", rad.r0}, {"tail_bound", arcones_tail_bound(cfg.arcones_q, cfg.m, rad.a, rad.r0, cfg.bound_alpha, cc.f_norm2)}}},
                       {"matrix_psi", {{"a", rad_psi.a}, {"r0", rad_psi.r0}, {"tail_bound", arcones_tail_bound(cfg.arcones_q, cfg.m, rad_psi.a, rad_psi.r0, cfg.bound_alpha, cc.f_norm2)}}}}}});
  }
  write_text(dir / "chaos_variance.csv", csv.str());
  json norms = json::array();
  for (int k = 1; k <= q_eff; ++k) {
    const auto g = g_norm_bound_check(cc, k);
    norms.push_back({{"q", k}, {"g_norm2", g.g_norm2}, {"f_norm2", g.f_norm2}, {"holds", g.holds}});
  }
  rep["sections"]["chaos"] = {{"q_max_effective", q_eff}, {"per_degree", per_d}, {"g_norms", norms}, {"contraction", contraction_table(cfg.m)}};
  return rep;
}

inline json partition_diagnostics(const HsrPartition& p, const ExperimentConfig& cfg) {
  const auto cov = coverage_check(p, 20000, derive_seed(cfg.seed, 0xC0));
  json sep = json::object();
  for (auto s : {PairSampling::uniform, PairSampling::near}) {
    const auto rep = neighbor_separation(p, cfg.partition_pairs, derive_seed(cfg.seed, 0x5E), s);
    json worst = json::array();
    auto v = rep.violations;
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.distance < b.distance; });
    for (std::size_t i = 0; i < std::min<std::size_t>(10, v.size()); ++i)
      worst.push_back({{"a", v[i].a}, {"b", v[i].b}, {"distance_over_r", v[i].distance / p.r}});
    sep[s == PairSampling::near ? "near" : "uniform"] = {{"pairs", rep.pairs},
                                                         {"violations", rep.violations.size()},
                                                         {"min_distance_over_r", rep.min_distance_ratio},
                                                         {"max_diameter_over_r", rep.max_diameter_ratio},
                                                         {"neighbor_pairs_checked", rep.neighbor_pairs_checked},
                                                         {"max_neighbor_distance", rep.max_neighbor_distance},
                                                         {"worst", worst}};
  }
  json haus = json::array();
  for (auto i : sample_rectangles(p, 50, derive_seed(cfg.seed, 0x4A))) {
    const auto pr = project_and_rescale(p.rectangles[i], p.r);
    haus.push_back({{"index", i}, {"center_angles", p.rectangles[i].center_angles}, {"hausdorff", pr.hausdorff}, {"axis_error", pr.axis_error}});
  }
  return json{{"m", p.m},
              {"d", p.d},
              {"alpha", p.alpha},
              {"r", p.r},
              {"rbar", p.rbar},
              {"rectangles", p.rectangles.size()},
              {"count_over_d", static_cast<double>(p.rectangles.size()) / p.d},
              {"exceptional_volume", p.exceptional_volume},
              {"sphere_volume", kappa(p.m)},
              {"max_polar_step_over_rbar", p.max_polar_step_over_rbar},
              {"steps_above_half_rbar", p.steps_above_half_rbar},
              {"coverage",
               {{"samples", cov.samples},
                {"in_exceptional", cov.in_exceptional},
                {"multiply_covered", cov.multiply_covered},
                {"mc_exceptional_volume", cov.mc_exceptional_volume},
                {"mc_standard_error", cov.mc_standard_error}}},
              {"separation", sep},
              {"hausdorff", haus}};
}

inline json run_partition(const ExperimentConfig& cfg, const fs::path& dir) {
  json rep = report_envelope(cfg);
  json rows = json::array();
  for (int d : cfg.d) {
    const auto p = build_partition(cfg.m, d, cfg.partition_alpha());
    write_partition_csv(dir / ("partition_d" + std::to_string(d) + ".csv"), p);
    json diag = partition_diagnostics(p, cfg);
    write_json(dir / ("partition_d" + std::to_string(d) + "_diagnostics.json"), diag);
    diag.erase("hausdorff");
    double worst = 0.0;
    for (auto i : sample_rectangles(p, 50, derive_seed(cfg.seed, 0x4A))) worst = std::max(worst, project_and_rescale(p.rectangles[i], p.r).hausdorff);
    diag["worst_hausdorff"] = worst;
    rows.push_back(diag);
  }
  rep["sections"]["partition"] = rows;
  return rep;
}

inline json run_local_field(const ExperimentConfig& cfg, const fs::path& dir) {
  require(cfg.m == 1 || cfg.m == 2, "local-field: m must be 1 or 2");
  json rep = report_envelope(cfg);
  const GridSpec grid{cfg.m, 1.0, cfg.local_grid};
  const auto s = sample_limit_field(grid, derive_seed(cfg.seed, 0x1F), cfg.local_fields);
  write_field_csv(dir / "field_samples.csv", s, 100);
  const auto ck = field_covariance_check(s);
  std::vector<int> ds = cfg.d;
  if (ds.size() < 2) ds = {100, 1000, 10000};
  const auto conv = local_convergence(cfg.m, ds);
  const auto integ = integrability_check(0.5, cfg.m);
  const auto lv = limit_variance_mc(cfg.m, std::max(2, cfg.local_fields), derive_seed(cfg.seed, 0x11), cfg.local_spacing);
  json lim{{"fields", lv.n_fields},
           {"spacing", lv.spacing},
           {"mean", lv.mean},
           {"mean_se", lv.mean_se},
           {"expected_mean", lv.expected_mean},
           {"variance", lv.variance},
           {"variance_se", lv.variance_se},
           {"refinement_disagreements", lv.refinement_disagreements},
           {"widened", lv.widened}};
  if (cfg.m == 1) {
    const double kr = limit_variance_kac_rice_m1();
    lim["kac_rice_variance"] = kr;
    lim["relative_difference"] = std::abs(lv.variance - kr) / kr;
  }
  rep["sections"]["local_field"] = {
      {"grid", {{"m", grid.m}, {"length", grid.length}, {"points_per_axis", grid.points_per_axis}}},
      {"sampling", {{"draws", cfg.local_fields}, {"min_gram_eigenvalue", s.min_eigenvalue}, {"jitter_applied", s.jitter_applied},
                    {"max_z_cov", ck.max_z_cov}, {"max_z_variance", ck.max_z_variance}, {"max_z_cross", ck.max_z_cross}, {"max_abs_error", ck.max_abs_error}}},
      {"convergence", {{"d", conv.d}, {"sup_error", conv.sup_error}, {"slope", conv.slope}}},
      {"integrability", {{"delta", integ.delta}, {"value", integ.value}, {"refinement_rel", integ.refinement_rel}, {"small_radius_slope", integ.small_radius_slope}}},
      {"limit_count", lim}};
  return rep;
}

// Consolidated report: every acceptance criterion plus the analytic sections
// that make up the argument, and the consistency triangle.
inline json run_report(const ExperimentConfig& cfg, const fs::path& dir, bool user_campaign) {
  json rep = report_envelope(cfg);
  AcceptanceContext ctx(cfg.seed, cfg.threads);
  if (user_campaign)
    for (int d : cfg.d) ctx.store(run_monte_carlo(cfg.m, d, cfg.replicates, cfg.seed, cfg.scan, cfg.threads));
  bool all_pass = true;
  for (int id = 1; id <= static_cast<int>(all_criteria().size()); ++id) {
    const auto c = run_criterion(id, ctx);
    all_pass = all_pass && c.pass;
    rep["acceptance"].push_back(to_json(c));
  }
  // Monte Carlo campaigns gathered while evaluating the criteria
  json mc_rows = json::array();
  std::vector<const MonteCarloResult*> runs;
  for (auto [m, d] : std::vector<std::pair<int, int>>{{1, 100}, {1, 400}, {1, 1024}, {1, 1600}, {2, 4}}) {
    const auto& mc = ctx.monte_carlo(m, d, m == 1 ? 5000 : 500);
    runs.push_back(&mc);
    mc_rows.push_back(monte_carlo_section(mc, ctx.quadrature(m, d)));
  }
  if (user_campaign)
    for (int d : cfg.d)
      if (std::none_of(runs.begin(), runs.end(), [&](auto* r) { return r->m == cfg.m && r->d == d; })) {
        const auto& mc = ctx.monte_carlo(cfg.m, d, cfg.replicates);
        runs.push_back(&mc);
        mc_rows.push_back(monte_carlo_section(mc, ctx.quadrature(cfg.m, d)));
      }
  write_replicates_csv(dir / "replicates.csv", runs);
  rep["sections"]["monte_carlo"] = mc_rows;

  const auto vi = v_infinity(1, {100, 400, 1600, 10000, 40000});
  json seq = json::array();
  for (const auto& v : vi.sequence) seq.push_back(to_json(v));
  rep["sections"]["variance"] = {{"sequence", seq}, {"relative_differences", vi.relative_differences}, {"v_infinity_estimate", vi.estimate}, {"converging", vi.converging}};

  // chaos: partial sums, Arcones tail, contractions, chaos-variance convergence in d
  const auto cc = build_coefficients(1, 8);
  const int d0 = 400;
  double partial = 0.0;
  json sums = json::array();
  for (int q = 1; q <= 8; ++q) {
    partial += chaos_variance(q, d0, cc);
    sums.push_back({{"q", q}, {"partial_sum", partial}});
  }
  json vq_conv = json::array();
  for (int q : {2, 4}) {
    std::vector<double> vals;
    for (int d : {400, 1600, 6400}) vals.push_back(chaos_variance(q, d, cc));
    vq_conv.push_back({{"q", q}, {"d", {400, 1600, 6400}}, {"values", vals}, {"relative_change_last", std::abs(vals[2] - vals[1]) / vals[2]}});
  }
  const auto rad = arcones_radius(d0, 1, false);
  const auto rad_psi = arcones_radius(d0, 1, true);
  const double tail = arcones_tail_bound(cfg.arcones_q, 1, rad.a, rad.r0, cfg.bound_alpha);
  const double tail_psi = arcones_tail_bound(cfg.arcones_q, 1, rad_psi.a, rad_psi.r0, cfg.bound_alpha);
  const json contraction = contraction_table(1);
  bool contraction_decay = true;
  for (const auto& row : contraction) contraction_decay = contraction_decay && row["slope"].get<double>() < 0.0;
  const double v400 = ctx.quadrature(1, d0).variance_over_dm2;
  rep["sections"]["chaos"] = {{"d", d0}, {"partial_sums", sums}, {"contraction", contraction}};
  rep["sections"]["theorem_conditions"] = {
      {"chaos_variance_convergence", {{"rows", vq_conv}, {"holds", vq_conv[0]["relative_change_last"].get<double>() < 0.01 && vq_conv[1]["relative_change_last"].get<double>() < 0.01}}},
      {"summable_chaos_variances", {{"partial_sum_q8", partial}, {"total_variance", v400}, {"holds", partial <= 1.02 * v400}}},
      {"uniform_tail", {{"Q", cfg.arcones_q}, {"a", rad.a}, {"r0", rad.r0}, {"bound", tail}, {"matrix_psi", {{"a", rad_psi.a}, {"r0", rad_psi.r0}, {"bound", tail_psi}}}, {"holds", std::isfinite(tail) && rad.r0 < 1.0}}},
      {"contraction_decay", {{"holds", contraction_decay}}}};

  // consistency triangle at d = 400
  const auto& mc400 = ctx.monte_carlo(1, d0, 5000);
  const double mc_rel = std::abs(mc400.var_over_dm2 - v400) / v400;
  rep["sections"]["consistency_triangle"] = {{"d", d0},
                                             {"monte_carlo", mc400.var_over_dm2},
                                             {"quadrature", v400},
                                             {"parseval_q8", partial},
                                             {"mc_vs_quadrature_relative", mc_rel},
                                             {"mc_vs_quadrature_tolerance", 0.05},
                                             {"parseval_over_quadrature", partial / v400},
                                             {"parseval_tolerance", 1.02},
                                             {"holds", mc_rel <= 0.05 && partial <= 1.02 * v400}};

  ExperimentConfig pc = cfg;
  pc.m = 2;
  pc.alpha = -1.0;
  json parts = json::array();
  for (int d : {100, 1000, 10000}) {
    json diag = partition_diagnostics(build_partition(2, d, default_alpha(2)), pc);
    double worst = 0.0;
    for (const auto& h : diag["hausdorff"]) worst = std::max(worst, h["hausdorff"].get<double>());
    diag.erase("hausdorff");
    diag["worst_hausdorff"] = worst;
    parts.push_back(diag);
  }
  rep["sections"]["partition"] = parts;

  json local = json::array();
  for (int m : {1, 2}) {
    const auto conv = local_convergence(m, {100, 1000, 10000});
    local.push_back({{"m", m}, {"d", conv.d}, {"sup_error", conv.sup_error}, {"slope", conv.slope}});
  }
  const auto integ = integrability_check(0.5, 1);
  rep["sections"]["local_field"] = {{"convergence", local},
                                    {"integrability", {{"value", integ.value}, {"small_radius_slope", integ.small_radius_slope}}},
                                    {"limit_variance_kac_rice_m1", limit_variance_kac_rice_m1()}};
  rep["status"] = all_pass ? "ok" : "acceptance_failed";
  return rep;
}

}  // namespace kss
