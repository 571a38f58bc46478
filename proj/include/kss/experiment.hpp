#pragma once

// Monte Carlo campaigns over KSS systems plus the JSON and CSV writers used by the CLI.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "kss/chaos.hpp"
#include "kss/covariance.hpp"
#include "kss/errors.hpp"
#include "kss/kac_rice.hpp"
#include "kss/kss_model.hpp"
#include "kss/local_field.hpp"
#include "kss/parallel.hpp"
#include "kss/root_locator.hpp"
#include "kss/sphere_partition.hpp"
#include "kss/stats.hpp"

namespace kss {

using nlohmann::json;

inline constexpr const char* kReportSchemaVersion = "1.0.0";

struct ExperimentConfig {
  std::string kind = "simulate";
  int m = 1;
  std::vector<int> d = {400};
  long replicates = 1000;
  std::uint64_t seed = 20240601;
  double alpha = -1.0;  // partition exponent; negative selects min(0.4, 0.9/m)
  double constant = 10.0;  // decay-bound constant
  double bound_alpha = 0.2;  // Gaussian decay rate in the small-angle bounds
  int q_max = 8;
  int nodes = 128;
  double z_max = 10.0;
  long n_mc = 20000;  // determinant Monte Carlo for m >= 2
  long chaos_n_mc = 1000000;  // f_beta Monte Carlo for m >= 2
  int arcones_q = 10;
  long partition_pairs = 1000;
  int local_fields = 10000;
  int local_grid = 11;
  double local_spacing = 0.01;
  int threads = default_threads();
  std::string out = "out";
  ScanConfig scan;

  double partition_alpha() const { return alpha > 0 ? alpha : default_alpha(m); }

  void validate() const {
    static const std::vector<std::string> kinds = {"simulate", "kac-rice", "chaos", "partition", "local-field", "report"};
    require(std::find(kinds.begin(), kinds.end(), kind) != kinds.end(), "config: unknown experiment kind '" + kind + "'");
    require(m >= 1 && m <= 4, "config: m must lie in 1..4");
    require(!d.empty(), "config: at least one degree is required");
    for (int v : d) require(v >= 1, "config: degrees must be >= 1");
    require(replicates >= 1, "config: replicates must be >= 1");
    require(q_max >= 1 && q_max <= 12, "config: q_max must lie in 1..12");
    require(nodes >= 16 && z_max > 0.0, "config: need nodes >= 16 and z_max > 0");
    require(n_mc >= 2 && chaos_n_mc >= 2, "config: Monte Carlo sizes must be >= 2");
    require(arcones_q >= 1, "config: arcones_q must be >= 1");
    require(partition_pairs >= 1 && local_fields >= 2 && local_grid >= 2, "config: invalid diagnostic sizes");
    require(local_spacing > 0.0, "config: local_spacing must be > 0");
    require(threads >= 1, "config: threads must be >= 1");
    require(constant > 0.0 && bound_alpha > 0.0 && bound_alpha < 0.5, "config: invalid decay-bound parameters");
    scan.validate();
  }
};

inline json to_json(const ExperimentConfig& c) {
  return json{{"kind", c.kind},
              {"m", c.m},
              {"d", c.d},
              {"replicates", c.replicates},
              {"seed", c.seed},
              {"alpha", c.partition_alpha()},
              {"constant", c.constant},
              {"bound_alpha", c.bound_alpha},
              {"q_max", c.q_max},
              {"quadrature", {{"nodes", c.nodes}, {"z_max", c.z_max}, {"n_mc", c.n_mc}}},
              {"chaos_n_mc", c.chaos_n_mc},
              {"arcones_q", c.arcones_q},
              {"partition_pairs", c.partition_pairs},
              {"local_field", {{"fields", c.local_fields}, {"grid", c.local_grid}, {"spacing", c.local_spacing}}},
              {"threads", c.threads},
              {"out", c.out},
              {"scan",
               {{"oversample", c.scan.oversample},
                {"refine_depth", c.scan.refine_depth},
                {"newton_tol", c.scan.newton_tol},
                {"dedup_radius", c.scan.dedup_radius}}}};
}

// Merge a JSON document into a config. Unknown keys are rejected so typos do not pass silently.
inline void apply_json(ExperimentConfig& c, const json& j) {
  require(j.is_object(), "config: top level must be an object");
  for (const auto& [key, v] : j.items()) {
    if (key == "kind") c.kind = v.get<std::string>();
    else if (key == "m") c.m = v.get<int>();
    else if (key == "d") c.d = v.is_array() ? v.get<std::vector<int>>() : std::vector<int>{v.get<int>()};
    else if (key == "replicates") c.replicates = v.get<long>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "alpha") c.alpha = v.get<double>();
    else if (key == "constant") c.constant = v.get<double>();
    else if (key == "bound_alpha") c.bound_alpha = v.get<double>();
    else if (key == "q_max") c.q_max = v.get<int>();
    else if (key == "chaos_n_mc") c.chaos_n_mc = v.get<long>();
    else if (key == "arcones_q") c.arcones_q = v.get<int>();
    else if (key == "partition_pairs") c.partition_pairs = v.get<long>();
    else if (key == "threads") c.threads = v.get<int>();
    else if (key == "out") c.out = v.get<std::string>();
    else if (key == "quadrature") {
      for (const auto& [k2, v2] : v.items()) {
        if (k2 == "nodes") c.nodes = v2.get<int>();
        else if (k2 == "z_max") c.z_max = v2.get<double>();
        else if (k2 == "n_mc") c.n_mc = v2.get<long>();
        else throw PreconditionError("config: unknown key quadrature." + k2);
      }
    } else if (key == "local_field") {
      for (const auto& [k2, v2] : v.items()) {
        if (k2 == "fields") c.local_fields = v2.get<int>();
        else if (k2 == "grid") c.local_grid = v2.get<int>();
        else if (k2 == "spacing") c.local_spacing = v2.get<double>();
        else throw PreconditionError("config: unknown key local_field." + k2);
      }
    } else if (key == "scan") {
      for (const auto& [k2, v2] : v.items()) {
        if (k2 == "oversample") c.scan.oversample = v2.get<int>();
        else if (k2 == "refine_depth") c.scan.refine_depth = v2.get<int>();
        else if (k2 == "newton_tol") c.scan.newton_tol = v2.get<double>();
        else if (k2 == "dedup_radius") c.scan.dedup_radius = v2.get<double>();
        else throw PreconditionError("config: unknown key scan." + k2);
      }
    } else {
      throw PreconditionError("config: unknown key " + key);
    }
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("config: cannot open " + path);
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw PreconditionError(std::string("config: parse error: ") + e.what());
  }
  ExperimentConfig c;
  try {
    apply_json(c, j);
  } catch (const json::exception& e) {
    throw PreconditionError(std::string("config: type error: ") + e.what());
  }
  return c;
}

struct ReplicateRecord {
  std::uint64_t seed = 0;
  int d = 0, m = 0;
  long count = 0;
  bool certified = true;
  double residual_max = 0.0;
  double wall_time_ms = 0.0;
};

inline std::uint64_t replicate_seed(std::uint64_t base, int d, long r) {
  return derive_seed(derive_seed(base, static_cast<std::uint64_t>(d)), static_cast<std::uint64_t>(r));
}

inline RootCount count_system(const KssSystem& sys, const ScanConfig& cfg) {
  const HomogeneousSystem h = homogenize(sys);
  if (sys.m == 1) return count_roots_circle(h, cfg);
  if (sys.m == 2) return count_roots_sphere_m2(h, cfg);
  throw PreconditionError("count_system: root counting is available for m = 1 and m = 2");
}

struct MonteCarloResult {
  int m = 0, d = 0;
  std::vector<ReplicateRecord> records;
  std::vector<double> counts;        // included replicates
  std::vector<double> standardized;  // (N - d^{m/2}) / d^{m/4}
  long excluded = 0;
  SampleSummary count_summary;
  SampleSummary standardized_summary;
  double expected_mean = 0.0;
  double mean_z = 0.0;
  double var_over_dm2 = 0.0;
  double wall_time_s = 0.0;
};

// Counts R independent systems. Replicate r of degree d draws its system from
// a seed derived only from (seed, d, r), so the campaign is reproducible and
// independent of the thread count.
inline MonteCarloResult run_monte_carlo(int m, int d, long replicates, std::uint64_t seed, const ScanConfig& scan,
                                        int threads) {
  require(m == 1 || m == 2, "run_monte_carlo: m must be 1 or 2");
  require(replicates >= 2, "run_monte_carlo: need at least two replicates");
  MonteCarloResult res;
  res.m = m;
  res.d = d;
  res.records.resize(replicates);
  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(replicates, threads, [&](long r) {
    const auto s = std::chrono::steady_clock::now();
    const std::uint64_t rs = replicate_seed(seed, d, r);
    const RootCount rc = count_system(sample_system(m, d, rs), scan);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - s).count();
    res.records[r] = {rs, d, m, rc.count, rc.certified, rc.residual_max, ms};
  });
  res.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double dm2 = std::pow(static_cast<double>(d), m / 2.0), dm4 = std::pow(static_cast<double>(d), m / 4.0);
  for (const auto& rec : res.records) {
    // Only the certified circle scan can flag a replicate; the m = 2 counter is never certified.
    if (m == 1 && !rec.certified) {
      ++res.excluded;
      continue;
    }
    res.counts.push_back(static_cast<double>(rec.count));
    res.standardized.push_back((rec.count - dm2) / dm4);
  }
  if (res.excluded > replicates / 100)
    throw NumericalError("run_monte_carlo: more than 1% of replicates were uncertified (" + std::to_string(res.excluded) + ")");
  res.count_summary = summarize(res.counts);
  res.standardized_summary = summarize(res.standardized);
  res.expected_mean = expected_count(m, d);
  res.mean_z = (res.count_summary.mean - res.expected_mean) / res.count_summary.mean_se;
  res.var_over_dm2 = res.count_summary.variance / dm2;
  return res;
}

inline json to_json(const SampleSummary& s) {
  return json{{"n", s.n},
              {"mean", s.mean},
              {"variance", s.variance},
              {"sd", s.sd},
              {"skewness", s.skewness},
              {"excess_kurtosis", s.excess_kurtosis},
              {"mean_se", s.mean_se},
              {"mean_ci95", {s.mean_ci_lo, s.mean_ci_hi}},
              {"variance_se", s.variance_se},
              {"variance_ci95", {s.variance_ci_lo, s.variance_ci_hi}}};
}

inline json to_json(const NormalityVerdict& v) {
  return json{{"n", v.n},
              {"v_hat", v.v_hat},
              {"v_hat_source", "variance_quadrature"},
              {"lattice_spacing", v.lattice_spacing},
              {"ks_variance", v.ks_variance},
              {"ks_statistic", v.ks.statistic},
              {"ks_p_value", v.ks.p_value},
              {"skewness", v.skewness},
              {"skewness_z", v.skewness_z},
              {"excess_kurtosis", v.excess_kurtosis},
              {"kurtosis_z", v.kurtosis_z},
              {"ks_pass", v.ks_pass},
              {"moments_pass", v.moments_pass},
              {"pass", v.pass}};
}

inline json to_json(const VarianceEstimate& v, bool with_table = false) {
  json j{{"m", v.m},
         {"d", v.d},
         {"variance_over_dm2", v.variance_over_dm2},
         {"mc_error", v.mc_error},
         {"nodes", v.quadrature_nodes},
         {"Z_max", v.z_max},
         {"h_independent", v.h_independent},
         {"refinement_change", v.refinement_change}};
  if (with_table) {
    json t = json::array();
    for (const auto& n : v.table)
      t.push_back({{"z", n.z}, {"h", n.h}, {"h_error", n.h_error}, {"integrand", n.integrand}});
    j["table"] = t;
  }
  return j;
}

// Monte Carlo section with the split-sample rule: V_hat always comes from the
// quadrature, never from the sample under test.
inline json monte_carlo_section(const MonteCarloResult& mc, const VarianceEstimate& vq) {
  json j{{"m", mc.m},
         {"d", mc.d},
         {"replicates", static_cast<long>(mc.records.size())},
         {"excluded", mc.excluded},
         {"expected_mean", mc.expected_mean},
         {"count", to_json(mc.count_summary)},
         {"standardized", to_json(mc.standardized_summary)},
         {"mean_z", mc.mean_z},
         {"var_over_dm2", mc.var_over_dm2},
         {"quadrature_variance", vq.variance_over_dm2},
         {"variance_relative_difference", std::abs(mc.var_over_dm2 - vq.variance_over_dm2) / vq.variance_over_dm2},
         {"wall_time_s", mc.wall_time_s}};
  if (mc.standardized.size() >= 500) {
    const double spacing = 2.0 / std::pow(static_cast<double>(mc.d), mc.m / 4.0);
    j["normality"] = to_json(normality_suite(mc.standardized, vq.variance_over_dm2, spacing));
  }
  return j;
}

inline QuadratureConfig quadrature_config(const ExperimentConfig& c) {
  QuadratureConfig q;
  q.nodes = c.nodes;
  q.z_max = c.z_max;
  q.n_mc = c.n_mc;
  q.seed = derive_seed(c.seed, 0x9A);
  return q;
}

// ---- file writers ------------------------------------------------------------

inline std::filesystem::path ensure_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

inline void write_replicates_csv(const std::filesystem::path& path, const std::vector<const MonteCarloResult*>& runs) {
  std::ostringstream s;
  s << "seed,d,m,count,certified,residual_max,wall_time_ms\n";
  for (const auto* run : runs)
    for (const auto& r : run->records)
      s << r.seed << ',' << r.d << ',' << r.m << ',' << r.count << ',' << (r.certified ? 1 : 0) << ',' << fmt(r.residual_max)
        << ',' << fmt(r.wall_time_ms) << '\n';
  write_text(path, s.str());
}

inline void write_profile_csv(const std::filesystem::path& path, int d, int m, int points) {
  std::ostringstream s;
  s << "theta,z,d,A,B,C,D,sigma2,rho,psi\n";
  for (int i = 1; i <= points; ++i) {
    const double th = (std::numbers::pi / 2.0) * i / (points + 1.0);
    const auto p = profile(th, d);
    s << fmt(th) << ',' << fmt(p.z()) << ',' << d << ',' << fmt(p.A) << ',' << fmt(p.B) << ',' << fmt(p.C) << ','
      << fmt(p.D) << ',' << fmt(p.sigma2) << ',' << fmt(p.rho) << ',' << fmt(arcones_psi(th, d, m)) << '\n';
  }
  write_text(path, s.str());
}

inline json to_json(const ChaosCoefficients& cc) {
  json b = json::array(), f = json::array();
  for (const auto& [a, v] : cc.b) b.push_back({{"alpha", a}, {"value", v}});
  for (const auto& [beta, e] : cc.f) {
    const auto raw = cc.f_raw.at(beta);
    f.push_back({{"beta", beta}, {"value", e.value}, {"error", e.error}, {"raw", raw.value}});
  }
  // checksum of the RNG configuration that produced the Monte Carlo coefficients
  const std::uint64_t checksum = derive_seed(derive_seed(cc.seed, static_cast<std::uint64_t>(cc.n_mc)),
                                             static_cast<std::uint64_t>(cc.m * 100 + cc.q_max));
  return json{{"m", cc.m},
              {"q_max", cc.q_max},
              {"b", b},
              {"f", f},
              {"f_norm2", cc.f_norm2},
              {"rng", {{"seed", cc.seed}, {"n_mc", cc.n_mc}, {"checksum", checksum}}}};
}

inline void write_partition_csv(const std::filesystem::path& path, const HsrPartition& p) {
  std::ostringstream s;
  s << "index_path,center_angles,radii\n";
  auto join = [](const auto& v) {
    std::ostringstream o;
    for (std::size_t i = 0; i < v.size(); ++i) o << (i ? ";" : "") << fmt(v[i]);
    return o.str();
  };
  for (const auto& r : p.rectangles) s << join(r.index_path) << ',' << join(r.center_angles) << ',' << join(r.radii) << '\n';
  write_text(path, s.str());
}

inline void write_field_csv(const std::filesystem::path& path, const FieldSamples& f, int max_draws) {
  std::ostringstream s;
  s << "point";
  for (int k = 0; k < static_cast<int>(f.points.front().size()); ++k) s << ",u" << k;
  s << ",draw,coordinate,value\n";
  const int draws = std::min<int>(max_draws, static_cast<int>(f.values.size()));
  for (int r = 0; r < draws; ++r)
    for (int l = 0; l < f.m; ++l)
      for (std::size_t i = 0; i < f.points.size(); ++i) {
        s << i;
        for (int k = 0; k < f.points[i].size(); ++k) s << ',' << fmt(f.points[i](k));
        s << ',' << r << ',' << l << ',' << fmt(f.values[r](l, static_cast<Eigen::Index>(i))) << '\n';
      }
  write_text(path, s.str());
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

inline json report_envelope(const ExperimentConfig& c) {
  return json{{"schema_version", kReportSchemaVersion},
              {"kind", c.kind},
              {"generated_at", utc_timestamp()},
              {"config", to_json(c)},
              {"sections", json::object()},
              {"acceptance", json::array()},
              {"missing_sections", json::array()},
              {"status", "ok"}};
}

}  // namespace kss
