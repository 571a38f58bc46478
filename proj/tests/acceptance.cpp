// Acceptance runner: `kss_acceptance [--criterion N] [--json]`. Prints one
// PASS/FAIL line per criterion; the exit status is nonzero if any fails.

#include <CLI11.hpp>
#include <iostream>

#include "kss/acceptance.hpp"

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int criterion = 0;
  bool as_json = false;
  std::uint64_t seed = 20240601;
  app.add_option("--criterion", criterion, "criterion id (1-10); all when omitted")->check(CLI::Range(0, 10));
  app.add_option("--seed", seed, "base seed");
  app.add_flag("--json", as_json, "print the evidence for each criterion");
  CLI11_PARSE(app, argc, argv);

  kss::AcceptanceContext ctx(seed);
  bool all = true;
  const int lo = criterion ? criterion : 1, hi = criterion ? criterion : 10;
  for (int id = lo; id <= hi; ++id) {
    const auto r = kss::run_criterion(id, ctx);
    all = all && r.pass;
    std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << r.name << "\n";
    if (as_json || !r.pass) std::cout << r.detail.dump(2) << "\n";
  }
  return all ? 0 : 1;
}
