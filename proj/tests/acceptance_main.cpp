// Acceptance suite: runs every bundled scenario and reports one line per
// acceptance criterion. Usage: acceptance <scenario_dir> [outdir]

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "kktrace/scenario.hpp"

namespace {

struct Criterion {
  const char* id;
  const char* description;
  std::vector<std::string> scenarios;
};

const std::vector<Criterion> kCriteria = {
    {"1", "spectrum oracle equivalence (flat vs discretized)", {"spectrum-oracle"}},
    {"2", "Weyl exponent n+ell-1 for flat U(1) and SU(2)",
     {"flat-u1-weyl", "flat-su2-weyl"}},
    {"3", "Weyl coefficient consistency across models and an E-sweep",
     {"weyl-coefficient"}},
    {"4", "holonomy singularities of the flux model", {"flat-u1-flux-holonomy"}},
    {"5", "Gutzwiller amplitude for the isolated variable-lapse orbit",
     {"varlapse-gutzwiller"}},
    {"6", "Poincare quotient determinant machinery", {"poincare-synthetic"}},
    {"7", "multiplicity factorization for flat SU(2)", {"flat-su2-factorization"}},
    {"8", "conservation suite (energy, charge, symplecticity, reversal)",
     {"conservation-suite"}},
    {"9", "positivity threshold m0 for a negative potential",
     {"positivity-threshold"}},
    {"10", "representation identities against brute-force enumeration",
     {"representation-identities"}},
};

}  // namespace

int main(int argc, char** argv) {
  std::string dir = argc > 1 ? argv[1] : "scenarios";
  std::string out = argc > 2 ? argv[2] : "acceptance_out";

  kktrace::RunOptions opts;
  opts.output_dir = out;

  std::map<std::string, kktrace::ScenarioResult> results;
  for (const auto& path : kktrace::list_scenarios(dir)) {
    auto r = kktrace::run_scenario(path, opts);
    results[r.name.empty() ? path : r.name] = r;
  }

  int failures = 0;
  for (const auto& crit : kCriteria) {
    bool pass = true;
    double seconds = 0;
    std::string detail;
    for (const auto& name : crit.scenarios) {
      auto it = results.find(name);
      if (it == results.end()) {
        pass = false;
        detail += " missing scenario " + name + ";";
        continue;
      }
      const auto& r = it->second;
      seconds += r.runtime_seconds;
      if (r.error) {
        pass = false;
        detail += " " + name + " error: " + r.error_message + ";";
        continue;
      }
      for (const auto& c : r.checks) {
        if (!c.pass) {
          pass = false;
          char buf[256];
          std::snprintf(buf, sizeof buf, " %s: %s=%.6g (want %s %.6g);",
                        name.c_str(), c.name.c_str(), c.value, c.cmp.c_str(),
                        c.threshold);
          detail += buf;
        }
      }
    }
    std::printf("ACCEPT %-2s %-55s %s [%.1f s]%s\n", crit.id, crit.description,
                pass ? "PASS" : "FAIL", seconds, detail.c_str());
    if (!pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
