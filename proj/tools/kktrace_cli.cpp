#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>

#include "kktrace/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"kktrace: stationary Kaluza-Klein trace-formula toolkit"};

  std::string scenario_path;
  std::string outdir = "out";
  std::string scenario_dir;
  std::string golden_dir;
  bool do_verify_all = false;
  bool do_list = false;
  bool write_golden = false;
  std::uint64_t seed = 0;
  bool seed_set = false;

  app.add_option("scenario", scenario_path, "Scenario JSON file to run");
  app.add_option("--out", outdir, "Output directory (default: out)");
  app.add_option("--scenario-dir", scenario_dir,
                 "Directory of bundled scenarios (default: $KKTRACE_SCENARIO_DIR or ./scenarios)");
  app.add_option("--golden-dir", golden_dir,
                 "Golden summary directory for comparison");
  app.add_flag("--verify-all", do_verify_all, "Run every bundled scenario");
  app.add_flag("--list-scenarios", do_list, "List bundled scenarios");
  app.add_flag("--write-golden", write_golden,
               "Write golden summaries instead of comparing");
  auto* seed_opt =
      app.add_option("--seed", seed, "Override the scenario RNG seed");

  CLI11_PARSE(app, argc, argv);
  seed_set = seed_opt->count() > 0;

  if (scenario_dir.empty()) {
    if (const char* env = std::getenv("KKTRACE_SCENARIO_DIR")) scenario_dir = env;
    else scenario_dir = "scenarios";
  }
  if (golden_dir.empty() && (do_verify_all || write_golden)) {
    std::string candidate = scenario_dir + "/golden";
    if (write_golden || std::filesystem::is_directory(candidate))
      golden_dir = candidate;
  }

  kktrace::RunOptions opts;
  opts.output_dir = outdir;
  if (seed_set) opts.seed_override = seed;
  opts.write_golden = write_golden;
  opts.golden_dir = golden_dir;

  try {
    if (do_list) {
      for (const auto& s : kktrace::list_scenarios(scenario_dir))
        std::printf("%s\n", s.c_str());
      return 0;
    }
    if (do_verify_all) {
      auto results = kktrace::verify_all(scenario_dir, opts);
      int worst = 0;
      for (const auto& r : results) {
        std::printf("%-28s %-22s %s", r.name.c_str(), r.kind.c_str(),
                    r.error ? "ERROR" : (r.pass ? "PASS" : "FAIL"));
        if (r.error) std::printf("  (%s)", r.error_message.c_str());
        std::printf("  [%.1f s]\n", r.runtime_seconds);
        for (const auto& c : r.checks)
          if (!c.pass)
            std::printf("    failed: %s = %.6g (%s %.6g) [criterion %s]\n",
                        c.name.c_str(), c.value, c.cmp.c_str(), c.threshold,
                        c.criterion.c_str());
        worst = std::max(worst, kktrace::exit_code_for(r));
      }
      return worst;
    }
    if (scenario_path.empty()) {
      std::fprintf(stderr, "no scenario given (see --help)\n");
      return 1;
    }
    auto r = kktrace::run_scenario(scenario_path, opts);
    if (r.error) {
      std::fprintf(stderr, "error: %s\n", r.error_message.c_str());
      return 1;
    }
    for (const auto& c : r.checks)
      std::printf("%-36s %s  value=%.8g %s %.8g  [criterion %s]\n",
                  c.name.c_str(), c.pass ? "PASS" : "FAIL", c.value,
                  c.cmp.c_str(), c.threshold, c.criterion.c_str());
    std::printf("%s: %s [%.1f s]\n", r.name.c_str(), r.pass ? "PASS" : "FAIL",
                r.runtime_seconds);
    return kktrace::exit_code_for(r);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
