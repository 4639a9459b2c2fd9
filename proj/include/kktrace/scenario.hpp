#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kktrace/util.hpp"

namespace kktrace {

struct Check {
  std::string name;
  double value = 0;
  double threshold = 0;
  std::string cmp;  // "<", "<=", ">=", "==", "|.-1|<"
  bool pass = false;
  std::string criterion;  // which acceptance criterion this serves
};

struct ScenarioResult {
  std::string name;
  std::string kind;
  bool pass = true;
  bool error = false;
  std::string error_message;
  std::vector<Check> checks;
  double runtime_seconds = 0;
  std::string summary_path;
};

struct RunOptions {
  std::string output_dir = "out";
  std::optional<std::uint64_t> seed_override;
  bool write_golden = false;
  std::string golden_dir;  // compare against goldens when non-empty
};

/// Execute one scenario file; writes CSV/JSON artifacts and a summary JSON.
/// Exit-code semantics: 0 pass, 2 falsified check, 1 execution error.
ScenarioResult run_scenario(const std::string& path, const RunOptions& opts);

int exit_code_for(const ScenarioResult& r);

/// Run every scenario file in the directory (sorted), aggregate results.
std::vector<ScenarioResult> verify_all(const std::string& scenario_dir,
                                       const RunOptions& opts);

/// Numeric comparison of two summary JSONs at 1e-9; returns mismatched field
/// paths (runtime and artifact fields are ignored).
std::vector<std::string> compare_summaries(const std::string& got_path,
                                           const std::string& golden_path);

std::vector<std::string> list_scenarios(const std::string& scenario_dir);

}  // namespace kktrace
