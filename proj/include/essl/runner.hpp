#pragma once

#include <iosfwd>
#include <map>

#include "essl/config.hpp"

namespace essl::run {

struct RunResult {
  std::filesystem::path output_dir;
  std::map<std::string, double> final_metrics;
  int exit_code = 0;
};

/// Executes one experiment from a validated config: writes the echoed
/// config, a metrics CSV, checkpoints and a plain-text summary into the
/// output directory and returns the final metric values.
RunResult run_experiment(const cfg::Config& config);

/// Aligned final-metric table with deltas against the first run.
/// Returns nonzero when runs are missing shared metrics.
int compare_runs(const std::vector<std::string>& dirs, std::ostream& out);

/// Resolves the effective output directory (ESSL_OUTPUT_ROOT env prefix for
/// relative paths).
std::filesystem::path resolve_output_dir(const std::string& configured);

}  // namespace essl::run
