#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dkf::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kSuccess = 0, kAnalysisNegative = 1, kInputError = 2 };

/// Entry point for `dkf check | gains | simulate`. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cmd_check(const std::string& scenario_path, const std::string& json_path, bool full, std::ostream& out,
              std::ostream& err);

struct GainsOptions {
  std::string scenario_path;
  std::string out_path;
  int steps = 0;
  bool steady_state = false;
  double tol = 1e-10;
  int max_iter = 10000;
};
int cmd_gains(const GainsOptions& options, std::ostream& out, std::ostream& err);

struct SimulateOptions {
  std::string scenario_path;
  std::string gains_path;
  std::string csv_path;
  std::string json_path;
  int steps = 50;
  int runs = 1000;
  unsigned long long seed = 0;
  unsigned threads = 0;
  bool allow_unobservable = false;
  bool steady_state_gains = false;
};
int cmd_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err);

}  // namespace dkf::cli
