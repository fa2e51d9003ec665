#include "dkf/cli.hpp"

#include "dkf/gains_io.hpp"
#include "dkf/metrics_io.hpp"
#include "dkf/observability.hpp"
#include "dkf/scenario_io.hpp"
#include "dkf/simulator.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <optional>

namespace dkf::cli {

namespace {

/// Loads and validates; prints the problem and returns nullopt on failure.
std::optional<StateSpaceNetwork> load_valid(const std::string& path, std::ostream& err) {
  StateSpaceNetwork model;
  try {
    model = load_scenario(path);
  } catch (const ScenarioError& e) {
    err << "error: " << e.what() << '\n';
    return std::nullopt;
  }
  const ValidationReport report = validate(model);
  if (!report.ok()) {
    err << "error: " << path << " is not a valid scenario:\n";
    for (const auto& v : report.violations) err << "  - " << v << '\n';
    return std::nullopt;
  }
  return model;
}

bool write_text(const std::string& path, const std::string& text, std::ostream& err) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    err << "error: cannot write " << path << '\n';
    return false;
  }
  f << text;
  return static_cast<bool>(f);
}

void print_steady_state(const SteadyState& ss, std::ostream& out) {
  out << "steady state: converged=" << (ss.converged ? "true" : "false") << " iterations=" << ss.iterations
      << (ss.diverged ? " (diverged)" : "") << '\n';
  out << "agent  spectral_radius  trace_P_plus\n";
  out << std::setprecision(9);
  for (std::size_t i = 0; i < ss.K.size(); ++i) {
    out << std::setw(5) << (i + 1) << "  " << std::setw(15) << ss.spectral_radius[i] << "  " << std::setw(12)
        << ss.P_plus[i].trace() << (ss.spectral_radius[i] < 1.0 ? "" : "  (unstable)") << '\n';
  }
}

}  // namespace

int cmd_check(const std::string& scenario_path, const std::string& json_path, bool full, std::ostream& out,
              std::ostream& err) {
  auto model = load_valid(scenario_path, err);
  if (!model) return kInputError;
  const ObservabilityReport report = analyze(*model);
  const std::string text = to_json(report, full).dump(2) + "\n";
  out << text;
  if (!json_path.empty() && !write_text(json_path, text, err)) return kInputError;
  if (!report.connected) err << "note: communication graph is not connected\n";
  for (int agent : report.unobservable_agents()) {
    err << "agent " << agent << " is not distributedly observable\n";
  }
  return report.all_agents_observable ? kSuccess : kAnalysisNegative;
}

int cmd_gains(const GainsOptions& o, std::ostream& out, std::ostream& err) {
  if (o.steps < 1 && !o.steady_state) {
    err << "error: pass --steps K and/or --steady-state\n";
    return kInputError;
  }
  auto model = load_valid(o.scenario_path, err);
  if (!model) return kInputError;

  GainArtifact artifact;
  artifact.scenario_hash = scenario_hash(*model);
  try {
    if (o.steps >= 1) {
      artifact.schedule = riccati_recursion(*model, o.steps);
    } else {
      artifact.schedule.structures = build_innovation_structures(*model);
    }
    artifact.schedule.steady_state = steady_state(*model, {o.tol, o.max_iter});
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kAnalysisNegative;
  }
  const SteadyState& ss = *artifact.schedule.steady_state;
  for (int agent : ss.unobservable_agents) {
    err << "warning: agent " << agent << " is not distributedly observable; gains may not stabilize it\n";
  }
  if (!ss.converged) err << "warning: steady-state recursion did not converge\n";

  if (o.steps >= 1) out << "finite-horizon gains: " << o.steps << " steps\n";
  print_steady_state(ss, out);
  if (!o.out_path.empty()) {
    try {
      save_gains(o.out_path, artifact);
    } catch (const GainsFormatError& e) {
      err << "error: " << e.what() << '\n';
      return kInputError;
    }
    out << "wrote " << o.out_path << '\n';
  }
  return kSuccess;
}

int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err) {
  if (o.steps < 1 || o.runs < 1) {
    err << "error: --steps and --runs must be at least 1\n";
    return kInputError;
  }
  auto model = load_valid(o.scenario_path, err);
  if (!model) return kInputError;
  const std::string hash = scenario_hash(*model);

  const ObservabilityReport report = analyze(*model);
  if (!report.all_agents_observable && !o.allow_unobservable) {
    for (int agent : report.unobservable_agents()) {
      err << "agent " << agent << " is not distributedly observable\n";
    }
    err << "error: refusing to simulate; pass --allow-unobservable to proceed\n";
    return kAnalysisNegative;
  }

  const GainMode mode = o.steady_state_gains ? GainMode::steady_state : GainMode::optimal;
  GainSchedule schedule;
  try {
    if (!o.gains_path.empty()) {
      GainArtifact artifact = load_gains(o.gains_path);
      if (artifact.scenario_hash != hash) {
        err << "error: gains computed for different scenario\n";
        return kInputError;
      }
      attach_model(artifact.schedule, *model);
      schedule = std::move(artifact.schedule);
    } else if (mode == GainMode::optimal) {
      schedule = riccati_recursion(*model, o.steps);
    } else {
      schedule.structures = build_innovation_structures(*model);
      schedule.steady_state = steady_state(*model);
    }
  } catch (const GainsFormatError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kAnalysisNegative;
  }

  GainTable table;
  try {
    table = gain_table(schedule, mode, o.steps);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  const MetricsSummary summary = monte_carlo(*model, table, {o.runs, o.seed, o.threads});
  const std::string csv = metrics_csv(summary);
  if (o.csv_path.empty()) {
    out << csv;
  } else if (!write_text(o.csv_path, csv, err)) {
    return kInputError;
  }

  nlohmann::json doc = metrics_to_json(summary);
  doc["scenario_hash"] = hash;
  doc["gain_mode"] = mode == GainMode::optimal ? "optimal" : "steady_state";
  doc["all_agents_observable"] = report.all_agents_observable;
  if (schedule.steady_state) {
    doc["steady_state"] = {{"converged", schedule.steady_state->converged},
                           {"diverged", schedule.steady_state->diverged},
                           {"iterations", schedule.steady_state->iterations},
                           {"spectral_radius", schedule.steady_state->spectral_radius}};
  }
  if (!o.json_path.empty()) {
    if (!write_text(o.json_path, doc.dump(2) + "\n", err)) return kInputError;
  } else if (!o.csv_path.empty()) {
    out << doc.dump(2) << '\n';
  }
  return kSuccess;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributed consensus+innovations Kalman filtering: observability, gain synthesis, simulation"};
  app.require_subcommand(1);

  std::string check_path, check_json;
  bool check_full = false;
  auto* check = app.add_subcommand("check", "Distributed observability report; exit 1 if any agent fails");
  check->add_option("scenario", check_path, "Scenario JSON")->required();
  check->add_option("--json", check_json, "Also write the report to this file");
  check->add_flag("--full", check_full, "Include dense distributed observability matrices");

  GainsOptions g;
  auto* gains = app.add_subcommand("gains", "Synthesize optimal gains offline");
  gains->add_option("scenario", g.scenario_path, "Scenario JSON")->required();
  gains->add_option("--steps", g.steps, "Finite-horizon steps to store");
  gains->add_flag("--steady-state", g.steady_state, "Compute only the steady-state section");
  gains->add_option("--out", g.out_path, "Gains artifact to write");
  gains->add_option("--tol", g.tol, "Steady-state relative tolerance");
  gains->add_option("--max-iter", g.max_iter, "Steady-state iteration cap");

  SimulateOptions s;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo simulation of the distributed estimator");
  sim->add_option("scenario", s.scenario_path, "Scenario JSON")->required();
  sim->add_option("--gains", s.gains_path, "Precomputed gains artifact");
  sim->add_option("--steps", s.steps, "Horizon K");
  sim->add_option("--runs", s.runs, "Monte Carlo runs");
  sim->add_option("--seed", s.seed, "Base seed; run r uses seed + r");
  sim->add_option("--csv", s.csv_path, "CSV output (stdout if omitted)");
  sim->add_option("--json", s.json_path, "JSON summary output");
  sim->add_option("--threads", s.threads, "Worker threads (0 = auto; DKF_THREADS caps)");
  sim->add_flag("--allow-unobservable", s.allow_unobservable, "Simulate even if an agent is not observable");
  sim->add_flag("--steady-state-gains", s.steady_state_gains, "Use the steady-state gain at every step");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  if (*check) return cmd_check(check_path, check_json, check_full, out, err);
  if (*gains) return cmd_gains(g, out, err);
  return cmd_simulate(s, out, err);
}

}  // namespace dkf::cli
