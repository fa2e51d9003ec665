#include "dkf/metrics_io.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace dkf {

void write_metrics_csv(std::ostream& out, const MetricsSummary& s) {
  out << "k,agent,empirical_mse,analytic_trace_P_plus,centralized_trace_P_plus\n";
  out << std::setprecision(17);
  for (std::size_t k = 0; k < s.empirical_mse.size(); ++k) {
    for (std::size_t i = 0; i < s.empirical_mse[k].size(); ++i) {
      out << k << ',' << (i + 1) << ',' << s.empirical_mse[k][i] << ',' << s.analytic_trace[k][i] << ','
          << s.centralized_trace[k] << '\n';
    }
  }
}

std::string metrics_csv(const MetricsSummary& summary) {
  std::ostringstream os;
  write_metrics_csv(os, summary);
  return os.str();
}

nlohmann::json metrics_to_json(const MetricsSummary& s) {
  using nlohmann::json;
  json whiteness = json::array();
  double max_measurement_z = 0.0;
  double max_consensus_z = 0.0;
  for (const auto& w : s.whiteness) {
    whiteness.push_back({{"agent", w.agent},
                         {"component", w.component},
                         {"kind", w.consensus ? "consensus" : "measurement"},
                         {"lag1_correlation", w.correlation},
                         {"z_score", w.z_score}});
    double& slot = w.consensus ? max_consensus_z : max_measurement_z;
    slot = std::max(slot, std::abs(w.z_score));
  }
  json final_mse = json::array();
  json final_trace = json::array();
  if (!s.empirical_mse.empty()) {
    for (double v : s.empirical_mse.back()) final_mse.push_back(v);
    for (double v : s.analytic_trace.back()) final_trace.push_back(v);
  }
  return json{{"runs", s.runs},
              {"horizon", s.horizon},
              {"base_seed", s.base_seed},
              {"agents", s.agents},
              {"spectral_radius", s.spectral_radius},
              {"final_empirical_mse", std::move(final_mse)},
              {"final_analytic_trace_P_plus", std::move(final_trace)},
              {"final_centralized_trace_P_plus", s.centralized_trace.empty() ? 0.0 : s.centralized_trace.back()},
              {"whiteness",
               {{"max_abs_z_measurement", max_measurement_z},
                {"max_abs_z_consensus", max_consensus_z},
                {"components", std::move(whiteness)}}}};
}

}  // namespace dkf
