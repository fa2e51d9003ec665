#pragma once

#include "dkf/simulator.hpp"

#include <nlohmann/json.hpp>

#include <ostream>
#include <string>

namespace dkf {

/// Columns: k, agent, empirical_mse, analytic_trace_P_plus, centralized_trace_P_plus.
void write_metrics_csv(std::ostream& out, const MetricsSummary& summary);
std::string metrics_csv(const MetricsSummary& summary);

nlohmann::json metrics_to_json(const MetricsSummary& summary);

}  // namespace dkf
