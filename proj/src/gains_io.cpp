#include "dkf/gains_io.hpp"

#include "dkf/scenario_io.hpp"

#include <fstream>
#include <sstream>

namespace dkf {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "dkf-gains/1";

Matrix read_matrix(const json& j, const std::string& path) {
  try {
    return matrix_from_json(j, path);
  } catch (const ScenarioError& e) {
    throw GainsFormatError(e.what());
  }
}

const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) throw GainsFormatError(path + ": missing field \"" + key + "\"");
  return obj.at(key);
}

}  // namespace

json gains_to_json(const GainArtifact& artifact) {
  const GainSchedule& s = artifact.schedule;
  json steps = json::array();
  for (const auto& step : s.steps) {
    json agents = json::array();
    for (const auto& g : step.agents) {
      json a = {{"id", g.agent_id},
                {"K", matrix_to_json(g.K)},
                {"Sigma_xy", matrix_to_json(g.Sigma_xy)},
                {"Sigma_y", matrix_to_json(g.Sigma_y)}};
      const auto k = static_cast<std::size_t>(step.k);
      if (k < s.covariances.size()) a["P_plus"] = matrix_to_json(s.covariances[k].plus_block(g.agent_id, g.agent_id));
      agents.push_back(std::move(a));
    }
    steps.push_back({{"k", step.k}, {"agents", std::move(agents)}});
  }
  json doc = {{"format", kFormat}, {"scenario_hash", artifact.scenario_hash}, {"steps", std::move(steps)}};
  if (s.steady_state) {
    const SteadyState& ss = *s.steady_state;
    json agents = json::array();
    for (std::size_t i = 0; i < ss.K.size(); ++i) {
      agents.push_back({{"id", static_cast<int>(i) + 1},
                        {"K", matrix_to_json(ss.K[i])},
                        {"P_plus", matrix_to_json(ss.P_plus[i])},
                        {"spectral_radius", ss.spectral_radius[i]}});
    }
    doc["steady_state"] = {{"converged", ss.converged},
                           {"diverged", ss.diverged},
                           {"iterations", ss.iterations},
                           {"final_change", ss.final_change},
                           {"unobservable_agents", ss.unobservable_agents},
                           {"agents", std::move(agents)}};
  }
  return doc;
}

GainArtifact gains_from_json(const json& doc) {
  if (!doc.is_object() || doc.value("format", "") != kFormat) throw GainsFormatError("not a dkf gains artifact");
  GainArtifact out;
  const json& hash = field(doc, "scenario_hash", "");
  if (!hash.is_string()) throw GainsFormatError("/scenario_hash: expected a string");
  out.scenario_hash = hash.get<std::string>();

  const json& steps = field(doc, "steps", "");
  if (!steps.is_array()) throw GainsFormatError("/steps: expected a list");
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const std::string path = "/steps/" + std::to_string(s);
    GainStep step;
    step.k = field(steps[s], "k", path).get<int>();
    if (step.k != static_cast<int>(s) + 1) throw GainsFormatError(path + ": steps must be k = 1, 2, ...");
    const json& agents = field(steps[s], "agents", path);
    for (std::size_t a = 0; a < agents.size(); ++a) {
      const std::string apath = path + "/agents/" + std::to_string(a);
      AgentGain g;
      g.agent_id = field(agents[a], "id", apath).get<int>();
      g.K = read_matrix(field(agents[a], "K", apath), apath + "/K");
      if (agents[a].contains("Sigma_xy")) g.Sigma_xy = read_matrix(agents[a]["Sigma_xy"], apath + "/Sigma_xy");
      if (agents[a].contains("Sigma_y")) g.Sigma_y = read_matrix(agents[a]["Sigma_y"], apath + "/Sigma_y");
      step.agents.push_back(std::move(g));
    }
    out.schedule.steps.push_back(std::move(step));
  }

  if (doc.contains("steady_state")) {
    const json& j = doc["steady_state"];
    SteadyState ss;
    ss.converged = field(j, "converged", "/steady_state").get<bool>();
    ss.diverged = j.value("diverged", false);
    ss.iterations = j.value("iterations", 0);
    ss.final_change = j.value("final_change", 0.0);
    if (j.contains("unobservable_agents")) ss.unobservable_agents = j["unobservable_agents"].get<std::vector<int>>();
    const json& agents = field(j, "agents", "/steady_state");
    for (std::size_t a = 0; a < agents.size(); ++a) {
      const std::string apath = "/steady_state/agents/" + std::to_string(a);
      ss.K.push_back(read_matrix(field(agents[a], "K", apath), apath + "/K"));
      ss.P_plus.push_back(read_matrix(field(agents[a], "P_plus", apath), apath + "/P_plus"));
      ss.spectral_radius.push_back(field(agents[a], "spectral_radius", apath).get<double>());
    }
    out.schedule.steady_state = std::move(ss);
  }
  return out;
}

void save_gains(const std::filesystem::path& path, const GainArtifact& artifact) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw GainsFormatError("cannot write " + path.string());
  out << gains_to_json(artifact).dump(1) << '\n';
}

GainArtifact load_gains(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GainsFormatError("cannot open gains file " + path.string());
  try {
    return gains_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw GainsFormatError(path.string() + ": " + e.what());
  }
}

void attach_model(GainSchedule& schedule, const StateSpaceNetwork& model) {
  schedule.structures = build_innovation_structures(model);
  const auto m = static_cast<std::size_t>(model.agent_count());
  auto check = [&](const Matrix& K, std::size_t i, const std::string& where) {
    const auto& s = schedule.structures[i];
    if (K.rows() != model.n() || K.cols() != s.rows()) {
      throw GainsFormatError(where + ": gain of agent " + std::to_string(i + 1) + " has the wrong shape");
    }
  };
  for (const auto& step : schedule.steps) {
    if (step.agents.size() != m) throw GainsFormatError("step " + std::to_string(step.k) + ": wrong agent count");
    for (std::size_t i = 0; i < m; ++i) check(step.agents[i].K, i, "step " + std::to_string(step.k));
  }
  if (schedule.steady_state) {
    if (schedule.steady_state->K.size() != m) throw GainsFormatError("steady state: wrong agent count");
    for (std::size_t i = 0; i < m; ++i) check(schedule.steady_state->K[i], i, "steady state");
  }
}

}  // namespace dkf
