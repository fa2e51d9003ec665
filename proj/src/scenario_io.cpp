#include "dkf/scenario_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace dkf {

namespace {

using nlohmann::json;

std::string line_context(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  std::size_t line = 1;
  std::size_t line_start = 0;
  for (std::size_t i = 0; i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      line_start = i + 1;
    }
  }
  std::size_t line_end = text.find('\n', line_start);
  if (line_end == std::string_view::npos) line_end = text.size();
  std::ostringstream os;
  os << "line " << line << ", column " << (byte - line_start) << ": "
     << text.substr(line_start, std::min<std::size_t>(line_end - line_start, 120));
  return os.str();
}

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ScenarioError(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ScenarioError(path + ": missing field \"" + key + "\"");
  return *it;
}

double number_at(const json& j, const std::string& path) {
  if (!j.is_number()) throw ScenarioError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ScenarioError(path + ": non-finite number");
  return v;
}

int int_at(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ScenarioError(path + ": expected an integer");
  return j.get<int>();
}

Vector vector_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) throw ScenarioError(path + ": expected a list of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = number_at(j[i], path + "/" + std::to_string(i));
  return v;
}

}  // namespace

Matrix matrix_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) throw ScenarioError(path + ": expected a list of rows");
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array()) throw ScenarioError(path + "/" + std::to_string(r) + ": expected a row list");
    if (r == 0) cols = j[r].size();
    if (j[r].size() != cols) throw ScenarioError(path + "/" + std::to_string(r) + ": ragged row");
  }
  Matrix x(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      x(static_cast<Index>(r), static_cast<Index>(c)) =
          number_at(j[r][c], path + "/" + std::to_string(r) + "/" + std::to_string(c));
    }
  }
  return x;
}

json matrix_to_json(const Matrix& x) {
  json rows = json::array();
  for (Index r = 0; r < x.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < x.cols(); ++c) row.push_back(x(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& x) {
  json out = json::array();
  for (Index i = 0; i < x.size(); ++i) out.push_back(x(i));
  return out;
}

StateSpaceNetwork parse_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ScenarioError("malformed JSON at " + line_context(text, e.byte));
  }

  StateSpaceNetwork model;
  const int n = int_at(require(doc, "n", ""), "/n");
  const int m = int_at(require(doc, "m", ""), "/m");
  if (n < 1) throw ScenarioError("/n: must be positive");
  if (m < 1) throw ScenarioError("/m: must be positive");

  model.system.F = matrix_from_json(require(doc, "F", ""), "/F");
  model.system.Q = matrix_from_json(require(doc, "Q", ""), "/Q");
  model.system.x0_mean = vector_from_json(require(doc, "x0_mean", ""), "/x0_mean");
  model.system.P0 = matrix_from_json(require(doc, "P0", ""), "/P0");
  if (model.system.F.rows() != n || model.system.F.cols() != n) {
    throw ScenarioError("/F: expected " + std::to_string(n) + "x" + std::to_string(n));
  }

  const json& agents = require(doc, "agents", "");
  if (!agents.is_array()) throw ScenarioError("/agents: expected a list");
  std::vector<AgentObservation> obs;
  for (std::size_t a = 0; a < agents.size(); ++a) {
    const std::string path = "/agents/" + std::to_string(a);
    AgentObservation o;
    o.agent_id = int_at(require(agents[a], "id", path), path + "/id");
    o.H = matrix_from_json(require(agents[a], "H", path), path + "/H");
    o.R = matrix_from_json(require(agents[a], "R", path), path + "/R");
    obs.push_back(std::move(o));
  }
  std::sort(obs.begin(), obs.end(), [](const auto& l, const auto& r) { return l.agent_id < r.agent_id; });
  if (static_cast<int>(obs.size()) != m) {
    throw ScenarioError("/agents: " + std::to_string(obs.size()) + " agents listed, m = " + std::to_string(m));
  }
  for (int i = 0; i < m; ++i) {
    if (obs[static_cast<std::size_t>(i)].agent_id != i + 1) {
      throw ScenarioError("/agents: ids must be exactly 1.." + std::to_string(m));
    }
  }
  model.observations = std::move(obs);

  model.graph = NetworkGraph::empty(m);
  auto edges_it = doc.find("edges");
  if (edges_it != doc.end()) {
    if (!edges_it->is_array()) throw ScenarioError("/edges: expected a list of [from, to] pairs");
    for (std::size_t e = 0; e < edges_it->size(); ++e) {
      const std::string path = "/edges/" + std::to_string(e);
      const json& edge = (*edges_it)[e];
      if (!edge.is_array() || edge.size() != 2) throw ScenarioError(path + ": expected [from, to]");
      const int from = int_at(edge[0], path + "/0");
      const int to = int_at(edge[1], path + "/1");
      if (from < 1 || from > m || to < 1 || to > m) throw ScenarioError(path + ": agent id out of range");
      if (model.graph.adjacency(to - 1, from - 1) != 0) throw ScenarioError(path + ": duplicate edge");
      model.graph.adjacency(to - 1, from - 1) = 1;
    }
  }
  return model;
}

StateSpaceNetwork load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot open scenario file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario(buf.str());
  } catch (const ScenarioError& e) {
    throw ScenarioError(path.string() + ": " + e.what());
  }
}

json scenario_to_json(const StateSpaceNetwork& model) {
  json doc;
  doc["n"] = model.n();
  doc["m"] = model.agent_count();
  doc["F"] = matrix_to_json(model.system.F);
  doc["Q"] = matrix_to_json(model.system.Q);
  doc["x0_mean"] = vector_to_json(model.system.x0_mean);
  doc["P0"] = matrix_to_json(model.system.P0);
  json agents = json::array();
  for (const auto& o : model.observations) {
    agents.push_back({{"id", o.agent_id}, {"H", matrix_to_json(o.H)}, {"R", matrix_to_json(o.R)}});
  }
  doc["agents"] = std::move(agents);
  json edges = json::array();
  for (int to = 1; to <= model.agent_count(); ++to) {
    for (int from = 1; from <= model.agent_count(); ++from) {
      if (model.graph.adjacency(to - 1, from - 1) != 0) edges.push_back({from, to});
    }
  }
  doc["edges"] = std::move(edges);
  return doc;
}

std::string scenario_hash(const StateSpaceNetwork& model) {
  const std::string canonical = scenario_to_json(model).dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(canonical.data(), canonical.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

}  // namespace dkf
