#include "dkf/observability.hpp"

#include <limits>

namespace dkf {

namespace {

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

struct Count {
  std::uint64_t value = 0;
  bool saturated = false;
};

Count add(Count a, Count b) {
  Count out;
  out.saturated = a.saturated || b.saturated || __builtin_add_overflow(a.value, b.value, &out.value);
  if (out.saturated) out.value = kSaturated;
  return out;
}

Count mul(Count a, Count b) {
  if ((a.value == 0 && !a.saturated) || (b.value == 0 && !b.saturated)) return {};
  Count out;
  out.saturated = a.saturated || b.saturated || __builtin_mul_overflow(a.value, b.value, &out.value);
  if (out.saturated) out.value = kSaturated;
  return out;
}

using CountMatrix = std::vector<std::vector<Count>>;

// Rank of O_i evaluated on 0/1 block indicators: rank is invariant to the
// positive per-block scale, and indicators avoid mixing walk counts that
// differ by many orders of magnitude.
Matrix indicator_stack(const StateSpaceNetwork& model, const ConnectivityMatrix& c, int agent) {
  std::vector<Matrix> blocks;
  Index rows = 0;
  for (const auto& obs : model.observations) {
    blocks.push_back(local_observability_matrix(model.system, obs));
    rows += blocks.back().rows();
  }
  Matrix out = Matrix::Zero(rows, model.n());
  Index r = 0;
  for (int j = 1; j <= model.agent_count(); ++j) {
    const Matrix& g = blocks[static_cast<std::size_t>(j - 1)];
    if (c.positive(agent, j)) out.middleRows(r, g.rows()) = g;
    r += g.rows();
  }
  return out;
}

}  // namespace

ConnectivityMatrix::ConnectivityMatrix(int m)
    : m_(m),
      counts_(static_cast<std::size_t>(m) * static_cast<std::size_t>(m), 0),
      saturated_(counts_.size(), 0) {}

std::size_t ConnectivityMatrix::index(int i, int j) const {
  if (i < 1 || i > m_) throw AgentIdError(i, m_);
  if (j < 1 || j > m_) throw AgentIdError(j, m_);
  return static_cast<std::size_t>(i - 1) * static_cast<std::size_t>(m_) + static_cast<std::size_t>(j - 1);
}

void ConnectivityMatrix::set(int i, int j, std::uint64_t count, bool saturated) {
  counts_[index(i, j)] = count;
  saturated_[index(i, j)] = saturated ? 1 : 0;
}

bool ConnectivityMatrix::all_positive() const {
  for (auto c : counts_) {
    if (c == 0) return false;
  }
  return true;
}

Matrix local_observability_matrix(const SystemModel& system, const AgentObservation& obs) {
  const Index n = system.n();
  const Index p = obs.p();
  Matrix g(n * p, n);
  Matrix block = obs.H;
  for (Index q = 0; q < n; ++q) {
    g.middleRows(q * p, p) = block;
    block = block * system.F;
  }
  return g;
}

Matrix global_observability_matrix(const StateSpaceNetwork& model) {
  std::vector<Matrix> blocks;
  Index rows = 0;
  for (const auto& obs : model.observations) {
    blocks.push_back(local_observability_matrix(model.system, obs));
    rows += blocks.back().rows();
  }
  Matrix g(rows, model.n());
  Index r = 0;
  for (const auto& b : blocks) {
    g.middleRows(r, b.rows()) = b;
    r += b.rows();
  }
  return g;
}

ConnectivityMatrix connectivity_matrix(const NetworkGraph& graph) {
  const int m = graph.size();
  const auto um = static_cast<std::size_t>(m);
  CountMatrix a(um, std::vector<Count>(um));
  CountMatrix power(um, std::vector<Count>(um));
  CountMatrix total(um, std::vector<Count>(um));
  for (std::size_t i = 0; i < um; ++i) {
    for (std::size_t j = 0; j < um; ++j) {
      a[i][j].value = graph.adjacency(static_cast<Index>(i), static_cast<Index>(j)) != 0 ? 1 : 0;
    }
    power[i][i].value = 1;
    total[i][i].value = 1;
  }
  for (int q = 1; q < m; ++q) {
    CountMatrix next(um, std::vector<Count>(um));
    for (std::size_t i = 0; i < um; ++i) {
      for (std::size_t l = 0; l < um; ++l) {
        if (power[i][l].value == 0) continue;
        for (std::size_t j = 0; j < um; ++j) next[i][j] = add(next[i][j], mul(power[i][l], a[l][j]));
      }
    }
    power = std::move(next);
    for (std::size_t i = 0; i < um; ++i) {
      for (std::size_t j = 0; j < um; ++j) total[i][j] = add(total[i][j], power[i][j]);
    }
  }
  ConnectivityMatrix out(m);
  for (int i = 1; i <= m; ++i) {
    for (int j = 1; j <= m; ++j) {
      const Count& c = total[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)];
      out.set(i, j, c.value, c.saturated);
    }
  }
  return out;
}

bool is_connected(const NetworkGraph& graph) { return connectivity_matrix(graph).all_positive(); }

Matrix distributed_observability_matrix(const StateSpaceNetwork& model, int agent) {
  const int m = model.agent_count();
  if (agent < 1 || agent > m) throw AgentIdError(agent, m);
  const ConnectivityMatrix c = connectivity_matrix(model.graph);
  Matrix g = global_observability_matrix(model);
  Index r = 0;
  for (int j = 1; j <= m; ++j) {
    const Index rows = model.n() * model.agent(j).p();
    const double scale = c.saturated(agent, j) ? 1.0 : static_cast<double>(c.walks(agent, j));
    g.middleRows(r, rows) *= scale;
    r += rows;
  }
  return g;
}

std::vector<int> ObservabilityReport::unobservable_agents() const {
  std::vector<int> out;
  for (const auto& a : per_agent) {
    if (!a.distributedly_observable) out.push_back(a.agent_id);
  }
  return out;
}

ObservabilityReport analyze(const StateSpaceNetwork& model) {
  ObservabilityReport report;
  report.n = model.n();
  for (const auto& obs : model.observations) {
    report.local_ranks.push_back(numerical_rank(local_observability_matrix(model.system, obs)));
  }
  report.global_rank = numerical_rank(global_observability_matrix(model));
  report.connectivity = connectivity_matrix(model.graph);
  report.connected = report.connectivity.all_positive();
  report.all_agents_observable = true;
  for (int i = 1; i <= model.agent_count(); ++i) {
    AgentObservability a;
    a.agent_id = i;
    a.local_rank = report.local_ranks[static_cast<std::size_t>(i - 1)];
    a.O = distributed_observability_matrix(model, i);
    const Matrix indicator = indicator_stack(model, report.connectivity, i);
    a.rank = numerical_rank(indicator);
    a.gramian_rank = numerical_rank(indicator.transpose() * indicator);
    a.distributedly_observable = a.rank == model.n();
    report.all_agents_observable = report.all_agents_observable && a.distributedly_observable;
    report.per_agent.push_back(std::move(a));
  }
  return report;
}

nlohmann::json to_json(const ObservabilityReport& report, bool full) {
  using nlohmann::json;
  json conn = json::array();
  for (int i = 1; i <= report.connectivity.size(); ++i) {
    json row = json::array();
    for (int j = 1; j <= report.connectivity.size(); ++j) {
      if (report.connectivity.saturated(i, j)) {
        row.push_back("positive");
      } else {
        row.push_back(report.connectivity.walks(i, j));
      }
    }
    conn.push_back(std::move(row));
  }
  json agents = json::array();
  for (const auto& a : report.per_agent) {
    json entry = {{"agent", a.agent_id},
                  {"local_rank", a.local_rank},
                  {"rank", a.rank},
                  {"gramian_rank", a.gramian_rank},
                  {"distributedly_observable", a.distributedly_observable}};
    if (full) {
      json rows = json::array();
      for (Index r = 0; r < a.O.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < a.O.cols(); ++c) row.push_back(a.O(r, c));
        rows.push_back(std::move(row));
      }
      entry["O"] = std::move(rows);
    }
    agents.push_back(std::move(entry));
  }
  return json{{"n", report.n},
              {"local_ranks", report.local_ranks},
              {"global_rank", report.global_rank},
              {"connectivity", std::move(conn)},
              {"connected", report.connected},
              {"per_agent", std::move(agents)},
              {"all_agents_observable", report.all_agents_observable}};
}

}  // namespace dkf
