#include "dkf/estimator.hpp"

#include <algorithm>

namespace dkf {

ProtocolError::ProtocolError(int agent, const std::string& what)
    : std::runtime_error("agent " + std::to_string(agent) + ": " + what), agent_(agent) {}

AgentState initial_state(const SystemModel& system, int agent) {
  AgentState s;
  s.agent_id = agent;
  s.x_filt = system.x0_mean;
  s.x_pred = system.x0_mean;
  s.k = 0;
  return s;
}

AgentState predict(const AgentState& state, const SystemModel& system) {
  AgentState out = state;
  out.x_pred = system.F * state.x_filt;
  out.k = state.k + 1;
  return out;
}

std::vector<RoundMessage> outgoing_messages(const AgentState& predicted, const Vector& z, const NetworkGraph& graph) {
  std::vector<RoundMessage> out;
  const int from = predicted.agent_id;
  for (int to = 1; to <= graph.size(); ++to) {
    if (to != from && graph.has_edge(from, to)) out.push_back({from, to, predicted.x_pred, z});
  }
  return out;
}

InnovationVector assemble_innovation(const AgentState& state, std::span<const RoundMessage> inbox,
                                     const Vector& own_measurement, const StateSpaceNetwork& model) {
  const int i = state.agent_id;
  const std::vector<int> open = open_neighborhood(model.graph, i);
  const Index n = model.n();

  std::vector<const RoundMessage*> by_sender(open.size(), nullptr);
  for (const RoundMessage& msg : inbox) {
    if (msg.to != i) throw ProtocolError(i, "received a message addressed to agent " + std::to_string(msg.to));
    auto it = std::lower_bound(open.begin(), open.end(), msg.from);
    if (it == open.end() || *it != msg.from) {
      throw ProtocolError(i, "received a message from non-neighbor " + std::to_string(msg.from));
    }
    auto& slot = by_sender[static_cast<std::size_t>(it - open.begin())];
    if (slot != nullptr) throw ProtocolError(i, "duplicate message from agent " + std::to_string(msg.from));
    if (msg.x_pred_neighbor.size() != n || msg.z_neighbor.size() != model.agent(msg.from).p()) {
      throw ProtocolError(i, "malformed message from agent " + std::to_string(msg.from));
    }
    slot = &msg;
  }
  for (std::size_t a = 0; a < open.size(); ++a) {
    if (by_sender[a] == nullptr) throw ProtocolError(i, "missing message from agent " + std::to_string(open[a]));
  }
  if (own_measurement.size() != model.agent(i).p()) throw ProtocolError(i, "own measurement has the wrong size");

  Index rows = static_cast<Index>(open.size()) * n;
  for (int j : closed_neighborhood(model.graph, i)) rows += model.agent(j).p();
  InnovationVector out;
  out.y.resize(rows);

  Index r = 0;
  std::size_t a = 0;
  for (int j = 1; j <= model.agent_count(); ++j) {
    const Vector* z = nullptr;
    if (j == i) {
      z = &own_measurement;
    } else if (a < open.size() && open[a] == j) {
      z = &by_sender[a]->z_neighbor;
      ++a;
    } else {
      continue;
    }
    const AgentObservation& obs = model.agent(j);
    out.y.segment(r, obs.p()) = *z - obs.H * state.x_pred;
    r += obs.p();
  }
  for (std::size_t b = 0; b < open.size(); ++b) {
    out.y.segment(r, n) = by_sender[b]->x_pred_neighbor - state.x_pred;
    r += n;
  }
  return out;
}

AgentState filter_update(const AgentState& state, const InnovationVector& y, const Matrix& K) {
  if (K.rows() != state.x_pred.size() || K.cols() != y.y.size()) {
    throw std::invalid_argument("filter_update: gain is " + std::to_string(K.rows()) + "x" +
                                std::to_string(K.cols()) + ", innovation has length " + std::to_string(y.y.size()));
  }
  AgentState out = state;
  out.x_filt = state.x_pred + K * y.y;
  return out;
}

Vector filter_update_sums(const Vector& x_pred, const Matrix& K, const InnovationStructure& s,
                          const StateSpaceNetwork& model, std::span<const Vector> neighbor_predictions,
                          std::span<const Vector> measurements) {
  Vector x = x_pred;
  for (int j : s.open_nbhd) {
    x += consensus_weight(K, s, j) * (neighbor_predictions[static_cast<std::size_t>(j - 1)] - x_pred);
  }
  for (int j : s.closed_nbhd) {
    x += measurement_weight(K, s, j) * (measurements[static_cast<std::size_t>(j - 1)] - model.agent(j).H * x_pred);
  }
  return x;
}

RoundResult run_round(std::span<const AgentState> states, std::span<const Vector> measurements,
                      std::span<const Matrix> gains, const StateSpaceNetwork& model) {
  const auto m = static_cast<std::size_t>(model.agent_count());
  if (states.size() != m || measurements.size() != m || gains.size() != m) {
    throw std::invalid_argument("run_round: expected one state, measurement and gain per agent");
  }
  for (const auto& s : states) {
    if (s.k != states.front().k) throw ProtocolError(s.agent_id, "agents are not at the same time step");
  }

  RoundResult result;
  result.states.reserve(m);
  for (const auto& s : states) result.states.push_back(predict(s, model.system));

  std::vector<std::vector<RoundMessage>> inboxes(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (auto& msg : outgoing_messages(result.states[i], measurements[i], model.graph)) {
      inboxes[static_cast<std::size_t>(msg.to - 1)].push_back(std::move(msg));
      ++result.messages;
    }
  }

  result.innovations.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    result.innovations.push_back(assemble_innovation(result.states[i], inboxes[i], measurements[i], model));
  }
  for (std::size_t i = 0; i < m; ++i) {
    result.states[i] = filter_update(result.states[i], result.innovations[i], gains[i]);
  }
  return result;
}

}  // namespace dkf
