#pragma once

#include "dkf/gain.hpp"
#include "dkf/model.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace dkf {

struct AgentState {
  int agent_id = 0;
  Vector x_pred;  // x̂⁻_{i,k}
  Vector x_filt;  // x̂⁺_{i,k}
  int k = 0;
};

/// What agent `from` sends to agent `to` in one exchange: its prediction and
/// its raw measurement for the current step.
struct RoundMessage {
  int from = 0;
  int to = 0;
  Vector x_pred_neighbor;
  Vector z_neighbor;
};

/// Stacked residuals: measurement residuals over Ω̄_i, then consensus
/// residuals x̂⁻_j − x̂⁻_i over Ω_i, both ascending.
struct InnovationVector {
  Vector y;
};

/// Missing, duplicated or misaddressed neighbor data.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(int agent, const std::string& what);
  int agent() const { return agent_; }

 private:
  int agent_;
};

/// x̂⁺_{i,0} = x̄_0.
AgentState initial_state(const SystemModel& system, int agent);

/// x̂⁻ = F x̂⁺, advancing k.
AgentState predict(const AgentState& state, const SystemModel& system);

/// One message per out-edge of the agent.
std::vector<RoundMessage> outgoing_messages(const AgentState& predicted, const Vector& z, const NetworkGraph& graph);

InnovationVector assemble_innovation(const AgentState& state, std::span<const RoundMessage> inbox,
                                     const Vector& own_measurement, const StateSpaceNetwork& model);

/// x̂⁺ = x̂⁻ + K y.
AgentState filter_update(const AgentState& state, const InnovationVector& y, const Matrix& K);

/// The same update written as explicit consensus and innovation sums:
///   x̂⁻_i + Σ_{j∈Ω_i} B_ij (x̂⁻_j − x̂⁻_i) + Σ_{j∈Ω̄_i} M_ij (z_j − H_j x̂⁻_i)
/// with `neighbor_predictions` and `measurements` indexed by agent id − 1.
Vector filter_update_sums(const Vector& x_pred, const Matrix& K, const InnovationStructure& structure,
                          const StateSpaceNetwork& model, std::span<const Vector> neighbor_predictions,
                          std::span<const Vector> measurements);

struct RoundResult {
  std::vector<AgentState> states;
  std::vector<InnovationVector> innovations;
  std::size_t messages = 0;
};

/// Single-exchange round: every agent predicts, messages travel along every
/// edge, every agent filters. `measurements` and `gains` are indexed by
/// agent id − 1.
RoundResult run_round(std::span<const AgentState> states, std::span<const Vector> measurements,
                      std::span<const Matrix> gains, const StateSpaceNetwork& model);

}  // namespace dkf
