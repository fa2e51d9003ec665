#pragma once

#include "dkf/model.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

namespace dkf {

/// Ã = I + A + ... + A^{m-1} in exact unsigned arithmetic. Entry (i, j)
/// counts directed walks of length < m from j to i. Counts that would
/// overflow are clamped and flagged as saturated; they remain positive.
class ConnectivityMatrix {
 public:
  ConnectivityMatrix() = default;
  explicit ConnectivityMatrix(int m);

  int size() const { return m_; }
  std::uint64_t walks(int i, int j) const { return counts_[index(i, j)]; }
  bool saturated(int i, int j) const { return saturated_[index(i, j)] != 0; }
  bool positive(int i, int j) const { return walks(i, j) > 0; }
  bool all_positive() const;

  void set(int i, int j, std::uint64_t count, bool saturated);

 private:
  std::size_t index(int i, int j) const;

  int m_ = 0;
  std::vector<std::uint64_t> counts_;
  std::vector<char> saturated_;
};

/// G_i = [H; H F; ...; H F^{n-1}].
Matrix local_observability_matrix(const SystemModel& system, const AgentObservation& obs);

/// G = [G_1; ...; G_m] in agent-id order.
Matrix global_observability_matrix(const StateSpaceNetwork& model);

ConnectivityMatrix connectivity_matrix(const NetworkGraph& graph);

/// True iff Ã > 0 elementwise (every agent reachable from every agent).
bool is_connected(const NetworkGraph& graph);

/// O_i = [ã_i1 G_1; ...; ã_im G_m]. Zero blocks are kept so the shape is
/// always (n Σ p_j) × n. Saturated walk counts scale their block by 1.
Matrix distributed_observability_matrix(const StateSpaceNetwork& model, int agent);

struct AgentObservability {
  int agent_id = 0;
  Index local_rank = 0;
  Index rank = 0;          // rank O_i
  Index gramian_rank = 0;  // rank O_iᵀ O_i
  bool distributedly_observable = false;
  Matrix O;
};

struct ObservabilityReport {
  Index n = 0;
  std::vector<Index> local_ranks;
  Index global_rank = 0;
  ConnectivityMatrix connectivity;
  bool connected = false;
  std::vector<AgentObservability> per_agent;
  bool all_agents_observable = false;

  std::vector<int> unobservable_agents() const;
};

ObservabilityReport analyze(const StateSpaceNetwork& model);

/// Dense O_i matrices are included only when `full` is set.
nlohmann::json to_json(const ObservabilityReport& report, bool full = false);

}  // namespace dkf
