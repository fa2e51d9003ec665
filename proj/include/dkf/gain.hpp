#pragma once

#include "dkf/model.hpp"

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace dkf {

/// Raised when an innovation covariance is not PSD within tolerance.
/// `step()` is the time index at which it happened (0 if unknown).
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, int step = 0);
  int step() const { return step_; }

 private:
  int step_;
};

/// Layout of agent i's stacked innovation
///   y_i = [z_j − H_j x̂⁻_i, j ∈ Ω̄_i ; x̂⁻_j − x̂⁻_i, j ∈ Ω_i]
/// and of its error model y_i = H̃_i ε⁻_i + δ_i. Both neighborhoods are in
/// ascending agent-id order.
struct InnovationStructure {
  int agent_id = 0;
  Index n = 0;
  std::vector<int> closed_nbhd;
  std::vector<int> open_nbhd;
  std::vector<Index> measurement_offsets;  // parallel to closed_nbhd
  std::vector<Index> consensus_offsets;    // parallel to open_nbhd
  Matrix H_tilde;                          // measurement rows then n|Ω_i| zero rows
  Matrix R_tilde;                          // blkdiag{R_j}, j ∈ Ω̄_i

  Index rows() const { return H_tilde.rows(); }
  Index measurement_rows() const { return R_tilde.rows(); }
  Index measurement_dim(int j) const;
  Index measurement_offset(int j) const;
  Index consensus_offset(int j) const;
  /// R_i, the agent's own measurement noise covariance.
  Matrix own_R() const;
};

InnovationStructure build_innovation_structure(const StateSpaceNetwork& model, int agent);
std::vector<InnovationStructure> build_innovation_structures(const StateSpaceNetwork& model);

/// n×n block (i, j) of an (n m)×(n m) network matrix; ids are 1-based.
inline auto network_block(const Matrix& net, Index n, int i, int j) {
  return net.block((i - 1) * n, (j - 1) * n, n, n);
}
inline auto network_block(Matrix& net, Index n, int i, int j) {
  return net.block((i - 1) * n, (j - 1) * n, n, n);
}

/// Joint error covariance of all agents at step k:
/// blocks P⁻_{ij,k} = E[ε⁻_i ε⁻_jᵀ] and P⁺_{ij,k} = E[ε⁺_i ε⁺_jᵀ].
/// At k = 0 only P_plus is meaningful.
struct NetworkCovariance {
  int k = 0;
  Index n = 0;
  Matrix P_minus;
  Matrix P_plus;

  int agent_count() const { return n == 0 ? 0 : static_cast<int>(P_plus.rows() / n); }
  Matrix minus_block(int i, int j) const { return network_block(P_minus, n, i, j); }
  Matrix plus_block(int i, int j) const { return network_block(P_plus, n, i, j); }
};

/// Every block equal to P0 (all agents start from the same prior).
Matrix initial_network_covariance(const SystemModel& system, int m);

/// P⁻_{ij} = F P⁺_{ij} Fᵀ + Q for every pair: the process noise is common
/// to all agents' prediction errors.
Matrix predict_network_covariance(const Matrix& P_plus_net, const SystemModel& system);

struct InnovationNoiseStats {
  Matrix Sigma_eps_delta;  // E[ε⁻_i δ_iᵀ], n × rows
  Matrix Delta;            // E[δ_i δ_iᵀ], rows × rows
};

InnovationNoiseStats innovation_noise_stats(const Matrix& P_minus_net, const InnovationStructure& structure);

struct AgentGain {
  int agent_id = 0;
  Matrix K;         // n × rows
  Matrix Sigma_xy;  // E[ε⁻_i y_iᵀ]
  Matrix Sigma_y;   // E[y_i y_iᵀ]
};

/// MMSE gain K = Σ_xy Σ_y⁺. The pseudoinverse drops singular values below
/// 1e-12 of the largest; it is needed whenever neighbors' prediction errors
/// coincide (e.g. at k = 1 with a common prior).
AgentGain optimal_gain(const Matrix& P_minus_net, const InnovationStructure& structure,
                       const InnovationNoiseStats& stats);

/// M_ij (n × p_j) for j ∈ Ω̄_i.
Matrix measurement_weight(const Matrix& K, const InnovationStructure& structure, int j);
/// B_ij (n × n) for j ∈ Ω_i.
Matrix consensus_weight(const Matrix& K, const InnovationStructure& structure, int j);

/// Exact propagation of the joint error covariance through one filter step
/// with arbitrary gains:
///   ε⁺_i = (I − K_i H̃_i − Σ_{j∈Ω_i} B_ij) ε⁻_i + Σ_{j∈Ω_i} B_ij ε⁻_j − Σ_{j∈Ω̄_i} M_ij v_j
/// so P⁺ = T P⁻ Tᵀ + M R Mᵀ.
Matrix filter_network_covariance(const Matrix& P_minus_net, std::span<const Matrix> gains,
                                 std::span<const InnovationStructure> structures);

/// P⁻_i − K Σ_xyᵀ; equals the diagonal block of filter_network_covariance
/// only at the optimal gain.
Matrix riccati_filter_covariance(const Matrix& P_minus_i, const AgentGain& gain);

/// ρ(F − K H̃_i F).
double closed_loop_spectral_radius(const SystemModel& system, const Matrix& K, const InnovationStructure& structure);

struct GainStep {
  int k = 0;
  std::vector<AgentGain> agents;  // ordered by agent id
};

struct SteadyState {
  bool converged = false;
  bool diverged = false;
  int iterations = 0;
  double final_change = 0.0;
  std::vector<Matrix> K;        // K_{i,∞}
  std::vector<Matrix> P_plus;   // P⁺_{i,∞}
  std::vector<double> spectral_radius;
  Matrix P_plus_net;
  std::vector<int> unobservable_agents;  // non-empty means the run went ahead with a warning
};

struct GainSchedule {
  std::vector<InnovationStructure> structures;
  std::vector<GainStep> steps;                 // k = 1..horizon
  std::vector<NetworkCovariance> covariances;  // k = 0..horizon (may be empty when loaded)
  std::optional<SteadyState> steady_state;

  int horizon() const { return static_cast<int>(steps.size()); }
  const Matrix& gain(int k, int agent) const;
};

/// One predict / gain / filter cycle of the network-wide recursion per call.
class RiccatiIteration {
 public:
  explicit RiccatiIteration(const StateSpaceNetwork& model);

  GainStep step();

  int k() const { return k_; }
  const Matrix& P_minus_net() const { return P_minus_; }
  const Matrix& P_plus_net() const { return P_plus_; }
  const std::vector<InnovationStructure>& structures() const { return structures_; }

 private:
  const StateSpaceNetwork* model_;
  std::vector<InnovationStructure> structures_;
  int k_ = 0;
  Matrix P_minus_;
  Matrix P_plus_;
};

/// Finite-horizon optimal gains for k = 1..steps, with the covariance trajectory.
GainSchedule riccati_recursion(const StateSpaceNetwork& model, int steps);

struct SteadyStateOptions {
  double tol = 1e-10;
  int max_iter = 10000;
  /// Iteration stops as diverged once a trace exceeds this multiple of
  /// (1 + tr P0 + tr Q).
  double divergence_factor = 1e8;
};

/// Iterates the recursion until the largest relative Frobenius change over
/// all blocks of P⁺_net drops below tol. Non-convergence is reported in the
/// result, not thrown.
SteadyState steady_state(const StateSpaceNetwork& model, const SteadyStateOptions& options = {});

enum class GainMode { optimal, steady_state };

/// gains[k-1][agent-1].
using GainTable = std::vector<std::vector<Matrix>>;

/// Gains to apply for k = 1..horizon. Throws std::invalid_argument if the
/// schedule does not cover the request.
GainTable gain_table(const GainSchedule& schedule, GainMode mode, int horizon);

/// Covariance trajectory (k = 0..horizon) produced by applying `table`.
std::vector<NetworkCovariance> propagate_with_gains(const StateSpaceNetwork& model,
                                                    const std::vector<InnovationStructure>& structures,
                                                    const GainTable& table);

}  // namespace dkf
