#pragma once

#include "dkf/estimator.hpp"
#include "dkf/gain.hpp"
#include "dkf/noise.hpp"

#include <cstdint>
#include <vector>

namespace dkf {

/// z[k][agent-1] for k = 0..K; the k = 0 row is empty (the first
/// measurement is taken at k = 1).
using Measurements = std::vector<std::vector<Vector>>;

/// x_0 ~ N(x̄_0, P0), x_k = F x_{k-1} + w_{k-1}; K + 1 states.
std::vector<Vector> generate_truth(const SystemModel& system, int K, std::uint64_t seed);

/// z_{i,k} = H_i x_k + v_{i,k} for k = 1..K, independent streams per agent.
Measurements generate_measurements(const std::vector<Vector>& truth, const StateSpaceNetwork& model,
                                   std::uint64_t seed);

/// Textbook Kalman filter on the stacked observation [H_1; ...; H_m],
/// blkdiag{R_j}. Index k = 0..K.
struct CentralizedResult {
  std::vector<Vector> x_plus;
  std::vector<Vector> x_minus;
  std::vector<Matrix> P_plus;
  std::vector<Matrix> P_minus;
  std::vector<Matrix> gain;  // gain[k], k ≥ 1; gain[0] empty
};

CentralizedResult centralized_kf_oracle(const StateSpaceNetwork& model, const Measurements& z, int K);

/// Covariance part of the oracle only (it does not depend on the data).
std::vector<Matrix> centralized_covariances(const StateSpaceNetwork& model, int K);

/// One simulated run. Per-agent vectors are indexed [k][agent-1], k = 0..K.
/// Errors are x_k − x̂ by construction.
struct SimulationTrace {
  std::uint64_t seed = 0;
  int horizon = 0;
  std::vector<Vector> x_true;
  Measurements z;
  std::vector<std::vector<Vector>> x_pred;
  std::vector<std::vector<Vector>> x_filt;
  std::vector<std::vector<Vector>> err_minus;
  std::vector<std::vector<Vector>> err_plus;
  std::vector<std::vector<Vector>> innovations;  // k ≥ 1
  std::vector<Vector> central_estimates;          // empty unless requested
  std::vector<std::size_t> messages;              // per round, k ≥ 1
};

/// Runs the distributed estimator for table.size() steps.
SimulationTrace simulate(const StateSpaceNetwork& model, const GainTable& gains, std::uint64_t seed,
                         bool with_central = true);

struct WhitenessStat {
  int agent = 0;
  Index component = 0;
  bool consensus = false;    // consensus residual rather than measurement residual
  double correlation = 0.0;  // pooled lag-1 sample autocorrelation
  double z_score = 0.0;      // correlation / standard error
};

struct MetricsSummary {
  int runs = 0;
  int horizon = 0;
  std::uint64_t base_seed = 0;
  int agents = 0;
  Index n = 0;
  std::vector<std::vector<double>> empirical_mse;   // [k][agent-1]
  std::vector<std::vector<double>> analytic_trace;  // [k][agent-1]
  std::vector<double> centralized_trace;            // [k]
  std::vector<Matrix> empirical_covariance;         // [k], E[ε⁺ ε⁺ᵀ] over the stacked network error
  std::vector<Matrix> analytic_covariance;          // [k], P⁺_net
  std::vector<Vector> error_mean;                   // [k], stacked network error
  std::vector<Vector> error_mean_stderr;            // [k]
  std::vector<double> spectral_radius;              // ρ(F − K H̃ F) for the last applied gains
  std::vector<WhitenessStat> whiteness;
};

struct MonteCarloOptions {
  int runs = 1000;
  std::uint64_t base_seed = 0;
  /// 0 picks hardware concurrency, capped by the DKF_THREADS environment variable.
  unsigned threads = 0;
};

unsigned resolve_thread_count(unsigned requested);

/// Runs seeds base_seed + r for r < runs. Results are bit-identical for any
/// thread count: runs are aggregated in fixed-size chunks reduced in order.
MetricsSummary monte_carlo(const StateSpaceNetwork& model, const GainTable& gains, const MonteCarloOptions& options);

}  // namespace dkf
