#include "dkf/gain.hpp"

#include "dkf/observability.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dkf {

namespace {

std::size_t position_of(const std::vector<int>& ids, int j, const char* what, int agent) {
  auto it = std::lower_bound(ids.begin(), ids.end(), j);
  if (it == ids.end() || *it != j) {
    std::ostringstream os;
    os << "agent " << j << " is not in the " << what << " neighborhood of agent " << agent;
    throw std::invalid_argument(os.str());
  }
  return static_cast<std::size_t>(it - ids.begin());
}

double trace_scale(const SystemModel& system) { return 1.0 + system.P0.trace() + system.Q.trace(); }

}  // namespace

NumericalError::NumericalError(const std::string& what, int step)
    : std::runtime_error(step > 0 ? what + " (at k = " + std::to_string(step) + ")" : what), step_(step) {}

Index InnovationStructure::measurement_offset(int j) const {
  return measurement_offsets[position_of(closed_nbhd, j, "closed", agent_id)];
}

Index InnovationStructure::measurement_dim(int j) const {
  const std::size_t pos = position_of(closed_nbhd, j, "closed", agent_id);
  const Index end = pos + 1 < measurement_offsets.size() ? measurement_offsets[pos + 1] : measurement_rows();
  return end - measurement_offsets[pos];
}

Index InnovationStructure::consensus_offset(int j) const {
  return consensus_offsets[position_of(open_nbhd, j, "open", agent_id)];
}

Matrix InnovationStructure::own_R() const {
  const Index off = measurement_offset(agent_id);
  const Index p = measurement_dim(agent_id);
  return R_tilde.block(off, off, p, p);
}

InnovationStructure build_innovation_structure(const StateSpaceNetwork& model, int agent) {
  InnovationStructure s;
  s.agent_id = agent;
  s.n = model.n();
  s.closed_nbhd = closed_neighborhood(model.graph, agent);
  s.open_nbhd = open_neighborhood(model.graph, agent);

  Index rows = 0;
  std::vector<Matrix> r_blocks;
  for (int j : s.closed_nbhd) {
    s.measurement_offsets.push_back(rows);
    rows += model.agent(j).p();
    r_blocks.push_back(model.agent(j).R);
  }
  for (std::size_t a = 0; a < s.open_nbhd.size(); ++a) {
    s.consensus_offsets.push_back(rows);
    rows += s.n;
  }
  s.H_tilde = Matrix::Zero(rows, s.n);
  for (std::size_t a = 0; a < s.closed_nbhd.size(); ++a) {
    const Matrix& h = model.agent(s.closed_nbhd[a]).H;
    s.H_tilde.middleRows(s.measurement_offsets[a], h.rows()) = h;
  }
  s.R_tilde = block_diagonal(r_blocks);
  return s;
}

std::vector<InnovationStructure> build_innovation_structures(const StateSpaceNetwork& model) {
  std::vector<InnovationStructure> out;
  for (int i = 1; i <= model.agent_count(); ++i) out.push_back(build_innovation_structure(model, i));
  return out;
}

Matrix initial_network_covariance(const SystemModel& system, int m) {
  const Index n = system.n();
  Matrix net(n * m, n * m);
  for (int i = 1; i <= m; ++i) {
    for (int j = 1; j <= m; ++j) network_block(net, n, i, j) = system.P0;
  }
  return symmetrize(net);
}

Matrix predict_network_covariance(const Matrix& P_plus_net, const SystemModel& system) {
  const Index n = system.n();
  const int m = static_cast<int>(P_plus_net.rows() / n);
  Matrix out(P_plus_net.rows(), P_plus_net.cols());
  for (int i = 1; i <= m; ++i) {
    for (int j = 1; j <= m; ++j) {
      network_block(out, n, i, j) = system.F * network_block(P_plus_net, n, i, j) * system.F.transpose() + system.Q;
    }
  }
  return symmetrize(out);
}

InnovationNoiseStats innovation_noise_stats(const Matrix& P_minus_net, const InnovationStructure& s) {
  const Index n = s.n;
  const int i = s.agent_id;
  if (P_minus_net.rows() != P_minus_net.cols() || P_minus_net.rows() % n != 0 ||
      P_minus_net.rows() / n < static_cast<Index>(i)) {
    throw std::invalid_argument("innovation_noise_stats: network covariance does not match the structure");
  }
  const Index cols = s.rows();
  const Index mr = s.measurement_rows();
  const Matrix P_ii = network_block(P_minus_net, n, i, i);

  InnovationNoiseStats stats;
  stats.Sigma_eps_delta = Matrix::Zero(n, cols);
  stats.Delta = Matrix::Zero(cols, cols);
  stats.Delta.topLeftCorner(mr, mr) = s.R_tilde;
  for (std::size_t a = 0; a < s.open_nbhd.size(); ++a) {
    const int j = s.open_nbhd[a];
    const Index ca = s.consensus_offsets[a];
    stats.Sigma_eps_delta.middleCols(ca, n) = P_ii - network_block(P_minus_net, n, i, j);
    for (std::size_t b = 0; b < s.open_nbhd.size(); ++b) {
      const int l = s.open_nbhd[b];
      const Index cb = s.consensus_offsets[b];
      stats.Delta.block(ca, cb, n, n) = P_ii - network_block(P_minus_net, n, j, i) -
                                        network_block(P_minus_net, n, i, l) + network_block(P_minus_net, n, j, l);
    }
  }
  stats.Delta = symmetrize(stats.Delta);
  return stats;
}

AgentGain optimal_gain(const Matrix& P_minus_net, const InnovationStructure& s, const InnovationNoiseStats& stats) {
  if (stats.Sigma_eps_delta.rows() != s.n || stats.Sigma_eps_delta.cols() != s.rows() ||
      stats.Delta.rows() != s.rows() || stats.Delta.cols() != s.rows()) {
    throw std::invalid_argument("optimal_gain: noise statistics do not match the innovation structure");
  }
  const Matrix P_ii = network_block(P_minus_net, s.n, s.agent_id, s.agent_id);
  const Matrix& Ht = s.H_tilde;
  const Matrix& Sed = stats.Sigma_eps_delta;

  AgentGain g;
  g.agent_id = s.agent_id;
  g.Sigma_xy = P_ii * Ht.transpose() + Sed;
  g.Sigma_y = symmetrize(Ht * P_ii * Ht.transpose() + stats.Delta + Ht * Sed + Sed.transpose() * Ht.transpose());
  if (!is_psd(g.Sigma_y)) {
    throw NumericalError("innovation covariance of agent " + std::to_string(s.agent_id) + " is not PSD");
  }
  g.K = g.Sigma_xy * pseudo_inverse(g.Sigma_y, 1e-12);
  return g;
}

Matrix measurement_weight(const Matrix& K, const InnovationStructure& s, int j) {
  return K.middleCols(s.measurement_offset(j), s.measurement_dim(j));
}

Matrix consensus_weight(const Matrix& K, const InnovationStructure& s, int j) {
  return K.middleCols(s.consensus_offset(j), s.n);
}

Matrix filter_network_covariance(const Matrix& P_minus_net, std::span<const Matrix> gains,
                                 std::span<const InnovationStructure> structures) {
  const int m = static_cast<int>(structures.size());
  if (m == 0 || gains.size() != structures.size()) {
    throw std::invalid_argument("filter_network_covariance: one gain per agent required");
  }
  const Index n = structures.front().n;

  std::vector<Index> p_offset(static_cast<std::size_t>(m) + 1, 0);
  std::vector<Matrix> r_blocks;
  for (int i = 1; i <= m; ++i) {
    r_blocks.push_back(structures[static_cast<std::size_t>(i - 1)].own_R());
    p_offset[static_cast<std::size_t>(i)] = p_offset[static_cast<std::size_t>(i - 1)] + r_blocks.back().rows();
  }
  const Matrix R_net = block_diagonal(r_blocks);

  Matrix T = Matrix::Zero(n * m, n * m);
  Matrix M = Matrix::Zero(n * m, p_offset.back());
  for (int i = 1; i <= m; ++i) {
    const InnovationStructure& s = structures[static_cast<std::size_t>(i - 1)];
    const Matrix& K = gains[static_cast<std::size_t>(i - 1)];
    if (K.rows() != n || K.cols() != s.rows()) {
      throw std::invalid_argument("filter_network_covariance: gain of agent " + std::to_string(i) +
                                  " has the wrong shape");
    }
    Matrix diag = Matrix::Identity(n, n) - K * s.H_tilde;
    for (int j : s.open_nbhd) {
      const Matrix B = consensus_weight(K, s, j);
      diag -= B;
      network_block(T, n, i, j) = B;
    }
    network_block(T, n, i, i) = diag;
    for (int j : s.closed_nbhd) {
      M.block((i - 1) * n, p_offset[static_cast<std::size_t>(j - 1)], n, s.measurement_dim(j)) =
          measurement_weight(K, s, j);
    }
  }
  return symmetrize(T * P_minus_net * T.transpose() + M * R_net * M.transpose());
}

Matrix riccati_filter_covariance(const Matrix& P_minus_i, const AgentGain& gain) {
  return symmetrize(P_minus_i - gain.K * gain.Sigma_xy.transpose());
}

double closed_loop_spectral_radius(const SystemModel& system, const Matrix& K, const InnovationStructure& s) {
  return spectral_radius(system.F - K * s.H_tilde * system.F);
}

const Matrix& GainSchedule::gain(int k, int agent) const {
  if (k < 1 || k > horizon()) throw std::out_of_range("no gain stored for k = " + std::to_string(k));
  return steps[static_cast<std::size_t>(k - 1)].agents.at(static_cast<std::size_t>(agent - 1)).K;
}

RiccatiIteration::RiccatiIteration(const StateSpaceNetwork& model)
    : model_(&model),
      structures_(build_innovation_structures(model)),
      P_minus_(initial_network_covariance(model.system, model.agent_count())),
      P_plus_(P_minus_) {}

GainStep RiccatiIteration::step() {
  const int k = k_ + 1;
  Matrix P_minus = predict_network_covariance(P_plus_, model_->system);
  GainStep out;
  out.k = k;
  std::vector<Matrix> gains;
  for (const auto& s : structures_) {
    try {
      out.agents.push_back(optimal_gain(P_minus, s, innovation_noise_stats(P_minus, s)));
    } catch (const NumericalError& e) {
      throw NumericalError(e.what(), k);
    }
    gains.push_back(out.agents.back().K);
  }
  P_plus_ = filter_network_covariance(P_minus, gains, structures_);
  P_minus_ = std::move(P_minus);
  k_ = k;
  return out;
}

GainSchedule riccati_recursion(const StateSpaceNetwork& model, int steps) {
  if (steps < 1) throw std::invalid_argument("riccati_recursion: steps must be at least 1");
  RiccatiIteration it(model);
  GainSchedule schedule;
  schedule.structures = it.structures();
  schedule.covariances.push_back({0, model.n(), it.P_minus_net(), it.P_plus_net()});
  for (int k = 1; k <= steps; ++k) {
    schedule.steps.push_back(it.step());
    schedule.covariances.push_back({k, model.n(), it.P_minus_net(), it.P_plus_net()});
  }
  return schedule;
}

SteadyState steady_state(const StateSpaceNetwork& model, const SteadyStateOptions& options) {
  SteadyState result;
  result.unobservable_agents = analyze(model).unobservable_agents();

  const Index n = model.n();
  const int m = model.agent_count();
  const double limit = options.divergence_factor * trace_scale(model.system);

  RiccatiIteration it(model);
  GainStep last;
  Matrix previous = it.P_plus_net();
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    GainStep step = it.step();
    const Matrix& current = it.P_plus_net();

    bool blew_up = !all_finite(current);
    for (int i = 1; i <= m && !blew_up; ++i) blew_up = network_block(current, n, i, i).trace() > limit;
    if (blew_up) {
      result.diverged = true;
      break;
    }

    double diag_scale = 0.0;
    for (int i = 1; i <= m; ++i) diag_scale = std::max(diag_scale, network_block(current, n, i, i).norm());
    double change = 0.0;
    for (int i = 1; i <= m; ++i) {
      for (int j = 1; j <= m; ++j) {
        const double denom = std::max(network_block(current, n, i, j).norm(), 1e-12 * diag_scale);
        const double delta = (network_block(current, n, i, j) - network_block(previous, n, i, j)).norm();
        change = std::max(change, denom > 0.0 ? delta / denom : delta);
      }
    }
    last = std::move(step);
    previous = current;
    result.iterations = iter;
    result.final_change = change;
    if (change < options.tol) {
      result.converged = true;
      break;
    }
  }

  result.P_plus_net = previous;
  const auto& structures = it.structures();
  for (int i = 1; i <= m; ++i) {
    result.P_plus.push_back(network_block(previous, n, i, i));
    if (last.agents.empty()) {
      result.K.push_back(Matrix::Zero(n, structures[static_cast<std::size_t>(i - 1)].rows()));
    } else {
      result.K.push_back(last.agents[static_cast<std::size_t>(i - 1)].K);
    }
    result.spectral_radius.push_back(
        closed_loop_spectral_radius(model.system, result.K.back(), structures[static_cast<std::size_t>(i - 1)]));
  }
  return result;
}

GainTable gain_table(const GainSchedule& schedule, GainMode mode, int horizon) {
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  GainTable table;
  if (mode == GainMode::steady_state) {
    if (!schedule.steady_state) throw std::invalid_argument("gain schedule has no steady-state section");
    table.assign(static_cast<std::size_t>(horizon), schedule.steady_state->K);
    return table;
  }
  if (schedule.horizon() < horizon) {
    throw std::invalid_argument("gain schedule covers " + std::to_string(schedule.horizon()) +
                                " steps, horizon needs " + std::to_string(horizon));
  }
  for (int k = 1; k <= horizon; ++k) {
    std::vector<Matrix> row;
    for (const auto& g : schedule.steps[static_cast<std::size_t>(k - 1)].agents) row.push_back(g.K);
    table.push_back(std::move(row));
  }
  return table;
}

std::vector<NetworkCovariance> propagate_with_gains(const StateSpaceNetwork& model,
                                                    const std::vector<InnovationStructure>& structures,
                                                    const GainTable& table) {
  std::vector<NetworkCovariance> out;
  Matrix P_plus = initial_network_covariance(model.system, model.agent_count());
  out.push_back({0, model.n(), P_plus, P_plus});
  for (std::size_t k = 0; k < table.size(); ++k) {
    Matrix P_minus = predict_network_covariance(P_plus, model.system);
    P_plus = filter_network_covariance(P_minus, table[k], structures);
    out.push_back({static_cast<int>(k) + 1, model.n(), std::move(P_minus), P_plus});
  }
  return out;
}

}  // namespace dkf
