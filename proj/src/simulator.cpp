#include "dkf/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>

namespace dkf {

namespace {

constexpr int kChunkRuns = 64;

Matrix stacked_H(const StateSpaceNetwork& model) {
  Index rows = 0;
  for (const auto& o : model.observations) rows += o.p();
  Matrix H(rows, model.n());
  Index r = 0;
  for (const auto& o : model.observations) {
    H.middleRows(r, o.p()) = o.H;
    r += o.p();
  }
  return H;
}

Matrix stacked_R(const StateSpaceNetwork& model) {
  std::vector<Matrix> blocks;
  for (const auto& o : model.observations) blocks.push_back(o.R);
  return block_diagonal(blocks);
}

struct Accumulator {
  std::vector<std::vector<double>> sq_err;  // [k][agent]
  std::vector<Vector> sum_err;              // [k]
  std::vector<Matrix> sum_outer;            // [k]
  // pooled lag-1 products per agent and innovation component
  std::vector<Vector> w_xy, w_xx, w_yy;

  Accumulator(int K, int m, Index n, const std::vector<InnovationStructure>& structures)
      : sq_err(static_cast<std::size_t>(K + 1), std::vector<double>(static_cast<std::size_t>(m), 0.0)),
        sum_err(static_cast<std::size_t>(K + 1), Vector::Zero(n * m)),
        sum_outer(static_cast<std::size_t>(K + 1), Matrix::Zero(n * m, n * m)) {
    for (const auto& s : structures) {
      w_xy.push_back(Vector::Zero(s.rows()));
      w_xx.push_back(Vector::Zero(s.rows()));
      w_yy.push_back(Vector::Zero(s.rows()));
    }
  }

  void add(const SimulationTrace& t, Index n) {
    const std::size_t m = sq_err.front().size();
    Vector stacked(n * static_cast<Index>(m));
    for (std::size_t k = 0; k < t.err_plus.size(); ++k) {
      for (std::size_t i = 0; i < m; ++i) {
        const Vector& e = t.err_plus[k][i];
        sq_err[k][i] += e.squaredNorm();
        stacked.segment(static_cast<Index>(i) * n, n) = e;
      }
      sum_err[k] += stacked;
      sum_outer[k].noalias() += stacked * stacked.transpose();
    }
    for (std::size_t k = 1; k + 1 < t.innovations.size(); ++k) {
      for (std::size_t i = 0; i < m; ++i) {
        const Vector& a = t.innovations[k][i];
        const Vector& b = t.innovations[k + 1][i];
        w_xy[i] += a.cwiseProduct(b);
        w_xx[i] += a.cwiseAbs2();
        w_yy[i] += b.cwiseAbs2();
      }
    }
  }

  void merge(const Accumulator& o) {
    for (std::size_t k = 0; k < sq_err.size(); ++k) {
      for (std::size_t i = 0; i < sq_err[k].size(); ++i) sq_err[k][i] += o.sq_err[k][i];
      sum_err[k] += o.sum_err[k];
      sum_outer[k] += o.sum_outer[k];
    }
    for (std::size_t i = 0; i < w_xy.size(); ++i) {
      w_xy[i] += o.w_xy[i];
      w_xx[i] += o.w_xx[i];
      w_yy[i] += o.w_yy[i];
    }
  }
};

}  // namespace

std::vector<Vector> generate_truth(const SystemModel& system, int K, std::uint64_t seed) {
  if (K < 0) throw std::invalid_argument("generate_truth: horizon must be non-negative");
  std::vector<Vector> x;
  x.reserve(static_cast<std::size_t>(K + 1));
  const GaussianSampler prior(system.P0);
  const GaussianSampler process(system.Q);
  NoiseStream s0(seed, NoiseSource::initial_state, 0, 0);
  x.push_back(system.x0_mean + prior.sample(s0));
  for (int k = 1; k <= K; ++k) {
    NoiseStream s(seed, NoiseSource::process, 0, k);
    x.push_back(system.F * x.back() + process.sample(s));
  }
  return x;
}

Measurements generate_measurements(const std::vector<Vector>& truth, const StateSpaceNetwork& model,
                                   std::uint64_t seed) {
  std::vector<GaussianSampler> samplers;
  for (const auto& o : model.observations) samplers.emplace_back(o.R);
  Measurements z(truth.size());
  for (std::size_t k = 1; k < truth.size(); ++k) {
    for (const auto& o : model.observations) {
      NoiseStream s(seed, NoiseSource::measurement, o.agent_id, static_cast<int>(k));
      z[k].push_back(o.H * truth[k] + samplers[static_cast<std::size_t>(o.agent_id - 1)].sample(s));
    }
  }
  return z;
}

CentralizedResult centralized_kf_oracle(const StateSpaceNetwork& model, const Measurements& z, int K) {
  const Matrix H = stacked_H(model);
  const Matrix R = stacked_R(model);
  const Matrix& F = model.system.F;
  const Index n = model.n();

  CentralizedResult out;
  out.x_plus.push_back(model.system.x0_mean);
  out.x_minus.push_back(model.system.x0_mean);
  out.P_plus.push_back(model.system.P0);
  out.P_minus.push_back(model.system.P0);
  out.gain.emplace_back();
  for (int k = 1; k <= K; ++k) {
    const Vector x_minus = F * out.x_plus.back();
    const Matrix P_minus = symmetrize(F * out.P_plus.back() * F.transpose() + model.system.Q);
    const Matrix S = symmetrize(H * P_minus * H.transpose() + R);
    const Matrix gain = S.ldlt().solve(H * P_minus).transpose();
    Vector x_plus = x_minus;
    const auto ku = static_cast<std::size_t>(k);
    if (ku < z.size() && !z[ku].empty()) {
      Vector stacked(H.rows());
      Index r = 0;
      for (const auto& zi : z[ku]) {
        stacked.segment(r, zi.size()) = zi;
        r += zi.size();
      }
      x_plus += gain * (stacked - H * x_minus);
    }
    out.x_minus.push_back(x_minus);
    out.x_plus.push_back(x_plus);
    out.P_minus.push_back(P_minus);
    out.P_plus.push_back(symmetrize((Matrix::Identity(n, n) - gain * H) * P_minus));
    out.gain.push_back(gain);
  }
  return out;
}

std::vector<Matrix> centralized_covariances(const StateSpaceNetwork& model, int K) {
  return centralized_kf_oracle(model, Measurements{}, K).P_plus;
}

SimulationTrace simulate(const StateSpaceNetwork& model, const GainTable& gains, std::uint64_t seed,
                         bool with_central) {
  const int K = static_cast<int>(gains.size());
  const auto m = static_cast<std::size_t>(model.agent_count());
  SimulationTrace t;
  t.seed = seed;
  t.horizon = K;
  t.x_true = generate_truth(model.system, K, seed);
  t.z = generate_measurements(t.x_true, model, seed);

  std::vector<AgentState> states;
  for (int i = 1; i <= model.agent_count(); ++i) states.push_back(initial_state(model.system, i));

  auto record = [&](const std::vector<AgentState>& s, std::size_t k) {
    std::vector<Vector> xp, xf, em, ep;
    for (std::size_t i = 0; i < m; ++i) {
      xp.push_back(s[i].x_pred);
      xf.push_back(s[i].x_filt);
      em.push_back(t.x_true[k] - s[i].x_pred);
      ep.push_back(t.x_true[k] - s[i].x_filt);
    }
    t.x_pred.push_back(std::move(xp));
    t.x_filt.push_back(std::move(xf));
    t.err_minus.push_back(std::move(em));
    t.err_plus.push_back(std::move(ep));
  };
  record(states, 0);
  t.innovations.emplace_back();
  t.messages.push_back(0);

  for (int k = 1; k <= K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    RoundResult round = run_round(states, t.z[ku], gains[ku - 1], model);
    states = std::move(round.states);
    record(states, ku);
    std::vector<Vector> ys;
    for (auto& y : round.innovations) ys.push_back(std::move(y.y));
    t.innovations.push_back(std::move(ys));
    t.messages.push_back(round.messages);
  }
  if (with_central) t.central_estimates = centralized_kf_oracle(model, t.z, K).x_plus;
  return t;
}

unsigned resolve_thread_count(unsigned requested) {
  unsigned threads = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DKF_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) threads = std::min<unsigned>(threads, static_cast<unsigned>(cap));
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, threads);
}

MetricsSummary monte_carlo(const StateSpaceNetwork& model, const GainTable& gains, const MonteCarloOptions& options) {
  if (options.runs < 1) throw std::invalid_argument("monte_carlo: runs must be at least 1");
  if (gains.empty()) throw std::invalid_argument("monte_carlo: empty gain table");
  const int K = static_cast<int>(gains.size());
  const int m = model.agent_count();
  const Index n = model.n();
  const auto structures = build_innovation_structures(model);

  const int chunks = (options.runs + kChunkRuns - 1) / kChunkRuns;
  std::vector<Accumulator> partial(static_cast<std::size_t>(chunks), Accumulator(K, m, n, structures));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int c = next++; c < chunks; c = next++) {
      const int begin = c * kChunkRuns;
      const int end = std::min(options.runs, begin + kChunkRuns);
      for (int r = begin; r < end; ++r) {
        partial[static_cast<std::size_t>(c)].add(
            simulate(model, gains, options.base_seed + static_cast<std::uint64_t>(r), false), n);
      }
    }
  };
  const unsigned threads = std::min<unsigned>(resolve_thread_count(options.threads), static_cast<unsigned>(chunks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  Accumulator total = partial.front();
  for (std::size_t c = 1; c < partial.size(); ++c) total.merge(partial[c]);

  MetricsSummary out;
  out.runs = options.runs;
  out.horizon = K;
  out.base_seed = options.base_seed;
  out.agents = m;
  out.n = n;
  const double N = options.runs;
  const auto analytic = propagate_with_gains(model, structures, gains);
  const auto central = centralized_covariances(model, K);
  for (int k = 0; k <= K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    std::vector<double> mse, tr;
    for (int i = 1; i <= m; ++i) {
      mse.push_back(total.sq_err[ku][static_cast<std::size_t>(i - 1)] / N);
      tr.push_back(analytic[ku].plus_block(i, i).trace());
    }
    out.empirical_mse.push_back(std::move(mse));
    out.analytic_trace.push_back(std::move(tr));
    out.centralized_trace.push_back(central[ku].trace());
    out.empirical_covariance.push_back(total.sum_outer[ku] / N);
    out.analytic_covariance.push_back(analytic[ku].P_plus);
    const Vector mean = total.sum_err[ku] / N;
    out.error_mean.push_back(mean);
    if (options.runs > 1) {
      const Vector second = total.sum_outer[ku].diagonal() / N;
      const Vector var = ((second - mean.cwiseAbs2()) * (N / (N - 1.0))).cwiseMax(0.0);
      out.error_mean_stderr.push_back((var / N).cwiseSqrt());
    } else {
      out.error_mean_stderr.push_back(Vector::Zero(mean.size()));
    }
  }
  for (int i = 1; i <= m; ++i) {
    const auto& s = structures[static_cast<std::size_t>(i - 1)];
    out.spectral_radius.push_back(
        closed_loop_spectral_radius(model.system, gains.back()[static_cast<std::size_t>(i - 1)], s));
  }
  const double pairs = N * static_cast<double>(K - 1);
  if (K >= 2) {
    for (int i = 1; i <= m; ++i) {
      const auto& s = structures[static_cast<std::size_t>(i - 1)];
      const auto iu = static_cast<std::size_t>(i - 1);
      for (Index c = 0; c < s.rows(); ++c) {
        WhitenessStat w;
        w.agent = i;
        w.component = c;
        w.consensus = c >= s.measurement_rows();
        const double denom = std::sqrt(total.w_xx[iu](c) * total.w_yy[iu](c));
        w.correlation = denom > 0.0 ? total.w_xy[iu](c) / denom : 0.0;
        w.z_score = w.correlation * std::sqrt(pairs);
        out.whiteness.push_back(w);
      }
    }
  }
  return out;
}

}  // namespace dkf
