#include "dkf/gain.hpp"
#include "dkf/gains_io.hpp"
#include "dkf/linalg.hpp"
#include "dkf/simulator.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace dkf;
using namespace dkf::testing;

namespace {

double rel_err(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

StateSpaceNetwork scalar_golden() {
  StateSpaceNetwork m;
  m.system = {mat({{1}}), mat({{1}}), vec({0}), mat({{1}})};
  m.observations.push_back({1, mat({{1}}), mat({{1}})});
  m.graph = NetworkGraph::empty(1);
  return m;
}

StateSpaceNetwork one_way_pair() {
  StateSpaceNetwork m = simple_model(mat({{0.95, 0.1}, {0, 0.9}}), {mat({{1, 0}}), mat({{0, 1}})}, {{2, 1}});
  m.system.Q = 0.1 * Matrix::Identity(2, 2);
  m.observations[1].R = mat({{0.5}});
  return m;
}

Matrix classical_gain(const Matrix& P_minus, const Matrix& H, const Matrix& R) {
  const Matrix S = H * P_minus * H.transpose() + R;
  return P_minus * H.transpose() * S.inverse();
}

}  // namespace

TEST(InnovationStructure, IsolatedAgentIsJustItsMeasurement) {
  const auto model = simple_model(mat({{1, 1}, {0, 1}}), {mat({{1, 0}}), mat({{0, 1}})}, {});
  const auto s = build_innovation_structure(model, 2);
  EXPECT_EQ(s.H_tilde, mat({{0, 1}}));
  EXPECT_EQ(s.R_tilde, mat({{1}}));
  EXPECT_TRUE(s.open_nbhd.empty());
}

TEST(InnovationStructure, EdgeTwoToOne) {
  const auto model = simple_model(Matrix::Identity(2, 2), {mat({{1, 0}}), mat({{0, 1}})}, {{2, 1}});
  const auto s = build_innovation_structure(model, 1);
  EXPECT_EQ(s.H_tilde, mat({{1, 0}, {0, 1}, {0, 0}, {0, 0}}));
  EXPECT_EQ(s.closed_nbhd, (std::vector<int>{1, 2}));
  EXPECT_EQ(s.open_nbhd, (std::vector<int>{2}));
  EXPECT_EQ(s.measurement_offset(2), 1);
  EXPECT_EQ(s.consensus_offset(2), 2);
}

TEST(InnovationStructure, FullyConnectedRowCount) {
  const auto model = bundled("full3.json");
  const auto s = build_innovation_structure(model, 2);
  EXPECT_EQ(s.rows(), 1 + 1 + 1 + 2 * 2);
  EXPECT_EQ(s.measurement_rows(), 3);
  EXPECT_TRUE(s.H_tilde.bottomRows(4).isZero(0.0));
}

TEST(NetworkPredict, Examples) {
  const auto scalar = scalar_golden();
  const Matrix P0 = initial_network_covariance(scalar.system, 1);
  EXPECT_EQ(predict_network_covariance(P0, scalar.system), mat({{2}}));

  auto model = bundled("chain3.json");
  model.system.F.setZero();
  std::mt19937_64 rng(1);
  const Matrix P = random_spd(rng, 6);
  const Matrix Pm = predict_network_covariance(P, model.system);
  for (int i = 1; i <= 3; ++i) {
    for (int j = 1; j <= 3; ++j) EXPECT_LT((network_block(Pm, 2, i, j) - model.system.Q).norm(), 1e-15);
  }
}

TEST(InnovationNoise, CommonPriorGivesZeroConsensusStatistics) {
  const auto model = bundled("full3.json");
  const Matrix Pm = predict_network_covariance(initial_network_covariance(model.system, 3), model.system);
  for (int i = 1; i <= 3; ++i) {
    const auto s = build_innovation_structure(model, i);
    const auto stats = innovation_noise_stats(Pm, s);
    EXPECT_TRUE(stats.Sigma_eps_delta.isZero(0.0));
    EXPECT_TRUE(stats.Delta.bottomRightCorner(4, 4).isZero(0.0));
    EXPECT_EQ(stats.Delta.topLeftCorner(3, 3), s.R_tilde);
  }
}

TEST(InnovationNoise, IsolatedAgent) {
  const auto model = bundled("disconnected_pair.json");
  const Matrix Pm = predict_network_covariance(initial_network_covariance(model.system, 2), model.system);
  const auto s = build_innovation_structure(model, 2);
  const auto stats = innovation_noise_stats(Pm, s);
  EXPECT_TRUE(stats.Sigma_eps_delta.isZero(0.0));
  EXPECT_EQ(stats.Delta, model.observations[1].R);
}

TEST(InnovationNoise, StructuralInvariantsAlongRecursion) {
  const auto model = bundled("chain3.json");
  RiccatiIteration it(model);
  for (int k = 1; k <= 15; ++k) {
    it.step();
    for (const auto& s : it.structures()) {
      const auto stats = innovation_noise_stats(it.P_minus_net(), s);
      EXPECT_TRUE(stats.Sigma_eps_delta.leftCols(s.measurement_rows()).isZero(0.0));
      EXPECT_TRUE(is_psd(stats.Delta));
      EXPECT_TRUE(is_symmetric(stats.Delta));
      EXPECT_EQ(stats.Delta.topLeftCorner(s.measurement_rows(), s.measurement_rows()), s.R_tilde);
    }
  }
}

// Monte Carlo oracle for the cross blocks and D at k = 2, after one filter
// step has decorrelated the two agents.
TEST(InnovationNoise, CrossBlocksMatchMonteCarlo) {
  const auto model = one_way_pair();
  const auto schedule = riccati_recursion(model, 2);
  const auto table = gain_table(schedule, GainMode::optimal, 2);
  const int runs = 100000;
  const Index n = 2;
  Matrix joint = Matrix::Zero(2 * n, 2 * n);
  Matrix diff = Matrix::Zero(n, n);
  for (int r = 0; r < runs; ++r) {
    const auto trace = simulate(model, table, 900000 + static_cast<std::uint64_t>(r), false);
    Vector e(2 * n);
    e << trace.err_minus[2][0], trace.err_minus[2][1];
    joint += e * e.transpose();
    const Vector d = trace.err_minus[2][0] - trace.err_minus[2][1];
    diff += d * d.transpose();
  }
  joint /= runs;
  diff /= runs;

  const Matrix& Pm = schedule.covariances[2].P_minus;
  EXPECT_LT(rel_err(network_block(joint, n, 1, 2), network_block(Pm, n, 1, 2)), 0.03);
  EXPECT_LT(rel_err(joint, Pm), 0.02);

  // Agent 1's D block for its single neighbor 2: P_11 − P_21 − P_12 + P_22.
  const auto s = build_innovation_structure(model, 1);
  const auto stats = innovation_noise_stats(Pm, s);
  const Matrix D = stats.Delta.bottomRightCorner(n, n);
  EXPECT_GT(D.norm(), 1e-3);
  EXPECT_LT(rel_err(diff, D), 0.03);
}

TEST(OptimalGain, ScalarFirstStep) {
  const auto model = scalar_golden();
  const Matrix Pm = predict_network_covariance(initial_network_covariance(model.system, 1), model.system);
  const auto s = build_innovation_structure(model, 1);
  const auto g = optimal_gain(Pm, s, innovation_noise_stats(Pm, s));
  EXPECT_NEAR(g.K(0, 0), 2.0 / 3.0, 1e-15);
}

TEST(OptimalGain, IsolatedAgentIsClassicalKalmanGain) {
  const auto model = bundled("disconnected_pair.json");
  RiccatiIteration it(model);
  for (int k = 1; k <= 5; ++k) {
    const Matrix P_prev = it.P_plus_net();
    const auto step = it.step();
    for (int i = 1; i <= 2; ++i) {
      const Matrix Pm = model.system.F * network_block(P_prev, 2, i, i) * model.system.F.transpose() + model.system.Q;
      const auto& obs = model.observations[static_cast<std::size_t>(i - 1)];
      EXPECT_LT(rel_err(step.agents[static_cast<std::size_t>(i - 1)].K, classical_gain(Pm, obs.H, obs.R)), 1e-12);
    }
  }
}

TEST(OptimalGain, IdenticalPriorsReduceToStackedMeasurementGain) {
  const auto model = bundled("full3.json");
  const Matrix Pm1 = model.system.F * model.system.P0 * model.system.F.transpose() + model.system.Q;
  Matrix H(3, 2);
  H << model.observations[0].H, model.observations[1].H, model.observations[2].H;
  Matrix R = Matrix::Zero(3, 3);
  for (int j = 0; j < 3; ++j) R(j, j) = model.observations[static_cast<std::size_t>(j)].R(0, 0);
  const Matrix K_stacked = classical_gain(Pm1, H, R);

  RiccatiIteration it(model);
  const auto step = it.step();
  for (int i = 1; i <= 3; ++i) {
    const auto& s = it.structures()[static_cast<std::size_t>(i - 1)];
    const Matrix& K = step.agents[static_cast<std::size_t>(i - 1)].K;
    for (int j : s.open_nbhd) EXPECT_LT(consensus_weight(K, s, j).norm(), 1e-12);
    for (int j = 1; j <= 3; ++j) {
      EXPECT_LT((measurement_weight(K, s, j) - K_stacked.col(j - 1)).norm(), 1e-10);
    }
  }
}

TEST(OptimalGain, PseudoinverseSolvesNormalEquations) {
  for (const char* name : {"chain3.json", "full3.json", "disconnected_pair.json"}) {
    const auto model = bundled(name);
    RiccatiIteration it(model);
    for (int k = 1; k <= 20; ++k) {
      for (const auto& g : it.step().agents) {
        EXPECT_LT((g.K * g.Sigma_y - g.Sigma_xy).norm(), 1e-9 * (1.0 + g.Sigma_xy.norm())) << name << " k=" << k;
        EXPECT_EQ(g.K.cols(), it.structures()[static_cast<std::size_t>(g.agent_id - 1)].rows());
      }
    }
  }
}

TEST(NetworkFilter, ZeroGainsLeaveCovarianceUnchanged) {
  const auto model = bundled("chain3.json");
  const auto structures = build_innovation_structures(model);
  std::mt19937_64 rng(2);
  const Matrix Pm = random_spd(rng, 6);
  std::vector<Matrix> gains;
  for (const auto& s : structures) gains.push_back(Matrix::Zero(2, s.rows()));
  EXPECT_LT((filter_network_covariance(Pm, gains, structures) - Pm).norm(), 1e-14);
}

TEST(NetworkFilter, DiagonalBlocksMatchRiccatiFormAtOptimalGains) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto model = random_model(rng, 1 + trial % 3, trial < 3 ? 1 : 3, 0.6);
    RiccatiIteration it(model);
    for (int k = 1; k <= 10; ++k) {
      const auto step = it.step();
      for (const auto& g : step.agents) {
        const Matrix Pm_i = network_block(it.P_minus_net(), model.n(), g.agent_id, g.agent_id);
        const Matrix ricc = riccati_filter_covariance(Pm_i, g);
        const Matrix joseph = network_block(it.P_plus_net(), model.n(), g.agent_id, g.agent_id);
        EXPECT_LT((joseph - ricc).norm(), 1e-10 * joseph.norm()) << "trial " << trial << " k=" << k;
      }
      EXPECT_TRUE(is_psd(it.P_minus_net()));
      EXPECT_TRUE(is_psd(it.P_plus_net()));
      EXPECT_TRUE(is_symmetric(it.P_plus_net()));
    }
  }
}

TEST(NetworkFilter, PerturbedGainsNeverImproveTrace) {
  const auto model = bundled("chain3.json");
  RiccatiIteration it(model);
  std::mt19937_64 rng(4);
  for (int k = 1; k <= 6; ++k) {
    const auto step = it.step();
    std::vector<Matrix> optimal;
    for (const auto& g : step.agents) optimal.push_back(g.K);
    for (int i = 1; i <= 3; ++i) {
      const double base = network_block(it.P_plus_net(), 2, i, i).trace();
      for (int t = 0; t < 20; ++t) {
        auto gains = optimal;
        auto& Ki = gains[static_cast<std::size_t>(i - 1)];
        Ki += 1e-3 * random_matrix(rng, Ki.rows(), Ki.cols());
        const Matrix P = filter_network_covariance(it.P_minus_net(), gains, it.structures());
        EXPECT_GE(network_block(P, 2, i, i).trace(), base - 1e-9);
      }
    }
  }
}

TEST(Riccati, ScalarSequence) {
  const auto schedule = riccati_recursion(scalar_golden(), 60);
  EXPECT_EQ(schedule.covariances.front().P_plus(0, 0), 1.0);
  EXPECT_NEAR(schedule.covariances[1].P_plus(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(schedule.covariances[2].P_plus(0, 0), 5.0 / 8.0, 1e-15);
  EXPECT_NEAR(schedule.covariances.back().P_plus(0, 0), (std::sqrt(5.0) - 1.0) / 2.0, 1e-12);
}

TEST(Riccati, OneStepGivesOneGainPerAgent) {
  const auto schedule = riccati_recursion(bundled("chain3.json"), 1);
  ASSERT_EQ(schedule.horizon(), 1);
  EXPECT_EQ(schedule.steps[0].agents.size(), 3u);
}

TEST(Riccati, ChainTracesNonIncreasing) {
  const auto schedule = riccati_recursion(bundled("chain3.json"), 100);
  for (int k = 3; k <= 100; ++k) {
    for (int i = 1; i <= 3; ++i) {
      EXPECT_LE(schedule.covariances[static_cast<std::size_t>(k)].plus_block(i, i).trace(),
                schedule.covariances[static_cast<std::size_t>(k - 1)].plus_block(i, i).trace() + 1e-9);
    }
  }
}

TEST(SteadyState, ScalarGoldenRatio) {
  const auto ss = steady_state(scalar_golden());
  ASSERT_TRUE(ss.converged);
  const double p = (std::sqrt(5.0) - 1.0) / 2.0;
  EXPECT_NEAR(ss.P_plus[0](0, 0), p, 1e-9);
  EXPECT_NEAR(ss.K[0](0, 0), (p + 1.0) / (p + 2.0), 1e-9);
  EXPECT_NEAR(ss.spectral_radius[0], 1.0 - (p + 1.0) / (p + 2.0), 1e-9);
}

TEST(SteadyState, UnstableScalarIsStabilized) {
  auto model = scalar_golden();
  model.system.F = mat({{1.05}});
  const auto ss = steady_state(model);
  ASSERT_TRUE(ss.converged);
  EXPECT_LT(ss.spectral_radius[0], 1.0);
}

TEST(SteadyState, UnobservableUnstableAgentDiverges) {
  const auto ss = steady_state(bundled("unobservable_agent.json"));
  EXPECT_FALSE(ss.converged);
  EXPECT_TRUE(ss.diverged);
  EXPECT_EQ(ss.unobservable_agents, (std::vector<int>{2}));
  EXPECT_GE(ss.spectral_radius[1], 1.0);
}

TEST(SpectralRadius, Examples) {
  EXPECT_DOUBLE_EQ(spectral_radius(Matrix::Identity(2, 2)), 1.0);
  EXPECT_DOUBLE_EQ(spectral_radius(mat({{0, 1}, {0, 0}})), 0.0);
  EXPECT_DOUBLE_EQ(spectral_radius(mat({{0.5, 0}, {0, -0.9}})), 0.9);
  EXPECT_NEAR(spectral_radius(mat({{0, -1}, {1, 0}})), 1.0, 1e-15);
}

TEST(GainTable, OptimalTableReproducesRecursionCovariances) {
  const auto model = bundled("chain3.json");
  const auto schedule = riccati_recursion(model, 12);
  const auto covs = propagate_with_gains(model, schedule.structures, gain_table(schedule, GainMode::optimal, 12));
  ASSERT_EQ(covs.size(), 13u);
  for (int k = 0; k <= 12; ++k) {
    EXPECT_LT((covs[static_cast<std::size_t>(k)].P_plus - schedule.covariances[static_cast<std::size_t>(k)].P_plus).norm(),
              1e-12);
  }
  EXPECT_THROW(gain_table(schedule, GainMode::optimal, 13), std::invalid_argument);
  EXPECT_THROW(gain_table(schedule, GainMode::steady_state, 5), std::invalid_argument);
}

TEST(GainsArtifact, JsonRoundTripIsExact) {
  const auto model = bundled("chain3.json");
  GainArtifact a{scenario_hash(model), riccati_recursion(model, 5)};
  a.schedule.steady_state = steady_state(model);
  const auto b = gains_from_json(nlohmann::json::parse(gains_to_json(a).dump()));
  EXPECT_EQ(b.scenario_hash, a.scenario_hash);
  ASSERT_EQ(b.schedule.horizon(), 5);
  for (int k = 1; k <= 5; ++k) {
    for (int i = 1; i <= 3; ++i) EXPECT_EQ(b.schedule.gain(k, i), a.schedule.gain(k, i));
  }
  ASSERT_TRUE(b.schedule.steady_state.has_value());
  EXPECT_EQ(b.schedule.steady_state->K[2], a.schedule.steady_state->K[2]);
  EXPECT_THROW(gains_from_json(nlohmann::json::parse(R"({"format":"other"})")), GainsFormatError);

  auto loaded = b.schedule;
  EXPECT_NO_THROW(attach_model(loaded, model));
  EXPECT_THROW(attach_model(loaded, bundled("full3.json")), GainsFormatError);
}
