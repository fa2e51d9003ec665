#include "dkf/model.hpp"
#include "dkf/scenario_io.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace dkf;
using namespace dkf::testing;

namespace {

StateSpaceNetwork identity_single_agent() {
  StateSpaceNetwork m;
  m.system = {Matrix::Identity(2, 2), Matrix::Identity(2, 2), Vector::Zero(2), Matrix::Identity(2, 2)};
  m.observations.push_back({1, mat({{1, 0}}), mat({{1}})});
  m.graph = NetworkGraph::empty(1);
  return m;
}

StateSpaceNetwork two_agent_valid() {
  StateSpaceNetwork m = simple_model(Matrix::Identity(2, 2), {mat({{1, 0}}), mat({{0, 1}})}, {{2, 1}});
  m.system.Q = mat({{2, 0.5}, {0.5, 1}});
  return m;
}

}  // namespace

TEST(Validate, ConsistentModelHasNoViolations) {
  EXPECT_TRUE(validate(identity_single_agent()).ok());
  EXPECT_TRUE(validate(two_agent_valid()).ok());
}

TEST(Validate, IndefiniteQ) {
  auto m = identity_single_agent();
  m.system.Q = mat({{1, 2}, {2, 1}});  // eigenvalues 3 and -1
  const auto report = validate(m);
  EXPECT_TRUE(report.contains("Q not PSD"));
  EXPECT_EQ(report.violations.size(), 1u);
}

TEST(Validate, SelfLoop) {
  auto m = identity_single_agent();
  m.graph.adjacency(0, 0) = 1;
  const auto report = validate(m);
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0], "self-loop at agent 1");
}

// Each mutation of a valid model must produce exactly its own violation.
TEST(Validate, SingleMutationsProduceExactlyOneViolation) {
  struct Case {
    const char* expected;
    void (*mutate)(StateSpaceNetwork&);
  };
  const Case cases[] = {
      {"Q not symmetric", [](StateSpaceNetwork& m) { m.system.Q(0, 1) = 0.6; }},
      {"Q not PSD", [](StateSpaceNetwork& m) { m.system.Q(1, 1) = -1.0; }},
      {"P0 not PSD", [](StateSpaceNetwork& m) { m.system.P0(0, 0) = -0.5; }},
      {"P0 not symmetric", [](StateSpaceNetwork& m) { m.system.P0(1, 0) = 0.1; }},
      {"agent 2: R not positive definite", [](StateSpaceNetwork& m) { m.observations[1].R(0, 0) = 0.0; }},
      {"agent 1: H has 3 columns", [](StateSpaceNetwork& m) { m.observations[0].H = mat({{1, 0, 0}}); }},
      {"x0_mean has length 3", [](StateSpaceNetwork& m) { m.system.x0_mean = Vector::Zero(3); }},
      {"self-loop at agent 2", [](StateSpaceNetwork& m) { m.graph.adjacency(1, 1) = 1; }},
      {"adjacency entry (2,1) not in {0,1}", [](StateSpaceNetwork& m) { m.graph.adjacency(1, 0) = 2; }},
      {"observation count 1 does not match agent count 2", [](StateSpaceNetwork& m) { m.observations.pop_back(); }},
      {"F has non-finite entries", [](StateSpaceNetwork& m) { m.system.F(0, 0) = std::nan(""); }},
  };
  for (const auto& c : cases) {
    auto m = two_agent_valid();
    c.mutate(m);
    const auto report = validate(m);
    ASSERT_EQ(report.violations.size(), 1u) << c.expected << " -> "
                                            << (report.violations.empty() ? "" : report.violations[0]);
    EXPECT_TRUE(report.contains(c.expected)) << report.violations[0];
  }
}

TEST(Validate, PsdToleranceIsRelative) {
  auto m = identity_single_agent();
  m.system.P0 = mat({{1e6, 0}, {0, -1e-4}});  // -1e-4 is within 1e-9 * (1 + 1e6)
  EXPECT_TRUE(validate(m).ok());
  m.system.P0(1, 1) = -1e-2;
  EXPECT_TRUE(validate(m).contains("P0 not PSD"));
}

TEST(Neighborhood, ChainReadsRowOfAdjacency) {
  const auto g = NetworkGraph::from_edges(3, {{1, 2}, {2, 3}});
  EXPECT_EQ(g.adjacency(1, 0), 1);
  EXPECT_EQ(g.adjacency(2, 1), 1);
  EXPECT_EQ(open_neighborhood(g, 2), (std::vector<int>{1}));
  EXPECT_EQ(closed_neighborhood(g, 2), (std::vector<int>{1, 2}));
  EXPECT_EQ(open_neighborhood(g, 1), (std::vector<int>{}));
}

TEST(Neighborhood, EmptyAndFullGraphs) {
  const auto empty = NetworkGraph::empty(3);
  for (int i = 1; i <= 3; ++i) {
    EXPECT_TRUE(open_neighborhood(empty, i).empty());
    EXPECT_EQ(closed_neighborhood(empty, i), (std::vector<int>{i}));
  }
  const auto full = NetworkGraph::from_edges(3, {{1, 2}, {1, 3}, {2, 1}, {2, 3}, {3, 1}, {3, 2}});
  EXPECT_EQ(open_neighborhood(full, 1), (std::vector<int>{2, 3}));
  EXPECT_EQ(closed_neighborhood(full, 2), (std::vector<int>{1, 2, 3}));
}

TEST(Neighborhood, OutOfRangeAgent) {
  const auto g = NetworkGraph::empty(2);
  EXPECT_THROW(open_neighborhood(g, 0), AgentIdError);
  EXPECT_THROW(closed_neighborhood(g, 3), AgentIdError);
}

TEST(Neighborhood, OpenIsStrictSubsetOfClosed) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto model = random_model(rng, 2, 6, 0.4);
    for (int i = 1; i <= 6; ++i) {
      const auto open = open_neighborhood(model.graph, i);
      const auto closed = closed_neighborhood(model.graph, i);
      EXPECT_EQ(closed.size(), open.size() + 1);
      EXPECT_TRUE(std::is_sorted(closed.begin(), closed.end()));
      EXPECT_TRUE(std::includes(closed.begin(), closed.end(), open.begin(), open.end()));
      EXPECT_TRUE(std::binary_search(closed.begin(), closed.end(), i));
      EXPECT_FALSE(std::binary_search(open.begin(), open.end(), i));
    }
  }
}

TEST(Scenario, ParsesBundledChain) {
  const auto m = bundled("chain3.json");
  EXPECT_TRUE(validate(m).ok());
  EXPECT_EQ(m.agent_count(), 3);
  EXPECT_EQ(m.n(), 2);
  EXPECT_TRUE(m.graph.has_edge(1, 2));
  EXPECT_TRUE(m.graph.has_edge(2, 3));
  EXPECT_FALSE(m.graph.has_edge(2, 1));
  EXPECT_EQ(m.graph.edge_count(), 2u);
}

TEST(Scenario, MalformedJsonReportsLine) {
  try {
    parse_scenario("{\n  \"n\": 1,\n  \"m\": ,\n}");
    FAIL() << "expected ScenarioError";
  } catch (const ScenarioError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Scenario, StructuralErrorsNameThePath) {
  const std::string base = R"({"n":1,"m":1,"F":[[1]],"Q":[[1]],"x0_mean":[0],"P0":[[1]],)";
  EXPECT_THROW(parse_scenario(base + R"("agents":[{"id":2,"H":[[1]],"R":[[1]]}]})"), ScenarioError);
  EXPECT_THROW(parse_scenario(base + R"("agents":[{"id":1,"H":[[1]],"R":[[1]]}],"edges":[[1,5]]})"),
               ScenarioError);
  try {
    parse_scenario(base + R"("agents":[{"id":1,"H":[[1, 2], [3]],"R":[[1]]}]})");
    FAIL();
  } catch (const ScenarioError& e) {
    EXPECT_NE(std::string(e.what()).find("/agents/0/H"), std::string::npos) << e.what();
  }
}

TEST(Scenario, HashIsStableAndSensitive) {
  auto a = bundled("chain3.json");
  const auto b = parse_scenario(scenario_to_json(a).dump(4));
  EXPECT_EQ(scenario_hash(a), scenario_hash(b));
  EXPECT_EQ(scenario_hash(a).size(), 64u);
  a.system.Q(0, 0) += 1e-12;
  EXPECT_NE(scenario_hash(a), scenario_hash(b));
}
