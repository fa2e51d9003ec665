#pragma once

#include "dkf/linalg.hpp"

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dkf {

/// Linear time-invariant dynamics x_k = F x_{k-1} + w_{k-1}, w ~ N(0, Q),
/// with prior x_0 ~ N(x0_mean, P0).
struct SystemModel {
  Matrix F;
  Matrix Q;
  Vector x0_mean;
  Matrix P0;

  Index n() const { return F.rows(); }
};

/// z_{i,k} = H x_k + v_{i,k}, v ~ N(0, R). Agent ids are 1-based.
struct AgentObservation {
  int agent_id = 0;
  Matrix H;
  Matrix R;

  Index p() const { return H.rows(); }
};

/// Directed communication graph. adjacency(i-1, j-1) == 1 iff there is an
/// edge j → i, i.e. agent i receives from agent j.
struct NetworkGraph {
  Eigen::MatrixXi adjacency;

  int size() const { return static_cast<int>(adjacency.rows()); }
  bool has_edge(int from, int to) const { return adjacency(to - 1, from - 1) != 0; }
  std::size_t edge_count() const;

  static NetworkGraph empty(int m);
  /// Edges are (from, to) pairs of 1-based agent ids.
  static NetworkGraph from_edges(int m, const std::vector<std::pair<int, int>>& edges);
};

struct StateSpaceNetwork {
  SystemModel system;
  std::vector<AgentObservation> observations;  // ordered by agent_id
  NetworkGraph graph;

  int agent_count() const { return graph.size(); }
  Index n() const { return system.n(); }
  const AgentObservation& agent(int id) const { return observations.at(static_cast<std::size_t>(id - 1)); }
};

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
  bool contains(const std::string& fragment) const;
};

class AgentIdError : public std::out_of_range {
 public:
  AgentIdError(int id, int m);
};

/// Collects every invariant violation; never throws.
ValidationReport validate(const StateSpaceNetwork& model);

/// Ω_i: agents with an edge into i, ascending.
std::vector<int> open_neighborhood(const NetworkGraph& graph, int agent);

/// Ω̄_i = {i} ∪ Ω_i, ascending.
std::vector<int> closed_neighborhood(const NetworkGraph& graph, int agent);

}  // namespace dkf
