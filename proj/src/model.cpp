#include "dkf/model.hpp"

#include <algorithm>
#include <sstream>

namespace dkf {

namespace {

std::string dims(const Matrix& x) {
  std::ostringstream os;
  os << x.rows() << "x" << x.cols();
  return os.str();
}

void check_covariance(const Matrix& x, Index n, const std::string& name, ValidationReport& report) {
  if (x.rows() != n || x.cols() != n) {
    report.violations.push_back(name + " is " + dims(x) + ", expected " + std::to_string(n) + "x" +
                                std::to_string(n));
    return;
  }
  if (!all_finite(x)) {
    report.violations.push_back(name + " has non-finite entries");
    return;
  }
  if (!is_symmetric(x)) report.violations.push_back(name + " not symmetric");
  if (!is_psd(x)) report.violations.push_back(name + " not PSD");
}

}  // namespace

std::size_t NetworkGraph::edge_count() const {
  return static_cast<std::size_t>((adjacency.array() != 0).count());
}

NetworkGraph NetworkGraph::empty(int m) { return NetworkGraph{Eigen::MatrixXi::Zero(m, m)}; }

NetworkGraph NetworkGraph::from_edges(int m, const std::vector<std::pair<int, int>>& edges) {
  NetworkGraph g = empty(m);
  for (const auto& [from, to] : edges) {
    if (from < 1 || from > m) throw AgentIdError(from, m);
    if (to < 1 || to > m) throw AgentIdError(to, m);
    g.adjacency(to - 1, from - 1) = 1;
  }
  return g;
}

bool ValidationReport::contains(const std::string& fragment) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const std::string& v) { return v.find(fragment) != std::string::npos; });
}

AgentIdError::AgentIdError(int id, int m)
    : std::out_of_range("agent id " + std::to_string(id) + " out of range [1.." + std::to_string(m) + "]") {}

ValidationReport validate(const StateSpaceNetwork& model) {
  ValidationReport report;
  const SystemModel& sys = model.system;
  const Index n = sys.F.rows();

  if (n < 1) report.violations.push_back("state dimension n must be positive");
  if (sys.F.rows() != sys.F.cols()) report.violations.push_back("F is " + dims(sys.F) + ", not square");
  if (!all_finite(sys.F)) report.violations.push_back("F has non-finite entries");
  check_covariance(sys.Q, n, "Q", report);
  check_covariance(sys.P0, n, "P0", report);
  if (sys.x0_mean.size() != n) {
    report.violations.push_back("x0_mean has length " + std::to_string(sys.x0_mean.size()) + ", expected " +
                                std::to_string(n));
  } else if (!all_finite(sys.x0_mean)) {
    report.violations.push_back("x0_mean has non-finite entries");
  }

  const Eigen::MatrixXi& a = model.graph.adjacency;
  const int m = model.graph.size();
  if (m < 1) report.violations.push_back("agent count m must be positive");
  if (a.rows() != a.cols()) report.violations.push_back("adjacency is not square");
  for (int i = 0; i < std::min<int>(m, static_cast<int>(a.cols())); ++i) {
    if (a(i, i) != 0) report.violations.push_back("self-loop at agent " + std::to_string(i + 1));
  }
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (i != j && a(i, j) != 0 && a(i, j) != 1) {
        report.violations.push_back("adjacency entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                                    ") not in {0,1}");
      }
    }
  }

  if (static_cast<int>(model.observations.size()) != m) {
    report.violations.push_back("observation count " + std::to_string(model.observations.size()) +
                                " does not match agent count " + std::to_string(m));
  }
  for (std::size_t idx = 0; idx < model.observations.size(); ++idx) {
    const AgentObservation& obs = model.observations[idx];
    const std::string who = "agent " + std::to_string(obs.agent_id);
    if (obs.agent_id != static_cast<int>(idx) + 1) {
      report.violations.push_back("observation " + std::to_string(idx + 1) + " has agent id " +
                                  std::to_string(obs.agent_id) + " (ids must be 1..m in order)");
    }
    if (obs.H.rows() < 1) report.violations.push_back(who + ": H has no rows");
    if (obs.H.cols() != n) {
      report.violations.push_back(who + ": H has " + std::to_string(obs.H.cols()) + " columns, expected " +
                                  std::to_string(n));
    }
    if (!all_finite(obs.H)) report.violations.push_back(who + ": H has non-finite entries");
    const Index p = obs.H.rows();
    if (obs.R.rows() != p || obs.R.cols() != p) {
      report.violations.push_back(who + ": R is " + dims(obs.R) + ", expected " + std::to_string(p) + "x" +
                                  std::to_string(p));
    } else if (!all_finite(obs.R)) {
      report.violations.push_back(who + ": R has non-finite entries");
    } else {
      if (!is_symmetric(obs.R)) report.violations.push_back(who + ": R not symmetric");
      Eigen::LLT<Matrix> llt(symmetrize(obs.R));
      const Vector ev = symmetric_eigenvalues(obs.R);
      if (llt.info() != Eigen::Success || ev.minCoeff() <= psd_tolerance(ev)) {
        report.violations.push_back(who + ": R not positive definite");
      }
    }
  }
  return report;
}

std::vector<int> open_neighborhood(const NetworkGraph& graph, int agent) {
  const int m = graph.size();
  if (agent < 1 || agent > m) throw AgentIdError(agent, m);
  std::vector<int> out;
  for (int j = 1; j <= m; ++j) {
    if (j != agent && graph.adjacency(agent - 1, j - 1) != 0) out.push_back(j);
  }
  return out;
}

std::vector<int> closed_neighborhood(const NetworkGraph& graph, int agent) {
  std::vector<int> out = open_neighborhood(graph, agent);
  out.insert(std::lower_bound(out.begin(), out.end(), agent), agent);
  return out;
}

}  // namespace dkf
