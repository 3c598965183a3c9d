#include "fdp/formation_graph.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <set>
#include <string>
#include <utility>

namespace fdp::graph {

DirectedGraph::DirectedGraph(int num_vertices, std::vector<Edge> edges, int num_leaders)
    : n_(num_vertices), edges_(std::move(edges)), n_leaders_(num_leaders) {
  if (n_leaders_ < 2 || n_leaders_ > n_) {
    throw InvalidArgument("graph needs 2 <= leaders <= vertices, got leaders=" +
                          std::to_string(n_leaders_) + " vertices=" + std::to_string(n_));
  }
  std::set<std::pair<int, int>> seen;
  for (const auto& e : edges_) {
    if (e.tail < 1 || e.tail > n_ || e.head < 1 || e.head > n_) {
      throw InvalidArgument("edge endpoint out of range");
    }
    if (e.tail == e.head) throw InvalidArgument("self-loop on vertex " + std::to_string(e.tail));
    auto key = std::minmax(e.tail, e.head);
    if (!seen.insert(key).second) {
      throw InvalidArgument("duplicate edge (" + std::to_string(e.tail) + "," + std::to_string(e.head) + ")");
    }
  }
}

std::vector<int> DirectedGraph::followers() const {
  std::vector<int> out;
  for (int v = n_leaders_ + 1; v <= n_; ++v) out.push_back(v);
  return out;
}

std::vector<int> DirectedGraph::neighbors(int vertex) const {
  std::vector<int> out;
  for (const auto& e : edges_) {
    if (e.tail == vertex) out.push_back(e.head);
    if (e.head == vertex) out.push_back(e.tail);
  }
  return out;
}

Framework::Framework(DirectedGraph g, std::vector<Vec2> p, std::vector<double> d)
    : graph(std::move(g)), positions(std::move(p)), desired_sq(std::move(d)) {
  if (static_cast<int>(positions.size()) != graph.num_vertices()) {
    throw InvalidArgument("framework needs one position per vertex");
  }
  if (static_cast<int>(desired_sq.size()) != graph.num_edges()) {
    throw InvalidArgument("framework needs one desired squared length per edge");
  }
  for (double v : desired_sq) {
    if (!(v > 0.0)) throw InvalidArgument("desired squared lengths must be positive");
  }
  for (const auto& q : positions) {
    if (!q.allFinite()) throw InvalidArgument("framework positions must be finite");
  }
}

Vec2 Framework::edge_vector(int k) const {
  const auto& e = graph.edges()[static_cast<std::size_t>(k)];
  return position(e.head) - position(e.tail);
}

Eigen::MatrixXd incidence_matrix(const DirectedGraph& graph) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(graph.num_edges(), graph.num_vertices());
  for (int k = 0; k < graph.num_edges(); ++k) {
    const auto& e = graph.edges()[static_cast<std::size_t>(k)];
    h(k, e.tail - 1) = -1.0;
    h(k, e.head - 1) = 1.0;
  }
  return h;
}

Eigen::VectorXd rigidity_function(const Framework& fw) {
  Eigen::VectorXd f(fw.graph.num_edges());
  for (int k = 0; k < f.size(); ++k) f(k) = fw.edge_vector(k).squaredNorm();
  return f;
}

Eigen::MatrixXd rigidity_matrix(const Framework& fw) {
  // R = D(z)^T (H kron I2): row k holds -z_k at the tail block and +z_k at the head block.
  const int m = fw.graph.num_edges();
  const int n = fw.graph.num_vertices();
  const Eigen::MatrixXd h = incidence_matrix(fw.graph);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(m, 2 * n);
  for (int k = 0; k < m; ++k) {
    const Vec2 z = fw.edge_vector(k);
    for (int i = 0; i < n; ++i) {
      if (h(k, i) == 0.0) continue;
      r.block<1, 2>(k, 2 * i) = h(k, i) * z.transpose();
    }
  }
  return r;
}

Eigen::VectorXd distance_errors(const Framework& fw) {
  Eigen::VectorXd e = rigidity_function(fw);
  for (int k = 0; k < e.size(); ++k) e(k) -= fw.desired_sq[static_cast<std::size_t>(k)];
  return e;
}

int numerical_rank(const Eigen::MatrixXd& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int rank = 0;
  for (int i = 0; i < s.size(); ++i) {
    if (s(i) > rel_tol * s(0)) ++rank;
  }
  return rank;
}

bool is_infinitesimally_rigid(const Framework& fw) {
  const int n = fw.graph.num_vertices();
  if (n < 2) return false;
  const auto& p0 = fw.positions.front();
  const bool coincident = std::all_of(fw.positions.begin(), fw.positions.end(),
                                      [&](const Vec2& q) { return (q - p0).norm() == 0.0; });
  if (coincident) return false;
  return numerical_rank(rigidity_matrix(fw)) == 2 * n - 3;
}

DirectedGraph square_formation_graph() {
  return DirectedGraph(4, {{1, 2}, {1, 4}, {1, 3}, {2, 4}, {3, 4}}, 2);
}

std::vector<double> square_formation_desired_sq() { return {1.0, 2.0, 1.0, 1.0, 1.0}; }

Framework square_formation() {
  return Framework(square_formation_graph(), {{-0.5, 0.0}, {0.5, 0.0}, {-0.5, -1.0}, {0.5, -1.0}},
                   square_formation_desired_sq());
}

}  // namespace fdp::graph
