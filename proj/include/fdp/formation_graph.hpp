#pragma once

#include "fdp/common.hpp"

#include <Eigen/Dense>

#include <vector>

namespace fdp::graph {

/// Directed edge (tail, head) with 1-based vertex indices.
struct Edge {
  int tail;
  int head;
};

/// Information-flow digraph of the formation. Vertices 1..num_leaders are
/// leaders, the rest are followers. Edge order is declaration order and fixes
/// the row order of every per-edge vector and matrix below.
class DirectedGraph {
 public:
  DirectedGraph(int num_vertices, std::vector<Edge> edges, int num_leaders);

  int num_vertices() const { return n_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  int num_leaders() const { return n_leaders_; }
  const std::vector<Edge>& edges() const { return edges_; }

  bool is_leader(int vertex) const { return vertex >= 1 && vertex <= n_leaders_; }
  std::vector<int> followers() const;

  /// Vertices sharing an edge with `vertex`, in either orientation.
  std::vector<int> neighbors(int vertex) const;

 private:
  int n_;
  std::vector<Edge> edges_;
  int n_leaders_;
};

/// A graph realized in the plane plus its desired squared edge lengths.
struct Framework {
  Framework(DirectedGraph graph, std::vector<Vec2> positions, std::vector<double> desired_sq);

  DirectedGraph graph;
  std::vector<Vec2> positions;
  std::vector<double> desired_sq;

  const Vec2& position(int vertex) const { return positions[static_cast<std::size_t>(vertex - 1)]; }
  /// z_k = p_head - p_tail.
  Vec2 edge_vector(int k) const;
};

/// m x n signed incidence matrix: -1 at the tail, +1 at the head.
Eigen::MatrixXd incidence_matrix(const DirectedGraph& graph);

/// Squared edge lengths in edge order.
Eigen::VectorXd rigidity_function(const Framework& fw);

/// Half the Jacobian of the rigidity function, m x 2n, columns (x1, y1, x2, y2, ...).
Eigen::MatrixXd rigidity_matrix(const Framework& fw);

/// Squared length minus desired squared length, per edge.
Eigen::VectorXd distance_errors(const Framework& fw);

/// Number of singular values above rel_tol times the largest one.
int numerical_rank(const Eigen::MatrixXd& m, double rel_tol = 1e-9);

/// Planar distance rigidity test: rank R == 2n - 3. Coincident input is not rigid.
bool is_infinitesimally_rigid(const Framework& fw);

/// Two leaders over two followers on a unit square, edges
/// (1,2),(1,4),(1,3),(2,4),(3,4) with squared lengths [1,2,1,1,1].
DirectedGraph square_formation_graph();
std::vector<double> square_formation_desired_sq();
/// Desired square placed with leaders at (-0.5, 0) and (0.5, 0).
Framework square_formation();

}  // namespace fdp::graph
