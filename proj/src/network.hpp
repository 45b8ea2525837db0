#pragma once

#include <Eigen/Dense>

#include "grids.hpp"

namespace eit {

enum class Topology { Circular, Pyramidal, TwoSided };
enum class EdgeKind { Horizontal, Vertical, Radial, Angular };

struct Edge {
  int i = 0;  // node indices, interior-first then boundary
  int j = 0;
  EdgeKind kind = EdgeKind::Radial;
};

// Interior nodes occupy indices 0..num_interior-1, boundary nodes follow in
// counterclockwise order starting at theta = 0 (circular) or v_1 (others).
struct NetworkGraph {
  Topology topology = Topology::Circular;
  int n = 0;  // boundary node count
  int num_interior = 0;
  std::vector<Edge> edges;
  // grid coordinates per node: circular (circle j, angle q) with the center
  // at (ell+1, 0); pyramidal (row r, position j); two-sided (row r, column c)
  std::vector<std::pair<int, int>> node_coords;

  int num_nodes() const { return num_interior + n; }
  int boundary_node(int q) const { return num_interior + q; }
};

struct ResistorNetwork {
  NetworkGraph graph;
  std::vector<double> gamma;  // one positive conductance per edge
};

struct KirchhoffMatrix {
  Eigen::MatrixXd k;  // interior block first, boundary block last
  int num_interior = 0;
};

struct ConsistencyReport {
  bool symmetric = false;
  bool rows_sum_zero = false;
  bool circular_minors_nonpositive = false;
  double worst_minor = 0.0;   // largest signed violation found (0 if none)
  std::string first_violation;  // empty when all flags pass

  bool pass() const { return symmetric && rows_sum_zero && circular_minors_nonpositive; }
};

// Tensor-product circular graph: n angular lines, rings on circles 1..ell
// (2..ell when hbar = 0) and a collapsed center node; n(n-1)/2 edges.
NetworkGraph build_circular(int n, int hbar);

// Pyramidal graph Gamma_n for even n = 2m: m rows shrinking toward the apex.
NetworkGraph build_pyramidal(int n);

// Two-sided graph T_n for even n = 2m: an (m+1) x m grid with the top and
// bottom rows as boundary, bottom numbered clockwise (reversed).
NetworkGraph build_two_sided(int n);

// Conductances of the circular network that discretizes a layered sigma on
// the staggered grid: angular edges alphahat_j/h_theta, radial h_theta/alpha_j.
ResistorNetwork circular_network_from_steps(const GridSteps& steps, int n);

KirchhoffMatrix assemble_kirchhoff(const ResistorNetwork& net);
Eigen::MatrixXd dtn_map(const ResistorNetwork& net);

struct DirichletSolution {
  Eigen::VectorXd interior;
  Eigen::VectorXd boundary_currents;
};
DirichletSolution solve_dirichlet(const ResistorNetwork& net, const Eigen::VectorXd& u_b);

// Star-mesh move on a degree-3 interior node; DtN-invariant.
ResistorNetwork y_delta(const ResistorNetwork& net, int interior_node);

// Symmetry, zero row sums, and total non-positivity of circular minors
// (exhaustive for n <= 11, 500 random circular pairs per size above).
ConsistencyReport check_dtn_consistency(const Eigen::MatrixXd& m, int n, double tol = 1e-10,
                                        unsigned seed = 0);

}  // namespace eit
