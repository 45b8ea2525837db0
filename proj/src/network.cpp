#include "network.hpp"

#include <Eigen/Sparse>
#include <map>
#include <random>

namespace eit {

namespace {

void add_edge(NetworkGraph& g, int i, int j, EdgeKind kind) {
  if (i == j) throw std::logic_error("self-loop in network construction");
  g.edges.push_back({i, j, kind});
}

// Circular graph with conductances from steps in one pass; steps may be null
// when only the structure is needed.
ResistorNetwork make_circular(int n, int hbar, const GridSteps* steps) {
  const int ell = layer_count(n, hbar);
  const double ht = 2.0 * kPi / n;
  ResistorNetwork net;
  NetworkGraph& g = net.graph;
  g.topology = Topology::Circular;
  g.n = n;
  g.num_interior = (ell - 1) * n + 1;
  const int center = (ell - 1) * n;
  // circle j = 1 is the boundary, circles 2..ell are interior rings
  auto node = [&](int j, int q) {
    q = (q % n + n) % n;
    return j == 1 ? g.boundary_node(q) : (j - 2) * n + q;
  };
  g.node_coords.assign(g.num_nodes(), {0, 0});
  for (int j = 1; j <= ell; ++j)
    for (int q = 0; q < n; ++q) g.node_coords[node(j, q)] = {j, q};
  g.node_coords[center] = {ell + 1, 0};
  for (int j = 1; j <= ell; ++j) {
    if (hbar == 1 || j >= 2)
      for (int q = 0; q < n; ++q) {
        add_edge(g, node(j, q), node(j, q + 1), EdgeKind::Angular);
        if (steps) net.gamma.push_back(steps->alpha_hat[j - 1] / ht);
      }
    for (int q = 0; q < n; ++q) {
      add_edge(g, node(j, q), j == ell ? center : node(j + 1, q), EdgeKind::Radial);
      if (steps) net.gamma.push_back(ht / steps->alpha[j - 1]);
    }
  }
  return net;
}

double det_submatrix(const Eigen::MatrixXd& m, const std::vector<int>& rows,
                     const std::vector<int>& cols) {
  const int k = static_cast<int>(rows.size());
  Eigen::MatrixXd sub(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) sub(a, b) = m(rows[a], cols[b]);
  if (k == 1) return sub(0, 0);
  return sub.fullPivLu().determinant();
}

}  // namespace

NetworkGraph build_circular(int n, int hbar) { return make_circular(n, hbar, nullptr).graph; }

ResistorNetwork circular_network_from_steps(const GridSteps& steps, int n) {
  ResistorNetwork net = make_circular(n, steps.hbar, &steps);
  if (layer_count(n, steps.hbar) != steps.ell())
    throw std::invalid_argument("step count does not match n");
  return net;
}

NetworkGraph build_pyramidal(int n) {
  if (n < 2 || n % 2 != 0)
    throw std::invalid_argument("pyramidal graph requires even n >= 2");
  const int m = n / 2;
  NetworkGraph g;
  g.topology = Topology::Pyramidal;
  g.n = n;
  // row r = 0..m-1 has 2(m-r) nodes; row 0 is the boundary
  std::vector<int> offset(m, 0);
  for (int r = 2; r < m; ++r) offset[r] = offset[r - 1] + 2 * (m - r + 1);
  g.num_interior = m > 1 ? offset[m - 1] + 2 : 0;
  auto node = [&](int r, int j) { return r == 0 ? g.boundary_node(j - 1) : offset[r] + j - 1; };
  g.node_coords.assign(g.num_nodes(), {0, 0});
  for (int r = 0; r < m; ++r)
    for (int j = 1; j <= 2 * (m - r); ++j) g.node_coords[node(r, j)] = {r, j};
  for (int r = 0; r < m; ++r) {
    const int k = m - r;
    add_edge(g, node(r, k), node(r, k + 1), EdgeKind::Horizontal);  // apex edge of the row
    if (r + 1 < m) {
      const int k2 = k - 1;
      for (int j = 1; j <= 2 * k2; ++j) {
        const int ph = j <= k2 ? j : j + 2;  // horizontal partner above
        add_edge(g, node(r + 1, j), node(r, ph), EdgeKind::Horizontal);
        add_edge(g, node(r + 1, j), node(r, j + 1), EdgeKind::Vertical);
      }
    }
  }
  return g;
}

NetworkGraph build_two_sided(int n) {
  if (n < 4 || n % 2 != 0)
    throw std::invalid_argument("two-sided graph requires even n >= 4");
  const int m = n / 2;
  NetworkGraph g;
  g.topology = Topology::TwoSided;
  g.n = n;
  g.num_interior = (m - 1) * m;
  // grid (r, c), r = 0..m, c = 1..m; top row 0 is v_1..v_m, bottom row m is
  // v_{m+1}..v_{2m} numbered right to left
  auto node = [&](int r, int c) {
    if (r == 0) return g.boundary_node(c - 1);
    if (r == m) return g.boundary_node(m + (m - c));
    return (r - 1) * m + (c - 1);
  };
  g.node_coords.assign(g.num_nodes(), {0, 0});
  for (int r = 0; r <= m; ++r)
    for (int c = 1; c <= m; ++c) g.node_coords[node(r, c)] = {r, c};
  for (int r = 0; r < m; ++r)
    for (int c = 1; c <= m; ++c) add_edge(g, node(r, c), node(r + 1, c), EdgeKind::Vertical);
  for (int r = 1; r <= m; ++r)
    for (int c = 1; c < m; ++c) add_edge(g, node(r, c), node(r, c + 1), EdgeKind::Horizontal);
  return g;
}

KirchhoffMatrix assemble_kirchhoff(const ResistorNetwork& net) {
  const NetworkGraph& g = net.graph;
  if (net.gamma.size() != g.edges.size())
    throw std::invalid_argument("conductance count does not match edge count");
  const int nn = g.num_nodes();
  KirchhoffMatrix km;
  km.num_interior = g.num_interior;
  km.k = Eigen::MatrixXd::Zero(nn, nn);
  for (size_t e = 0; e < g.edges.size(); ++e) {
    const double ga = net.gamma[e];
    if (!(ga > 0.0)) throw std::invalid_argument("conductances must be positive");
    const int i = g.edges[e].i, j = g.edges[e].j;
    km.k(i, i) += ga;
    km.k(j, j) += ga;
    km.k(i, j) -= ga;
    km.k(j, i) -= ga;
  }
  return km;
}

Eigen::MatrixXd dtn_map(const ResistorNetwork& net) {
  const int ni = net.graph.num_interior, nb = net.graph.n;
  const int nn = ni + nb;
  if (ni == 0) return assemble_kirchhoff(net).k;
  if (nn <= 2000) {
    KirchhoffMatrix km = assemble_kirchhoff(net);
    Eigen::LLT<Eigen::MatrixXd> llt(km.k.topLeftCorner(ni, ni));
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("interior Kirchhoff block is singular (disconnected interior)");
    return km.k.bottomRightCorner(nb, nb) -
           km.k.bottomLeftCorner(nb, ni) * llt.solve(km.k.topRightCorner(ni, nb));
  }
  // sparse path for large graphs
  std::vector<Eigen::Triplet<double>> tii;
  Eigen::MatrixXd kib = Eigen::MatrixXd::Zero(ni, nb);
  Eigen::MatrixXd kbb = Eigen::MatrixXd::Zero(nb, nb);
  std::vector<double> dii(ni, 0.0);
  for (size_t e = 0; e < net.graph.edges.size(); ++e) {
    const double ga = net.gamma[e];
    int i = net.graph.edges[e].i, j = net.graph.edges[e].j;
    if (i > j) std::swap(i, j);
    if (j < ni) {
      dii[i] += ga;
      dii[j] += ga;
      tii.emplace_back(i, j, -ga);
      tii.emplace_back(j, i, -ga);
    } else if (i < ni) {
      dii[i] += ga;
      kbb(j - ni, j - ni) += ga;
      kib(i, j - ni) -= ga;
    } else {
      kbb(i - ni, i - ni) += ga;
      kbb(j - ni, j - ni) += ga;
      kbb(i - ni, j - ni) -= ga;
      kbb(j - ni, i - ni) -= ga;
    }
  }
  for (int i = 0; i < ni; ++i) tii.emplace_back(i, i, dii[i]);
  Eigen::SparseMatrix<double> kii(ni, ni);
  kii.setFromTriplets(tii.begin(), tii.end());
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(kii);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("interior Kirchhoff block is singular (disconnected interior)");
  return kbb - kib.transpose() * llt.solve(kib);
}

DirichletSolution solve_dirichlet(const ResistorNetwork& net, const Eigen::VectorXd& u_b) {
  const int ni = net.graph.num_interior, nb = net.graph.n;
  if (u_b.size() != nb) throw std::invalid_argument("boundary potential size mismatch");
  KirchhoffMatrix km = assemble_kirchhoff(net);
  DirichletSolution sol;
  if (ni > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(km.k.topLeftCorner(ni, ni));
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("interior Kirchhoff block is singular (disconnected interior)");
    sol.interior = -llt.solve(km.k.topRightCorner(ni, nb) * u_b);
  } else {
    sol.interior.resize(0);
  }
  sol.boundary_currents = km.k.bottomRightCorner(nb, nb) * u_b;
  if (ni > 0) sol.boundary_currents += km.k.bottomLeftCorner(nb, ni) * sol.interior;
  return sol;
}

ResistorNetwork y_delta(const ResistorNetwork& net, int interior_node) {
  const NetworkGraph& g = net.graph;
  if (interior_node < 0 || interior_node >= g.num_interior)
    throw std::invalid_argument("node is not interior");
  std::vector<int> nbr;
  std::vector<double> gs;
  for (size_t e = 0; e < g.edges.size(); ++e) {
    if (g.edges[e].i == interior_node || g.edges[e].j == interior_node) {
      nbr.push_back(g.edges[e].i == interior_node ? g.edges[e].j : g.edges[e].i);
      gs.push_back(net.gamma[e]);
    }
  }
  if (nbr.size() != 3 || nbr[0] == nbr[1] || nbr[0] == nbr[2] || nbr[1] == nbr[2])
    throw std::invalid_argument("node does not have exactly 3 distinct neighbors");
  const double s = gs[0] + gs[1] + gs[2];

  ResistorNetwork out;
  out.graph.topology = g.topology;
  out.graph.n = g.n;
  out.graph.num_interior = g.num_interior - 1;
  auto remap = [&](int v) { return v > interior_node ? v - 1 : v; };
  if (!g.node_coords.empty()) {
    out.graph.node_coords.resize(g.num_nodes() - 1);
    for (int v = 0; v < g.num_nodes(); ++v)
      if (v != interior_node) out.graph.node_coords[remap(v)] = g.node_coords[v];
  }
  std::map<std::pair<int, int>, std::pair<double, EdgeKind>> acc;
  auto accumulate = [&](int a, int b, double ga, EdgeKind kind) {
    if (a > b) std::swap(a, b);
    auto [it, fresh] = acc.try_emplace({a, b}, std::make_pair(ga, kind));
    if (!fresh) it->second.first += ga;  // merge parallel edges
  };
  for (size_t e = 0; e < g.edges.size(); ++e)
    if (g.edges[e].i != interior_node && g.edges[e].j != interior_node)
      accumulate(remap(g.edges[e].i), remap(g.edges[e].j), net.gamma[e], g.edges[e].kind);
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b)
      accumulate(remap(nbr[a]), remap(nbr[b]), gs[a] * gs[b] / s, EdgeKind::Horizontal);
  for (auto& [key, val] : acc) {
    out.graph.edges.push_back({key.first, key.second, val.second});
    out.gamma.push_back(val.first);
  }
  return out;
}

ConsistencyReport check_dtn_consistency(const Eigen::MatrixXd& m, int n, double tol,
                                        unsigned seed) {
  if (m.rows() != n || m.cols() != n) throw std::invalid_argument("matrix size mismatch");
  ConsistencyReport rep;
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  rep.symmetric = (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
  rep.rows_sum_zero = (m * Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff() <= tol * scale;
  if (!rep.symmetric) rep.first_violation = "matrix is not symmetric";
  if (rep.first_violation.empty() && !rep.rows_sum_zero)
    rep.first_violation = "row sums are not zero";

  // circular pair (P; Q): 2k boundary indices in counterclockwise order split
  // as p_1..p_k, q_k..q_1; the signed minor (-1)^k det M(P;Q) must be >= 0
  rep.circular_minors_nonpositive = true;
  std::mt19937 rng(seed);
  auto check_pair = [&](const std::vector<int>& s, int rot) {
    const int k = static_cast<int>(s.size()) / 2;
    std::vector<int> rows(k), cols(k);
    for (int t = 0; t < k; ++t) rows[t] = s[(rot + t) % (2 * k)];
    for (int t = 0; t < k; ++t) cols[t] = s[(rot + 2 * k - 1 - t) % (2 * k)];
    const double signed_det = (k % 2 ? -1.0 : 1.0) * det_submatrix(m, rows, cols);
    if (signed_det < -tol) {
      rep.circular_minors_nonpositive = false;
      if (rep.first_violation.empty()) {
        rep.worst_minor = -signed_det;
        std::string msg = "circular minor violation, k=" + std::to_string(k) + ", P=";
        for (int t = 0; t < k; ++t) msg += std::to_string(rows[t]) + (t + 1 < k ? "," : "");
        msg += " Q=";
        for (int t = 0; t < k; ++t) msg += std::to_string(cols[t]) + (t + 1 < k ? "," : "");
        rep.first_violation = msg;
      } else {
        rep.worst_minor = std::max(rep.worst_minor, -signed_det);
      }
    }
  };
  for (int k = 1; 2 * k <= n; ++k) {
    if (n <= 11) {
      // exhaustive: all 2k-subsets in ascending (counterclockwise) order
      std::vector<int> idx(2 * k);
      for (int t = 0; t < 2 * k; ++t) idx[t] = t;
      while (true) {
        for (int rot = 0; rot < 2 * k; ++rot) check_pair(idx, rot);
        int t = 2 * k - 1;
        while (t >= 0 && idx[t] == n - 2 * k + t) --t;
        if (t < 0) break;
        ++idx[t];
        for (int u = t + 1; u < 2 * k; ++u) idx[u] = idx[u - 1] + 1;
      }
    } else {
      std::vector<int> all(n);
      for (int t = 0; t < n; ++t) all[t] = t;
      for (int trial = 0; trial < 500; ++trial) {
        std::vector<int> pick = all;
        std::shuffle(pick.begin(), pick.end(), rng);
        pick.resize(2 * k);
        std::sort(pick.begin(), pick.end());
        check_pair(pick, std::uniform_int_distribution<int>(0, 2 * k - 1)(rng));
      }
    }
  }
  return rep;
}

}  // namespace eit
