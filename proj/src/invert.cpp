#include "invert.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/eigen.hpp>
#include <limits>
#include <map>
#include <random>

namespace eit {

namespace {

// The peeling cores are generic in the scalar: the public API runs them in
// long double, the round-trip validator in 50-digit floats (the map from the
// DtN entries back to the conductances is badly conditioned, so validation
// has to outrun the quantization of the input).
template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
using HP = boost::multiprecision::cpp_bin_float_50;

using Coord = std::pair<int, int>;
using EdgeKey = std::pair<Coord, Coord>;

EdgeKey canon_key(Coord a, Coord b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

template <class T>
Mat<T> pick(const Mat<T>& a, const std::vector<int>& rows, const std::vector<int>& cols) {
  Mat<T> out(rows.size(), cols.size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols.size(); ++j) out(i, j) = a(rows[i], cols[j]);
  return out;
}

template <class T>
Vec<T> pick_row(const Mat<T>& a, int row, const std::vector<int>& cols) {
  Vec<T> out(cols.size());
  for (size_t j = 0; j < cols.size(); ++j) out[j] = a(row, cols[j]);
  return out;
}

template <class T>
Vec<T> solve_block(const Mat<T>& a, const Vec<T>& b, const std::string& where) {
  Eigen::FullPivLU<Mat<T>> lu(a);
  if (!lu.isInvertible()) throw std::runtime_error("peeling: singular pivot block at " + where);
  return lu.solve(b);
}

// conductance map rec -> gamma on the built graph via node coordinates
template <class T>
ResistorNetwork network_from_records(NetworkGraph graph, const std::map<EdgeKey, T>& rec) {
  ResistorNetwork net;
  net.graph = std::move(graph);
  net.gamma.reserve(net.graph.edges.size());
  for (const Edge& e : net.graph.edges) {
    const EdgeKey key = canon_key(net.graph.node_coords[e.i], net.graph.node_coords[e.j]);
    auto it = rec.find(key);
    if (it == rec.end()) throw std::logic_error("peeling: edge was never recovered");
    const double g = static_cast<double>(it->second);
    if (!(g > 0.0))
      throw std::runtime_error("peeling: recovered a non-positive conductance " +
                               std::to_string(g));
    net.gamma.push_back(g);
  }
  return net;
}

// Schur-complement DtN map of a graph with scalar-typed conductances
template <class T>
Mat<T> dtn_in(const NetworkGraph& g, const std::vector<T>& gamma) {
  const int ni = g.num_interior, nb = g.n, nn = ni + nb;
  Mat<T> k = Mat<T>::Zero(nn, nn);
  for (size_t e = 0; e < g.edges.size(); ++e) {
    const T& ga = gamma[e];
    const int i = g.edges[e].i, j = g.edges[e].j;
    k(i, i) += ga;
    k(j, j) += ga;
    k(i, j) -= ga;
    k(j, i) -= ga;
  }
  if (ni == 0) return k;
  Eigen::FullPivLU<Mat<T>> lu(Mat<T>(k.topLeftCorner(ni, ni)));
  if (!lu.isInvertible()) throw std::runtime_error("interior Kirchhoff block is singular");
  return Mat<T>(k.bottomRightCorner(nb, nb)) -
         Mat<T>(k.bottomLeftCorner(nb, ni)) * lu.solve(Mat<T>(k.topRightCorner(ni, nb)));
}

// harmonic-extension matrix (num_nodes x n) and the DtN map of a network
struct NetworkSolve {
  Eigen::MatrixXd hext;
  Eigen::MatrixXd lambda;
};

NetworkSolve solve_network(const ResistorNetwork& net) {
  const int ni = net.graph.num_interior, nb = net.graph.n;
  KirchhoffMatrix km = assemble_kirchhoff(net);
  NetworkSolve out;
  out.hext = Eigen::MatrixXd::Zero(ni + nb, nb);
  out.hext.bottomRows(nb).setIdentity();
  if (ni > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(km.k.topLeftCorner(ni, ni));
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("interior Kirchhoff block is singular");
    out.hext.topRows(ni) = -llt.solve(km.k.topRightCorner(ni, nb));
  }
  out.lambda = km.k.bottomRightCorner(nb, nb);
  if (ni > 0) out.lambda += km.k.bottomLeftCorner(nb, ni) * out.hext.topRows(ni);
  return out;
}

int vec_index(int p, int q) { return p * (p - 1) / 2 + q; }  // p > q

Eigen::VectorXd vec_lower(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  Eigen::VectorXd v(n * (n - 1) / 2);
  for (int p = 1; p < n; ++p)
    for (int q = 0; q < p; ++q) v[vec_index(p, q)] = m(p, q);
  return v;
}

// dLambda/dgamma: row (p, q), column e; entries w_e(p) w_e(q)
Eigen::MatrixXd dtn_jacobian(const ResistorNetwork& net, const Eigen::MatrixXd& hext) {
  const int n = net.graph.n;
  const int ne = static_cast<int>(net.graph.edges.size());
  Eigen::MatrixXd jac(n * (n - 1) / 2, ne);
  for (int e = 0; e < ne; ++e) {
    const Eigen::RowVectorXd w = hext.row(net.graph.edges[e].i) - hext.row(net.graph.edges[e].j);
    for (int p = 1; p < n; ++p)
      for (int q = 0; q < p; ++q) jac(vec_index(p, q), e) = w[p] * w[q];
  }
  return jac;
}

// default points of the circular reconstruction: angular edges at
// (r_j, thetahat_q), radial edges at (rhat_{j+1}, theta_q), edge order of
// build_circular
std::vector<std::pair<double, double>> circular_point_grid(int n) {
  const int hbar = circular_hbar(n);
  const int ell = layer_count(n, hbar);
  const StaggeredGrid grid = radii_from_steps(optimal_grid_interpolation(n, hbar), n);
  const double ht = 2.0 * kPi / n;
  std::vector<std::pair<double, double>> pts;
  for (int j = 1; j <= ell; ++j) {
    if (hbar == 1 || j >= 2)
      for (int q = 0; q < n; ++q) pts.emplace_back(grid.primary_radii[j - 1], (q + 0.5) * ht);
    // rhat_{j+1}; for hbar = 0 the innermost dual radius is not part of the
    // grid, fall back to the geometric mean
    const double rr = j < ell + hbar
                          ? grid.dual_radii[j]
                          : std::sqrt(grid.primary_radii[j - 1] * grid.primary_radii[j]);
    for (int q = 0; q < n; ++q) pts.emplace_back(rr, q * ht);
  }
  return pts;
}

}  // namespace

int circular_hbar(int n) {
  if (n < 3 || n % 2 == 0) throw std::invalid_argument("circular networks require odd n >= 3");
  return ((n - 1) / 2) % 2 == 0 ? 1 : 0;
}

RecoveredNetwork recover_circular(const Eigen::MatrixXd& m, const RecoverOptions& opts) {
  const int n = static_cast<int>(m.rows());
  if (m.cols() != n) throw std::invalid_argument("DtN matrix must be square");
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  if (opts.check_consistency) {
    ConsistencyReport rep = check_dtn_consistency(m, n, 1e-8);
    if (!rep.pass())
      throw std::invalid_argument("inconsistent DtN input: " + rep.first_violation);
  }
  const int hbar = circular_hbar(n);
  // scale-matched unit-disk optimal network: default start and restart anchor
  ResistorNetwork net = circular_network_from_steps(optimal_grid_interpolation(n, hbar), n);
  const double s = m.diagonal().mean() / dtn_map(net).diagonal().mean();
  if (!(s > 0.0)) throw std::invalid_argument("DtN diagonal must be positive on average");
  for (double& g : net.gamma) g *= s;
  const std::vector<double> anchor = net.gamma;
  std::vector<double> start = anchor;
  if (!opts.initial_gamma.empty()) {
    if (opts.initial_gamma.size() != net.graph.edges.size())
      throw std::invalid_argument("initial conductance count mismatch");
    start = opts.initial_gamma;
  }
  const int ne = static_cast<int>(net.graph.edges.size());
  const Eigen::VectorXd target = vec_lower(m);

  auto residual_of = [&](const Eigen::VectorXd& k, NetworkSolve* ns) {
    for (int e = 0; e < ne; ++e) net.gamma[e] = std::exp(k[e]);
    NetworkSolve s = solve_network(net);
    Eigen::VectorXd r = vec_lower(s.lambda) - target;
    if (ns) *ns = std::move(s);
    return r;
  };

  // Levenberg-Marquardt in log-conductances; convergence in the max norm.
  // The zero residual is the unique global minimum, but the landscape has
  // spurious local minima with degenerate edges: a stalled run restarts from
  // a perturbation of the initial guess (fixed seed, so the recovery stays
  // deterministic).
  std::mt19937 restart_rng(0x5eed);
  std::normal_distribution<double> jitter(0.0, 0.4);
  double best = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < 24; ++attempt) {
    // attempt 0: caller's start; attempt 1: the anchor; then jittered anchors
    const std::vector<double>& base = attempt == 0 ? start : anchor;
    Eigen::VectorXd kappa(ne);
    for (int e = 0; e < ne; ++e)
      kappa[e] = std::log(base[e]) + (attempt <= 1 ? 0.0 : jitter(restart_rng));
    NetworkSolve ns;
    Eigen::VectorXd r;
    try {
      r = residual_of(kappa, &ns);
    } catch (const std::exception&) {
      continue;
    }
    double damping = 1e-3;
    int it = 0;
    bool stalled = false;
    while (r.cwiseAbs().maxCoeff() > opts.tolerance * scale) {
      if (++it > opts.max_iterations) {
        stalled = true;
        break;
      }
      Eigen::MatrixXd jac = dtn_jacobian(net, ns.hext);
      for (int e = 0; e < ne; ++e) jac.col(e) *= net.gamma[e];  // log parameterization
      const Eigen::MatrixXd h = jac.transpose() * jac;
      const Eigen::VectorXd g = jac.transpose() * r;
      const double rn2 = r.squaredNorm();
      bool moved = false;
      for (int tries = 0; tries < 60; ++tries, damping *= 4.0) {
        Eigen::MatrixXd hd = h;
        for (int e = 0; e < ne; ++e) hd(e, e) += damping * std::max(h(e, e), 1e-12);
        Eigen::VectorXd kt = kappa - hd.ldlt().solve(g);
        NetworkSolve nst;
        Eigen::VectorXd rt;
        try {
          rt = residual_of(kt, &nst);
        } catch (const std::exception&) {
          continue;  // overshot into an unsolvable network; raise the damping
        }
        if (rt.squaredNorm() < rn2) {
          kappa = std::move(kt);
          r = std::move(rt);
          ns = std::move(nst);
          damping = std::max(damping / 3.0, 1e-14);
          moved = true;
          break;
        }
      }
      if (!moved) {
        stalled = true;
        break;
      }
    }
    best = std::min(best, r.cwiseAbs().maxCoeff() / scale);
    if (stalled) continue;
    // undamped Newton polish: quadratic convergence to machine precision
    for (int k = 0; k < 3; ++k) {
      Eigen::MatrixXd jac = dtn_jacobian(net, ns.hext);
      for (int e = 0; e < ne; ++e) jac.col(e) *= net.gamma[e];
      Eigen::VectorXd kt = kappa - jac.colPivHouseholderQr().solve(r);
      NetworkSolve nst;
      Eigen::VectorXd rt;
      try {
        rt = residual_of(kt, &nst);
      } catch (const std::exception&) {
        break;
      }
      if (rt.squaredNorm() >= r.squaredNorm()) break;
      kappa = std::move(kt);
      r = std::move(rt);
      ns = std::move(nst);
    }
    RecoveredNetwork out;
    for (int e = 0; e < ne; ++e) net.gamma[e] = std::exp(kappa[e]);
    out.network = std::move(net);
    out.refit_residual = r.cwiseAbs().maxCoeff() / scale;
    out.iterations = it;
    return out;
  }
  // Measured data is only approximately consistent, so an exact fit may not
  // exist and every tight-tolerance attempt above stalls near the boundary of
  // the representable set.  Fall back to a minimum-norm Gauss-Newton anchored
  // at the reference network: the SVD cutoff tracks the residual (discrepancy
  // principle), so directions the data cannot resolve keep their anchor
  // conductances instead of drifting to degenerate edges.
  {
    Eigen::VectorXd kappa(ne);
    for (int e = 0; e < ne; ++e) kappa[e] = std::log(anchor[e]);
    NetworkSolve ns;
    Eigen::VectorXd r = residual_of(kappa, &ns);
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
      const double rel = r.cwiseAbs().maxCoeff() / scale;
      if (rel <= opts.tolerance) break;
      Eigen::MatrixXd jac = dtn_jacobian(net, ns.hext);
      for (int e = 0; e < ne; ++e) jac.col(e) *= net.gamma[e];
      Eigen::BDCSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
      svd.setThreshold(std::max(1e-12, 0.3 * rel));
      Eigen::VectorXd step = svd.solve(r);
      bool moved = false;
      for (int h = 0; h < 25; ++h, step *= 0.5) {
        const Eigen::VectorXd kt = kappa - step;
        NetworkSolve nst;
        Eigen::VectorXd rt;
        try {
          rt = residual_of(kt, &nst);
        } catch (const std::exception&) {
          continue;
        }
        if (rt.squaredNorm() < r.squaredNorm() * (1.0 - 1e-10)) {
          kappa = kt;
          r = std::move(rt);
          ns = std::move(nst);
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    const double rel = r.cwiseAbs().maxCoeff() / scale;
    best = std::min(best, rel);
    if (rel <= opts.stall_tolerance) {
      RecoveredNetwork out;
      for (int e = 0; e < ne; ++e) net.gamma[e] = std::exp(kappa[e]);
      out.network = std::move(net);
      out.refit_residual = rel;
      out.iterations = it;
      return out;
    }
  }
  throw std::runtime_error("recover_circular: no convergence, best residual " +
                           std::to_string(best));
}

namespace {

template <class T>
std::map<EdgeKey, T> peel_pyramidal_core(Mat<T> lam) {
  std::map<EdgeKey, T> rec;
  int mc = static_cast<int>(lam.rows()) / 2, r = 0;
  while (true) {
    const int nn = 2 * mc;
    std::vector<T> gh(nn + 1, T(0)), gv(nn + 1, T(0));
    for (int p = 1; p <= nn; ++p) {
      std::vector<int> zi, ci, hi, vi;
      if (p <= mc) {
        for (int v = 1; v <= mc; ++v)
          if (v != p) zi.push_back(v - 1);
        for (int c = mc + 2; c <= 2 * mc; ++c) ci.push_back(c - 1);
        for (int h = 1; h <= p; ++h) hi.push_back(h - 1);
        for (int v = p; v <= mc + 1; ++v) vi.push_back(v - 1);
      } else {
        for (int v = mc + 1; v <= 2 * mc; ++v)
          if (v != p) zi.push_back(v - 1);
        for (int c = 1; c <= mc - 1; ++c) ci.push_back(c - 1);
        for (int h = p; h <= 2 * mc; ++h) hi.push_back(h - 1);
        for (int v = mc; v <= p; ++v) vi.push_back(v - 1);
      }
      const int pi = p - 1;
      auto row_sum = [&](const std::vector<int>& cols) {
        T s(0);
        for (int c : cols) s += lam(pi, c);
        return s;
      };
      if (!zi.empty()) {
        const Mat<T> a = pick(lam, zi, ci);
        const std::string where = "stage " + std::to_string(r) + ", node " + std::to_string(p);
        const Vec<T> xh = solve_block<T>(a, pick(lam, zi, hi) * Vec<T>::Ones(hi.size()), where);
        const Vec<T> xv = solve_block<T>(a, pick(lam, zi, vi) * Vec<T>::Ones(vi.size()), where);
        gh[p] = row_sum(hi) - pick_row(lam, pi, ci).dot(xh);
        gv[p] = row_sum(vi) - pick_row(lam, pi, ci).dot(xv);
      } else {
        gh[p] = row_sum(hi);
        gv[p] = row_sum(vi);
      }
    }
    if (mc == 1) {
      rec[canon_key({r, 1}, {r, 2})] = gh[1];
      break;
    }
    for (int p = 1; p <= mc; ++p) {
      if (p <= mc - 1) rec[canon_key({r + 1, p}, {r, p})] = gh[p];
      if (p >= 2) rec[canon_key({r + 1, p - 1}, {r, p})] = gv[p];
    }
    rec[canon_key({r, mc}, {r, mc + 1})] = gh[mc];  // apex edge of the row
    for (int p = mc + 1; p <= 2 * mc; ++p) {
      if (p >= mc + 2) rec[canon_key({r + 1, p - 2}, {r, p})] = gh[p];
      if (p <= 2 * mc - 1) rec[canon_key({r + 1, p - 1}, {r, p})] = gv[p];
    }

    // strip the outer layer: Lam' = -K'_SS - K_BS^T P^T (P (Lam - K_BB) P^T)^-1 P K_BS
    const int ns = nn - 2;
    Mat<T> kbb = Mat<T>::Zero(nn, nn), kbs = Mat<T>::Zero(nn, ns);
    Vec<T> kss = Vec<T>::Zero(ns);
    auto add_bs = [&](int p, int j, const T& g) {
      kbb(p - 1, p - 1) += g;
      kss[j - 1] += g;
      kbs(p - 1, j - 1) -= g;
    };
    const T ga = gh[mc];
    kbb(mc - 1, mc - 1) += ga;
    kbb(mc, mc) += ga;
    kbb(mc - 1, mc) -= ga;
    kbb(mc, mc - 1) -= ga;
    for (int p = 1; p <= mc; ++p) {
      if (p <= mc - 1) add_bs(p, p, gh[p]);
      if (p >= 2) add_bs(p, p - 1, gv[p]);
    }
    for (int p = mc + 1; p <= 2 * mc; ++p) {
      if (p >= mc + 2) add_bs(p, p - 2, gh[p]);
      if (p <= 2 * mc - 1) add_bs(p, p - 1, gv[p]);
    }
    std::vector<int> keep;  // drop the outermost boundary nodes 1 and 2m
    for (int i = 1; i < nn - 1; ++i) keep.push_back(i);
    Mat<T> mid = Mat<T>(lam) - kbb;
    Mat<T> mid_kk = pick(mid, keep, keep);
    Mat<T> kbs_k(ns, ns);
    for (int a = 0; a < ns; ++a) kbs_k.row(a) = kbs.row(keep[a]);
    Eigen::FullPivLU<Mat<T>> lu(mid_kk);
    if (!lu.isInvertible())
      throw std::runtime_error("peeling: singular update block at stage " + std::to_string(r));
    lam = -kbs_k.transpose() * lu.solve(kbs_k);
    for (int a = 0; a < ns; ++a) lam(a, a) -= kss[a];
    --mc;
    ++r;
  }
  return rec;
}

}  // namespace

RecoveredNetwork peel_pyramidal(const Eigen::MatrixXd& m0) {
  const int nb = static_cast<int>(m0.rows());
  if (nb < 2 || nb % 2 != 0 || m0.cols() != nb)
    throw std::invalid_argument("pyramidal peeling requires a square DtN map of even size");
  const std::map<EdgeKey, long double> rec =
      peel_pyramidal_core<long double>(m0.cast<long double>());
  RecoveredNetwork out;
  out.network = network_from_records(build_pyramidal(nb), rec);
  out.refit_residual = refit_residual(out, m0);
  return out;
}

namespace {

template <class T>
std::map<EdgeKey, T> peel_two_sided_core(Mat<T> lam) {
  const int n = static_cast<int>(lam.rows()), m = n / 2;
  std::map<EdgeKey, T> rec;
  auto wrap = [&](int i) { return (i - 1 + 4 * n) % n + 1; };
  int depth_top = 0, depth_bot = 0;
  auto node = [&](int p) -> Coord {
    if (p <= m) return {depth_top, p};
    return {m - depth_bot, m + 1 - (p - m)};
  };

  // bottom horizontal layer
  for (int p = m + 2; p <= 2 * m; ++p) {
    std::vector<int> zi, ci;
    for (int i = 1; i <= m - 1; ++i) zi.push_back(wrap(p + i) - 1);
    for (int i = 2; i <= m; ++i) ci.push_back(wrap(p - i) - 1);
    const int q = p - 1;
    Vec<T> zq(zi.size());
    for (size_t a = 0; a < zi.size(); ++a) zq[a] = lam(zi[a], q - 1);
    const Vec<T> x = solve_block<T>(pick(lam, zi, ci), zq, "bottom row, node " + std::to_string(p));
    rec[canon_key(node(p), node(q))] = -lam(p - 1, q - 1) + pick_row(lam, p - 1, ci).dot(x);
  }
  {
    Mat<T> a = Mat<T>::Zero(m, m);
    for (int p = m + 2; p <= 2 * m; ++p) {
      const int i = p - 1 - m, j = p - 2 - m;
      const T g = rec[canon_key(node(p), node(p - 1))];
      a(i, i) += g;
      a(j, j) += g;
      a(i, j) -= g;
      a(j, i) -= g;
    }
    lam.block(m, m, m, m) -= a;
  }

  int s = m - 1;
  while (true) {
    // vertical spikes
    std::vector<T> gv(n + 1, T(0));
    for (int p = 1; p <= n; ++p) {
      std::vector<int> li, ri;
      for (int i = 1; i <= s; ++i) li.push_back(wrap(p - i) - 1);
      for (int i = 1; i <= s; ++i) ri.push_back(wrap(p + i) - 1);
      const bool top = p <= m;
      const bool left_z = (top && 2 * p < m) || (!top && 2 * p > 3 * m);
      const std::vector<int>&zi = left_z ? li : ri, &ci = left_z ? ri : li;
      if (!zi.empty()) {
        Vec<T> zp(zi.size());
        for (size_t a = 0; a < zi.size(); ++a) zp[a] = lam(zi[a], p - 1);
        const Vec<T> x =
            solve_block<T>(pick(lam, zi, ci), zp, "vertical, node " + std::to_string(p));
        gv[p] = lam(p - 1, p - 1) - pick_row(lam, p - 1, ci).dot(x);
      } else {
        gv[p] = lam(p - 1, p - 1);
      }
    }
    for (int p = 1; p <= n; ++p) {
      if (p <= m)
        rec[canon_key({depth_top, p}, {depth_top + 1, p})] = gv[p];
      else {
        const int c = m + 1 - (p - m);
        rec[canon_key({m - depth_bot, c}, {m - depth_bot - 1, c})] = gv[p];
      }
    }
    if (s == 1 && m % 2 == 0) break;  // final update is singular; step 7 uses this map
    {
      Mat<T> d = Mat<T>::Zero(n, n);
      for (int p = 1; p <= n; ++p) d(p - 1, p - 1) = gv[p];
      Mat<T> shifted = Mat<T>(lam) - d;
      Eigen::FullPivLU<Mat<T>> lu(shifted);
      if (!lu.isInvertible())
        throw std::runtime_error("peeling: singular spike update at depth " +
                                 std::to_string(depth_top));
      lam = -d - d * lu.solve(d);
    }
    ++depth_top;
    ++depth_bot;
    if (s == 1) break;
    s -= 2;

    // horizontal layer
    std::map<std::pair<int, int>, T> newg;
    for (int p = 1; p <= n; ++p) {
      std::vector<int> zi, ci;
      int q;
      const bool top = p <= m;
      if ((top && 2 * p < m) || (!top && 2 * p < 3 * m)) {
        for (int i = 1; i <= s; ++i) zi.push_back(wrap(p - i) - 1);
        for (int i = 2; i <= s + 1; ++i) ci.push_back(wrap(p + i) - 1);
        q = wrap(p + 1);
      } else {
        for (int i = 1; i <= s; ++i) zi.push_back(wrap(p + i) - 1);
        for (int i = 2; i <= s + 1; ++i) ci.push_back(wrap(p - i) - 1);
        q = wrap(p - 1);
      }
      if ((p <= m) != (q <= m)) continue;  // only same-side neighbors
      T g;
      if (!zi.empty()) {
        Vec<T> zq(zi.size());
        for (size_t a = 0; a < zi.size(); ++a) zq[a] = lam(zi[a], q - 1);
        const Vec<T> x =
            solve_block<T>(pick(lam, zi, ci), zq, "horizontal, node " + std::to_string(p));
        g = -lam(p - 1, q - 1) + pick_row(lam, p - 1, ci).dot(x);
      } else {
        g = -lam(p - 1, q - 1);
      }
      newg[{std::min(p, q), std::max(p, q)}] = g;
    }
    Mat<T> atop = Mat<T>::Zero(m, m), abot = Mat<T>::Zero(m, m);
    for (const auto& [key, g] : newg) {
      const auto [p, q] = key;
      rec[canon_key(node(p), node(q))] = g;
      Mat<T>& a = p <= m ? atop : abot;
      const int i = p <= m ? p - 1 : p - 1 - m, j = p <= m ? q - 1 : q - 1 - m;
      a(i, i) += g;
      a(j, j) += g;
      a(i, j) -= g;
      a(j, i) -= g;
    }
    lam.block(0, 0, m, m) -= atop;
    lam.block(m, m, m, m) -= abot;
    if (s == 0) break;
  }

  // the middle layer
  if (m % 2 == 1) {
    for (int p = 1; p <= m; ++p)
      rec[canon_key({depth_top, p}, {depth_top + 1, p})] = lam(p - 1, p - 1);
  } else {
    const int row = depth_top + 1;
    {
      std::vector<int> ci{0, 1}, zi{2 * m - 1, 2 * m - 2};
      Vec<T> zq(2);
      for (int a = 0; a < 2; ++a) zq[a] = lam(zi[a], 2 * m - 1);
      const Vec<T> x = solve_block<T>(pick(lam, zi, ci), zq, "middle row, node 1");
      rec[canon_key({row, 1}, {row, 2})] =
          -(-lam(0, 2 * m - 1) + pick_row(lam, 0, ci).dot(x));
    }
    for (int p = 2; p <= m - 1; ++p) {
      std::vector<int> ci{p - 2, p - 1, p};
      std::vector<int> zi{2 * m + 1 - p, 2 * m - p, 2 * m - 1 - p};
      std::vector<int> hi{2 * m + 1 - p, 2 * m - p};
      const Vec<T> x = solve_block<T>(pick(lam, zi, ci), pick(lam, zi, hi) * Vec<T>::Ones(2),
                                      "middle row, node " + std::to_string(p));
      rec[canon_key({row, p}, {row, p + 1})] =
          lam(p - 1, hi[0]) + lam(p - 1, hi[1]) - pick_row(lam, p - 1, ci).dot(x);
    }
  }
  return rec;
}

}  // namespace

RecoveredNetwork peel_two_sided(const Eigen::MatrixXd& m_in, bool flipped) {
  const int nb = static_cast<int>(m_in.rows());
  if (nb < 4 || nb % 2 != 0 || m_in.cols() != nb)
    throw std::invalid_argument("two-sided peeling requires a square DtN map of even size >= 4");
  std::vector<int> perm;
  Eigen::MatrixXd m0 = m_in;
  if (flipped) {
    // half-turn of the boundary: fit the network turned upside-down
    perm.resize(nb);
    for (int p = 0; p < nb; ++p) perm[p] = (p + nb / 2) % nb;
    for (int p = 0; p < nb; ++p)
      for (int q = 0; q < nb; ++q) m0(p, q) = m_in(perm[p], perm[q]);
  }
  const std::map<EdgeKey, long double> rec =
      peel_two_sided_core<long double>(m0.cast<long double>());
  RecoveredNetwork out;
  out.network = network_from_records(build_two_sided(nb), rec);
  out.boundary_permutation = std::move(perm);
  out.refit_residual = refit_residual(out, m_in);
  return out;
}

PeelRoundTrip peel_round_trip(const ResistorNetwork& net) {
  const NetworkGraph& g = net.graph;
  if (g.topology != Topology::Pyramidal && g.topology != Topology::TwoSided)
    throw std::invalid_argument("round trip validation covers the peeling topologies only");
  std::vector<HP> gamma(net.gamma.begin(), net.gamma.end());
  const Mat<HP> lam = dtn_in<HP>(g, gamma);
  const std::map<EdgeKey, HP> rec =
      g.topology == Topology::Pyramidal ? peel_pyramidal_core<HP>(lam) : peel_two_sided_core<HP>(lam);
  PeelRoundTrip out;
  std::vector<HP> grec(g.edges.size());
  for (size_t e = 0; e < g.edges.size(); ++e) {
    const EdgeKey key = canon_key(g.node_coords[g.edges[e].i], g.node_coords[g.edges[e].j]);
    auto it = rec.find(key);
    if (it == rec.end()) throw std::logic_error("peeling: edge was never recovered");
    grec[e] = it->second;
    out.gamma_error =
        std::max(out.gamma_error, (abs(grec[e] - gamma[e]) / gamma[e]).convert_to<double>());
  }
  const Mat<HP> refit = dtn_in<HP>(g, grec);
  HP err(0), scale(0);
  for (int p = 0; p < g.n; ++p)
    for (int q = 0; q < g.n; ++q) {
      err = std::max(err, HP(abs(refit(p, q) - lam(p, q))));
      scale = std::max(scale, HP(abs(lam(p, q))));
    }
  out.refit_residual = (err / scale).convert_to<double>();
  return out;
}

RecoveredNetwork recover_network(const Eigen::MatrixXd& m, Topology topology,
                                 const RecoverOptions& opts) {
  switch (topology) {
    case Topology::Circular:
      return recover_circular(m, opts);
    case Topology::Pyramidal:
      return peel_pyramidal(m);
    case Topology::TwoSided:
      return peel_two_sided(m);
  }
  throw std::invalid_argument("unknown topology");
}

double refit_residual(const RecoveredNetwork& rec, const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd lam = dtn_map(rec.network);
  const int n = rec.network.graph.n;
  double err = 0.0;
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) {
      const int a = rec.boundary_permutation.empty() ? p : rec.boundary_permutation[p];
      const int b = rec.boundary_permutation.empty() ? q : rec.boundary_permutation[q];
      err = std::max(err, std::abs(lam(p, q) - m(a, b)));
    }
  return err / std::max(m.cwiseAbs().maxCoeff(), 1e-300);
}

ReconstructionResult reconstruction_mapping(const Eigen::MatrixXd& m_data,
                                            const Eigen::MatrixXd& m_ref, Topology topology,
                                            const std::vector<std::pair<double, double>>* points) {
  const int n = static_cast<int>(m_data.rows());
  if (m_ref.rows() != n) throw std::invalid_argument("data and reference sizes differ");
  ReconstructionResult out;
  out.recovered = recover_network(m_data, topology);
  RecoveredNetwork ref = recover_network(m_ref, topology);
  const size_t ne = out.recovered.network.gamma.size();
  out.gamma_ref.resize(ne);
  for (size_t e = 0; e < ne; ++e) out.gamma_ref[e] = ref.network.gamma[e];

  std::vector<std::pair<double, double>> pts;
  if (points) {
    pts = *points;
  } else if (topology == Topology::Circular) {
    pts = circular_point_grid(n);
  } else {
    throw std::invalid_argument("non-circular reconstructions need explicit points");
  }
  if (pts.size() != ne) throw std::invalid_argument("point count does not match edge count");
  out.points.resize(ne);
  for (size_t e = 0; e < ne; ++e) {
    out.points[e].r = pts[e].first;
    out.points[e].theta = pts[e].second;
    out.points[e].value = out.recovered.network.gamma[e] / out.gamma_ref[e];
  }
  return out;
}

ConductivityField interpolate_circular(const ReconstructionResult& rec, int n) {
  // group the points into rings of n values each
  struct Ring {
    double z;  // log(1/r)
    std::vector<double> theta, value;
  };
  std::map<long long, Ring> by_radius;  // key: radius quantized
  for (const ReconstructionPoint& p : rec.points) {
    const long long key = static_cast<long long>(std::llround(p.r * 1e13));
    Ring& ring = by_radius[key];
    ring.z = std::log(1.0 / p.r);
    ring.theta.push_back(p.theta);
    ring.value.push_back(p.value);
  }
  std::vector<Ring> rings;  // increasing z (decreasing radius)
  for (auto it = by_radius.rbegin(); it != by_radius.rend(); ++it) {
    Ring r = it->second;
    if (static_cast<int>(r.theta.size()) != n)
      throw std::invalid_argument("reconstruction points do not form rings");
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return r.theta[a] < r.theta[b]; });
    Ring sorted;
    sorted.z = r.z;
    for (int i : order) {
      sorted.theta.push_back(r.theta[i]);
      sorted.value.push_back(r.value[i]);
    }
    rings.push_back(std::move(sorted));
  }
  const auto on_ring = [n](const Ring& ring, double theta) {
    theta = std::fmod(theta, 2.0 * kPi);
    if (theta < 0.0) theta += 2.0 * kPi;
    int a = static_cast<int>(std::upper_bound(ring.theta.begin(), ring.theta.end(), theta) -
                             ring.theta.begin()) -
            1;
    double ta, tb, span;
    int b;
    if (a < 0) {  // before the first sample: segment from the last one, wrapped
      a = n - 1;
      b = 0;
      ta = ring.theta[a] - 2.0 * kPi;
      tb = ring.theta[b];
    } else {
      b = (a + 1) % n;
      ta = ring.theta[a];
      tb = b == 0 ? ring.theta[0] + 2.0 * kPi : ring.theta[b];
    }
    span = tb - ta;
    const double w = span > 0.0 ? (theta - ta) / span : 0.0;
    return (1.0 - w) * ring.value[a] + w * ring.value[b];
  };
  ConductivityField f;
  f.eval = [rings, on_ring](double r, double theta) {
    const double z = std::log(1.0 / std::max(r, 1e-300));
    if (z <= rings.front().z) return on_ring(rings.front(), theta);
    if (z >= rings.back().z) return on_ring(rings.back(), theta);
    size_t b = 1;
    while (rings[b].z < z) ++b;
    const Ring &ra = rings[b - 1], &rb = rings[b];
    const double w = (z - ra.z) / (rb.z - ra.z);
    return (1.0 - w) * on_ring(ra, theta) + w * on_ring(rb, theta);
  };
  return f;
}

SensitivityMatrix sensitivity_matrix(const ConductivityField& sigma_ref, int n, Topology topology,
                                     const ElectrodeSet& electrodes, int nr, int ntheta) {
  SensitivityMatrix out;
  const MeasuredDtn md = measure_dtn(sigma_ref, n, electrodes, nr, ntheta);
  const int nt = md.ntheta;
  RecoveredNetwork ref = recover_network(md.m, topology);
  out.graph = ref.network.graph;
  out.gamma_ref.resize(ref.network.gamma.size());
  for (size_t e = 0; e < ref.network.gamma.size(); ++e) out.gamma_ref[e] = ref.network.gamma[e];

  // fine potentials for each electrode
  FineSolver solver(sigma_ref, nr, nt, 1e-4);
  Eigen::MatrixXd u(static_cast<Eigen::Index>(nr + 1) * nt, n);
  for (int q = 0; q < n; ++q) {
    Eigen::VectorXd data(nt);
    for (int j = 0; j < nt; ++j) data[j] = electrodes.chi(q, solver.angle(j));
    u.col(q) = solver.solve_dirichlet(data);
  }

  // exact measurement differentials: dM_pq / dsigma_c sums (dg_e/dsigma_c)
  // (Delta u_p)_e (Delta u_q)_e over the fine edges touching cell c
  const int nv = n * (n - 1) / 2;
  const int np = nr * nt;
  const double ht = 2.0 * kPi / nt;
  Eigen::MatrixXd dm = Eigen::MatrixXd::Zero(nv, np);
  Eigen::VectorXd w(n);
  auto scatter = [&](int cell, double weight) {
    for (int p = 1; p < n; ++p)
      for (int q = 0; q < p; ++q) dm(vec_index(p, q), cell) += weight * w[p] * w[q];
  };
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nt; ++j) {
      w = (u.row(i * nt + j) - u.row((i + 1) * nt + j)).transpose();
      const double dg = ht / (2.0 * solver.z_step(i));
      scatter(i * nt + j, dg);
      scatter(i * nt + (j + nt - 1) % nt, dg);
    }
  for (int i = 0; i <= nr; ++i)
    for (int j = 0; j < nt; ++j) {
      w = (u.row(i * nt + j) - u.row(i * nt + (j + 1) % nt)).transpose();
      if (i > 0) scatter((i - 1) * nt + j, solver.z_step(i - 1) / (2.0 * ht));
      if (i < nr) scatter(i * nt + j, solver.z_step(i) / (2.0 * ht));
    }

  // chain through the network fit: dgamma = (dLambda/dgamma)^-1 dM
  const NetworkSolve ns = solve_network(ref.network);
  const Eigen::MatrixXd a = dtn_jacobian(ref.network, ns.hext);
  if (a.rows() != a.cols())
    throw std::logic_error("network is not critical: edge and measurement counts differ");
  out.d = a.fullPivLu().solve(dm);
  out.nr = nr;
  out.ntheta = nt;
  out.cell_r.resize(nr);
  for (int i = 0; i < nr; ++i) out.cell_r[i] = 0.5 * (solver.radius(i) + solver.radius(i + 1));
  out.cell_theta.resize(nt);
  for (int j = 0; j < nt; ++j) out.cell_theta[j] = (j + 0.5) * ht;
  return out;
}

SensitivityGrid sensitivity_grid(const SensitivityMatrix& s) {
  SensitivityGrid out;
  const int ne = static_cast<int>(s.d.rows());
  for (int e = 0; e < ne; ++e) {
    double best = -1.0;
    int bi = 0, bj = 0;
    for (int i = s.nr - 1; i >= 0; --i)  // inner cells first: ties go inward
      for (int j = 0; j < s.ntheta; ++j) {
        const double v = std::abs(s.d(e, i * s.ntheta + j));
        if (v > best * (1.0 + 1e-12)) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    const double lo = s.d.row(e).cwiseAbs().minCoeff();
    if (best - lo <= 1e-12 * std::max(best, 1e-300)) {
      out.flat_warning = true;
      out.warning = "sensitivity row " + std::to_string(e) + " is flat; argmax is arbitrary";
    }
    out.points.emplace_back(s.cell_r[bi], s.cell_theta[bj]);
  }
  return out;
}

ConductivityField field_from_kappa(const GaussNewtonContext& ctx, const Eigen::VectorXd& kappa) {
  if (kappa.size() != static_cast<Eigen::Index>(ctx.nr) * ctx.ntheta)
    throw std::invalid_argument("kappa size does not match the cell grid");
  const int nr = ctx.nr, nt = ctx.ntheta;
  const double dr = (1.0 - ctx.rmin) / nr, ht = 2.0 * kPi / nt;
  Eigen::VectorXd k = kappa;
  ConductivityField f;
  f.eval = [nr, nt, dr, ht, k](double r, double theta) {
    int i = static_cast<int>(std::floor((1.0 - r) / dr));
    i = std::min(std::max(i, 0), nr - 1);
    theta = std::fmod(theta, 2.0 * kPi);
    if (theta < 0.0) theta += 2.0 * kPi;
    int j = static_cast<int>(std::floor(theta / ht)) % nt;
    return std::exp(k[static_cast<Eigen::Index>(i) * nt + j]);
  };
  return f;
}

Eigen::VectorXd gn_ratios(const GaussNewtonContext& ctx, const Eigen::VectorXd& kappa) {
  const MeasuredDtn md =
      measure_dtn(field_from_kappa(ctx, kappa), ctx.n, ctx.electrodes, ctx.nr, ctx.ntheta);
  RecoverOptions opts = ctx.recover_opts;
  opts.initial_gamma.assign(ctx.gamma_ref.data(), ctx.gamma_ref.data() + ctx.gamma_ref.size());
  const RecoveredNetwork rec = recover_circular(md.m, opts);
  Eigen::VectorXd q(ctx.gamma_ref.size());
  for (Eigen::Index e = 0; e < q.size(); ++e) q[e] = rec.network.gamma[e] / ctx.gamma_ref[e];
  return q;
}

GaussNewtonContext make_gn_context(const Eigen::MatrixXd& m_data, int n,
                                   const ElectrodeSet& electrodes, int nr, int ntheta) {
  GaussNewtonContext ctx;
  ctx.n = n;
  ctx.electrodes = electrodes;
  ctx.nr = nr;
  ctx.ntheta = measurement_ntheta(n, electrodes, ntheta);
  ctx.recover_opts.check_consistency = false;  // screened once below
  SensitivityMatrix sens = sensitivity_matrix(
      field_from_kappa(ctx, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nr) * ctx.ntheta)), n,
      Topology::Circular, electrodes, nr, ntheta);
  ctx.graph = sens.graph;
  ctx.gamma_ref = sens.gamma_ref;
  ctx.dsg = std::move(sens.d);
  ConsistencyReport rep = check_dtn_consistency(m_data, n, 1e-8);
  if (!rep.pass()) throw std::invalid_argument("inconsistent DtN data: " + rep.first_violation);
  RecoverOptions opts = ctx.recover_opts;
  opts.initial_gamma.assign(ctx.gamma_ref.data(), ctx.gamma_ref.data() + ctx.gamma_ref.size());
  const RecoveredNetwork rec = recover_circular(m_data, opts);
  ctx.q_data.resize(ctx.gamma_ref.size());
  for (Eigen::Index e = 0; e < ctx.q_data.size(); ++e)
    ctx.q_data[e] = rec.network.gamma[e] / ctx.gamma_ref[e];
  return ctx;
}

Eigen::VectorXd gn_initial_guess(const GaussNewtonContext& ctx) {
  ReconstructionResult rec;
  rec.gamma_ref = ctx.gamma_ref;
  const std::vector<std::pair<double, double>> pts = circular_point_grid(ctx.n);
  rec.points.resize(pts.size());
  for (size_t e = 0; e < pts.size(); ++e) {
    rec.points[e].r = pts[e].first;
    rec.points[e].theta = pts[e].second;
    rec.points[e].value = ctx.q_data[e];
  }
  const ConductivityField f = interpolate_circular(rec, ctx.n);
  const double dr = (1.0 - ctx.rmin) / ctx.nr, ht = 2.0 * kPi / ctx.ntheta;
  Eigen::VectorXd kappa(static_cast<Eigen::Index>(ctx.nr) * ctx.ntheta);
  for (int i = 0; i < ctx.nr; ++i)
    for (int j = 0; j < ctx.ntheta; ++j)
      kappa[static_cast<Eigen::Index>(i) * ctx.ntheta + j] =
          std::log(f(1.0 - (i + 0.5) * dr, (j + 0.5) * ht));
  return kappa;
}

GaussNewtonStep gauss_newton_step(const GaussNewtonContext& ctx, const Eigen::VectorXd& kappa) {
  GaussNewtonStep out;
  const Eigen::VectorXd r = gn_ratios(ctx, kappa) - ctx.q_data;
  out.objective_before = 0.5 * r.squaredNorm();
  if (out.objective_before == 0.0) {
    out.kappa = kappa;
    out.objective_after = 0.0;
    out.accepted = true;
    return out;
  }
  Eigen::MatrixXd jac = ctx.dsg;
  for (Eigen::Index e = 0; e < jac.rows(); ++e) jac.row(e) /= ctx.gamma_ref[e];
  for (Eigen::Index c = 0; c < jac.cols(); ++c) jac.col(c) *= std::exp(kappa[c]);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cut = 1e-10 * sv[0];
  Eigen::VectorXd coef = svd.matrixU().transpose() * r;
  for (Eigen::Index i = 0; i < coef.size(); ++i) coef[i] = sv[i] > cut ? coef[i] / sv[i] : 0.0;
  const Eigen::VectorXd delta = svd.matrixV() * coef;

  double t = 1.0;
  for (int h = 0; h <= 5; ++h, t *= 0.5) {
    Eigen::VectorXd kt = kappa - t * delta;
    const double obj = 0.5 * (gn_ratios(ctx, kt) - ctx.q_data).squaredNorm();
    if (obj < out.objective_before) {
      out.kappa = std::move(kt);
      out.objective_after = obj;
      out.halvings = h;
      out.accepted = true;
      return out;
    }
  }
  out.kappa = kappa;
  out.objective_after = out.objective_before;
  out.halvings = 5;
  out.accepted = false;
  return out;
}

std::vector<GaussNewtonStep> gauss_newton(const GaussNewtonContext& ctx,
                                          const Eigen::VectorXd& kappa0, int max_steps) {
  std::vector<GaussNewtonStep> steps;
  Eigen::VectorXd kappa = kappa0;
  for (int s = 0; s < max_steps; ++s) {
    GaussNewtonStep step = gauss_newton_step(ctx, kappa);
    const bool done = !step.accepted ||
                      step.objective_before - step.objective_after <
                          1e-3 * std::max(step.objective_before, 1e-300);
    kappa = step.kappa;
    steps.push_back(std::move(step));
    if (done) break;
  }
  return steps;
}

}  // namespace eit
