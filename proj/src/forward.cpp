#include "forward.hpp"

#include <json.hpp>

#include "spectral.hpp"

namespace eit {

namespace {

double wrap_angle(double t) {
  t = std::fmod(t, 2.0 * kPi);
  if (t > kPi) t -= 2.0 * kPi;
  if (t < -kPi) t += 2.0 * kPi;
  return t;
}

}  // namespace

ConductivityField ConductivityField::from_layered(const LayeredConductivity& sigma_r, double lo,
                                                  double hi) {
  ConductivityField f;
  f.eval = [sigma_r](double r, double) { return sigma_r(r); };
  f.layered = true;
  f.sigma_min = lo;
  f.sigma_max = hi;
  return f;
}

double ElectrodeSet::chi(int q, double theta) const {
  const double d = wrap_angle(theta - centers[q]);
  if (shape == ElectrodeShape::Box) return std::abs(d) < width / 2.0 ? 1.0 / width : 0.0;
  // band-limited box: Fourier coefficients sinc(k width / 2) up to (n-1)/2
  double s = 1.0;
  for (int k = 1; k <= (n - 1) / 2; ++k) s += 2.0 * sinc(k * width / 2.0) * std::cos(k * d);
  return s / (2.0 * kPi);
}

ElectrodeSet make_electrodes(int n, ElectrodeShape shape) {
  ElectrodeSet e;
  e.n = n;
  e.shape = shape;
  e.width = 2.0 * kPi / n;
  for (int q = 0; q < n; ++q) e.centers.push_back(e.width * q);
  return e;
}

ElectrodeSet make_arc_electrodes(int n, double beta, ElectrodeShape shape) {
  if (!(beta > 0.0) || beta > kPi) throw std::invalid_argument("arc half-width must be in (0, pi]");
  ElectrodeSet e;
  e.n = n;
  e.shape = shape;
  e.width = 2.0 * beta / n;
  for (int q = 0; q < n; ++q) e.centers.push_back(-beta + (q + 0.5) * e.width);
  return e;
}

FineSolver::FineSolver(const ConductivityField& sigma, int nr, int ntheta, double rmin)
    : nr_(nr), nt_(ntheta), ht_(2.0 * kPi / ntheta) {
  if (nr < 2 || ntheta < 4 || !(rmin > 0.0) || rmin >= 1.0)
    throw std::invalid_argument("bad fine-grid parameters");
  radii_.resize(nr + 1);
  for (int i = 0; i <= nr; ++i) radii_[i] = 1.0 + (rmin - 1.0) * i / nr;
  alpha_.resize(nr);
  for (int i = 0; i < nr; ++i) alpha_[i] = std::log(radii_[i] / radii_[i + 1]);
  sig_.resize(static_cast<size_t>(nr) * nt_);
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nt_; ++j) {
      const double s = sigma(0.5 * (radii_[i] + radii_[i + 1]), (j + 0.5) * ht_);
      if (!(s > 0.0)) throw std::domain_error("conductivity must be positive on the disk");
      sig_[static_cast<size_t>(i) * nt_ + j] = s;
    }

  auto sc = [&](int i, int j) { return sig_[static_cast<size_t>(i) * nt_ + (j % nt_ + nt_) % nt_]; };
  g_rad_.resize(static_cast<size_t>(nr) * nt_);
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nt_; ++j)
      g_rad_[static_cast<size_t>(i) * nt_ + j] = ht_ / alpha_[i] * 0.5 * (sc(i, j - 1) + sc(i, j));
  g_ang_.resize(static_cast<size_t>(nr + 1) * nt_);
  for (int i = 0; i <= nr; ++i)
    for (int j = 0; j < nt_; ++j) {
      double len = 0.0;
      if (i > 0) len += sc(i - 1, j) * alpha_[i - 1] / 2.0;
      if (i < nr) len += sc(i, j) * alpha_[i] / 2.0;
      g_ang_[static_cast<size_t>(i) * nt_ + j] = len / ht_;
    }

  // Dirichlet system over nodes i = 1..nr (boundary ring eliminated)
  const int nu = nr * nt_;
  auto idx = [&](int i, int j) { return (i - 1) * nt_ + (j % nt_ + nt_) % nt_; };
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(nu) * 5);
  std::vector<double> diag(nu, 0.0);
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nt_; ++j) {
      const double g = g_rad_[static_cast<size_t>(i) * nt_ + j];
      if (i == 0) {
        diag[idx(1, j)] += g;
      } else {
        diag[idx(i, j)] += g;
        diag[idx(i + 1, j)] += g;
        trip.emplace_back(idx(i, j), idx(i + 1, j), -g);
        trip.emplace_back(idx(i + 1, j), idx(i, j), -g);
      }
    }
  for (int i = 1; i <= nr; ++i)
    for (int j = 0; j < nt_; ++j) {
      const double g = g_ang_[static_cast<size_t>(i) * nt_ + j];
      diag[idx(i, j)] += g;
      diag[idx(i, j + 1)] += g;
      trip.emplace_back(idx(i, j), idx(i, j + 1), -g);
      trip.emplace_back(idx(i, j + 1), idx(i, j), -g);
    }
  for (int u = 0; u < nu; ++u) trip.emplace_back(u, u, diag[u]);
  a_dir_.resize(nu, nu);
  a_dir_.setFromTriplets(trip.begin(), trip.end());
  dir_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(a_dir_);
  if (dir_->info() != Eigen::Success) throw std::runtime_error("fine-grid factorization failed");
}

Eigen::VectorXd FineSolver::solve_dirichlet(const Eigen::VectorXd& u_b) const {
  if (u_b.size() != nt_) throw std::invalid_argument("boundary data size mismatch");
  Eigen::VectorXd b = Eigen::VectorXd::Zero(nr_ * nt_);
  for (int j = 0; j < nt_; ++j) b[j] += g_rad_[j] * u_b[j];
  Eigen::VectorXd x = dir_->solve(b);
  Eigen::VectorXd full(static_cast<Eigen::Index>(nr_ + 1) * nt_);
  full.head(nt_) = u_b;
  full.tail(nr_ * nt_) = x;
  return full;
}

Eigen::VectorXd FineSolver::boundary_flux(const Eigen::VectorXd& u) const {
  Eigen::VectorXd j_b(nt_);
  for (int j = 0; j < nt_; ++j) {
    const int jp = (j + 1) % nt_, jm = (j + nt_ - 1) % nt_;
    double cur = g_rad_[j] * (u[j] - u[nt_ + j]);
    cur += g_ang_[j] * (u[j] - u[jp]);
    cur += g_ang_[jm] * (u[j] - u[jm]);
    j_b[j] = cur / ht_;
  }
  return j_b;
}

void FineSolver::build_neumann() const {
  // all nodes unknown except the grounded boundary node (0, 0)
  const int nu = (nr_ + 1) * nt_ - 1;
  auto idx = [&](int i, int j) { return i * nt_ + (j % nt_ + nt_) % nt_; };
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> diag(nu + 1, 0.0);
  auto couple = [&](int a, int b, double g) {
    diag[a] += g;
    diag[b] += g;
    if (a != 0 && b != 0) {
      trip.emplace_back(a - 1, b - 1, -g);
      trip.emplace_back(b - 1, a - 1, -g);
    }
  };
  for (int i = 0; i < nr_; ++i)
    for (int j = 0; j < nt_; ++j)
      couple(idx(i, j), idx(i + 1, j), g_rad_[static_cast<size_t>(i) * nt_ + j]);
  for (int i = 0; i <= nr_; ++i)
    for (int j = 0; j < nt_; ++j)
      couple(idx(i, j), idx(i, j + 1), g_ang_[static_cast<size_t>(i) * nt_ + j]);
  for (int u = 1; u <= nu; ++u) trip.emplace_back(u - 1, u - 1, diag[u]);
  Eigen::SparseMatrix<double> a(nu, nu);
  a.setFromTriplets(trip.begin(), trip.end());
  neu_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(a);
  if (neu_->info() != Eigen::Success) throw std::runtime_error("fine-grid factorization failed");
}

Eigen::VectorXd FineSolver::solve_neumann(const Eigen::VectorXd& current_density) const {
  if (current_density.size() != nt_) throw std::invalid_argument("boundary data size mismatch");
  const double mean = current_density.sum() * ht_;
  if (std::abs(mean) > 1e-10 * std::max(1.0, current_density.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("Neumann data must have zero mean");
  if (!neu_) build_neumann();
  const int nu = (nr_ + 1) * nt_ - 1;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(nu);
  for (int j = 1; j < nt_; ++j) b[j - 1] = current_density[j] * ht_;  // node (0,0) grounded
  Eigen::VectorXd x = neu_->solve(b);
  Eigen::VectorXd full(static_cast<Eigen::Index>(nr_ + 1) * nt_);
  full[0] = 0.0;
  full.tail(nu) = x;
  return full;
}

double FineSolver::eigenvalue_sample(int k) const {
  Eigen::VectorXd u_b(nt_);
  for (int j = 0; j < nt_; ++j) u_b[j] = std::cos(k * angle(j));
  Eigen::VectorXd flux = boundary_flux(solve_dirichlet(u_b));
  double f = 0.0;
  for (int j = 0; j < nt_; ++j) f += std::cos(k * angle(j)) * flux[j];
  return f * ht_ / kPi;
}

Eigen::MatrixXd measure_bilinear(const FineSolver& solver,
                                 const std::vector<Eigen::VectorXd>& dirichlet_data,
                                 const std::vector<Eigen::VectorXd>& weights) {
  const int n = static_cast<int>(dirichlet_data.size());
  const double ht = 2.0 * kPi / solver.ntheta();
  Eigen::MatrixXd m(static_cast<int>(weights.size()), n);
  for (int q = 0; q < n; ++q) {
    Eigen::VectorXd flux = solver.boundary_flux(solver.solve_dirichlet(dirichlet_data[q]));
    for (size_t p = 0; p < weights.size(); ++p) m(p, q) = weights[p].dot(flux) * ht;
  }
  return m;
}

int measurement_ntheta(int n, const ElectrodeSet& electrodes, int ntheta) {
  if (electrodes.shape == ElectrodeShape::Box && electrodes.n == n &&
      std::abs(electrodes.width * n - 2.0 * kPi) < 1e-12) {
    // full-boundary boxes: snap to n * odd nodes so every node lies in
    // exactly one electrode and no node sits on an electrode boundary
    int me = std::max(1, static_cast<int>(std::lround(static_cast<double>(ntheta) / n)));
    if (me % 2 == 0) ++me;
    return n * me;
  }
  return ntheta;
}

MeasuredDtn measure_dtn(const ConductivityField& sigma, int n, const ElectrodeSet& electrodes,
                        int nr, int ntheta) {
  const int nt = measurement_ntheta(n, electrodes, ntheta);
  FineSolver solver(sigma, nr, nt, 1e-4);
  std::vector<Eigen::VectorXd> data(n), wts(n);
  for (int q = 0; q < n; ++q) {
    data[q].resize(nt);
    for (int j = 0; j < nt; ++j) data[q][j] = electrodes.chi(q, solver.angle(j));
    wts[q] = data[q];
  }
  Eigen::MatrixXd m = measure_bilinear(solver, data, wts);
  MeasuredDtn out;
  out.n = n;
  out.nr = nr;
  out.ntheta = nt;
  out.shape = electrodes.shape;
  out.asymmetry = (m - m.transpose()).cwiseAbs().maxCoeff() / m.cwiseAbs().maxCoeff();
  m = 0.5 * (m + m.transpose()).eval();
  for (int p = 0; p < n; ++p) {
    m(p, p) = 0.0;
    m(p, p) = -m.row(p).sum();
  }
  out.m = std::move(m);
  return out;
}

MeasuredDtn fourier_dtn_layered(const LayeredConductivity& sigma_r, int n) {
  if (n < 3 || n % 2 == 0) throw std::invalid_argument("n must be odd and >= 3");
  const double ht = 2.0 * kPi / n;
  const int kmax = (n - 1) / 2;
  std::vector<double> lam(kmax + 1, 0.0);
  for (int k = 1; k <= kmax; ++k) {
    const double s = sinc(k * ht / 2.0);
    lam[k] = eigenvalue_f(sigma_r, k) * s * s / ht;
  }
  MeasuredDtn out;
  out.n = n;
  out.shape = ElectrodeShape::Bandlimited;
  out.m.resize(n, n);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) {
      double v = 0.0;
      for (int k = 1; k <= kmax; ++k) v += 2.0 * lam[k] * std::cos(k * ht * (p - q));
      out.m(p, q) = v / n;
    }
  return out;
}

Eigen::MatrixXd lumped_dtn_layered(const LayeredConductivity& sigma_r, int n) {
  if (n < 3 || n % 2 == 0) throw std::invalid_argument("n must be odd and >= 3");
  const double ht = 2.0 * kPi / n;
  const int kmax = (n - 1) / 2;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) {
      double v = 0.0;
      for (int k = 1; k <= kmax; ++k)
        v += 2.0 * eigenvalue_f(sigma_r, k) * (k * sinc(k * ht / 2.0) / k) * std::cos(k * ht * (p - q));
      m(p, q) = v / n;
    }
  return m;
}

namespace {

// versioned phantom registry; every experiment samples these exact parameters
const char* kPhantomRegistry = R"json({
  "version": 1,
  "smooth": {
    "background": 1.0,
    "bumps": [
      {"amplitude": 0.6, "x": 0.3, "y": 0.2, "width": 0.35},
      {"amplitude": -0.3, "x": -0.35, "y": -0.25, "width": 0.3}
    ]
  },
  "chest": {
    "background": 1.0,
    "annulus": {"value": 2.0, "r_inner": 0.55, "r_outer": 0.75},
    "ellipses": [
      {"value": 0.3, "x": 0.25, "y": 0.1, "a": 0.18, "b": 0.3, "angle": 0.3},
      {"value": 0.3, "x": -0.25, "y": 0.1, "a": 0.18, "b": 0.3, "angle": -0.3}
    ]
  },
  "layered-smooth": {
    "background": 1.0,
    "amplitude": 0.3,
    "rmin": 1e-4
  }
})json";

}  // namespace

std::string phantom_registry_json() { return kPhantomRegistry; }

ConductivityField phantom(const std::string& name) {
  const nlohmann::json reg = nlohmann::json::parse(kPhantomRegistry);
  if (!reg.contains(name)) throw std::invalid_argument("unknown phantom: " + name);
  const nlohmann::json spec = reg.at(name);
  ConductivityField f;
  if (name == "smooth") {
    struct Bump {
      double a, x, y, w;
    };
    std::vector<Bump> bumps;
    for (const auto& b : spec.at("bumps"))
      bumps.push_back({b.at("amplitude"), b.at("x"), b.at("y"), b.at("width")});
    const double bg = spec.at("background");
    f.eval = [bg, bumps](double r, double th) {
      const double x = r * std::cos(th), y = r * std::sin(th);
      double v = bg;
      for (const auto& b : bumps)
        v += b.a * std::exp(-((x - b.x) * (x - b.x) + (y - b.y) * (y - b.y)) / (b.w * b.w));
      return v;
    };
    f.sigma_min = 0.65;
    f.sigma_max = 1.65;
  } else if (name == "chest") {
    struct Ell {
      double v, x, y, a, b, ang;
    };
    std::vector<Ell> ells;
    for (const auto& e : spec.at("ellipses"))
      ells.push_back({e.at("value"), e.at("x"), e.at("y"), e.at("a"), e.at("b"), e.at("angle")});
    const double bg = spec.at("background");
    const double av = spec.at("annulus").at("value");
    const double ri = spec.at("annulus").at("r_inner"), ro = spec.at("annulus").at("r_outer");
    f.eval = [bg, av, ri, ro, ells](double r, double th) {
      const double x = r * std::cos(th), y = r * std::sin(th);
      for (const auto& e : ells) {
        const double dx = x - e.x, dy = y - e.y;
        const double u = dx * std::cos(e.ang) + dy * std::sin(e.ang);
        const double w = -dx * std::sin(e.ang) + dy * std::cos(e.ang);
        if (u * u / (e.a * e.a) + w * w / (e.b * e.b) < 1.0) return e.v;
      }
      if (r > ri && r < ro) return av;
      return bg;
    };
    f.sigma_min = 0.3;
    f.sigma_max = 2.0;
  } else if (name == "layered-smooth") {
    const double bg = spec.at("background"), amp = spec.at("amplitude");
    const double rmin = spec.at("rmin");
    const double zden = std::log(1.0 / rmin);
    f.eval = [bg, amp, zden](double r, double) {
      const double zeta = std::min(1.0, std::log(1.0 / std::max(r, 1e-300)) / zden);
      return bg + amp * std::sin(kPi * zeta);
    };
    f.layered = true;
    f.sigma_min = 1.0;
    f.sigma_max = 1.3;
  } else {
    throw std::invalid_argument("unknown phantom: " + name);
  }
  return f;
}

}  // namespace eit
