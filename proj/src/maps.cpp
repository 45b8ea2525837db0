#include "maps.hpp"

namespace eit {

namespace {

using cd = std::complex<double>;

void check_in_disk(cd z, const char* what) {
  if (std::abs(z) > 1.0 + 1e-9)
    throw std::domain_error(std::string(what) + ": point outside the closed unit disk");
}

// principal angle in (-pi, pi]
double reduce(double t) {
  t = std::fmod(t, 2.0 * kPi);
  if (t > kPi) t -= 2.0 * kPi;
  if (t <= -kPi) t += 2.0 * kPi;
  return t;
}

}  // namespace

std::complex<double> MobiusMap::forward(std::complex<double> z) const {
  check_in_disk(z, "mobius forward");
  return std::polar(1.0, omega) * (z - a) / (1.0 - std::conj(a) * z);
}

std::complex<double> MobiusMap::inverse(std::complex<double> w) const {
  check_in_disk(w, "mobius inverse");
  const cd u = std::polar(1.0, -omega) * w;
  return (u + a) / (1.0 + std::conj(a) * u);
}

double MobiusMap::boundary_forward(double theta) const {
  return reduce(std::arg(forward(std::polar(1.0, theta))));
}

double MobiusMap::boundary_inverse(double tau) const {
  return reduce(std::arg(inverse(std::polar(1.0, tau))));
}

double MobiusMap::boundary_inverse_derivative(double tau) const {
  const cd u = std::polar(1.0, tau - omega);
  return (1.0 - std::norm(a)) / std::norm(1.0 + std::conj(a) * u);
}

MobiusMap fit_mobius_one_sided(double beta, int n) {
  if (!(beta > 0.0 && beta <= kPi)) throw std::invalid_argument("arc half-width must be in (0, pi]");
  if (n < 3 || n % 2 == 0) throw std::invalid_argument("one-sided setups use odd n >= 3");
  MobiusMap map;
  if (beta >= kPi - 1e-12) return map;  // full boundary: no distortion needed

  // With real a and omega = 0 the boundary map is
  //   f(theta) = 2 atan2(sin theta, cos theta - a) - theta,
  // increasing in a from 0 (a -> -1) to pi (a -> 1) at fixed theta.  The gap
  // endpoint theta* = pi - pi/n must land on tau = beta.
  const double ts = kPi - kPi / n;
  const double st = std::sin(ts), ct = std::cos(ts);
  auto f = [&](double a) { return 2.0 * std::atan2(st, ct - a) - ts; };
  double lo = -1.0 + 1e-15, hi = 1.0 - 1e-15;
  if (f(lo) > beta || f(hi) < beta)
    throw std::runtime_error("no feasible disk automorphism for this arc");
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < beta ? lo : hi) = mid;
  }
  double a = 0.5 * (lo + hi);
  for (int it = 0; it < 4; ++it) {  // Newton polish
    const double d = ct - a;
    a -= (f(a) - beta) * (d * d + st * st) / (2.0 * st);
  }
  if (!(std::abs(a) < 1.0)) throw std::runtime_error("no feasible disk automorphism for this arc");
  map.a = a;
  return map;
}

BoundaryCorrespondence boundary_correspondence(const MobiusMap& map, double beta, int n) {
  BoundaryCorrespondence out;
  out.beta = beta;
  out.theta.resize(n);
  out.tau.resize(n);
  for (int k = 0; k < n; ++k) {
    out.theta[k] = 2.0 * kPi * k / n;
    out.tau[k] = map.boundary_forward(out.theta[k]);
  }
  return out;
}

ConductivityField push_forward_conductivity(const ConductivityField& sigma,
                                            const MobiusMap& map) {
  ConductivityField out;
  out.sigma_min = sigma.sigma_min;
  out.sigma_max = sigma.sigma_max;
  out.eval = [sigma, map](double r, double theta) {
    cd w = map.forward(std::polar(r, theta));
    if (std::abs(w) > 1.0) w /= std::abs(w);  // clip rounding spill at the rim
    return sigma(std::abs(w), std::arg(w));
  };
  return out;
}

ConductivityField pull_back_conductivity(const ConductivityField& field, const MobiusMap& map) {
  MobiusMap inv;  // G is the Mobius map with parameters (-a e^{i omega}, -omega)
  inv.a = -map.a * std::polar(1.0, map.omega);
  inv.omega = -map.omega;
  return push_forward_conductivity(field, inv);
}

Eigen::MatrixXd measure_dtn_pulled(const ConductivityField& sigma, int n,
                                   const ElectrodeSet& electrodes, const MobiusMap& map,
                                   int nr, int ntheta) {
  const int nt = measurement_ntheta(n, electrodes, ntheta);
  FineSolver solver(sigma, nr, nt, 1e-4);
  // energy identity: the bilinear measurement of the pushed-forward field at
  // chi_p equals the measurement of sigma at the composed data chi_p o g,
  // with no Jacobian factor (the Dirichlet energy is conformally invariant)
  const double h = 2.0 * kPi / nt;
  std::vector<Eigen::VectorXd> data(n);
  for (int q = 0; q < n; ++q) {
    data[q].resize(nt);
    if (electrodes.shape == ElectrodeShape::Box) {
      // squeezed box supports no longer align with the grid: use exact cell
      // averages of the mapped indicator instead of point samples
      auto lift = [](double t) {  // to [0, 2 pi)
        t = std::fmod(t, 2.0 * kPi);
        return t < 0.0 ? t + 2.0 * kPi : t;
      };
      const double ta = lift(map.boundary_forward(electrodes.centers[q] - electrodes.width / 2.0));
      double tb = lift(map.boundary_forward(electrodes.centers[q] + electrodes.width / 2.0));
      if (tb < ta) tb += 2.0 * kPi;
      for (int j = 0; j < nt; ++j) {
        double len = 0.0;
        for (double shift : {0.0, 2.0 * kPi}) {  // support may straddle the seam
          const double ca = solver.angle(j) - h / 2.0 + shift;
          len += std::max(0.0, std::min(ca + h, tb) - std::max(ca, ta));
        }
        data[q][j] = len / (h * electrodes.width);
      }
    } else {
      for (int j = 0; j < nt; ++j)
        data[q][j] = electrodes.chi(q, map.boundary_inverse(solver.angle(j)));
    }
  }
  Eigen::MatrixXd m = measure_bilinear(solver, data, data);
  m = 0.5 * (m + m.transpose()).eval();
  for (int p = 0; p < n; ++p) {
    m(p, p) = 0.0;
    m(p, p) = -m.row(p).sum();
  }
  return m;
}

}  // namespace eit
