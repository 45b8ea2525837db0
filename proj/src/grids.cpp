#include "grids.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "spectral.hpp"

namespace eit {

namespace {

double integrate(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 12, 1e-12);
}

// integrate f over [a, b], splitting at the profile's breakpoints so jumps
// land on panel boundaries
double integrate_split(const std::function<double(double)>& f, double a, double b,
                       const std::vector<double>& breakpoints) {
  double total = 0.0, lo = a;
  for (double bp : breakpoints)
    if (bp > a && bp < b) {
      total += integrate(f, lo, bp);
      lo = bp;
    }
  return total + integrate(f, lo, b);
}

void check_radius(double r) {
  if (!(r > 0.0) || r > 1.0) throw std::domain_error("radius must lie in (0, 1]");
}

}  // namespace

double coordinate_z(double r, const LayeredConductivity& sigma) {
  check_radius(r);
  if (r == 1.0) return 0.0;
  return integrate_split([&](double t) {
    double s = sigma(t);
    if (!(s > 0.0)) throw std::domain_error("conductivity must be positive");
    return 1.0 / (t * s);
  }, r, 1.0, sigma.breakpoints);
}

double coordinate_zhat(double r, const LayeredConductivity& sigma) {
  check_radius(r);
  if (r == 1.0) return 0.0;
  return integrate_split([&](double t) {
    double s = sigma(t);
    if (!(s > 0.0)) throw std::domain_error("conductivity must be positive");
    return s / t;
  }, r, 1.0, sigma.breakpoints);
}

int layer_count(int n, int hbar) {
  if (n < 3 || n % 2 == 0) throw std::invalid_argument("n must be odd and >= 3");
  if (hbar != 0 && hbar != 1) throw std::invalid_argument("hbar must be 0 or 1");
  int m = (n - 1) / 2 + 1 - hbar;  // 2*ell = (n-1)/2 + 1 - hbar
  if (m % 2 != 0) throw std::invalid_argument("no integer layer count for this (n, hbar)");
  return m / 2;
}

StaggeredGrid radii_from_steps(const GridSteps& steps, int n) {
  const int ell = steps.ell();
  StaggeredGrid g;
  g.n = n;
  g.ell = ell;
  g.hbar = steps.hbar;
  g.primary_radii.assign(ell + 1, 1.0);
  double z = 0.0;
  for (int j = 0; j < ell; ++j) {
    z += steps.alpha[j];
    g.primary_radii[j + 1] = std::exp(-z);
  }
  g.dual_radii.assign(ell + steps.hbar, 1.0);
  double zh = 0.0;
  // hbar = 1: dual steps alphahat_1..alphahat_ell produce rhat_2..rhat_{ell+1};
  // hbar = 0: alphahat_2..alphahat_ell produce rhat_2..rhat_ell.
  for (int j = 1 - steps.hbar; j < ell; ++j) {
    zh += steps.alpha_hat[j];
    g.dual_radii[j + steps.hbar] = std::exp(-zh);
  }
  const double ht = 2.0 * kPi / n;
  g.primary_angles.resize(n);
  g.dual_angles.resize(n);
  for (int j = 0; j < n; ++j) {
    g.primary_angles[j] = ht * j;
    g.dual_angles[j] = ht * j + ht / 2.0;
  }
  return g;
}

GridSteps steps_from_radii(const StaggeredGrid& grid, const LayeredConductivity& sigma) {
  GridSteps s;
  s.hbar = grid.hbar;
  for (size_t j = 0; j + 1 < grid.primary_radii.size(); ++j)
    s.alpha.push_back(coordinate_z(grid.primary_radii[j + 1], sigma) -
                      coordinate_z(grid.primary_radii[j], sigma));
  s.alpha_hat.assign(grid.ell, 0.0);
  for (size_t j = 0; j + 1 < grid.dual_radii.size(); ++j) {
    double step = coordinate_zhat(grid.dual_radii[j + 1], sigma) -
                  coordinate_zhat(grid.dual_radii[j], sigma);
    s.alpha_hat[j + 1 - grid.hbar] = step;
  }
  return s;
}

GridSteps optimal_grid_interpolation(int n, int hbar) {
  const int ell = layer_count(n, hbar);
  const double ht = 2.0 * kPi / n;
  if (hbar == 1) {
    GridSteps s;
    s.hbar = 1;
    for (int j = 1; j <= ell; ++j) {
      s.alpha.push_back(ht / std::tan(ht * (2 * ell - 2 * j + 1) / 2.0));
      s.alpha_hat.push_back(ht / std::tan(ht * (2 * ell - 2 * j + 2) / 2.0));
    }
    return s;
  }
  // No closed form is stated for hbar = 0; use the rational interpolation
  // pipeline on the reference samples F(omega_k^2) = omega_k.
  const int m = (n - 1) / 2;
  std::vector<double> x(m), f(m);
  for (int k = 1; k <= m; ++k) {
    x[k - 1] = k * sinc(k * ht / 2.0);
    f[k - 1] = x[k - 1];
  }
  return steps_from_samples(x, f, 0);
}

GridSteps truncated_measure_grid(int ell) {
  if (ell < 1) throw std::invalid_argument("ell must be >= 1");
  return lanczos_from_spectral(reference_spectral_data(ell));
}

}  // namespace eit
