#pragma once

#include "common.hpp"

namespace eit {

// Steps of a staggered radial grid in the (z, zhat) travel-time coordinates.
// alpha[j-1] holds the primary step alpha_j, alpha_hat[j-1] the dual step
// alphahat_j.  For hbar = 0 the first dual step does not exist and
// alpha_hat[0] is stored as 0.
struct GridSteps {
  std::vector<double> alpha;
  std::vector<double> alpha_hat;
  int hbar = 1;

  int ell() const { return static_cast<int>(alpha.size()); }
};

struct StaggeredGrid {
  int n = 0;
  int ell = 0;
  int hbar = 1;
  std::vector<double> primary_radii;  // ell+1 entries, decreasing, first 1
  std::vector<double> dual_radii;     // ell+hbar entries, decreasing, first 1
  std::vector<double> primary_angles;
  std::vector<double> dual_angles;
};

// z(r) = int_r^1 dt/(t sigma(t)); companion zhat(r) = int_r^1 sigma(t)/t dt.
double coordinate_z(double r, const LayeredConductivity& sigma);
double coordinate_zhat(double r, const LayeredConductivity& sigma);

// Solves 2*ell + hbar - 1 = (n-1)/2; throws std::invalid_argument when no
// integer ell exists for the pair (n, hbar).
int layer_count(int n, int hbar);

// Angles theta_j = 2 pi (j-1)/n and dual angles shifted by h_theta/2.
StaggeredGrid radii_from_steps(const GridSteps& steps, int n);

// Recovers steps from radii for a layered sigma(r) by quadrature; the inverse
// of radii_from_steps when sigma == 1.
GridSteps steps_from_radii(const StaggeredGrid& grid, const LayeredConductivity& sigma);

// Optimal grid for the rational interpolation measurements.  hbar = 1 uses
// the closed-form cotangent steps; hbar = 0 goes through the rational
// interpolation pipeline on the reference samples.
GridSteps optimal_grid_interpolation(int n, int hbar);

// Optimal grid for the truncated-measure (inverse spectral) measurements,
// produced by the Lanczos solver on the reference spectral data.
GridSteps truncated_measure_grid(int ell);

}  // namespace eit
