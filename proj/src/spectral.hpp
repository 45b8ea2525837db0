#pragma once

#include <complex>

#include "grids.hpp"

namespace eit {

// Eigenvalue roots delta_j (increasing) and weights xi_j of the layered
// operator with Neumann condition at zeta = 0 and Dirichlet at zeta = 1.
struct SpectralData {
  std::vector<double> delta;
  std::vector<double> xi;

  int ell() const { return static_cast<int>(delta.size()); }
};

struct RationalCoeffs {
  // F(x^2)/x = P(x)/Q(x) with P even (coefficients of x^0, x^2, ...,
  // c0 = -1) and Q odd (coefficients of x^1, x^3, ...).
  std::vector<long double> p;
  std::vector<long double> q;
  double condition_estimate = 0.0;
};

// DtN eigenvalue f(k^2) = v'(1;k)/v(1;k) of the layered problem, by fine
// second-order finite differences in z = log(1/r) with Richardson
// extrapolation.  f(0) = 0 by convention.
double eigenvalue_f(const LayeredConductivity& sigma_r, int k);

// Continued fraction for the discrete NtD eigenvalue function F†(lambda);
// for hbar = 0 the leading alphahat_1*lambda term is absent.
std::complex<double> continued_fraction_eval(const GridSteps& steps, std::complex<double> lambda);

// Least-squares fit (square system) of the rational interpolant through the
// samples D_k = F(x_k^2)/x_k.  For hbar = 1 there are 2*ell samples and
// deg P = 2*ell, deg Q = 2*ell-1; for hbar = 0 there are 2*ell-1 samples and
// deg P = 2*ell-2, deg Q = 2*ell-1.  Solved by Householder QR with column
// scaling in extended precision; throws on a numerically singular system,
// carrying the condition estimate in the message.
RationalCoeffs rational_interp_coeffs(const std::vector<double>& x, const std::vector<double>& d,
                                      int ell, int hbar);

// Continued-fraction coefficients by Euclidean polynomial division of r0/r1
// (ascending-power coefficient vectors).  Throws when a non-positive
// coefficient appears (data not a valid Stieltjes sample).
std::vector<long double> euclidean_division(std::vector<long double> r0, std::vector<long double> r1,
                                            int count);

// Full pipeline: samples F(x_k^2) of the eigenvalue function -> grid steps.
GridSteps steps_from_samples(const std::vector<double>& x, const std::vector<double>& f_values,
                             int hbar);

// Jacobi-matrix inverse eigenvalue solve (Lanczos with full
// reorthogonalization); returns hbar = 1 steps.
GridSteps lanczos_from_spectral(const SpectralData& data);

// Reference data xi = 2, delta_j = pi (j - 1/2), and its constant-potential
// shift (delta^2 -> delta^2 + qbar).
SpectralData reference_spectral_data(int ell);
SpectralData shifted_reference_spectral_data(int ell, double qbar);

// sigma^(qbar)(zeta): the layered profile whose spectral data is the shifted
// reference data; requires qbar > -pi^2/4.
double qbar_profile(double qbar, double zeta);

// First ell eigenpairs of the scaled operator d_zhat d_z on [0,1] for
// sigma(zeta), on a fine staggered grid with Richardson extrapolation.
SpectralData spectral_data_of(const LayeredConductivity& sigma_zeta, int ell, int cells = 20000);

struct LayeredReconstruction {
  LayeredConductivity field;        // piecewise constant on [0,1]
  std::vector<double> sigma;        // point values sigma_j, j = 1..ell
  std::vector<double> sigma_hat;    // point values sigmahat_{j+1}, j = 1..ell
  double qbar = 0.0;                // estimated potential shift (0 if disabled)
};

struct ReconstructOptions {
  bool qbar_correction = true;
};

// Inverse-spectral reconstruction: Lanczos steps against the
// truncated-measure reference grid.
LayeredReconstruction reconstruct_layered(const SpectralData& measured,
                                          const ReconstructOptions& opts = {});

// Interpolation-type reconstruction from eigenvalue samples f(k^2),
// k = 1..(n-1)/2, against the optimal interpolation grid.
LayeredReconstruction reconstruct_layered_interp(const std::vector<double>& f_samples, int n,
                                                 int hbar);

}  // namespace eit
