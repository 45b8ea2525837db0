#pragma once

#include <complex>

#include "forward.hpp"

namespace eit {

// Conformal automorphism of the unit disk, F(z) = e^{i omega} (z - a) / (1 - conj(a) z).
struct MobiusMap {
  std::complex<double> a;  // |a| < 1
  double omega = 0.0;

  std::complex<double> forward(std::complex<double> z) const;  // F
  std::complex<double> inverse(std::complex<double> w) const;  // G = F^-1

  // boundary restrictions, angles reduced to (-pi, pi]
  double boundary_forward(double theta) const;       // tau = f(theta)
  double boundary_inverse(double tau) const;         // theta = g(tau)
  double boundary_inverse_derivative(double tau) const;  // |g'(e^{i tau})|
};

struct BoundaryCorrespondence {
  double beta = 0.0;
  std::vector<double> theta;  // equidistant angles 2 pi (k-1) / n
  std::vector<double> tau;    // mapped measurement angles on the arc
};

// Fits the map whose inverse takes the accessible arc {e^{i tau}: |tau| <= beta}
// onto the boundary minus the gap between the equidistant angles at
// k = (n+1)/2 and (n+3)/2 (the gap antipodal to the arc center).  By symmetry
// a is real and omega = 0; the endpoint condition is solved to 1e-12 by
// bisection with a Newton polish.
MobiusMap fit_mobius_one_sided(double beta, int n);

BoundaryCorrespondence boundary_correspondence(const MobiusMap& map, double beta, int n);

// G_* sigma = sigma o F for conformal maps (isotropy is preserved)
ConductivityField push_forward_conductivity(const ConductivityField& sigma, const MobiusMap& map);

// composition with G; inverse of the push forward
ConductivityField pull_back_conductivity(const ConductivityField& field, const MobiusMap& map);

// Discrete push forward of the measured DtN map: electrode q is transported
// to chi_q o g (Dirichlet side) and chi_p(g) |g'| (measure side), so the
// result equals measuring the pushed-forward conductivity at the equidistant
// electrodes.  Box electrodes only (the transported supports stay arcs).
Eigen::MatrixXd measure_dtn_pulled(const ConductivityField& sigma, int n,
                                   const ElectrodeSet& electrodes, const MobiusMap& map,
                                   int nr = 256, int ntheta = 512);

}  // namespace eit
