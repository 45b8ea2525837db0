#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>

#include "network.hpp"

namespace eit {

struct ConductivityField {
  std::function<double(double, double)> eval;  // sigma(r, theta)
  bool layered = false;
  double sigma_min = 0.0;
  double sigma_max = 0.0;

  double operator()(double r, double theta) const { return eval(r, theta); }

  static ConductivityField from_layered(const LayeredConductivity& sigma_r, double lo = 0.0,
                                        double hi = 0.0);
};

enum class ElectrodeShape { Box, Bandlimited };

// n electrodes with unit integral each.  Full-boundary sets have centers
// 2 pi q / n and width 2 pi / n; arc sets cover (-beta, beta) uniformly.
struct ElectrodeSet {
  int n = 0;
  ElectrodeShape shape = ElectrodeShape::Box;
  std::vector<double> centers;
  double width = 0.0;

  double chi(int q, double theta) const;
};

ElectrodeSet make_electrodes(int n, ElectrodeShape shape = ElectrodeShape::Box);
ElectrodeSet make_arc_electrodes(int n, double beta, ElectrodeShape shape = ElectrodeShape::Box);

// Finite-volume solver on a fine staggered polar grid; nodes uniform in r
// from 1 down to rmin, so the z = log(1/r) steps grade geometrically toward
// the center.  Conductivity is sampled per cell at the cell midpoint.
class FineSolver {
 public:
  FineSolver(const ConductivityField& sigma, int nr = 256, int ntheta = 512, double rmin = 1e-4);

  int nr() const { return nr_; }
  int ntheta() const { return nt_; }
  double angle(int j) const { return j * ht_; }
  double radius(int i) const { return radii_[i]; }
  double z_step(int i) const { return alpha_[i]; }
  double sigma_cell(int i, int j) const { return sig_[static_cast<size_t>(i) * nt_ + j]; }

  // full nodal potential, boundary ring first ((nr+1) * ntheta entries,
  // index i * ntheta + j)
  Eigen::VectorXd solve_dirichlet(const Eigen::VectorXd& u_b) const;
  // zero-mean current density; potential grounded at the theta = 0 boundary node
  Eigen::VectorXd solve_neumann(const Eigen::VectorXd& current_density) const;
  // boundary current density at the fine nodes from a full potential vector
  Eigen::VectorXd boundary_flux(const Eigen::VectorXd& u) const;

  // DtN eigenvalue sample f(k^2) = (1/pi) int cos(k theta) J(theta) dtheta
  // for boundary data cos(k theta)
  double eigenvalue_sample(int k) const;

 private:
  int nr_, nt_;
  double ht_;
  std::vector<double> radii_, alpha_, sig_;
  std::vector<double> g_rad_, g_ang_;  // conductances, edge layout in .cpp
  Eigen::SparseMatrix<double> a_dir_;
  std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> dir_;
  mutable std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> neu_;
  void build_neumann() const;
};

struct MeasuredDtn {
  Eigen::MatrixXd m;
  int n = 0;
  int nr = 0, ntheta = 0;
  ElectrodeShape shape = ElectrodeShape::Box;
  double asymmetry = 0.0;  // relative max asymmetry before symmetrization
};

// The angular node count actually used by measure_dtn (box electrode snap).
int measurement_ntheta(int n, const ElectrodeSet& electrodes, int ntheta);

// M_pq = int chi_p (DtN chi_q); diagonal forced by zero row sums, output
// symmetrized.  For box electrodes ntheta is snapped to n times an odd
// integer so electrode boundaries fall between grid nodes.
MeasuredDtn measure_dtn(const ConductivityField& sigma, int n, const ElectrodeSet& electrodes,
                        int nr = 256, int ntheta = 512);

// generic bilinear measurement M_pq = sum_j weights[p](j) J_q(j) h_theta with
// Dirichlet data columns u_q
Eigen::MatrixXd measure_bilinear(const FineSolver& solver,
                                 const std::vector<Eigen::VectorXd>& dirichlet_data,
                                 const std::vector<Eigen::VectorXd>& weights);

// Band-limited circulant synthesis from the layered eigenvalues:
// eigenvectors e^{ik theta_q}, eigenvalues f(k^2) sinc^2(k h/2) / h.
MeasuredDtn fourier_dtn_layered(const LayeredConductivity& sigma_r, int n);

// Lumped-current variant: eigenvalues f(k^2) omega_k / |k|.
Eigen::MatrixXd lumped_dtn_layered(const LayeredConductivity& sigma_r, int n);

ConductivityField phantom(const std::string& name);
std::string phantom_registry_json();

}  // namespace eit
