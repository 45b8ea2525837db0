#pragma once

#include "forward.hpp"

namespace eit {

struct RecoveredNetwork {
  ResistorNetwork network;
  double refit_residual = 0.0;  // max-norm DtN mismatch relative to the input
  int iterations = 0;           // Newton iterations (circular route only)
  // boundary_permutation[p] = boundary node of the network matching input row
  // p; empty means identity (used by the upside-down two-sided fit)
  std::vector<int> boundary_permutation;
};

struct RecoverOptions {
  int max_iterations = 600;
  double tolerance = 1e-12;  // relative residual target
  // Measured data is only approximately consistent (discretization error), so
  // the target residual can be unattainable; when every attempt stalls, the
  // best fit is still returned as long as its residual stays below this.
  double stall_tolerance = 1e-4;
  std::vector<double> initial_gamma;  // empty: constant scale-matched start
  bool check_consistency = true;
};

// hbar that makes the circular graph critical for n boundary nodes
int circular_hbar(int n);

// Conductance recovery on the circular graph by damped Newton iteration in
// log-conductances.  Inconsistent input (failed total-positivity screen) and
// iteration-cap overruns are reported as exceptions.
RecoveredNetwork recover_circular(const Eigen::MatrixXd& m, const RecoverOptions& opts = {});

// Layer-peeling recovery on the pyramidal graph, even n.
RecoveredNetwork peel_pyramidal(const Eigen::MatrixXd& m);

// Layer-peeling recovery on the two-sided graph, even n.  flipped = true fits
// the network turned upside-down (boundary rotated by n/2), yielding a second
// network with the same DtN map up to the recorded boundary permutation.
RecoveredNetwork peel_two_sided(const Eigen::MatrixXd& m, bool flipped = false);

struct PeelRoundTrip {
  double gamma_error = 0.0;     // max relative conductance error
  double refit_residual = 0.0;  // relative max-norm DtN mismatch of the refit
};

// DtN synthesis and layer peeling of a pyramidal or two-sided network carried
// out in 50-digit arithmetic end to end.  Separates the algorithmic error of
// the peel (which this measures) from the amplified quantization noise a
// double-rounded input map carries into peel_pyramidal / peel_two_sided.
PeelRoundTrip peel_round_trip(const ResistorNetwork& net);

// Dispatch by topology.
RecoveredNetwork recover_network(const Eigen::MatrixXd& m, Topology topology,
                                 const RecoverOptions& opts = {});

// max |dtn(rec) - m| / max |m|, honoring the boundary permutation
double refit_residual(const RecoveredNetwork& rec, const Eigen::MatrixXd& m);

struct ReconstructionPoint {
  double r = 0.0;
  double theta = 0.0;
  double value = 0.0;
};

struct ReconstructionResult {
  std::vector<ReconstructionPoint> points;  // one per edge, edge order
  RecoveredNetwork recovered;               // network fitted to the data
  Eigen::VectorXd gamma_ref;                // reference conductances
};

// Pointwise conductivity output: per-edge ratios gamma / gamma_ref attached
// to grid points.  Circular networks default to the optimal-grid radii and
// electrode angles; other topologies require explicit points (one per edge,
// from sensitivity_grid).
ReconstructionResult reconstruction_mapping(
    const Eigen::MatrixXd& m_data, const Eigen::MatrixXd& m_ref, Topology topology,
    const std::vector<std::pair<double, double>>* points = nullptr);

// Piecewise-bilinear interpolation of a circular reconstruction on the
// interleaved rings of the optimal grid; constant continuation inside the
// innermost ring and outside the outermost one.
ConductivityField interpolate_circular(const ReconstructionResult& rec, int n);

struct SensitivityMatrix {
  Eigen::MatrixXd d;  // edges x cells; d(e, i * ntheta + j) = dgamma_e / dsigma_ij
  int nr = 0, ntheta = 0;
  std::vector<double> cell_r;      // nr cell-midpoint radii
  std::vector<double> cell_theta;  // ntheta cell-midpoint angles
  NetworkGraph graph;
  Eigen::VectorXd gamma_ref;
};

// Jacobian of the recovered conductances with respect to cell conductivities
// at sigma_ref, through the measurement operator: the per-edge DtN
// differentials are exact (energy identity), and the e x e map
// dgamma -> dLambda is inverted on them.
SensitivityMatrix sensitivity_matrix(const ConductivityField& sigma_ref, int n, Topology topology,
                                     const ElectrodeSet& electrodes, int nr, int ntheta);

struct SensitivityGrid {
  std::vector<std::pair<double, double>> points;  // (r, theta) per edge
  bool flat_warning = false;
  std::string warning;
};

// Per-edge argmax of |sensitivity|; ties resolve to the smallest radius, then
// the smallest angle.  A flat row triggers a warning instead of a choice.
SensitivityGrid sensitivity_grid(const SensitivityMatrix& s);

// Preconditioned Gauss-Newton for the conductivity, parameterized by
// log-conductivity kappa on the fine measurement cells.
struct GaussNewtonContext {
  int n = 0;
  ElectrodeSet electrodes;
  int nr = 0, ntheta = 0;  // fine cell grid (ntheta already snapped)
  double rmin = 1e-4;
  NetworkGraph graph;
  Eigen::VectorXd gamma_ref;  // recovery of the sigma = 1 measurement
  Eigen::VectorXd q_data;     // recovered ratios of the measured data
  Eigen::MatrixXd dsg;        // sensitivity dgamma/dsigma at the reference
  RecoverOptions recover_opts;
};

GaussNewtonContext make_gn_context(const Eigen::MatrixXd& m_data, int n,
                                   const ElectrodeSet& electrodes, int nr, int ntheta);

// cell-wise conductivity exp(kappa) as a field (cell lookup, no smoothing)
ConductivityField field_from_kappa(const GaussNewtonContext& ctx, const Eigen::VectorXd& kappa);

// recovered ratio vector Q_n for the iterate kappa
Eigen::VectorXd gn_ratios(const GaussNewtonContext& ctx, const Eigen::VectorXd& kappa);

// initial iterate: log of the interpolated reconstruction of the data
Eigen::VectorXd gn_initial_guess(const GaussNewtonContext& ctx);

struct GaussNewtonStep {
  Eigen::VectorXd kappa;
  double objective_before = 0.0;
  double objective_after = 0.0;
  int halvings = 0;
  bool accepted = false;
};

// One step: kappa' = kappa - J^+ (q(kappa) - q_data) with
// J = diag(1/gamma_ref) dsg diag(exp kappa), pseudo-inverse by SVD truncated
// at 1e-10 of the top singular value; the step is halved (at most 5 times)
// until the objective 0.5 |q - q_data|^2 decreases.
GaussNewtonStep gauss_newton_step(const GaussNewtonContext& ctx, const Eigen::VectorXd& kappa);

// Runs up to max_steps accepted steps; stops early when a step is rejected or
// the relative objective reduction falls below 1e-3.
std::vector<GaussNewtonStep> gauss_newton(const GaussNewtonContext& ctx,
                                          const Eigen::VectorXd& kappa0, int max_steps);

}  // namespace eit
