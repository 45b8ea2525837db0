// Acceptance harness: one criterion per invocation (argument 1..11), one
// pass/fail line each.  Tolerances and runtime budgets are pinned here.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <set>

#include "invert.hpp"
#include "maps.hpp"
#include "spectral.hpp"

using namespace eit;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome fail(std::string detail) { return {false, std::move(detail)}; }
Outcome pass(std::string detail) { return {true, std::move(detail)}; }

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// 1. Reference eigenvalues of the fine forward solver.
Outcome reference_eigenvalues() {
  auto one = ConductivityField::from_layered(LayeredConductivity::constant(1.0));
  double err[2] = {0.0, 0.0};
  for (int half = 0; half < 2; ++half) {
    FineSolver solver(one, 256 << half, 512 << half, 1e-4);
    for (int k = 1; k <= 6; ++k)
      err[half] = std::max(err[half], std::abs(solver.eigenvalue_sample(k) - k));
  }
  if (err[0] >= 1e-3) return fail(fmt("max |f(k^2) - k| = %.3e at 256x512", err[0]));
  if (3.0 * err[1] > err[0])
    return fail(fmt("halving h reduced the error only %.2fx", err[0] / err[1]));
  if (now_seconds() > 30.0) return fail(fmt("runtime %.1f s exceeds 30 s", now_seconds()));
  return pass(fmt("max error %.2e, refinement gain %.1fx, %.1f s", err[0], err[0] / err[1],
                  now_seconds()));
}

// 2. Rational-interpolation pipeline against the closed-form cotangent grid.
Outcome closed_form_grid() {
  double worst = 0.0;
  for (int n : {13, 25}) {
    const double ht = 2.0 * kPi / n;
    const int m = (n - 1) / 2, ell = m / 2;
    std::vector<double> x(m);
    for (int k = 1; k <= m; ++k) x[k - 1] = k * sinc(k * ht / 2.0);
    GridSteps steps = steps_from_samples(x, x, 1);  // F(omega_k^2) = omega_k
    for (int j = 1; j <= ell; ++j) {
      const double a = ht / std::tan(ht / 2.0 * (2 * ell - 2 * j + 1));
      const double ah = ht / std::tan(ht / 2.0 * (2 * ell - 2 * j + 2));
      worst = std::max(worst, std::abs(steps.alpha[j - 1] / a - 1.0));
      worst = std::max(worst, std::abs(steps.alpha_hat[j - 1] / ah - 1.0));
    }
    StaggeredGrid grid = radii_from_steps(steps, n);
    if (grid.primary_radii[0] != 1.0 || grid.dual_radii[0] != 1.0)
      return fail("outermost radii are not exactly 1");
    for (int j = 1; j <= ell; ++j) {
      if (!(grid.dual_radii[j] > grid.primary_radii[j]))
        return fail(fmt("interlacing rhat > r violated at layer %.0f", j));
      const bool inner_ok = j < ell ? grid.primary_radii[j] > grid.dual_radii[j + 1]
                                    : grid.primary_radii[j] >= 0.0;
      if (!inner_ok) return fail(fmt("interlacing r > rhat violated at layer %.0f", j));
    }
  }
  if (worst > 1e-8) return fail(fmt("cotangent mismatch %.3e", worst));
  if (now_seconds() > 1.0) return fail(fmt("runtime %.2f s exceeds 1 s", now_seconds()));
  return pass(fmt("cotangent mismatch %.2e, interlacing strict, %.2f s", worst, now_seconds()));
}

// 3. Truncated-measure grid: monotone steps and the large-ell asymptote.
Outcome truncated_measure() {
  for (int ell = 1; ell <= 64; ++ell) {
    GridSteps g = truncated_measure_grid(ell);
    double prev = 0.0;
    for (int j = 0; j < ell; ++j) {  // ahat_1 < a_1 < ahat_2 < a_2 < ...
      if (!(g.alpha_hat[j] > prev)) return fail(fmt("monotonicity broke at ell = %.0f", ell));
      if (!(g.alpha[j] > g.alpha_hat[j])) return fail(fmt("monotonicity broke at ell = %.0f", ell));
      prev = g.alpha[j];
    }
  }
  GridSteps g = truncated_measure_grid(32);
  double worst = 0.0;
  for (int j = 2; j <= 30; ++j)
    worst = std::max(worst,
                     std::abs(g.alpha[j - 1] * kPi * std::sqrt(32.0 * 32.0 - j * j) / 2.0 - 1.0));
  if (worst > 0.25) return fail(fmt("asymptote deviation %.3f at ell = 32", worst));
  if (now_seconds() > 5.0) return fail(fmt("runtime %.1f s exceeds 5 s", now_seconds()));
  return pass(fmt("monotone to ell = 64, asymptote deviation %.3f, %.1f s", worst, now_seconds()));
}

// Partial-fraction oracle: eigendecomposition of the operator built from steps.
SpectralData spectral_of_steps(const GridSteps& s) {
  const int ell = s.ell();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(ell, ell);
  for (int i = 0; i < ell; ++i) {
    a(i, i) = (1.0 / s.alpha[i] + (i ? 1.0 / s.alpha[i - 1] : 0.0)) / s.alpha_hat[i];
    if (i + 1 < ell)
      a(i, i + 1) = a(i + 1, i) = -1.0 / (s.alpha[i] * std::sqrt(s.alpha_hat[i] * s.alpha_hat[i + 1]));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  SpectralData d;
  for (int j = 0; j < ell; ++j) {
    d.delta.push_back(std::sqrt(es.eigenvalues()[j]));
    d.xi.push_back(es.eigenvectors()(0, j) * es.eigenvectors()(0, j) / s.alpha_hat[0]);
  }
  return d;
}

// 4. Continued fraction vs partial fractions on random step sets.
Outcome continued_fraction_identity() {
  std::mt19937 rng(404);
  std::uniform_real_distribution<double> ug(0.1, 2.0), ul(0.05, 30.0);
  std::uniform_int_distribution<int> ue(1, 8);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    GridSteps s;
    s.hbar = 1;
    const int ell = ue(rng);
    for (int j = 0; j < ell; ++j) {
      s.alpha.push_back(ug(rng));
      s.alpha_hat.push_back(ug(rng));
    }
    SpectralData d = spectral_of_steps(s);
    for (int q = 0; q < 20; ++q) {
      const std::complex<double> lam(ul(rng), q % 2 ? ul(rng) : 0.0);
      std::complex<double> pf = 0.0;
      for (int j = 0; j < ell; ++j) pf += d.xi[j] / (lam + d.delta[j] * d.delta[j]);
      const std::complex<double> cf = continued_fraction_eval(s, lam);
      worst = std::max(worst, std::abs(cf - pf) / std::abs(pf));
    }
  }
  if (worst > 1e-10) return fail(fmt("relative mismatch %.3e", worst));
  return pass(fmt("100 step sets x 20 points, worst relative mismatch %.2e", worst));
}

// 5. Peeling exactness on random networks (50 pyramidal + 50 two-sided).
Outcome peeling_exactness() {
  std::mt19937 rng(505);
  std::uniform_real_distribution<double> ug(0.1, 10.0);
  double worst_gamma = 0.0, worst_refit = 0.0;
  auto batch = [&](Topology topo, std::vector<int> sizes) -> bool {
    for (int t = 0; t < 50; ++t) {
      const int n = sizes[t % sizes.size()];
      ResistorNetwork net;
      net.graph = topo == Topology::Pyramidal ? build_pyramidal(n) : build_two_sided(n);
      for (size_t e = 0; e < net.graph.edges.size(); ++e) net.gamma.push_back(ug(rng));
      PeelRoundTrip rt = peel_round_trip(net);
      worst_gamma = std::max(worst_gamma, rt.gamma_error);
      worst_refit = std::max(worst_refit, rt.refit_residual);
      if (rt.gamma_error > 1e-8 || rt.refit_residual > 1e-9) return false;
    }
    return true;
  };
  if (!batch(Topology::Pyramidal, {6, 8, 10}) || !batch(Topology::TwoSided, {8, 10, 12}))
    return fail(fmt("max gamma error %.3e, refit %.3e", worst_gamma, worst_refit));
  if (now_seconds() > 60.0) return fail(fmt("runtime %.1f s exceeds 60 s", now_seconds()));
  return pass(fmt("100 networks, gamma error %.2e, refit %.2e, %.1f s", worst_gamma, worst_refit,
                  now_seconds()));
}

// 6. Y-Delta invariance and total non-positivity of measured circular minors.
Outcome consistency_properties() {
  std::mt19937 rng(606);
  std::uniform_real_distribution<double> ug(0.5, 2.0);
  ResistorNetwork net{build_pyramidal(6), {}};
  for (size_t e = 0; e < net.graph.edges.size(); ++e) net.gamma.push_back(ug(rng));
  int node = -1;
  for (int i = 0; i < net.graph.num_interior && node < 0; ++i) {
    std::set<int> nb;
    for (const Edge& e : net.graph.edges) {
      if (e.i == i) nb.insert(e.j);
      if (e.j == i) nb.insert(e.i);
    }
    if (nb.size() == 3) node = i;
  }
  if (node < 0) return fail("no degree-3 interior node found");
  const Eigen::MatrixXd before = dtn_map(net);
  const Eigen::MatrixXd after = dtn_map(y_delta(net, node));
  const double drift = (after - before).cwiseAbs().maxCoeff() / before.cwiseAbs().maxCoeff();
  if (drift > 1e-12) return fail(fmt("Y-Delta moved the DtN by %.3e", drift));

  const Eigen::MatrixXd m = measure_dtn(phantom("smooth"), 9, make_electrodes(9), 256, 512).m;
  ConsistencyReport rep = check_dtn_consistency(m, 9, 1e-10);
  if (!rep.pass()) return fail("n = 9 smooth phantom: " + rep.first_violation);
  return pass(fmt("Y-Delta drift %.2e, exhaustive circular minors non-positive", drift));
}

// 7. Lemma-3 verification on the shifted reference profiles.
Outcome lemma3_identities() {
  double worst_fd = 0.0, worst_gm = 0.0;
  for (int ell : {6, 12}) {
    const GridSteps g = truncated_measure_grid(ell);
    for (double qbar : {0.5, 1.0, 2.0}) {
      LayeredReconstruction rec =
          reconstruct_layered(shifted_reference_spectral_data(ell, qbar), ReconstructOptions{false});
      if (std::abs(rec.sigma[0] - 1.0) > 1e-9) return fail("sigma_1 is not 1");
      std::vector<double> rt(ell);
      for (int j = 0; j < ell; ++j) rt[j] = std::sqrt(rec.sigma[j]);
      for (int j = 1; j < ell; ++j) {  // scheme rows 1 .. ell-1 (row j needs sigma_{j+1})
        const double up = (rt[j] - rt[j - 1]) / g.alpha[j - 1];
        const double down = j >= 2 ? (rt[j - 1] - rt[j - 2]) / g.alpha[j - 2] : 0.0;
        worst_fd = std::max(worst_fd,
                            std::abs((up - down) / g.alpha_hat[j - 1] - qbar * rt[j - 1]));
      }
      for (int j = 0; j + 1 < ell; ++j)
        worst_gm = std::max(worst_gm,
                            std::abs(rec.sigma_hat[j] - std::sqrt(rec.sigma[j] * rec.sigma[j + 1])));
    }
  }
  if (worst_fd > 1e-9) return fail(fmt("FD scheme residual %.3e", worst_fd));
  if (worst_gm > 1e-9) return fail(fmt("geometric mean identity off by %.3e", worst_gm));
  return pass(fmt("FD residual %.2e, geometric-mean identity %.2e", worst_fd, worst_gm));
}

// 8. Layered inverse-spectral convergence at desk scale.
Outcome layered_convergence() {
  LayeredConductivity prof{[](double z) { return 1.0 + 0.3 * std::sin(kPi * z); }, {}, {}};
  double prev = std::numeric_limits<double>::infinity(), last = 0.0;
  for (int ell : {4, 6, 8, 12, 16}) {
    LayeredReconstruction rec = reconstruct_layered(spectral_data_of(prof, ell));
    double l1 = 0.0;
    const int q = 20000;
    for (int i = 0; i < q; ++i) {
      const double z = (i + 0.5) / q;
      l1 += std::abs(rec.field(z) - prof(z)) / q;
    }
    if (l1 > prev) return fail(fmt("L1 error grew to %.4f at ell = %.0f", l1, ell));
    prev = l1;
    last = l1;
  }
  if (last > 0.05) return fail(fmt("L1 error %.4f at ell = 16", last));
  if (now_seconds() > 120.0) return fail(fmt("runtime %.1f s exceeds 120 s", now_seconds()));
  return pass(fmt("L1 error non-increasing, %.4f at ell = 16, %.1f s", last, now_seconds()));
}

// 9. Reconstruction identity and the Gauss-Newton fixed point at sigma = 1.
Outcome reconstruction_identity() {
  const int n = 9, nr = 24, ntheta = 36;
  auto one = ConductivityField::from_layered(LayeredConductivity::constant(1.0));
  const Eigen::MatrixXd m = measure_dtn(one, n, make_electrodes(n), nr, ntheta).m;
  ReconstructionResult rec = reconstruction_mapping(m, m, Topology::Circular);
  for (const ReconstructionPoint& p : rec.points)
    if (p.value != 1.0) return fail("Q_n on reference data deviates from 1");

  GaussNewtonContext ctx = make_gn_context(m, n, make_electrodes(n), nr, ntheta);
  const Eigen::VectorXd kappa0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nr) * ctx.ntheta);
  GaussNewtonStep step = gauss_newton_step(ctx, kappa0);
  if (step.objective_before != 0.0) return fail("objective at the fixed point is not 0");
  if (step.kappa != kappa0) return fail("Gauss-Newton took a nonzero step at sigma* = 1");
  return pass("Q_n(reference) = 1 exactly; zero Gauss-Newton step at sigma* = 1");
}

// 10. One-step improvement for the smooth phantom at n = 13.
Outcome one_step_improvement() {
  const int n = 13, nr = 64, ntheta = 128;
  const Eigen::MatrixXd m = measure_dtn(phantom("smooth"), n, make_electrodes(n), nr, ntheta).m;
  GaussNewtonContext ctx = make_gn_context(m, n, make_electrodes(n), nr, ntheta);
  const Eigen::VectorXd kappa0 = gn_initial_guess(ctx);
  std::vector<GaussNewtonStep> steps = gauss_newton(ctx, kappa0, 2);
  if (steps.empty() || !steps[0].accepted) return fail("first step rejected");
  const double drop = 1.0 - steps[0].objective_after / steps[0].objective_before;
  if (drop < 0.5) return fail(fmt("first step reduced the residual by only %.0f%%", 100.0 * drop));
  double ratio = 0.0;
  if (steps.size() > 1 && steps[1].accepted) {
    const Eigen::VectorXd f0 = kappa0.array().exp();
    const Eigen::VectorXd f1 = steps[0].kappa.array().exp();
    const Eigen::VectorXd f2 = steps[1].kappa.array().exp();
    ratio = (f2 - f1).norm() / (f1 - f0).norm();
    if (ratio >= 0.1) return fail(fmt("second step changed the field by %.1f%%", 100.0 * ratio));
  }
  if (now_seconds() > 300.0) return fail(fmt("runtime %.1f s exceeds 300 s", now_seconds()));
  return pass(fmt("first step -%.1f%% residual, second step %.2f%% of first, %.1f s",
                  100.0 * drop, 100.0 * ratio, now_seconds()));
}

// 11. Conformal setup: endpoint residual and discrete DtN invariance.
Outcome conformal_setup() {
  const int n = 9;
  double worst = 0.0;
  for (double beta : {kPi / 4.0, kPi / 2.0, 3.0 * kPi / 4.0}) {
    MobiusMap map = fit_mobius_one_sided(beta, n);
    const double ts = kPi - kPi / n;
    worst = std::max(worst, std::abs(map.boundary_forward(ts) - beta));
    worst = std::max(worst, std::abs(map.boundary_forward(-ts) + beta));
  }
  if (worst > 1e-12) return fail(fmt("endpoint residual %.3e", worst));

  MobiusMap map = fit_mobius_one_sided(kPi / 2.0, n);
  ElectrodeSet el = make_electrodes(n, ElectrodeShape::Bandlimited);
  ConductivityField f;
  f.eval = [](double r, double th) { return 1.0 + 0.3 * r * std::cos(th); };
  const Eigen::MatrixXd direct =
      measure_dtn(push_forward_conductivity(f, map), n, el, 256, 512).m;
  const Eigen::MatrixXd pulled = measure_dtn_pulled(f, n, el, map, 256, 512);
  const double rel = (direct - pulled).cwiseAbs().maxCoeff() / direct.cwiseAbs().maxCoeff();
  if (rel > 1e-3) return fail(fmt("DtN invariance violated, relative %.3e", rel));
  return pass(fmt("endpoint residual %.2e, DtN invariance %.2e", worst, rel));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <criterion 1..11>\n", argv[0]);
    return 2;
  }
  const int k = std::atoi(argv[1]);
  now_seconds();  // pin the clock before any work
  static Outcome (*const criteria[])() = {
      reference_eigenvalues, closed_form_grid,   truncated_measure, continued_fraction_identity,
      peeling_exactness,     consistency_properties, lemma3_identities, layered_convergence,
      reconstruction_identity, one_step_improvement, conformal_setup};
  if (k < 1 || k > 11) {
    std::fprintf(stderr, "criterion index out of range\n");
    return 2;
  }
  Outcome out;
  try {
    out = criteria[k - 1]();
  } catch (const std::exception& e) {
    out = fail(std::string("exception: ") + e.what());
  }
  std::printf("criterion %2d %s  %s\n", k, out.pass ? "PASS" : "FAIL", out.detail.c_str());
  return out.pass ? 0 : 1;
}
