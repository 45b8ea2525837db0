#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "invert.hpp"
#include "spectral.hpp"

using namespace eit;

namespace {

ResistorNetwork with_random_gamma(NetworkGraph g, std::mt19937& rng, double lo = 0.1,
                                  double hi = 10.0) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  ResistorNetwork net;
  net.gamma.resize(g.edges.size());
  for (double& x : net.gamma) x = std::exp(u(rng));
  net.graph = std::move(g);
  return net;
}

double max_gamma_error(const ResistorNetwork& got, const ResistorNetwork& want) {
  double err = 0.0;
  for (size_t e = 0; e < want.gamma.size(); ++e)
    err = std::max(err, std::abs(got.gamma[e] - want.gamma[e]) / want.gamma[e]);
  return err;
}

}  // namespace

TEST_CASE("pyramidal peeling round trip in extended precision") {
  std::mt19937 rng(7);
  for (int n : {4, 6, 8, 10}) {
    for (int trial = 0; trial < 5; ++trial) {
      ResistorNetwork net = with_random_gamma(build_pyramidal(n), rng);
      PeelRoundTrip rt = peel_round_trip(net);
      CHECK(rt.gamma_error < 1e-9);
      CHECK(rt.refit_residual < 1e-10);
    }
  }
  CHECK_THROWS_AS(peel_pyramidal(Eigen::MatrixXd::Zero(5, 5)), std::invalid_argument);
}

TEST_CASE("two-sided peeling round trip in extended precision") {
  std::mt19937 rng(11);
  for (int n : {4, 6, 8, 10, 12}) {
    for (int trial = 0; trial < 5; ++trial) {
      ResistorNetwork net = with_random_gamma(build_two_sided(n), rng);
      PeelRoundTrip rt = peel_round_trip(net);
      CHECK(rt.gamma_error < 1e-9);
      CHECK(rt.refit_residual < 1e-10);
    }
  }
}

// On a double-rounded input map the recovery error grows with the map's
// conditioning; only mild contrasts and depths keep it meaningful.
TEST_CASE("peeling a double-precision map tolerates mild contrast") {
  std::mt19937 rng(19);
  for (int n : {4, 6, 8}) {
    ResistorNetwork pyr = with_random_gamma(build_pyramidal(n), rng, 0.5, 2.0);
    RecoveredNetwork rp = peel_pyramidal(dtn_map(pyr));
    CHECK(max_gamma_error(rp.network, pyr) < 1e-5);
    CHECK(rp.refit_residual < 1e-8);
    ResistorNetwork ts = with_random_gamma(build_two_sided(n), rng, 0.5, 2.0);
    RecoveredNetwork rt = peel_two_sided(dtn_map(ts));
    CHECK(max_gamma_error(rt.network, ts) < 1e-5);
    CHECK(rt.refit_residual < 1e-8);
  }
}

TEST_CASE("upside-down two-sided fit matches the data through the permutation") {
  std::mt19937 rng(13);
  for (int n : {6, 8}) {
    ResistorNetwork net = with_random_gamma(build_two_sided(n), rng);
    Eigen::MatrixXd m = dtn_map(net);
    RecoveredNetwork rec = peel_two_sided(m, true);
    CHECK(rec.boundary_permutation.size() == static_cast<size_t>(n));
    CHECK(rec.refit_residual < 1e-10);
    CHECK(refit_residual(rec, m) == rec.refit_residual);
  }
}

TEST_CASE("circular recovery round trip, independent of the starting point") {
  std::mt19937 rng(17);
  for (int n : {5, 7, 9}) {
    ResistorNetwork net = with_random_gamma(build_circular(n, circular_hbar(n)), rng, 0.5, 2.0);
    Eigen::MatrixXd m = dtn_map(net);
    RecoveredNetwork base = recover_circular(m);
    CHECK(max_gamma_error(base.network, net) < 1e-8);
    CHECK(base.refit_residual < 1e-11);
    CHECK(base.iterations <= 600);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int start = 0; start < 3; ++start) {
      RecoverOptions opts;
      for (size_t e = 0; e < net.gamma.size(); ++e)
        opts.initial_gamma.push_back(std::exp(u(rng)));
      RecoveredNetwork rec = recover_circular(m, opts);
      CHECK(max_gamma_error(rec.network, base.network) < 1e-9);
    }
  }
}

TEST_CASE("circular recovery flags inconsistent input first") {
  Eigen::MatrixXd m = lumped_dtn_layered(LayeredConductivity::constant(1.0), 9);
  m(2, 6) = -m(2, 6);  // positive off-diagonal entry
  m(6, 2) = m(2, 6);
  for (int p : {2, 6}) {
    m(p, p) = 0.0;
    m(p, p) = -m.row(p).sum();
  }
  CHECK_THROWS_AS(recover_circular(m), std::invalid_argument);
}

TEST_CASE("reference reconstruction is exactly one") {
  Eigen::MatrixXd m_ref = lumped_dtn_layered(LayeredConductivity::constant(1.0), 9);
  ReconstructionResult rec = reconstruction_mapping(m_ref, m_ref, Topology::Circular);
  for (const ReconstructionPoint& p : rec.points) CHECK(p.value == 1.0);
}

TEST_CASE("layered reconstruction matches the step ratios") {
  const int n = 9;
  const int ell = layer_count(n, 1);
  const double ht = 2.0 * kPi / n;
  LayeredConductivity prof{[](double r) { return 1.0 + 0.5 * r * r; }, {}, {}};
  Eigen::MatrixXd m_data = lumped_dtn_layered(prof, n);
  Eigen::MatrixXd m_ref = lumped_dtn_layered(LayeredConductivity::constant(1.0), n);
  ReconstructionResult rec = reconstruction_mapping(m_data, m_ref, Topology::Circular);

  // oracle: grid steps from the eigenvalue samples of both profiles
  std::vector<double> x, fs, f1;
  for (int k = 1; k <= (n - 1) / 2; ++k) {
    const double w = k * sinc(k * ht / 2.0);
    x.push_back(w);
    fs.push_back(eigenvalue_f(prof, k) * sinc(k * ht / 2.0));
    f1.push_back(static_cast<double>(k) * sinc(k * ht / 2.0));
  }
  GridSteps st_sigma = steps_from_samples(x, fs, 1);
  GridSteps st_one = steps_from_samples(x, f1, 1);

  size_t e = 0;
  for (int j = 1; j <= ell; ++j) {
    const double ang = st_sigma.alpha_hat[j - 1] / st_one.alpha_hat[j - 1];
    for (int q = 0; q < n; ++q, ++e)
      CHECK(rec.points[e].value == doctest::Approx(ang).epsilon(1e-8));
    const double rad = st_one.alpha[j - 1] / st_sigma.alpha[j - 1];
    for (int q = 0; q < n; ++q, ++e)
      CHECK(rec.points[e].value == doctest::Approx(rad).epsilon(1e-8));
  }
}

TEST_CASE("interpolation of a circular reconstruction") {
  Eigen::MatrixXd m_ref = lumped_dtn_layered(LayeredConductivity::constant(1.0), 9);
  ReconstructionResult rec = reconstruction_mapping(m_ref, m_ref, Topology::Circular);
  for (ReconstructionPoint& p : rec.points) p.value *= 2.0;
  ConductivityField f = interpolate_circular(rec, 9);
  for (double r : {0.05, 0.3, 0.8, 1.0})
    for (double th : {0.0, 1.0, 4.0}) CHECK(f(r, th) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("sensitivity is Euler-homogeneous and matches finite differences") {
  const int n = 9, nr = 24, ntheta = 36;
  ConductivityField one;
  one.eval = [](double, double) { return 1.0; };
  ElectrodeSet el = make_electrodes(n);
  SensitivityMatrix s = sensitivity_matrix(one, n, Topology::Circular, el, nr, ntheta);
  const int nt = s.ntheta;
  CHECK(nt == measurement_ntheta(n, el, ntheta));

  // joint scaling: sum_c dgamma_e/dsigma_c * sigma_c = gamma_e
  Eigen::VectorXd row_sums = s.d.rowwise().sum();
  for (Eigen::Index e = 0; e < row_sums.size(); ++e)
    CHECK(row_sums[e] == doctest::Approx(s.gamma_ref[e]).epsilon(0.05));

  // centered finite differences through the full measurement for a few cells
  RecoverOptions opts;
  opts.check_consistency = false;
  opts.initial_gamma.assign(s.gamma_ref.data(), s.gamma_ref.data() + s.gamma_ref.size());
  const double delta = 1e-5;
  std::mt19937 rng(23);
  std::uniform_int_distribution<int> ui(0, nr - 1), uj(0, nt - 1);
  for (int trial = 0; trial < 3; ++trial) {
    const int ci = ui(rng), cj = uj(rng);
    const double r_hi = 1.0 + (1e-4 - 1.0) * ci / nr, r_lo = 1.0 + (1e-4 - 1.0) * (ci + 1) / nr;
    const double ht = 2.0 * kPi / nt;
    auto bumped = [&](double eps) {
      ConductivityField f;
      f.eval = [=](double r, double th) {
        th = std::fmod(th, 2.0 * kPi);
        if (th < 0.0) th += 2.0 * kPi;
        const bool in = r > r_lo && r <= r_hi && th >= cj * ht && th < (cj + 1) * ht;
        return in ? 1.0 + eps : 1.0;
      };
      return f;
    };
    auto gamma_of = [&](double eps) {
      Eigen::MatrixXd m = measure_dtn(bumped(eps), n, el, nr, ntheta).m;
      RecoveredNetwork rec = recover_circular(m, opts);
      Eigen::VectorXd g(rec.network.gamma.size());
      for (size_t e = 0; e < rec.network.gamma.size(); ++e) g[e] = rec.network.gamma[e];
      return g;
    };
    Eigen::VectorXd fd = (gamma_of(delta) - gamma_of(-delta)) / (2.0 * delta);
    const Eigen::VectorXd& ad = s.d.col(ci * nt + cj);
    CHECK((fd - ad).cwiseAbs().maxCoeff() < 1e-5 * std::max(ad.cwiseAbs().maxCoeff(), 1e-12));
  }

  SensitivityGrid grid = sensitivity_grid(s);
  CHECK(grid.points.size() == static_cast<size_t>(s.d.rows()));
  CHECK_FALSE(grid.flat_warning);
  for (const auto& [r, th] : grid.points) {
    CHECK(r > 0.0);
    CHECK(r < 1.0);
    CHECK(th >= 0.0);
    CHECK(th < 2.0 * kPi);
  }
}

TEST_CASE("gauss-newton is an exact fixed point at the reference") {
  const int n = 9, nr = 24, ntheta = 36;
  ConductivityField one;
  one.eval = [](double, double) { return 1.0; };
  ElectrodeSet el = make_electrodes(n);
  Eigen::MatrixXd m_data = measure_dtn(one, n, el, nr, ntheta).m;
  GaussNewtonContext ctx = make_gn_context(m_data, n, el, nr, ntheta);
  CHECK((ctx.q_data.array() - 1.0).abs().maxCoeff() < 1e-10);

  Eigen::VectorXd kappa0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nr) * ctx.ntheta);
  GaussNewtonStep step = gauss_newton_step(ctx, kappa0);
  CHECK(step.accepted);
  CHECK(step.objective_before == 0.0);
  CHECK(step.kappa == kappa0);

  Eigen::VectorXd guess = gn_initial_guess(ctx);
  CHECK(guess.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("gauss-newton reduces the network residual on a smooth phantom") {
  const int n = 9, nr = 24, ntheta = 36;
  ElectrodeSet el = make_electrodes(n);
  Eigen::MatrixXd m_data = measure_dtn(phantom("smooth"), n, el, nr, ntheta).m;
  GaussNewtonContext ctx = make_gn_context(m_data, n, el, nr, ntheta);
  Eigen::VectorXd kappa = gn_initial_guess(ctx);
  std::vector<GaussNewtonStep> steps = gauss_newton(ctx, kappa, 2);
  REQUIRE(!steps.empty());
  CHECK(steps[0].accepted);
  CHECK(steps[0].objective_after < 0.5 * steps[0].objective_before);
  for (size_t i = 1; i < steps.size(); ++i)
    CHECK(steps[i].objective_after <= steps[i].objective_before);
}
