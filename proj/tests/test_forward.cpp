#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "forward.hpp"
#include "spectral.hpp"

using namespace eit;

namespace {

ConductivityField unit_field() {
  return ConductivityField::from_layered(LayeredConductivity::constant(1.0), 1.0, 1.0);
}

}  // namespace

TEST_CASE("harmonic polynomial is reproduced to second order") {
  FineSolver solver(unit_field(), 64, 128);
  Eigen::VectorXd ub(128);
  for (int j = 0; j < 128; ++j) ub[j] = std::cos(solver.angle(j));
  Eigen::VectorXd u = solver.solve_dirichlet(ub);
  double err = 0.0;
  for (int i = 0; i <= 64; i += 8)
    for (int j = 0; j < 128; j += 8)
      err = std::max(err, std::abs(u[i * 128 + j] - solver.radius(i) * std::cos(solver.angle(j))));
  CHECK(err < 2e-3);
}

TEST_CASE("unit-disk eigenvalue samples approximate |k|") {
  FineSolver solver(unit_field(), 128, 256);
  for (int k = 1; k <= 6; ++k)
    CHECK(solver.eigenvalue_sample(k) == doctest::Approx(k).epsilon(4e-3));
}

TEST_CASE("fine solver agrees with the 1-D eigenvalue solver for layered media") {
  LayeredConductivity prof{[](double r) { return 1.0 + r * r; }, {}, {}};
  FineSolver solver(ConductivityField::from_layered(prof), 128, 256);
  for (int k : {1, 2, 3}) {
    const double want = eigenvalue_f(prof, k);
    CHECK(std::abs(solver.eigenvalue_sample(k) - want) < 1.5e-3 * want);
  }
}

TEST_CASE("neumann solve inverts the dirichlet map") {
  FineSolver solver(unit_field(), 64, 128);
  Eigen::VectorXd density(128);
  for (int j = 0; j < 128; ++j) density[j] = std::cos(solver.angle(j));
  Eigen::VectorXd u = solver.solve_neumann(density);
  CHECK(u[0] == 0.0);  // grounded node
  // up to the grounding shift, boundary potential is cos(theta) for sigma = 1
  double err = 0.0;
  for (int j = 0; j < 128; ++j)
    err = std::max(err, std::abs((u[j] - u[0]) - (std::cos(solver.angle(j)) - 1.0)));
  CHECK(err < 5e-3);
  CHECK_THROWS_AS(solver.solve_neumann(Eigen::VectorXd::Ones(128)), std::invalid_argument);
}

TEST_CASE("electrode sets") {
  for (ElectrodeShape shape : {ElectrodeShape::Box, ElectrodeShape::Bandlimited}) {
    ElectrodeSet e = make_electrodes(9, shape);
    // unit integral per electrode, midpoint rule on a fine grid
    const int m = 9 * 1000;
    double total = 0.0;
    for (int j = 0; j < m; ++j) total += e.chi(4, (j + 0.5) * 2.0 * kPi / m);
    CHECK(total * 2.0 * kPi / m == doctest::Approx(1.0).epsilon(1e-6));
  }
  ElectrodeSet arc = make_arc_electrodes(6, kPi / 2);
  CHECK(arc.width == doctest::Approx(kPi / 6));
  for (double c : arc.centers) CHECK(std::abs(c) < kPi / 2);
  CHECK(arc.chi(0, kPi) == 0.0);  // supported on the arc only
  CHECK_THROWS_AS(make_arc_electrodes(6, -1.0), std::invalid_argument);
}

TEST_CASE("measured DtN of the unit disk is circulant and consistent") {
  MeasuredDtn md = measure_dtn(unit_field(), 9, make_electrodes(9), 96, 243);
  CHECK(md.ntheta % 9 == 0);
  CHECK((md.ntheta / 9) % 2 == 1);  // odd nodes per electrode
  CHECK(md.asymmetry < 1e-8);
  const Eigen::MatrixXd& m = md.m;
  for (int p = 0; p < 9; ++p)
    for (int q = 0; q < 9; ++q)
      CHECK(m(p, q) == doctest::Approx(m(0, (q - p + 9) % 9)).epsilon(1e-8));
  CHECK((m * Eigen::VectorXd::Ones(9)).cwiseAbs().maxCoeff() < 1e-12 * m.cwiseAbs().maxCoeff());
  ConsistencyReport rep = check_dtn_consistency(m, 9);
  CHECK(rep.pass());
}

TEST_CASE("band-limited measurement matches the fourier synthesis") {
  LayeredConductivity prof{[](double r) { return 1.0 + r * r; }, {}, {}};
  MeasuredDtn fs = fourier_dtn_layered(prof, 9);
  MeasuredDtn md = measure_dtn(ConductivityField::from_layered(prof), 9,
                               make_electrodes(9, ElectrodeShape::Bandlimited), 128, 256);
  CHECK((fs.m - md.m).cwiseAbs().maxCoeff() < 1e-2 * fs.m.cwiseAbs().maxCoeff());
}

TEST_CASE("fourier synthesis eigen-identity for the unit disk") {
  const int n = 9;
  const double ht = 2.0 * kPi / n;
  MeasuredDtn fs = fourier_dtn_layered(LayeredConductivity::constant(1.0), n);
  for (int k = 0; k <= (n - 1) / 2; ++k) {
    const double s = sinc(k * ht / 2.0);
    const double lam = k * s * s / ht;
    Eigen::VectorXd ck(n), sk(n);
    for (int q = 0; q < n; ++q) {
      ck[q] = std::cos(k * ht * q);
      sk[q] = std::sin(k * ht * q);
    }
    CHECK((fs.m * ck - lam * ck).cwiseAbs().maxCoeff() < 1e-10);
    if (k) CHECK((fs.m * sk - lam * sk).cwiseAbs().maxCoeff() < 1e-10);
  }
  // sinc bound over the band
  for (int k = 1; k <= (n - 1) / 2; ++k) {
    CHECK(sinc(k * ht / 2.0) > 2.0 / kPi);
    CHECK(sinc(k * ht / 2.0) <= 1.0);
  }
}

TEST_CASE("lumped synthesis for the unit disk has eigenvalues omega_k") {
  const int n = 9;
  const double ht = 2.0 * kPi / n;
  Eigen::MatrixXd m = lumped_dtn_layered(LayeredConductivity::constant(1.0), n);
  CHECK((m * Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff() < 1e-12);  // k = 0
  for (int k = 1; k <= (n - 1) / 2; ++k) {
    const double wk = k * sinc(k * ht / 2.0);
    Eigen::VectorXd ck(n);
    for (int q = 0; q < n; ++q) ck[q] = std::cos(k * ht * q);
    CHECK((m * ck - wk * ck).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("phantom registry") {
  ConductivityField smooth = phantom("smooth");
  CHECK(smooth(0.0, 0.0) > 1.0);  // net positive bump mass at the center
  ConductivityField chest = phantom("chest");
  ConductivityField layered = phantom("layered-smooth");
  CHECK(layered.layered);
  CHECK_THROWS_AS(phantom("nope"), std::invalid_argument);

  std::mt19937 rng(3);
  std::uniform_real_distribution<double> ur(0.0, 1.0), ut(0.0, 2.0 * kPi);
  double cmin = 1e9, cmax = -1e9;
  for (int t = 0; t < 10000; ++t) {
    const double r = std::sqrt(ur(rng)), th = ut(rng);
    for (const auto* f : {&smooth, &chest, &layered}) CHECK((*f)(r, th) > 0.0);
    cmin = std::min(cmin, chest(r, th));
    cmax = std::max(cmax, chest(r, th));
  }
  CHECK(cmin == 0.3);
  CHECK(cmax == 2.0);
}
