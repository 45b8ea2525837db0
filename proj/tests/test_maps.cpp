#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "maps.hpp"

using namespace eit;

TEST_CASE("one-sided fit meets the endpoint condition") {
  for (double beta : {kPi / 4.0, kPi / 2.0, 3.0 * kPi / 4.0}) {
    for (int n : {9, 13}) {
      MobiusMap map = fit_mobius_one_sided(beta, n);
      CHECK(map.omega == 0.0);
      CHECK(std::abs(map.a.imag()) < 1e-15);
      CHECK(std::abs(map.a) < 1.0);
      const double ts = kPi - kPi / n;
      CHECK(std::abs(map.boundary_forward(ts) - beta) <= 1e-12);
      CHECK(std::abs(map.boundary_forward(-ts) + beta) <= 1e-12);
    }
  }
  CHECK_THROWS_AS(fit_mobius_one_sided(0.0, 9), std::invalid_argument);
  CHECK_THROWS_AS(fit_mobius_one_sided(kPi / 2.0, 8), std::invalid_argument);
}

TEST_CASE("full boundary needs no distortion") {
  MobiusMap map = fit_mobius_one_sided(kPi, 9);
  CHECK(map.a == std::complex<double>(0.0, 0.0));
  CHECK(map.omega == 0.0);
}

TEST_CASE("forward and inverse compose to the identity") {
  MobiusMap map;
  map.a = {0.4, -0.2};
  map.omega = 1.1;
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> ur(0.0, 1.0), ut(0.0, 2.0 * kPi);
  for (int i = 0; i < 1000; ++i) {
    const std::complex<double> z = std::polar(std::sqrt(ur(rng)), ut(rng));
    CHECK(std::abs(map.inverse(map.forward(z)) - z) <= 1e-12);
    CHECK(std::abs(map.forward(map.inverse(z)) - z) <= 1e-12);
    const std::complex<double> b = std::polar(1.0, ut(rng));
    CHECK(std::abs(std::abs(map.forward(b)) - 1.0) <= 1e-12);
  }
  CHECK_THROWS_AS(map.forward({1.5, 0.0}), std::domain_error);
}

TEST_CASE("push forward composes with the map") {
  ConductivityField one;
  one.eval = [](double, double) { return 1.0; };
  MobiusMap rot;
  rot.omega = kPi / 2.0;

  SUBCASE("constants are invariant") {
    ConductivityField p = push_forward_conductivity(one, rot);
    CHECK(p(0.3, 1.0) == 1.0);
    CHECK(p(1.0, 4.0) == 1.0);
  }

  SUBCASE("pure rotation rotates the field") {
    ConductivityField f;
    f.eval = [](double r, double th) { return 1.0 + r * std::cos(th); };
    ConductivityField p = push_forward_conductivity(f, rot);
    for (double r : {0.2, 0.7})
      for (double th : {0.0, 1.3, 5.0})
        CHECK(p(r, th) == doctest::Approx(f(r, th + kPi / 2.0)).epsilon(1e-12));
  }

  SUBCASE("bump center moves to the preimage") {
    ConductivityField bump;
    bump.eval = [](double r, double th) {
      const double dx = r * std::cos(th) - 0.5, dy = r * std::sin(th);
      return 1.0 + std::exp(-20.0 * (dx * dx + dy * dy));
    };
    MobiusMap map = fit_mobius_one_sided(kPi / 2.0, 9);
    ConductivityField p = push_forward_conductivity(bump, map);
    const std::complex<double> c = map.inverse({0.5, 0.0});
    CHECK(p(std::abs(c), std::arg(c)) == doctest::Approx(2.0).epsilon(1e-12));
  }

  SUBCASE("pull back undoes the push forward") {
    ConductivityField f;
    f.eval = [](double r, double th) { return 2.0 + r * r * std::sin(2.0 * th); };
    MobiusMap map;
    map.a = {0.3, 0.1};
    map.omega = 0.7;
    ConductivityField back = pull_back_conductivity(push_forward_conductivity(f, map), map);
    std::mt19937 rng(37);
    std::uniform_real_distribution<double> ur(0.0, 1.0), ut(0.0, 2.0 * kPi);
    for (int i = 0; i < 1000; ++i) {
      const double r = std::sqrt(ur(rng)), th = ut(rng);
      CHECK(back(r, th) == doctest::Approx(f(r, th)).epsilon(1e-12));
    }
  }
}

TEST_CASE("mapped points accumulate toward the arc center") {
  const int n = 9;
  const double beta = kPi / 2.0;
  MobiusMap map = fit_mobius_one_sided(beta, n);
  BoundaryCorrespondence bc = boundary_correspondence(map, beta, n);
  std::vector<double> tau = bc.tau;
  for (double t : tau) CHECK(std::abs(t) <= beta + 1e-12);
  std::sort(tau.begin(), tau.end());
  std::vector<double> gap;
  for (size_t k = 1; k < tau.size(); ++k) gap.push_back(tau[k] - tau[k - 1]);
  for (double g : gap) CHECK(g > 0.0);  // strictly ordered along the arc
  // spacing grows from the center of the arc toward its ends
  for (size_t k = 1; 2 * k < gap.size(); ++k) {
    CHECK(gap[k] < gap[k - 1]);
    CHECK(gap[gap.size() - k] > gap[gap.size() - k - 1]);
  }
}

// Band-limited electrodes: the raw box energies are cutoff-dependent (mutual
// energies of contiguous boxes diverge logarithmically), so the discrete
// invariance statement only converges for smooth electrode functions.
TEST_CASE("measuring through the map matches the pushed-forward field") {
  const int n = 9;
  MobiusMap map = fit_mobius_one_sided(kPi / 2.0, n);
  ElectrodeSet el = make_electrodes(n, ElectrodeShape::Bandlimited);
  ConductivityField f;
  f.eval = [](double r, double th) { return 1.0 + 0.3 * r * std::cos(th); };
  const int nr = 256, ntheta = 512;
  Eigen::MatrixXd direct = measure_dtn(push_forward_conductivity(f, map), n, el, nr, ntheta).m;
  Eigen::MatrixXd pulled = measure_dtn_pulled(f, n, el, map, nr, ntheta);
  const double rel = (direct - pulled).cwiseAbs().maxCoeff() / direct.cwiseAbs().maxCoeff();
  CHECK(rel < 1e-3);
}
