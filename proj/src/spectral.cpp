#include "spectral.hpp"

#include <lapacke.h>

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <numeric>

namespace eit {

namespace {

using LD = long double;
using MatLD = Eigen::Matrix<LD, Eigen::Dynamic, Eigen::Dynamic>;
using VecLD = Eigen::Matrix<LD, Eigen::Dynamic, 1>;

// 4-point Gauss-Legendre on [a, b]
double gl4(const std::function<double(double)>& f, double a, double b) {
  static const double xs[4] = {-0.8611363115940526, -0.3399810435848563,
                               0.3399810435848563, 0.8611363115940526};
  static const double ws[4] = {0.3478548451374538, 0.6521451548625461,
                               0.6521451548625461, 0.3478548451374538};
  const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
  double s = 0.0;
  for (int i = 0; i < 4; ++i) s += ws[i] * f(c + hw * xs[i]);
  return s * hw;
}

// One resolution of the 1-D layered DtN eigenvalue, uniform grid in
// z = log(1/r) on [0, zmax], v(0) = 1, v(zmax) = 0.
double f_of_k_once(const LayeredConductivity& sigma_r, int k, double zmax, int n) {
  // extended precision: the boundary flux g*(1 - v_1) cancels severely
  const LD dz = static_cast<LD>(zmax) / n;
  auto sig = [&](LD z) {
    double s = sigma_r(std::exp(-static_cast<double>(z)));
    if (!(s > 0.0)) throw std::domain_error("conductivity must be positive");
    return static_cast<LD>(s);
  };
  const LD k2 = static_cast<LD>(k) * k;
  std::vector<LD> ge(n), mass(n + 1);
  for (int i = 0; i < n; ++i) ge[i] = sig((i + 0.5L) * dz) / dz;
  for (int i = 0; i <= n; ++i) mass[i] = k2 * sig(i * dz) * (i == 0 || i == n ? dz / 2 : dz);
  // Thomas solve for v_1..v_{n-1}
  std::vector<LD> diag(n - 1), rhs(n - 1, 0.0L);
  for (int i = 1; i < n; ++i) diag[i - 1] = ge[i - 1] + ge[i] + mass[i];
  rhs[0] = ge[0];  // from v_0 = 1
  for (int i = 1; i < n - 1; ++i) {
    LD w = -ge[i] / diag[i - 1];
    diag[i] += w * ge[i];  // subdiag and superdiag are both -ge[i]
    rhs[i] -= w * rhs[i - 1];
  }
  std::vector<LD> v(n - 1);
  v[n - 2] = rhs[n - 2] / diag[n - 2];
  for (int i = n - 3; i >= 0; --i) v[i] = (rhs[i] + ge[i + 1] * v[i + 1]) / diag[i];
  return static_cast<double>(ge[0] * (1.0L - v[0]) + mass[0]);
}

std::vector<LD> trim(std::vector<LD> p) {
  LD m = 0;
  for (LD v : p) m = std::max(m, std::abs(v));
  while (!p.empty() && std::abs(p.back()) < 1e-15L * std::max<LD>(m, 1)) p.pop_back();
  return p;
}

}  // namespace

double eigenvalue_f(const LayeredConductivity& sigma_r, int k) {
  if (k == 0) return 0.0;
  const int kk = std::abs(k);
  const double zmax = 40.0 / kk;
  const int n = 20000;
  // two Richardson levels: removes both the h^2 and h^4 terms
  const double f1 = f_of_k_once(sigma_r, kk, zmax, n);
  const double f2 = f_of_k_once(sigma_r, kk, zmax, 2 * n);
  const double f4 = f_of_k_once(sigma_r, kk, zmax, 4 * n);
  const double r1 = (4.0 * f2 - f1) / 3.0, r2 = (4.0 * f4 - f2) / 3.0;
  return (16.0 * r2 - r1) / 15.0;
}

std::complex<double> continued_fraction_eval(const GridSteps& steps, std::complex<double> lambda) {
  if (lambda.imag() == 0.0 && lambda.real() <= 0.0)
    throw std::domain_error("lambda lies on the spectral cut (-inf, 0]");
  const int ell = steps.ell();
  std::complex<double> t = 1.0 / steps.alpha[ell - 1];
  for (int j = ell - 1; j >= 1; --j)
    t = 1.0 / (steps.alpha[j - 1] + 1.0 / (steps.alpha_hat[j] * lambda + t));
  if (steps.hbar == 1) return 1.0 / (steps.alpha_hat[0] * lambda + t);
  return 1.0 / t;
}

RationalCoeffs rational_interp_coeffs(const std::vector<double>& x, const std::vector<double>& d,
                                      int ell, int hbar) {
  const int m = static_cast<int>(x.size());
  const int expect = (hbar == 1) ? 2 * ell : 2 * ell - 1;
  if (m != expect || d.size() != x.size())
    throw std::invalid_argument("sample count does not match ell and hbar");
  const int np = (hbar == 1) ? ell : ell - 1;  // free even coefficients p_1..p_np
  const int nq = ell;                          // odd coefficients q_1..q_ell
  MatLD a(m, np + nq);
  VecLD b = VecLD::Ones(m);
  for (int k = 0; k < m; ++k) {
    const LD xk = x[k];
    LD xp = xk * xk;
    for (int j = 0; j < np; ++j, xp *= xk * xk) a(k, j) = xp;
    LD xq = xk;
    for (int j = 0; j < nq; ++j, xq *= xk * xk) a(k, np + j) = -static_cast<LD>(d[k]) * xq;
  }
  VecLD scale(np + nq);
  for (int j = 0; j < np + nq; ++j) {
    scale[j] = a.col(j).cwiseAbs().maxCoeff();
    if (scale[j] == 0) scale[j] = 1;
    a.col(j) /= scale[j];
  }
  Eigen::HouseholderQR<MatLD> qr(a);
  MatLD r = qr.matrixQR().triangularView<Eigen::Upper>();
  LD dmin = std::abs(r(0, 0)), dmax = dmin;
  for (int j = 1; j < np + nq; ++j) {
    dmin = std::min(dmin, std::abs(r(j, j)));
    dmax = std::max(dmax, std::abs(r(j, j)));
  }
  const double cond = static_cast<double>(dmax / std::max(dmin, LD(1e-4900L)));
  if (!(dmin > dmax * 1e-18L))
    throw std::runtime_error("rational interpolation system numerically singular, condition estimate " +
                             std::to_string(cond));
  VecLD c = qr.solve(b);
  for (int j = 0; j < np + nq; ++j) c[j] /= scale[j];

  RationalCoeffs out;
  out.condition_estimate = cond;
  out.p.assign(2 * np + 1, 0.0L);
  out.p[0] = -1.0L;
  for (int j = 0; j < np; ++j) out.p[2 * (j + 1)] = c[j];
  out.q.assign(2 * nq, 0.0L);
  for (int j = 0; j < nq; ++j) out.q[2 * j + 1] = c[np + j];
  return out;
}

std::vector<long double> euclidean_division(std::vector<long double> r0, std::vector<long double> r1,
                                            int count) {
  std::vector<LD> ks;
  r0 = trim(std::move(r0));
  r1 = trim(std::move(r1));
  for (int it = 0; it < count; ++it) {
    if (r1.empty() || r0.size() != r1.size() + 1)
      throw std::runtime_error("Euclidean division broke down at coefficient " +
                               std::to_string(it + 1));
    const LD kappa = r0.back() / r1.back();
    if (!(kappa > 0.0L) || !std::isfinite(static_cast<double>(kappa)))
      throw std::runtime_error("non-positive continued fraction coefficient at index " +
                               std::to_string(it + 1) + " (data is not a valid Stieltjes sample)");
    ks.push_back(kappa);
    // r0 <- r0 - kappa * x * r1, then swap
    for (size_t i = 0; i < r1.size(); ++i) r0[i + 1] -= kappa * r1[i];
    r0.pop_back();  // leading term cancels by construction
    std::swap(r0, r1);
    r0 = trim(std::move(r0));
    r1 = trim(std::move(r1));
  }
  return ks;
}

GridSteps steps_from_samples(const std::vector<double>& x, const std::vector<double>& f_values,
                             int hbar) {
  const int m = static_cast<int>(x.size());
  const int ell = (hbar == 1) ? m / 2 : (m + 1) / 2;
  if ((hbar == 1 && m != 2 * ell) || (hbar == 0 && m != 2 * ell - 1))
    throw std::invalid_argument("sample count incompatible with hbar");
  std::vector<double> d(m);
  for (int k = 0; k < m; ++k) d[k] = f_values[k] / x[k];
  RationalCoeffs rc = rational_interp_coeffs(x, d, ell, hbar);
  GridSteps s;
  s.hbar = hbar;
  s.alpha.assign(ell, 0.0);
  s.alpha_hat.assign(ell, 0.0);
  if (hbar == 1) {
    auto ks = euclidean_division(rc.p, rc.q, 2 * ell);
    for (int j = 0; j < ell; ++j) {
      s.alpha_hat[j] = static_cast<double>(ks[2 * j]);
      s.alpha[j] = static_cast<double>(ks[2 * j + 1]);
    }
  } else {
    auto ks = euclidean_division(rc.q, rc.p, 2 * ell - 1);
    s.alpha[0] = static_cast<double>(ks[0]);
    for (int j = 1; j < ell; ++j) {
      s.alpha_hat[j] = static_cast<double>(ks[2 * j - 1]);
      s.alpha[j] = static_cast<double>(ks[2 * j]);
    }
  }
  return s;
}

GridSteps lanczos_from_spectral(const SpectralData& data) {
  const int ell = data.ell();
  if (ell < 1) throw std::invalid_argument("empty spectral data");
  const double xi_sum = std::accumulate(data.xi.begin(), data.xi.end(), 0.0);
  Eigen::VectorXd d2(ell);
  for (int j = 0; j < ell; ++j) d2[j] = data.delta[j] * data.delta[j];

  Eigen::MatrixXd w(ell, ell);
  const double ah1 = 1.0 / xi_sum;
  for (int j = 0; j < ell; ++j) w(0, j) = std::sqrt(ah1 * data.xi[j]);
  Eigen::VectorXd a(ell), b(ell > 1 ? ell - 1 : 0);
  for (int j = 0; j < ell; ++j) {
    a[j] = w.row(j).cwiseProduct(d2.transpose()).dot(w.row(j));
    if (j == ell - 1) break;
    Eigen::RowVectorXd r = a[j] * w.row(j) - w.row(j).cwiseProduct(d2.transpose());
    if (j > 0) r -= b[j - 1] * w.row(j - 1);
    for (int q = 0; q <= j; ++q) r -= r.dot(w.row(q)) * w.row(q);  // full reorthogonalization
    b[j] = r.norm();
    if (!(b[j] > 0.0))
      throw std::runtime_error("Lanczos breakdown at iteration " + std::to_string(j + 1));
    w.row(j + 1) = r / b[j];
  }
  GridSteps s;
  s.hbar = 1;
  s.alpha.assign(ell, 0.0);
  s.alpha_hat.assign(ell, 0.0);
  s.alpha_hat[0] = ah1;
  s.alpha[0] = 1.0 / (ah1 * a[0]);
  for (int j = 1; j < ell; ++j) {
    s.alpha_hat[j] = 1.0 / (b[j - 1] * b[j - 1] * s.alpha[j - 1] * s.alpha[j - 1] * s.alpha_hat[j - 1]);
    s.alpha[j] = 1.0 / (a[j] * s.alpha_hat[j] - 1.0 / s.alpha[j - 1]);
    if (!(s.alpha[j] > 0.0) || !(s.alpha_hat[j] > 0.0))
      throw std::runtime_error("non-positive grid step extracted at layer " + std::to_string(j + 1));
  }
  return s;
}

SpectralData reference_spectral_data(int ell) {
  SpectralData d;
  d.delta.resize(ell);
  d.xi.assign(ell, 2.0);
  for (int j = 1; j <= ell; ++j) d.delta[j - 1] = kPi * (j - 0.5);
  return d;
}

SpectralData shifted_reference_spectral_data(int ell, double qbar) {
  if (!(qbar > -kPi * kPi / 4.0))
    throw std::domain_error("qbar must exceed -pi^2/4");
  SpectralData d = reference_spectral_data(ell);
  for (double& dl : d.delta) dl = std::sqrt(dl * dl + qbar);
  return d;
}

double qbar_profile(double qbar, double zeta) {
  if (qbar == 0.0) return 1.0;
  if (qbar > 0.0) {
    const double c = std::cosh(std::sqrt(qbar) * zeta);
    return c * c;
  }
  const double c = std::cos(std::sqrt(-qbar) * zeta);
  return c * c;
}

SpectralData spectral_data_of(const LayeredConductivity& sigma_zeta, int ell, int cells) {
  if (ell < 1 || cells < 8 * ell) throw std::invalid_argument("insufficient resolution");
  auto once = [&](int n) {
    const double h = 1.0 / n;
    std::vector<double> al(n), ah(n);
    auto inv_sig = [&](double t) {
      double s = sigma_zeta(t);
      if (!(s > 0.0)) throw std::domain_error("conductivity must be positive");
      return 1.0 / s;
    };
    for (int i = 0; i < n; ++i) al[i] = gl4(inv_sig, i * h, (i + 1) * h);
    ah[0] = gl4(sigma_zeta.eval, 0.0, h / 2);
    for (int i = 1; i < n; ++i) ah[i] = gl4(sigma_zeta.eval, i * h - h / 2, i * h + h / 2);
    std::vector<double> diag(n), off(n - 1);
    diag[0] = 1.0 / (ah[0] * al[0]);
    for (int i = 1; i < n; ++i) diag[i] = (1.0 / al[i] + 1.0 / al[i - 1]) / ah[i];
    for (int i = 0; i + 1 < n; ++i) off[i] = -1.0 / (al[i] * std::sqrt(ah[i] * ah[i + 1]));
    std::vector<double> w(n), z(static_cast<size_t>(n) * ell);
    std::vector<lapack_int> isuppz(2 * ell);
    lapack_int found = 0;
    const double abstol = 2.0 * std::numeric_limits<double>::min();  // high relative accuracy
    lapack_int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'I', n, diag.data(), off.data(), 0.0,
                                     0.0, 1, ell, abstol, &found, w.data(), z.data(), n,
                                     isuppz.data());
    if (info != 0 || found < ell)
      throw std::runtime_error("tridiagonal eigensolve failed, info " + std::to_string(info));
    SpectralData d;
    d.delta.resize(ell);
    d.xi.resize(ell);
    for (int j = 0; j < ell; ++j) {
      d.delta[j] = std::sqrt(w[j]);
      const double y0 = z[static_cast<size_t>(j) * n];
      d.xi[j] = y0 * y0 / ah[0];
    }
    return d;
  };
  SpectralData d1 = once(cells), d2 = once(2 * cells);
  SpectralData out;
  out.delta.resize(ell);
  out.xi.resize(ell);
  for (int j = 0; j < ell; ++j) {
    out.delta[j] = (4.0 * d2.delta[j] - d1.delta[j]) / 3.0;
    out.xi[j] = (4.0 * d2.xi[j] - d1.xi[j]) / 3.0;
  }
  return out;
}

namespace {

LayeredConductivity assemble_piecewise(const std::vector<double>& z0, const std::vector<double>& zh0,
                                       const std::vector<double>& s, const std::vector<double>& sh) {
  const int ell = static_cast<int>(s.size());
  std::vector<double> bp{0.0}, vals;
  auto push = [&](double hi, double v) {
    hi = std::min(hi, 1.0);
    if (hi > bp.back() + 1e-14) {
      bp.push_back(hi);
      vals.push_back(v);
    }
  };
  for (int j = 0; j < ell; ++j) {
    push(zh0[j + 1], s[j]);                      // sigma_j on [z0_j, zh0_{j+1})
    if (j + 1 < ell) push(z0[j + 1], sh[j]);     // sigmahat_{j+1} on [zh0_{j+1}, z0_{j+1})
  }
  push(1.0, sh[ell - 1]);
  if (bp.back() < 1.0) {
    bp.push_back(1.0);
    vals.push_back(sh[ell - 1]);
  }
  return LayeredConductivity::piecewise(std::move(bp), std::move(vals));
}

}  // namespace

LayeredReconstruction reconstruct_layered(const SpectralData& measured,
                                          const ReconstructOptions& opts) {
  const int ell = measured.ell();
  GridSteps st = lanczos_from_spectral(measured);
  GridSteps ref = truncated_measure_grid(ell);
  SpectralData r0 = reference_spectral_data(ell);

  double qhat = 0.0;
  if (opts.qbar_correction) {
    // least-squares constant fit of (2j-1) pi (delta_j - delta0_j) over the
    // top third of the indices
    const int k0 = 2 * (ell / 3);
    double acc = 0.0;
    for (int j = k0; j < ell; ++j)
      acc += (2.0 * (j + 1) - 1.0) * kPi * (measured.delta[j] - r0.delta[j]);
    qhat = acc / (ell - k0);
    if (!(qhat > -kPi * kPi / 4.0)) qhat = 0.0;  // outside the admissible family
  }
  GridSteps qg = (std::abs(qhat) > 1e-14) ? lanczos_from_spectral(shifted_reference_spectral_data(ell, qhat))
                                          : ref;

  std::vector<double> z0(ell + 1, 0.0), zh0(ell + 1, 0.0);
  for (int j = 0; j < ell; ++j) {
    z0[j + 1] = z0[j] + ref.alpha[j];
    zh0[j + 1] = zh0[j] + ref.alpha_hat[j];
  }
  LayeredReconstruction rec;
  rec.qbar = qhat;
  rec.sigma.resize(ell);
  rec.sigma_hat.resize(ell);
  for (int j = 0; j < ell; ++j) {
    rec.sigma[j] = qbar_profile(qhat, std::min(zh0[j + 1], 1.0)) * st.alpha_hat[j] / qg.alpha_hat[j];
    rec.sigma_hat[j] = qbar_profile(qhat, std::min(z0[j + 1], 1.0)) * qg.alpha[j] / st.alpha[j];
  }
  rec.field = assemble_piecewise(z0, zh0, rec.sigma, rec.sigma_hat);
  return rec;
}

LayeredReconstruction reconstruct_layered_interp(const std::vector<double>& f_samples, int n,
                                                 int hbar) {
  const int m = (n - 1) / 2;
  if (static_cast<int>(f_samples.size()) != m)
    throw std::invalid_argument("expected (n-1)/2 eigenvalue samples");
  const double ht = 2.0 * kPi / n;
  std::vector<double> x(m), fv(m);
  for (int k = 1; k <= m; ++k) {
    x[k - 1] = k * sinc(k * ht / 2.0);
    // interpolation variable carries the same sinc factor as the node
    fv[k - 1] = f_samples[k - 1] * sinc(k * ht / 2.0);
  }
  GridSteps st = steps_from_samples(x, fv, hbar);
  GridSteps ref = optimal_grid_interpolation(n, hbar);
  const int ell = st.ell();

  LayeredReconstruction rec;
  rec.sigma.resize(ell);
  rec.sigma_hat.resize(ell);
  for (int j = 0; j < ell; ++j) {
    rec.sigma[j] = (hbar == 0 && j == 0) ? 1.0 : st.alpha_hat[j] / ref.alpha_hat[j];
    rec.sigma_hat[j] = ref.alpha[j] / st.alpha[j];
  }
  std::vector<double> z0(ell + 1, 0.0), zh0(ell + 1, 0.0);
  for (int j = 0; j < ell; ++j) {
    z0[j + 1] = z0[j] + ref.alpha[j];
    zh0[j + 1] = zh0[j] + (hbar == 0 && j == 0 ? ref.alpha[0] / 2 : ref.alpha_hat[j]);
  }
  const double total = std::max(z0[ell], zh0[ell]);
  for (double& v : z0) v /= total;
  for (double& v : zh0) v /= total;
  rec.field = assemble_piecewise(z0, zh0, rec.sigma, rec.sigma_hat);
  return rec;
}

}  // namespace eit
