#pragma once

#include <numbers>

#include "contour.hpp"

namespace kbe {

namespace freegf {

// Occupation f_xi(e) = 1/(e^{beta e} - xi).
inline double occupation(int sig, double e, double beta) {
  if (sig == FERMION) {
    return e >= 0 ? std::exp(-beta * e) / (1.0 + std::exp(-beta * e)) : 1.0 / (std::exp(beta * e) + 1.0);
  }
  require(e > 0.0, "bosonic occupation requires positive energies");
  return 1.0 / std::expm1(beta * e);
}

// -(1 + xi f) e^{-e tau}, the Matsubara function of a single level.
inline double matsubara_value(int sig, double e, double beta, double tau) {
  if (sig == FERMION) {
    return e >= 0 ? -std::exp(-e * tau) / (1.0 + std::exp(-beta * e))
                  : -std::exp(e * (beta - tau)) / (std::exp(beta * e) + 1.0);
  }
  require(e > 0.0, "bosonic Green's function requires positive energies");
  return -std::exp(-e * tau) / (-std::expm1(-beta * e));
}

// f e^{e tau}, entering the mixing component.
inline double mixing_value(int sig, double e, double beta, double tau) {
  if (sig == FERMION) {
    return e >= 0 ? std::exp(e * (tau - beta)) / (1.0 + std::exp(-beta * e))
                  : std::exp(e * tau) / (std::exp(beta * e) + 1.0);
  }
  require(e > 0.0, "bosonic Green's function requires positive energies");
  return std::exp(e * (tau - beta)) / (-std::expm1(-beta * e));
}

struct Spectrum {
  Eigen::VectorXd values;
  CMatrix vectors;
};

inline Spectrum diagonalize(const CMatrix& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es{Eigen::MatrixXcd(h)};
  return {es.eigenvalues(), CMatrix(es.eigenvectors())};
}

// R diag(fn(e_a)) R^dagger
template <class Fn>
CMatrix spectral(const Spectrum& e, Fn&& fn) {
  const int d = static_cast<int>(e.values.size());
  Eigen::VectorXcd v(d);
  for (int a = 0; a < d; ++a) v[a] = fn(e.values[a]);
  return e.vectors * v.asDiagonal() * e.vectors.adjoint();
}

// exp(-i h) for hermitian h
inline CMatrix expm_herm(const CMatrix& h) {
  auto e = diagonalize(h);
  return spectral(e, [](double x) { return std::exp(-I * x); });
}

}  // namespace freegf

// Free Matsubara function G^M(tau_m) = -R diag((1 + xi f) e^{-(e-mu) tau}) R^dagger.
inline void free_matsubara(std::vector<cplx>& out, const CMatrix& eps, double mu, double beta, int ntau, int sig) {
  const int d = static_cast<int>(eps.rows());
  const auto e = freegf::diagonalize(eps - mu * CMatrix::Identity(d, d));
  out.assign(static_cast<size_t>(ntau + 1) * d * d, cplx{});
  for (int m = 0; m <= ntau; ++m) {
    const double tau = beta * m / ntau;
    blk::from_matrix(out.data() + m * d * d,
                     freegf::spectral(e, [&](double x) { return freegf::matsubara_value(sig, x, beta, tau); }), d);
  }
}

// One fourth-order commutator-free step U(t_{n+1}, t_n) for H(t) = eps(t) - mu.
// eps is interpolated to the stage times with order k from grid values 0..last
// (default: all of eps). With last = n the stages are extrapolated.
inline CMatrix cf4_step(const ContourFunction& eps, double mu, int n, double h, int k, int last = -2) {
  const int d = eps.size();
  if (last == -2) last = eps.nt();
  require(n >= 0 && last >= n && last <= eps.nt(), "cf4_step: eps does not cover the step");
  const int order = std::min(k, last);
  const double c1 = 0.5 - std::sqrt(3.0) / 6.0, c2 = 0.5 + std::sqrt(3.0) / 6.0;
  const double a1 = (3.0 - 2.0 * std::sqrt(3.0)) / 12.0, a2 = (3.0 + 2.0 * std::sqrt(3.0)) / 12.0;
  CMatrix e1, e2;
  if (order == 0) {
    e1 = e2 = eps.get(n);
  } else {
    const int s = std::clamp(n - order / 2, 0, last - order);
    std::vector<CMatrix> samples;
    for (int j = 0; j <= order; ++j) samples.push_back(eps.get(s + j));
    auto interp = [&](double x) {
      CMatrix r = CMatrix::Zero(d, d);
      // Lagrange interpolation through grid points s..s+order.
      for (int j = 0; j <= order; ++j) {
        double w = 1.0;
        for (int l = 0; l <= order; ++l)
          if (l != j) w *= (x - l) / static_cast<double>(j - l);
        r += w * samples[j];
      }
      return r;
    };
    e1 = interp(n + c1 - s);
    e2 = interp(n + c2 - s);
  }
  const CMatrix id = CMatrix::Identity(d, d);
  e1 -= mu * id;
  e2 -= mu * id;
  return freegf::expm_herm(h * (a1 * e1 + a2 * e2)) * freegf::expm_herm(h * (a2 * e1 + a1 * e2));
}

namespace detail {

inline void fill_free_gf(HermMatrix& g, const std::vector<CMatrix>& u, const CMatrix& eps0, double mu, double beta) {
  const int d = g.size(), ntau = g.ntau(), sig = g.sig();
  const double xi = sig;
  const auto e = freegf::diagonalize(eps0 - mu * CMatrix::Identity(d, d));
  for (int m = 0; m <= ntau; ++m) {
    const double tau = beta * m / ntau;
    g.set_mat(m, freegf::spectral(e, [&](double x) { return freegf::matsubara_value(sig, x, beta, tau); }));
  }
  if (g.nt() < 0) return;
  const CMatrix rho = freegf::spectral(e, [&](double x) { return freegf::occupation(sig, x, beta); });
  std::vector<CMatrix> mix(ntau + 1);
  for (int m = 0; m <= ntau; ++m) {
    const double tau = beta * m / ntau;
    mix[m] = freegf::spectral(e, [&](double x) { return freegf::mixing_value(sig, x, beta, tau); });
  }
  for (int n = 0; n <= g.nt(); ++n) {
    for (int m = 0; m <= ntau; ++m) g.set_tv(n, m, -I * xi * u[n] * mix[m]);
    for (int j = 0; j <= n; ++j) {
      g.set_ret(n, j, -I * u[n] * u[j].adjoint());
      g.set_les(j, n, -I * xi * u[j] * rho * u[n].adjoint());
    }
  }
}

}  // namespace detail

// Free Green's function of a time-dependent eps(t); the Matsubara branch uses eps_{-1}.
inline void green_from_H(HermMatrix& g, double mu, const ContourFunction& eps, double beta, double h, int k = 5) {
  require(eps.size() == g.size() && eps.nt() >= g.nt(), "green_from_H: eps does not cover G");
  require(beta > 0.0 && h > 0.0, "green_from_H: beta and h must be positive");
  std::vector<CMatrix> u;
  const int d = g.size();
  if (g.nt() >= 0) {
    u.push_back(CMatrix::Identity(d, d));
    for (int n = 0; n < g.nt(); ++n) u.push_back(cf4_step(eps, mu, n, h, k) * u.back());
  }
  detail::fill_free_gf(g, u, eps.get(-1), mu, beta);
}

// Time-independent eps: exact propagators.
inline void green_from_H(HermMatrix& g, double mu, const CMatrix& eps, double beta, double h) {
  require(eps.rows() == g.size() && eps.cols() == g.size(), "green_from_H: eps has the wrong size");
  require(beta > 0.0 && h > 0.0, "green_from_H: beta and h must be positive");
  const int d = g.size();
  const auto e = freegf::diagonalize(eps - mu * CMatrix::Identity(d, d));
  std::vector<CMatrix> u;
  for (int n = 0; n <= g.nt(); ++n)
    u.push_back(freegf::spectral(e, [&](double x) { return std::exp(-I * x * (n * h)); }));
  detail::fill_free_gf(g, u, eps, mu, beta);
}

}  // namespace kbe
