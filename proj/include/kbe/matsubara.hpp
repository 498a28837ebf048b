#pragma once

#include <array>
#include <numbers>

#include "core.hpp"

// Fourier transforms between the imaginary-time grid tau_m = m beta/ntau and
// Matsubara frequencies, used to solve the Matsubara Dyson equation.
namespace kbe::matsubara {

struct FrequencyGrid {
  int sig;
  double beta;
  int nomega;  // fermions: m = -nomega..nomega-1, bosons: m = -nomega..nomega

  int count() const { return sig == FERMION ? 2 * nomega : 2 * nomega + 1; }
  double omega(int i) const {
    const int m = i - nomega;
    return (sig == FERMION ? 2 * m + 1 : 2 * m) * std::numbers::pi / beta;
  }
};

namespace detail {

// mu_p(theta) = int_0^1 x^p e^{i theta x} dx, p = 0..3
inline std::array<cplx, 4> moments(double theta) {
  std::array<cplx, 4> mu{};
  if (std::abs(theta) < 1.0) {
    for (int p = 0; p < 4; ++p) {
      cplx term = 1.0, s = 0.0;
      for (int r = 0; r < 30; ++r) {
        s += term / static_cast<double>(p + r + 1);
        term *= I * theta / static_cast<double>(r + 1);
      }
      mu[p] = s;
    }
    return mu;
  }
  const cplx e = std::exp(I * theta), it = I * theta;
  mu[0] = (e - 1.0) / it;
  for (int p = 1; p < 4; ++p) mu[p] = (e - static_cast<double>(p) * mu[p - 1]) / it;
  return mu;
}

// Coefficients c[q][p] of the Lagrange basis polynomials L_q(x) = sum_p c[q][p] x^p
// for nodes x = offs[q].
inline std::vector<std::array<double, 4>> lagrange(const std::vector<int>& offs) {
  const int n = static_cast<int>(offs.size());
  std::vector<std::array<double, 4>> c(n);
  for (int q = 0; q < n; ++q) {
    std::array<double, 4> poly{1.0, 0.0, 0.0, 0.0};
    double denom = 1.0;
    for (int r = 0; r < n; ++r) {
      if (r == q) continue;
      std::array<double, 4> next{};
      for (int p = 0; p < 3; ++p) {
        next[p + 1] += poly[p];
        next[p] -= offs[r] * poly[p];
      }
      poly = next;
      denom *= offs[q] - offs[r];
    }
    for (int p = 0; p < 4; ++p) c[q][p] = poly[p] / denom;
  }
  return c;
}

struct Twiddles {
  int n;
  std::vector<cplx> root;   // e^{2 pi i l / n}
  std::vector<cplx> twist;  // e^{i pi j / n} for fermions, 1 for bosons
  cplx last;                // twist at j = n relative to twist[0]
  int residue(int m) const { return ((m % n) + n) % n; }
};

inline Twiddles twiddles(int n, int sig) {
  Twiddles t{n, std::vector<cplx>(n), std::vector<cplx>(n, 1.0), 1.0};
  for (int l = 0; l < n; ++l) t.root[l] = std::polar(1.0, 2.0 * std::numbers::pi * l / n);
  if (sig == FERMION) {
    for (int j = 0; j < n; ++j) t.twist[j] = std::polar(1.0, std::numbers::pi * j / n);
    t.last = -1.0;
  }
  return t;
}

}  // namespace detail

// X(i omega) = int_0^beta e^{i omega tau} X(tau) dtau, exact for the piecewise
// cubic interpolant of the samples. Returns grid.count() blocks of d x d.
inline std::vector<cplx> to_frequency(const cplx* x, int ntau, int d, const FrequencyGrid& grid) {
  require(ntau >= 1, "to_frequency: ntau >= 1 required");
  const int es = d * d, deg = std::min(3, ntau);
  const double htau = grid.beta / ntau;
  // Node sets per interval: start index s = clamp(j-1, 0, ntau-deg).
  struct Config {
    int first;
    std::vector<std::array<double, 4>> basis;
  };
  std::vector<int> start(ntau);
  std::vector<Config> cfgs;
  std::vector<int> cfg_of(ntau);
  for (int j = 0; j < ntau; ++j) {
    start[j] = std::clamp(j - 1, 0, ntau - deg);
    const int first = start[j] - j;
    int id = -1;
    for (size_t c = 0; c < cfgs.size(); ++c)
      if (cfgs[c].first == first) id = static_cast<int>(c);
    if (id < 0) {
      std::vector<int> offs(deg + 1);
      for (int q = 0; q <= deg; ++q) offs[q] = first + q;
      cfgs.push_back({first, detail::lagrange(offs)});
      id = static_cast<int>(cfgs.size()) - 1;
    }
    cfg_of[j] = id;
  }
  // omega_i htau j = pi (2k + twist) j / ntau, so the sums over j only depend on
  // k mod ntau and are computed once per residue.
  const auto tw = detail::twiddles(ntau, grid.sig);
  const size_t nq = deg + 1;
  std::vector<cplx> sums(cfgs.size() * nq * ntau * es, cplx{});
  for (int k = 0; k < ntau; ++k)
    for (int j = 0; j < ntau; ++j) {
      const cplx ph = tw.twist[j] * tw.root[(static_cast<long>(k) * j) % ntau];
      cplx* sc = sums.data() + (static_cast<size_t>(cfg_of[j]) * nq * ntau + k) * es;
      for (size_t q = 0; q < nq; ++q) {
        const cplx* xs = x + (start[j] + q) * es;
        cplx* o = sc + q * ntau * es;
        for (int e = 0; e < es; ++e) o[e] += ph * xs[e];
      }
    }
  std::vector<cplx> out(static_cast<size_t>(grid.count()) * es, cplx{});
  for (int i = 0; i < grid.count(); ++i) {
    const double om = grid.omega(i);
    const auto mu = detail::moments(om * htau);
    const int k = tw.residue(i - grid.nomega);
    cplx* o = out.data() + static_cast<size_t>(i) * es;
    for (size_t c = 0; c < cfgs.size(); ++c)
      for (size_t q = 0; q < nq; ++q) {
        cplx wq = 0.0;
        for (int p = 0; p <= deg; ++p) wq += cfgs[c].basis[q][p] * mu[p];
        wq *= htau;
        const cplx* sc = sums.data() + ((c * nq + q) * ntau + k) * es;
        for (int e = 0; e < es; ++e) o[e] += wq * sc[e];
      }
  }
  return out;
}

// Inverse transform of X(i omega) with the 1/(i omega) tail J removed analytically,
// where J = xi X(beta) - X(0). Returns ntau+1 blocks.
inline std::vector<cplx> to_time(const cplx* xw, const cplx* jump, int ntau, int d, const FrequencyGrid& grid) {
  const int es = d * d;
  std::vector<cplx> out(static_cast<size_t>(ntau + 1) * es, cplx{});
  const double htau = grid.beta / ntau;
  const auto tw = detail::twiddles(ntau, grid.sig);
  // fold frequencies onto residues k mod ntau first
  std::vector<cplx> folded(static_cast<size_t>(ntau) * es, cplx{});
  for (int i = 0; i < grid.count(); ++i) {
    const double om = grid.omega(i);
    const cplx* xi = xw + static_cast<size_t>(i) * es;
    cplx* f = folded.data() + static_cast<size_t>(tw.residue(i - grid.nomega)) * es;
    if (om == 0.0) {
      for (int e = 0; e < es; ++e) f[e] += xi[e];
    } else {
      for (int e = 0; e < es; ++e) f[e] += xi[e] - jump[e] / (I * om);
    }
  }
  for (int m = 0; m <= ntau; ++m) {
    cplx* o = out.data() + static_cast<size_t>(m) * es;
    for (int k = 0; k < ntau; ++k) {
      const cplx ph = std::conj(tw.root[(static_cast<long>(k) * m) % ntau]);
      const cplx* f = folded.data() + static_cast<size_t>(k) * es;
      for (int e = 0; e < es; ++e) o[e] += ph * f[e];
    }
    const cplx t = std::conj(tw.twist[m % ntau] * (m == ntau ? tw.last : 1.0)) / grid.beta;
    for (int e = 0; e < es; ++e) o[e] *= t;
  }
  for (int m = 0; m <= ntau; ++m) {
    const double tau = m * htau;
    const double t = grid.sig == FERMION ? -0.5 : tau / grid.beta - 0.5;
    cplx* o = out.data() + static_cast<size_t>(m) * es;
    for (int e = 0; e < es; ++e) o[e] += t * jump[e];
  }
  return out;
}

// J = xi X(beta) - X(0)
inline std::vector<cplx> jump(const cplx* x, int ntau, int d, int sig) {
  const int es = d * d;
  std::vector<cplx> j(es);
  for (int e = 0; e < es; ++e) j[e] = static_cast<double>(sig) * x[ntau * es + e] - x[e];
  return j;
}

}  // namespace kbe::matsubara
