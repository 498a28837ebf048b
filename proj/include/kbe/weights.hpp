#pragma once

#include <array>
#include <boost/multiprecision/cpp_int.hpp>
#include <memory>
#include <mutex>

#include "core.hpp"

namespace kbe {

// Quadrature, differentiation and extrapolation tables for polynomial order k (1..5).
// Everything is built in exact rational arithmetic and stored as double.
class Integrator {
 public:
  static constexpr int MAX_ORDER = 5;

  explicit Integrator(int k) : k_(k) {
    require(k >= 1 && k <= MAX_ORDER, "integration order must be in 1..5");
    build();
  }

  int k() const { return k_; }

  // P = M^{-1} with M_{ja} = j^a, j,a = 0..k
  double poly_interp(int a, int l) const { return P_[a * (k_ + 1) + l]; }
  // d/dx at x=m of the interpolant, coefficient of y_l
  double poly_diff(int m, int l) const { return D_[m * (k_ + 1) + l]; }
  // integral from m to n of the interpolant, coefficient of y_l
  double poly_integ(int m, int n, int l) const { return I_[(m * (k_ + 1) + n) * (k_ + 1) + l]; }
  // backward differentiation: y'(n) ~ h^{-1} sum_l a_l y_{n-l}
  double bd_weight(int l) const { return a_[l]; }
  // backward differentiation of order k+1 (l = 0..k+1), used by the time stepping
  double step_weight(int l) const { return b_[l]; }
  double start_weight(int n, int j) const { return I_[(0 * (k_ + 1) + n) * (k_ + 1) + j]; }
  double sigma(int l, int j) const { return gregory_weight(k_ + 1 + l, j); }
  double omega(int j) const { return omega_[j]; }
  // R_{m;r,s}
  double rcorr(int m, int r, int s) const { return R_[(m * (k_ + 1) + r) * (k_ + 1) + s]; }
  // y_{n+1} ~ sum_l extrap_{l} y_{n-l}
  double extrap_weight(int l) const { return ext_[l]; }

  // w_{n,j}: weight of y_j in int_0^{nh} y. For n <= k, j runs to k.
  double gregory_weight(int n, int j) const {
    if (n <= k_) return start_weight(n, j);
    double w = (j == 0 || j == n) ? 0.5 : 1.0;
    if (j <= k_) w += corr_[j];
    if (n - j <= k_) w += corr_[n - j];
    return w;
  }

  // Number of samples used by the rule for int_0^{nh}: max(n, k) + 1.
  int gregory_points(int n) const { return std::max(n, k_) + 1; }

 private:
  void build();

  int k_;
  std::vector<double> P_, D_, I_, R_, a_, b_, omega_, corr_, ext_;
};

inline void Integrator::build() {
  using rat = boost::multiprecision::cpp_rational;
  const int n = k_ + 1;

  // Invert the Vandermonde matrix exactly.
  std::vector<rat> m(n * n), p(n * n);
  for (int j = 0; j < n; ++j) {
    rat v = 1;
    for (int a = 0; a < n; ++a) {
      m[j * n + a] = v;
      v *= j;
    }
  }
  for (int i = 0; i < n; ++i) p[i * n + i] = 1;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    while (m[piv * n + c] == 0) ++piv;
    for (int j = 0; j < n; ++j) {
      std::swap(m[c * n + j], m[piv * n + j]);
      std::swap(p[c * n + j], p[piv * n + j]);
    }
    rat inv = 1 / m[c * n + c];
    for (int j = 0; j < n; ++j) m[c * n + j] *= inv, p[c * n + j] *= inv;
    for (int r = 0; r < n; ++r) {
      if (r == c || m[r * n + c] == 0) continue;
      rat f = m[r * n + c];
      for (int j = 0; j < n; ++j) m[r * n + j] -= f * m[c * n + j], p[r * n + j] -= f * p[c * n + j];
    }
  }

  auto ipow = [](rat x, int e) {
    rat r = 1;
    for (int i = 0; i < e; ++i) r *= x;
    return r;
  };
  auto fact = [](int e) {
    rat r = 1;
    for (int i = 2; i <= e; ++i) r *= i;
    return r;
  };

  P_.resize(n * n);
  for (int i = 0; i < n * n; ++i) P_[i] = static_cast<double>(p[i]);

  D_.assign(n * n, 0.0);
  for (int mm = 0; mm < n; ++mm)
    for (int l = 0; l < n; ++l) {
      rat s = 0;
      for (int a = 1; a < n; ++a) s += p[a * n + l] * a * ipow(mm, a - 1);
      D_[mm * n + l] = static_cast<double>(s);
    }

  I_.assign(n * n * n, 0.0);
  for (int mm = 0; mm < n; ++mm)
    for (int nn = 0; nn < n; ++nn)
      for (int l = 0; l < n; ++l) {
        rat s = 0;
        for (int a = 0; a < n; ++a) s += p[a * n + l] * (ipow(nn, a + 1) - ipow(mm, a + 1)) / (a + 1);
        I_[(mm * n + nn) * n + l] = static_cast<double>(s);
      }

  a_.resize(n);
  for (int l = 0; l < n; ++l) {
    rat s = 0;
    for (int a = 1; a < n; ++a) s += p[a * n + l] * a * ipow(0, a - 1);
    a_[l] = -static_cast<double>(s);
  }

  // order p = k+1: a_0 = sum_{j<=p} 1/j, a_j = (-1)^j C(p,j)/j
  b_.assign(n + 1, 0.0);
  {
    rat binom = 1, h0 = 0;
    for (int j = 1; j <= n; ++j) {
      binom = binom * (n - j + 1) / j;
      h0 += rat(1, j);
      b_[j] = static_cast<double>(((j % 2) ? -binom : binom) / j);
    }
    b_[0] = static_cast<double>(h0);
  }

  // int_0^m (m-x)^a x^b dx = m^{a+b+1} a! b! / (a+b+1)!
  R_.assign(n * n * n, 0.0);
  for (int mm = 0; mm < n; ++mm)
    for (int r = 0; r < n; ++r)
      for (int s = 0; s < n; ++s) {
        rat acc = 0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b)
            acc += p[a * n + r] * p[b * n + s] * ipow(mm, a + b + 1) * fact(a) * fact(b) / fact(a + b + 1);
        R_[(mm * n + r) * n + s] = static_cast<double>(acc);
      }

  // Adams-Moulton coefficients g_0 = 1, sum_{i<=p} g_i/(p+1-i) = 0
  std::vector<rat> g(k_ + 2);
  g[0] = 1;
  for (int q = 1; q <= k_ + 1; ++q) {
    rat s = 0;
    for (int i = 0; i < q; ++i) s += g[i] / (q + 1 - i);
    g[q] = -s;
  }
  // Gregory end correction: sum_{q=1}^k g_{q+1} (nabla^q y_n + (-1)^q Delta^q y_0)
  corr_.assign(n, 0.0);
  for (int i = 0; i <= k_; ++i) {
    rat s = 0;
    for (int q = std::max(i, 1); q <= k_; ++q) {
      rat binom = 1;
      for (int t = 0; t < i; ++t) binom = binom * (q - t) / (t + 1);
      s += g[q + 1] * ((i % 2) ? -1 : 1) * binom;
    }
    corr_[i] = static_cast<double>(s);
  }
  omega_.resize(n);
  for (int j = 0; j < n; ++j) omega_[j] = (j == 0 ? 0.5 : 1.0) + corr_[j];

  ext_.resize(n);
  for (int l = 0; l < n; ++l) {
    rat s = 0;
    for (int a = 0; a < n; ++a) s += p[a * n + l] * ((a % 2) ? -1 : 1);
    ext_[l] = static_cast<double>(s);
  }
}

// Shared tables, built on first use.
inline const Integrator& integrator(int k) {
  require(k >= 1 && k <= Integrator::MAX_ORDER, "integration order must be in 1..5");
  static std::array<std::unique_ptr<Integrator>, Integrator::MAX_ORDER + 1> cache;
  static std::mutex mtx;
  std::lock_guard lock(mtx);
  if (!cache[k]) cache[k] = std::make_unique<Integrator>(k);
  return *cache[k];
}

// Sample-based helpers. y holds equidistant samples with spacing h.

template <class T>
T poly_differentiate(int k, double h, std::span<const T> y, int m) {
  const auto& I = integrator(k);
  require(static_cast<int>(y.size()) > k && m >= 0 && m <= k, "poly_differentiate: bad range");
  T s{};
  for (int l = 0; l <= k; ++l) s += I.poly_diff(m, l) * y[l];
  return s / h;
}

template <class T>
T poly_integrate(int k, double h, std::span<const T> y, int m, int n) {
  const auto& I = integrator(k);
  require(static_cast<int>(y.size()) > k && m >= 0 && n >= 0 && m <= k && n <= k, "poly_integrate: bad range");
  T s{};
  for (int l = 0; l <= k; ++l) s += I.poly_integ(m, n, l) * y[l];
  return h * s;
}

// Value of the degree-k interpolant through y_0..y_k at x (in units of h).
template <class T>
T poly_interpolate(int k, std::span<const T> y, double x) {
  const auto& I = integrator(k);
  require(static_cast<int>(y.size()) > k, "poly_interpolate: need k+1 samples");
  T s{};
  double xa = 1.0;
  for (int a = 0; a <= k; ++a) {
    T c{};
    for (int l = 0; l <= k; ++l) c += I.poly_interp(a, l) * y[l];
    s += xa * c;
    xa *= x;
  }
  return s;
}

// Backward-differentiation derivative at index n >= k.
template <class T>
T bd_differentiate(int k, double h, std::span<const T> y, int n) {
  const auto& I = integrator(k);
  require(n >= k && n < static_cast<int>(y.size()), "bd_differentiate: need n >= k");
  T s{};
  for (int l = 0; l <= k; ++l) s += I.bd_weight(l) * y[n - l];
  return s / h;
}

// int_0^{nh} y(t) dt with the order-k Gregory rule.
template <class T>
T gregory_integrate(int k, double h, std::span<const T> y, int n) {
  const auto& I = integrator(k);
  require(n >= 0 && I.gregory_points(n) <= static_cast<int>(y.size()), "gregory_integrate: not enough samples");
  T s{};
  const int top = std::max(n, k);
  for (int j = 0; j <= top; ++j) s += I.gregory_weight(n, j) * y[j];
  return h * s;
}

// int_0^{mh} F(mh - t) G(t) dt for m <= k, F and G sampled on 0..k.
template <class T>
T boundary_convolve(int k, double h, std::span<const T> F, std::span<const T> G, int m) {
  const auto& I = integrator(k);
  require(m >= 0 && m <= k && static_cast<int>(F.size()) > k && static_cast<int>(G.size()) > k,
          "boundary_convolve: bad range");
  T s{};
  for (int r = 0; r <= k; ++r)
    for (int q = 0; q <= k; ++q) s += I.rcorr(m, r, q) * F[r] * G[q];
  return h * s;
}

// Extrapolates y_{n+1} from y_{n-k..n}.
template <class T>
T extrapolate(int k, std::span<const T> y, int n) {
  const auto& I = integrator(k);
  require(n >= k && n < static_cast<int>(y.size()), "extrapolate: need n >= k");
  T s{};
  for (int l = 0; l <= k; ++l) s += I.extrap_weight(l) * y[n - l];
  return s;
}

}  // namespace kbe
