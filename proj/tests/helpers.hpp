#pragma once

#include <random>

#include "kbe/contour.hpp"
#include "kbe/freegf.hpp"

namespace testutil {

using namespace kbe;

inline ContourFunction constant_eps(int nt, const CMatrix& e) {
  ContourFunction f(nt, static_cast<int>(e.rows()));
  f.set_constant(e);
  return f;
}

inline CMatrix scalar(cplx x) { return CMatrix::Constant(1, 1, x); }

inline CMatrix random_hermitian(std::mt19937& rng, int d, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  CMatrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = cplx(nd(rng), nd(rng));
  return 0.5 * (a + a.adjoint());
}

// Largest entrywise deviation over slices -1..n on all stored components.
inline double max_diff(const HermMatrix& a, const HermMatrix& b, int n = -2) {
  if (n == -2) n = std::min(a.nt(), b.nt());
  const int es = a.element_size();
  double m = 0.0;
  auto upd = [&](const cplx* x, const cplx* y) {
    for (int e = 0; e < es; ++e) m = std::max(m, std::abs(x[e] - y[e]));
  };
  for (int i = 0; i <= a.ntau(); ++i) upd(a.mat_ptr(i), b.mat_ptr(i));
  for (int t = 0; t <= n; ++t) {
    for (int j = 0; j <= t; ++j) upd(a.ret_ptr(t, j), b.ret_ptr(t, j)), upd(a.les_ptr(j, t), b.les_ptr(j, t));
    for (int i = 0; i <= a.ntau(); ++i) upd(a.tv_ptr(t, i), b.tv_ptr(t, i));
  }
  return m;
}

// Random hermitian-symmetric function: a free GF of a random hermitian matrix,
// so all components are mutually consistent.
inline HermMatrix random_free_gf(std::mt19937& rng, int nt, int ntau, int d, int sig, double beta, double h) {
  HermMatrix g(nt, ntau, d, sig);
  CMatrix e = random_hermitian(rng, d);
  if (sig == BOSON) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(e);
    e += (0.5 - es.eigenvalues().minCoeff()) * CMatrix::Identity(d, d);
  }
  green_from_H(g, 0.0, e, beta, h);
  return g;
}

}  // namespace testutil
