#pragma once

#include "core.hpp"
#include "weights.hpp"

// Matrix-valued Volterra equations on an equidistant grid t_n = n h:
//   VIDE  y'(t) + p(t) y(t) + int_0^t k(t,s) y(s) ds = q(t)
//   VIE   y(t) + int_0^t k(t,s) y(s) ds = q(t)
// and their conjugate forms, where y multiplies p and k from the left:
//   y'(t) + y(t) p(t) + int_0^t y(s) k(s,t) ds = q(t).
// Inputs are supplied through callbacks that write one d x d block:
//   kern(i, j, out) -> k(t_i, t_j), mass(n, out) -> p(t_n), src(n, out) -> q(t_n).
// y points to consecutive d x d blocks y_0, y_1, ...
namespace kbe::volterra {

enum class Form { Direct, Conjugate };

namespace detail {

// Solves A X = R (Direct) or X A = R (Conjugate) for d x d blocks, X written to x.
inline void solve_block(std::vector<cplx>& a, const cplx* r, cplx* x, int d, Form form) {
  if (form == Form::Direct) {
    blk::copy(x, r, d);
    lu_solve(a, d, x, d);
    return;
  }
  // X A = R  <=>  A^T X^T = R^T
  std::vector<cplx> at(d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) at[i * d + j] = a[j * d + i], x[i * d + j] = r[j * d + i];
  lu_solve(at, d, x, d);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) std::swap(x[i * d + j], x[j * d + i]);
}

// acc += s * (Direct: k y, Conjugate: y k)
inline void apply(cplx* acc, cplx s, const cplx* kv, const cplx* yv, int d, Form form) {
  if (form == Form::Direct)
    blk::gemm_acc(acc, s, kv, yv, d);
  else
    blk::gemm_acc(acc, s, yv, kv, d);
}

// Start-up: solve for y_1..y_k from y_0. With differential = false the
// h^{-1} D and p terms are absent (VIE).
template <class K, class P, class Q>
void start(int k, double h, int d, K&& kern, P&& mass, Q&& src, cplx* y, Form form, bool differential) {
  const auto& ig = integrator(k);
  const int es = d * d, dim = k * d;
  std::vector<cplx> A(dim * dim, cplx{}), B(dim * d, cplx{}), kv(es), pv(es), blockm(es);
  // Block M_{n,l} acting on y_l in equation n; in conjugate form it acts from the right.
  auto block = [&](int n, int l) {
    blk::zero(blockm.data(), d);
    if (differential) {
      for (int i = 0; i < d; ++i) blockm[i * d + i] += ig.poly_diff(n, l) / h;
      if (n == l) {
        mass(n, pv.data());
        blk::axpy(blockm.data(), 1.0, pv.data(), d);
      }
    } else if (n == l) {
      for (int i = 0; i < d; ++i) blockm[i * d + i] += 1.0;
    }
    if (form == Form::Direct)
      kern(n, l, kv.data());
    else
      kern(l, n, kv.data());
    blk::axpy(blockm.data(), h * ig.start_weight(n, l), kv.data(), d);
  };
  for (int n = 1; n <= k; ++n) {
    cplx* rhs = B.data() + (n - 1) * es;
    src(n, rhs);
    block(n, 0);
    // rhs -= M_{n,0} y_0 (or y_0 M_{n,0})
    detail::apply(rhs, -1.0, blockm.data(), y, d, form);
    for (int l = 1; l <= k; ++l) {
      block(n, l);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          // Direct rows index the equation, conjugate rows index the transposed system.
          const cplx v = form == Form::Direct ? blockm[i * d + j] : blockm[j * d + i];
          A[((n - 1) * d + i) * dim + (l - 1) * d + j] = v;
        }
    }
  }
  if (form == Form::Conjugate) {
    for (int n = 0; n < k; ++n) {
      cplx* b = B.data() + n * es;
      for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) std::swap(b[i * d + j], b[j * d + i]);
    }
  }
  // B is stacked (k*d) x d, row-major: block n occupies rows n*d..n*d+d-1.
  lu_solve(A, dim, B.data(), d);
  for (int n = 1; n <= k; ++n) {
    const cplx* b = B.data() + (n - 1) * es;
    cplx* yn = y + n * es;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) yn[i * d + j] = form == Form::Direct ? b[i * d + j] : b[j * d + i];
  }
}

template <class K, class P, class Q>
void step(int k, double h, int d, int n, K&& kern, P&& mass, Q&& src, cplx* y, Form form, bool differential) {
  require(n > k, "volterra step requires n > k");
  const auto& ig = integrator(k);
  const int es = d * d;
  std::vector<cplx> rhs(es), kv(es), lhs(es, cplx{});
  src(n, rhs.data());
  if (differential)
    for (int l = 1; l <= k + 1; ++l) blk::axpy(rhs.data(), -ig.step_weight(l) / h, y + (n - l) * es, d);
  for (int l = 0; l < n; ++l) {
    if (form == Form::Direct)
      kern(n, l, kv.data());
    else
      kern(l, n, kv.data());
    detail::apply(rhs.data(), -h * ig.gregory_weight(n, l), kv.data(), y + l * es, d, form);
  }
  if (differential) {
    mass(n, lhs.data());
    for (int i = 0; i < d; ++i) lhs[i * d + i] += ig.step_weight(0) / h;
  } else {
    for (int i = 0; i < d; ++i) lhs[i * d + i] += 1.0;
  }
  kern(n, n, kv.data());
  blk::axpy(lhs.data(), h * ig.gregory_weight(n, n), kv.data(), d);
  solve_block(lhs, rhs.data(), y + n * es, d, form);
}

struct NoMass {
  void operator()(int, cplx*) const {}
};

}  // namespace detail

// VIDE start-up: y_0 given, solves y_1..y_k jointly.
template <class K, class P, class Q>
void vide_start(int k, double h, int d, K&& kern, P&& mass, Q&& src, cplx* y, Form form = Form::Direct) {
  detail::start(k, h, d, kern, mass, src, y, form, true);
}

// VIDE time step n > k: y_0..y_{n-1} given, solves y_n.
template <class K, class P, class Q>
void vide_step(int k, double h, int d, int n, K&& kern, P&& mass, Q&& src, cplx* y, Form form = Form::Direct) {
  detail::step(k, h, d, n, kern, mass, src, y, form, true);
}

// VIE start-up: sets y_0 = q_0 and solves y_1..y_k.
template <class K, class Q>
void vie_start(int k, double h, int d, K&& kern, Q&& src, cplx* y, Form form = Form::Direct) {
  src(0, y);
  detail::start(k, h, d, kern, detail::NoMass{}, src, y, form, false);
}

template <class K, class Q>
void vie_step(int k, double h, int d, int n, K&& kern, Q&& src, cplx* y, Form form = Form::Direct) {
  detail::step(k, h, d, n, kern, detail::NoMass{}, src, y, form, false);
}

// Solves a VIDE on t_0..t_N: start-up followed by time steps.
template <class K, class P, class Q>
void vide_solve(int k, double h, int d, int N, K&& kern, P&& mass, Q&& src, cplx* y, Form form = Form::Direct) {
  require(N >= k, "vide_solve: need at least k+1 grid points");
  vide_start(k, h, d, kern, mass, src, y, form);
  for (int n = k + 1; n <= N; ++n) vide_step(k, h, d, n, kern, mass, src, y, form);
}

template <class K, class Q>
void vie_solve(int k, double h, int d, int N, K&& kern, Q&& src, cplx* y, Form form = Form::Direct) {
  require(N >= k, "vie_solve: need at least k+1 grid points");
  vie_start(k, h, d, kern, src, y, form);
  for (int n = k + 1; n <= N; ++n) vie_step(k, h, d, n, kern, src, y, form);
}

}  // namespace kbe::volterra
