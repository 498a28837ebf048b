#pragma once

#include "dyson.hpp"

// Contour integral equation G + F * G = Q (equivalently G + G * F^dagger = Q)
// for hermitian-symmetric G and Q. fcc is the conjugate function F^dagger.
namespace kbe {

namespace detail {

inline void check_vie2_args(const HermMatrix& g, const HermMatrix& f, const HermMatrix& fcc, const HermMatrix& q,
                            int nt_needed) {
  require(g.size() == f.size() && g.size() == q.size() && fcc.size() == f.size(), "vie2: size mismatch");
  require(g.ntau() == f.ntau() && g.ntau() == q.ntau() && fcc.ntau() == f.ntau(), "vie2: ntau mismatch");
  require(g.sig() == f.sig() && g.sig() == q.sig() && fcc.sig() == f.sig(), "vie2: statistics mismatch");
  require(g.nt() >= nt_needed && f.nt() >= nt_needed && q.nt() >= nt_needed && fcc.nt() == f.nt(),
          "vie2: inputs do not cover the requested time slices");
}

}  // namespace detail

inline MatsubaraReport vie2_mat(HermMatrix& g, const HermMatrix& f, const HermMatrix& fcc, const HermMatrix& q,
                                double beta, int k, const MatsubaraOptions& opt = {}) {
  detail::check_vie2_args(g, f, fcc, q, -1);
  require(beta > 0.0, "vie2_mat: beta must be positive");
  const int d = g.size(), es = d * d, ntau = g.ntau(), sig = g.sig();
  const matsubara::FrequencyGrid grid{sig, beta, opt.fourier_factor * ntau};
  auto fw = matsubara::to_frequency(f.mat_ptr(0), ntau, d, grid);
  auto qw = matsubara::to_frequency(q.mat_ptr(0), ntau, d, grid);
  std::vector<cplx> lw(fw.size()), a;
  for (int i = 0; i < grid.count(); ++i) {
    blk::identity(lw.data() + i * es, d);
    blk::axpy(lw.data() + i * es, 1.0, fw.data() + i * es, d);
    a.assign(lw.begin() + i * es, lw.begin() + (i + 1) * es);
    lu_solve(a, d, qw.data() + i * es, d);
  }
  // F * G is continuous across the boundary, so G inherits the jump of Q.
  const auto jq = matsubara::jump(q.mat_ptr(0), ntau, d, sig);
  auto x = matsubara::to_time(qw.data(), jq.data(), ntau, d, grid);
  MatsubaraReport rep;
  if (opt.method == MatsubaraMethod::Fixpoint) {
    auto residual = [&](const std::vector<cplx>& xv) {
      const HermMatrix xh = detail::mat_only(xv, ntau, d, sig);
      std::vector<cplx> r(xv);
      Convolver(f, fcc, nullptr, xh, xh, beta, 1.0, k).mat(r.data(), 1.0);
      for (size_t e = 0; e < r.size(); ++e) r[e] -= q.mat_data()[e];
      return r;
    };
    rep = detail::newton_matsubara(x, residual, lw, ntau, d, grid, opt);
  }
  detail::hermitian_part(x, d);
  std::copy(x.begin(), x.end(), g.mat_data().begin());
  return rep;
}

inline void vie2_start(HermMatrix& g, const HermMatrix& f, const HermMatrix& fcc, const HermMatrix& q, double beta,
                       double h, int k) {
  detail::check_vie2_args(g, f, fcc, q, k);
  const auto& ig = integrator(k);
  const int d = g.size(), es = d * d, ntau = g.ntau();
  ContourAccess fa(f, fcc), qa(q, q);
  std::vector<cplx> sc(es), blockm(es);

  // Retarded triangle, column by column.
  for (int n = 0; n <= k; ++n) blk::copy(g.ret_ptr(n, n), q.ret_ptr(n, n), d);
  for (int m = 0; m < k; ++m) {
    const int nu = k - m, dim = nu * d;
    std::vector<cplx> A(dim * dim, cplx{}), B(dim * d, cplx{}), y((k + 1) * es);
    for (int l = 0; l < m; ++l) blk::neg_adjoint(y.data() + l * es, g.ret_ptr(m, l), d);
    blk::copy(y.data() + m * es, g.ret_ptr(m, m), d);
    for (int n = m + 1; n <= k; ++n) {
      const int row = n - m - 1;
      blk::copy(B.data() + row * es, q.ret_ptr(n, m), d);
      for (int l = 0; l <= k; ++l) {
        detail::scaled_copy(blockm.data(), fa.ret_ext(n, l, sc.data()), h * ig.poly_integ(m, n, l), d);
        if (n == l)
          for (int i = 0; i < d; ++i) blockm[i * d + i] += 1.0;
        if (l <= m) {
          blk::gemm_acc(B.data() + row * es, -1.0, blockm.data(), y.data() + l * es, d);
        } else {
          for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) A[(row * d + i) * dim + (l - m - 1) * d + j] = blockm[i * d + j];
        }
      }
    }
    lu_solve(A, dim, B.data(), d);
    for (int l = m + 1; l <= k; ++l) blk::copy(g.ret_ptr(l, m), B.data() + (l - m - 1) * es, d);
  }

  auto kern = [&](int i, int j, cplx* out) { blk::copy(out, fa.ret_ext(i, j, sc.data()), d); };
  Convolver cf(f, fcc, nullptr, g, g, beta, h, k);

  // Left-mixing columns.
  std::vector<cplx> qtv((k + 1) * (ntau + 1) * es);
  for (int n = 0; n <= k; ++n) {
    cplx* row = qtv.data() + n * (ntau + 1) * es;
    std::copy(q.tv_ptr(n, 0), q.tv_ptr(n, 0) + (ntau + 1) * es, row);
    cf.tv23_row(n, row, -1.0);
  }
  std::vector<cplx> y((k + 1) * es);
  for (int m = 0; m <= ntau; ++m) {
    auto src = [&](int n, cplx* out) { blk::copy(out, qtv.data() + (n * (ntau + 1) + m) * es, d); };
    volterra::vie_start(k, h, d, kern, src, y.data());
    for (int n = 0; n <= k; ++n) blk::copy(g.tv_ptr(n, m), y.data() + n * es, d);
  }

  // Lesser columns.
  std::vector<cplx> ql((k + 1) * es);
  for (int n = 0; n <= k; ++n) {
    for (int l = 0; l <= k; ++l) {
      const cplx* p = qa.les(l, n, ql.data() + l * es);
      if (p != ql.data() + l * es) blk::copy(ql.data() + l * es, p, d);
    }
    cf.les2_column(n, 0, k, ql.data(), -1.0);
    cf.les3_column(n, 0, k, ql.data(), -1.0);
    auto src = [&](int l, cplx* out) { blk::copy(out, ql.data() + l * es, d); };
    volterra::vie_start(k, h, d, kern, src, y.data());
    for (int l = 0; l <= n; ++l) blk::copy(g.les_ptr(l, n), y.data() + l * es, d);
    detail::antihermitian_les_diag(g, n);
  }
}

namespace detail {

// G^R(n,m) for n - m <= k (m < n) from the end-point rule over t_{n-k}..t_n.
inline void vie2_ret_band(int n, int m, HermMatrix& g, const HermMatrix& f, const HermMatrix& q, double h, int k) {
  const auto& ig = integrator(k);
  const int d = g.size(), es = d * d;
  ContourAccess ga(g, g);
  std::vector<cplx> rhs(es), lhs(es), sc(es);
  blk::copy(rhs.data(), q.ret_ptr(n, m), d);
  for (int j = 1; j <= k; ++j)
    blk::gemm_acc(rhs.data(), -h * ig.start_weight(n - m, j), f.ret_ptr(n, n - j), ga.ret_ext(n - j, m, sc.data()), d);
  blk::identity(lhs.data(), d);
  blk::axpy(lhs.data(), h * ig.start_weight(n - m, 0), f.ret_ptr(n, n), d);
  lu_solve(lhs, d, rhs.data(), d);
  blk::copy(g.ret_ptr(n, m), rhs.data(), d);
}

// G^R(n,m) for n - m > k: one VIE step along the first argument.
inline void vie2_ret_step(int n, int m, HermMatrix& g, const HermMatrix& f, const HermMatrix& q, double h, int k) {
  const int d = g.size(), es = d * d, N = n - m;
  std::vector<cplx> y((N + 1) * es);
  for (int b = 0; b < N; ++b) blk::copy(y.data() + b * es, g.ret_ptr(m + b, m), d);
  auto kern = [&](int a, int b, cplx* out) { blk::copy(out, f.ret_ptr(m + a, m + b), d); };
  auto src = [&](int, cplx* out) { blk::copy(out, q.ret_ptr(n, m), d); };
  volterra::vie_step(k, h, d, N, kern, src, y.data());
  blk::copy(g.ret_ptr(n, m), y.data() + N * es, d);
}

inline void vie2_tv_step(int n, HermMatrix& g, const HermMatrix& f, const HermMatrix& fcc, const HermMatrix& q,
                         double beta, double h, int k) {
  const auto& ig = integrator(k);
  const int d = g.size(), es = d * d, ntau = g.ntau();
  for (int m = 0; m <= ntau; ++m) blk::zero(g.tv_ptr(n, m), d);
  std::vector<cplx> rhs(q.tv_ptr(n, 0), q.tv_ptr(n, 0) + (ntau + 1) * es);
  Convolver cf(f, fcc, nullptr, g, g, beta, h, k);
  cf.tv23_row(n, rhs.data(), -1.0);
  cf.tv1_row(n, rhs.data(), -1.0);
  std::vector<cplx> lhs(es);
  blk::identity(lhs.data(), d);
  blk::axpy(lhs.data(), h * ig.gregory_weight(n, n), f.ret_ptr(n, n), d);
  const int nrhs = (ntau + 1) * d;
  std::vector<cplx> b(d * nrhs);
  for (int m = 0; m <= ntau; ++m)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) b[i * nrhs + m * d + j] = rhs[m * es + i * d + j];
  lu_solve(lhs, d, b.data(), nrhs);
  for (int m = 0; m <= ntau; ++m)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) g.tv_ptr(n, m)[i * d + j] = b[i * nrhs + m * d + j];
}

}  // namespace detail

inline void vie2_timestep(int n, HermMatrix& g, const HermMatrix& f, const HermMatrix& fcc, const HermMatrix& q,
                          double beta, double h, int k, StepVariant variant = StepVariant::Serial, int threads = 0) {
  detail::check_vie2_args(g, f, fcc, q, n);
  require(n > k, "vie2_timestep: n must exceed the solver order (use vie2_start)");
  const int d = g.size(), es = d * d;
  ContourAccess fa(f, fcc), qa(q, q);

  blk::copy(g.ret_ptr(n, n), q.ret_ptr(n, n), d);
  auto ret_col = [&](int m) {
    if (n - m > k)
      detail::vie2_ret_step(n, m, g, f, q, h, k);
    else
      detail::vie2_ret_band(n, m, g, f, q, h, k);
  };
  if (variant == StepVariant::Serial) {
    for (int m = 0; m < n; ++m) ret_col(m);
  } else {
    parallel_for(0, n - k, ret_col, threads);
    for (int m = n - k; m < n; ++m) ret_col(m);
  }
  detail::vie2_tv_step(n, g, f, fcc, q, beta, h, k);

  if (variant == StepVariant::Serial) {
    std::vector<cplx> ql((n + 1) * es), sc(es);
    for (int l = 0; l <= n; ++l) blk::copy(ql.data() + l * es, q.les_ptr(l, n), d);
    Convolver cf(f, fcc, nullptr, g, g, beta, h, k);
    cf.les2_column(n, 0, n, ql.data(), -1.0);
    cf.les3_column(n, 0, n, ql.data(), -1.0);
    auto kern = [&](int i, int j, cplx* out) { blk::copy(out, fa.ret_ext(i, j, sc.data()), d); };
    auto src = [&](int l, cplx* out) { blk::copy(out, ql.data() + l * es, d); };
    volterra::vie_solve(k, h, d, n, kern, src, g.les_ptr(0, n));
    detail::antihermitian_les_diag(g, n);
    return;
  }

  // Rows of the conjugate equation G^<(m,.) + G^< * (F^dagger)^A = Q^< - C1 - C3.
  std::vector<cplx> ql((n + 1) * es);
  for (int m = 0; m <= n; ++m) blk::copy(ql.data() + m * es, q.les_ptr(m, n), d);
  Convolver cg(g, g, nullptr, fcc, f, beta, h, k);
  cg.les1_column(n, 0, n, ql.data(), -1.0);
  cg.les3_column(n, 0, n, ql.data(), -1.0);
  ContourAccess ga(g, g);
  auto row = [&](int m) {
    std::vector<cplx> y((n + 1) * es);
    for (int j = 0; j < n; ++j) {
      const cplx* p = ga.les(m, j, y.data() + j * es);
      if (p != y.data() + j * es) blk::copy(y.data() + j * es, p, d);
    }
    auto kern = [&](int s, int t, cplx* out) { blk::adjoint(out, f.ret_ptr(t, s), d); };
    auto src = [&](int, cplx* out) { blk::copy(out, ql.data() + m * es, d); };
    volterra::vie_step(k, h, d, n, kern, src, y.data(), volterra::Form::Conjugate);
    blk::copy(g.les_ptr(m, n), y.data() + n * es, d);
  };
  parallel_for(0, n, row, threads);
  row(n);
  detail::antihermitian_les_diag(g, n);
}

inline MatsubaraReport vie2(HermMatrix& g, const HermMatrix& f, const HermMatrix& fcc, const HermMatrix& q,
                            double beta, double h, int k, const MatsubaraOptions& opt = {},
                            StepVariant variant = StepVariant::Serial) {
  auto rep = vie2_mat(g, f, fcc, q, beta, k, opt);
  if (g.nt() < 0) return rep;
  require(g.nt() >= k, "vie2: nt must be at least k");
  vie2_start(g, f, fcc, q, beta, h, k);
  for (int n = k + 1; n <= g.nt(); ++n) vie2_timestep(n, g, f, fcc, q, beta, h, k, variant);
  return rep;
}

// Largest entry of F * Q - Q * F^dagger on slice n (-1 for Matsubara). A hermitian
// solution exists only if this vanishes up to discretization errors.
inline double vie2_compatibility(int n, const HermMatrix& f, const HermMatrix& fcc, const HermMatrix& q, double beta,
                                 double h, int k) {
  HermMatrix ra(q.nt(), q.ntau(), q.size(), q.sig()), rb = ra;
  convolution_timestep(n, ra, f, fcc, nullptr, q, q, beta, h, k);
  convolution_timestep(n, rb, q, q, nullptr, fcc, f, beta, h, k);
  double m = 0.0;
  if (n == -1) {
    for (int i = 0; i <= q.ntau(); ++i)
      for (int e = 0; e < q.element_size(); ++e) m = std::max(m, std::abs(ra.mat_ptr(i)[e] - rb.mat_ptr(i)[e]));
    return m;
  }
  for (int j = 0; j <= n; ++j)
    for (int e = 0; e < q.element_size(); ++e) {
      m = std::max(m, std::abs(ra.ret_ptr(n, j)[e] - rb.ret_ptr(n, j)[e]));
      m = std::max(m, std::abs(ra.les_ptr(j, n)[e] - rb.les_ptr(j, n)[e]));
    }
  return m;
}

}  // namespace kbe
