#pragma once

#include "convolution.hpp"
#include "freegf.hpp"
#include "matsubara.hpp"
#include "volterra.hpp"

// Dyson equation  [i d/dt + mu - eps(t)] G(t,t') - int_C Sigma(t,s) G(s,t') ds = delta_C(t,t')
// for hermitian-symmetric G and Sigma.
namespace kbe {

enum class MatsubaraMethod { Fourier, Fixpoint };

struct MatsubaraOptions {
  MatsubaraMethod method = MatsubaraMethod::Fixpoint;
  double tolerance = 1e-10;
  int max_iterations = 8;
  int fourier_factor = 10;  // number of frequencies per tau point
};

struct MatsubaraReport {
  int iterations = 0;
  double residual = 0.0;
  bool converged = true;
};

enum class StepVariant { Serial, Parallel };

namespace detail {

inline double max_abs(const std::vector<cplx>& v) {
  double m = 0.0;
  for (auto x : v) m = std::max(m, std::abs(x));
  return m;
}

// The exact Matsubara function is hermitian at every tau; the discretized
// convolution is not, so drop the anti-hermitian residue.
inline void hermitian_part(std::vector<cplx>& x, int d) {
  const int es = d * d;
  for (size_t b = 0; b < x.size(); b += es)
    for (int r = 0; r < d; ++r)
      for (int c = r; c < d; ++c) {
        const cplx v = 0.5 * (x[b + r * d + c] + std::conj(x[b + c * d + r]));
        x[b + r * d + c] = v;
        x[b + c * d + r] = std::conj(v);
      }
}

// G^<(t,t) of a hermitian-symmetric function is anti-hermitian; the column
// scheme only gets that to its truncation error.
inline void antihermitian_les_diag(HermMatrix& g, int n) {
  const int d = g.size();
  cplx* x = g.les_ptr(n, n);
  for (int r = 0; r < d; ++r)
    for (int c = r; c < d; ++c) {
      const cplx v = 0.5 * (x[r * d + c] - std::conj(x[c * d + r]));
      x[r * d + c] = v;
      x[c * d + r] = -std::conj(v);
    }
}

// Newton refinement of a Matsubara solution X. residual(X) returns R(tau) on
// ntau+1 blocks; lw holds per-frequency blocks L(i omega) such that the linearized
// correction solves L(i omega) dX(i omega) = R(i omega).
template <class Residual>
MatsubaraReport newton_matsubara(std::vector<cplx>& x, Residual&& residual, const std::vector<cplx>& lw, int ntau,
                                 int d, const matsubara::FrequencyGrid& grid, const MatsubaraOptions& opt) {
  MatsubaraReport rep;
  rep.converged = false;
  const int es = d * d;
  std::vector<cplx> a;
  for (int it = 0; it < opt.max_iterations; ++it) {
    auto r = residual(x);
    auto rw = matsubara::to_frequency(r.data(), ntau, d, grid);
    for (int i = 0; i < grid.count(); ++i) {
      a.assign(lw.begin() + i * es, lw.begin() + (i + 1) * es);
      lu_solve(a, d, rw.data() + i * es, d);
    }
    const auto j = matsubara::jump(r.data(), ntau, d, grid.sig);
    auto dx = matsubara::to_time(rw.data(), j.data(), ntau, d, grid);
    for (size_t e = 0; e < x.size(); ++e) x[e] -= dx[e];
    rep.iterations = it + 1;
    rep.residual = max_abs(dx);
    if (rep.residual < opt.tolerance) {
      rep.converged = true;
      break;
    }
  }
  return rep;
}

inline HermMatrix mat_only(const std::vector<cplx>& x, int ntau, int d, int sig) {
  HermMatrix m(-1, ntau, d, sig);
  std::copy(x.begin(), x.end(), m.mat_data().begin());
  return m;
}

inline void check_dyson_args(const HermMatrix& g, const ContourFunction& eps, const HermMatrix& sigma, int nt_needed) {
  require(g.size() == sigma.size() && g.size() == eps.size(), "dyson: size mismatch");
  require(g.ntau() == sigma.ntau(), "dyson: ntau mismatch between G and Sigma");
  require(g.sig() == sigma.sig(), "dyson: G and Sigma have different statistics");
  require(g.nt() >= nt_needed && sigma.nt() >= nt_needed && eps.nt() >= nt_needed,
          "dyson: G, Sigma or eps do not cover the requested time slices");
}

// Block writers used as Volterra callbacks.
inline void scaled_copy(cplx* out, const cplx* src, cplx s, int d) {
  for (int e = 0; e < d * d; ++e) out[e] = s * src[e];
}

inline void shifted_h(cplx* out, const ContourFunction& eps, int n, double mu, cplx s, int d) {
  const cplx* e = eps.ptr(n);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out[i * d + j] = s * (e[i * d + j] - (i == j ? mu : 0.0));
}

}  // namespace detail

// Matsubara component of G.
inline MatsubaraReport dyson_mat(HermMatrix& g, double mu, const ContourFunction& eps, const HermMatrix& sigma,
                                 double beta, int k, const MatsubaraOptions& opt = {}) {
  detail::check_dyson_args(g, eps, sigma, -1);
  require(beta > 0.0, "dyson_mat: beta must be positive");
  require(opt.fourier_factor >= 1, "dyson_mat: fourier_factor must be >= 1");
  const int d = g.size(), es = d * d, ntau = g.ntau(), sig = g.sig();
  const matsubara::FrequencyGrid grid{sig, beta, opt.fourier_factor * ntau};
  auto sw = matsubara::to_frequency(sigma.mat_ptr(0), ntau, d, grid);
  std::vector<cplx> a, gw(sw.size());
  for (int i = 0; i < grid.count(); ++i) {
    a.assign(es, cplx{});
    const cplx z = I * grid.omega(i) + mu;
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) a[r * d + c] = (r == c ? z : 0.0) - eps.ptr(-1)[r * d + c] - sw[i * es + r * d + c];
    blk::identity(gw.data() + i * es, d);
    lu_solve(a, d, gw.data() + i * es, d);
  }
  std::vector<cplx> id(es);
  blk::identity(id.data(), d);
  auto x = matsubara::to_time(gw.data(), id.data(), ntau, d, grid);
  MatsubaraReport rep;
  if (opt.method == MatsubaraMethod::Fixpoint) {
    // G = g0 + K * G with K = g0 * Sigma
    std::vector<cplx> g0;
    free_matsubara(g0, eps.get(-1), mu, beta, ntau, sig);
    const HermMatrix g0h = detail::mat_only(g0, ntau, d, sig);
    std::vector<cplx> kv((ntau + 1) * es, cplx{});
    Convolver(g0h, g0h, nullptr, sigma, sigma, beta, 1.0, k).mat(kv.data(), 1.0);
    const HermMatrix kh = detail::mat_only(kv, ntau, d, sig);
    auto kw = matsubara::to_frequency(kv.data(), ntau, d, grid);
    std::vector<cplx> lw(kw.size());
    for (int i = 0; i < grid.count(); ++i) {
      blk::identity(lw.data() + i * es, d);
      blk::axpy(lw.data() + i * es, -1.0, kw.data() + i * es, d);
    }
    auto residual = [&](const std::vector<cplx>& xv) {
      const HermMatrix xh = detail::mat_only(xv, ntau, d, sig);
      std::vector<cplx> r(xv);
      Convolver(kh, kh, nullptr, xh, xh, beta, 1.0, k).mat(r.data(), -1.0);
      for (size_t e = 0; e < r.size(); ++e) r[e] -= g0[e];
      return r;
    };
    rep = detail::newton_matsubara(x, residual, lw, ntau, d, grid, opt);
  }
  detail::hermitian_part(x, d);
  std::copy(x.begin(), x.end(), g.mat_data().begin());
  return rep;
}

// Slices 0..k of G by the polynomial start-up scheme; requires G^M and Sigma on slices -1..k.
inline void dyson_start(HermMatrix& g, double mu, const ContourFunction& eps, const HermMatrix& sigma, double beta,
                        double h, int k) {
  detail::check_dyson_args(g, eps, sigma, k);
  const auto& ig = integrator(k);
  const int d = g.size(), es = d * d, ntau = g.ntau();
  ContourAccess sa(sigma, sigma);
  init_from_matsubara(g);
  std::vector<cplx> sc(es), blockm(es);

  // Retarded: columns m = 0..k-1 of the (k+1) x (k+1) start triangle.
  for (int n = 0; n <= k; ++n) {
    blk::identity(g.ret_ptr(n, n), d);
    blk::scale(g.ret_ptr(n, n), -I, d);
  }
  for (int m = 0; m < k; ++m) {
    const int nu = k - m, dim = nu * d;
    std::vector<cplx> A(dim * dim, cplx{}), B(dim * d, cplx{}), y((k + 1) * es);
    for (int l = 0; l < m; ++l) blk::neg_adjoint(y.data() + l * es, g.ret_ptr(m, l), d);
    blk::copy(y.data() + m * es, g.ret_ptr(m, m), d);
    for (int n = m + 1; n <= k; ++n) {
      const int row = n - m - 1;
      for (int l = 0; l <= k; ++l) {
        detail::scaled_copy(blockm.data(), sa.ret_ext(n, l, sc.data()), -h * ig.poly_integ(m, n, l), d);
        for (int i = 0; i < d; ++i) blockm[i * d + i] += I * ig.poly_diff(n, l) / h;
        if (n == l) {
          const cplx* e = eps.ptr(n);
          for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) blockm[i * d + j] -= e[i * d + j] - (i == j ? mu : 0.0);
        }
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

  auto kern = [&](int i, int j, cplx* out) { detail::scaled_copy(out, sa.ret_ext(i, j, sc.data()), I, d); };
  auto mass = [&](int n, cplx* out) { detail::shifted_h(out, eps, n, mu, I, d); };
  Convolver cs(sigma, sigma, nullptr, g, g, beta, h, k);

  // Left-mixing: one start-up problem per tau point.
  std::vector<cplx> q((k + 1) * (ntau + 1) * es, cplx{});
  for (int n = 1; n <= k; ++n) cs.tv23_row(n, q.data() + n * (ntau + 1) * es, -I);
  std::vector<cplx> y((k + 1) * es);
  for (int m = 0; m <= ntau; ++m) {
    blk::copy(y.data(), g.tv_ptr(0, m), d);
    auto src = [&](int n, cplx* out) { blk::copy(out, q.data() + (n * (ntau + 1) + m) * es, d); };
    volterra::vide_start(k, h, d, kern, mass, src, y.data());
    for (int n = 1; n <= k; ++n) blk::copy(g.tv_ptr(n, m), y.data() + n * es, d);
  }

  // Lesser: columns n = 0..k, solved along the first time argument.
  std::vector<cplx> ql((k + 1) * es);
  for (int n = 0; n <= k; ++n) {
    std::fill(ql.begin(), ql.end(), cplx{});
    cs.les2_column(n, 1, k, ql.data(), -I);
    cs.les3_column(n, 1, k, ql.data(), -I);
    blk::neg_adjoint(y.data(), g.tv_ptr(n, 0), d);
    auto src = [&](int m, cplx* out) { blk::copy(out, ql.data() + m * es, d); };
    volterra::vide_start(k, h, d, kern, mass, src, y.data());
    for (int m = 0; m <= n; ++m) blk::copy(g.les_ptr(m, n), y.data() + m * es, d);
    detail::antihermitian_les_diag(g, n);
  }
}

namespace detail {

// G^R(n, n-l) for l = lmax..0 from the conjugate equation in the second time argument.
inline void dyson_ret_rows(int n, int lmax, HermMatrix& g, double mu, const ContourFunction& eps,
                           const ContourAccess& sa, double h, int k) {
  const int d = g.size(), es = d * d;
  std::vector<cplx> y((std::max(lmax, k) + 1) * es), sc(es);
  blk::identity(y.data(), d);
  blk::scale(y.data(), -I, d);
  auto kern = [&](int s, int t, cplx* out) { detail::scaled_copy(out, sa.ret_ext(n - s, n - t, sc.data()), I, d); };
  auto mass = [&](int l, cplx* out) { detail::shifted_h(out, eps, n - l, mu, I, d); };
  auto src = [&](int, cplx* out) { blk::zero(out, d); };
  volterra::vide_start(k, h, d, kern, mass, src, y.data(), volterra::Form::Conjugate);
  for (int l = k + 1; l <= lmax; ++l) volterra::vide_step(k, h, d, l, kern, mass, src, y.data(), volterra::Form::Conjugate);
  for (int l = 0; l <= std::min(lmax, n); ++l) blk::copy(g.ret_ptr(n, n - l), y.data() + l * es, d);
}

// G^tv(n, .) in one sweep: the history integral is the same for every tau.
inline void dyson_tv_step(int n, HermMatrix& g, double mu, const ContourFunction& eps, const HermMatrix& sigma,
                          double beta, double h, int k) {
  const auto& ig = integrator(k);
  const int d = g.size(), es = d * d, ntau = g.ntau();
  std::vector<cplx> rhs((ntau + 1) * es, cplx{});
  for (int m = 0; m <= ntau; ++m) blk::zero(g.tv_ptr(n, m), d);
  Convolver cs(sigma, sigma, nullptr, g, g, beta, h, k);
  cs.tv23_row(n, rhs.data(), -I);
  cs.tv1_row(n, rhs.data(), -I);
  for (int m = 0; m <= ntau; ++m)
    for (int l = 1; l <= k + 1; ++l) blk::axpy(rhs.data() + m * es, -ig.step_weight(l) / h, g.tv_ptr(n - l, m), d);
  std::vector<cplx> lhs(es);
  detail::shifted_h(lhs.data(), eps, n, mu, I, d);
  for (int i = 0; i < d; ++i) lhs[i * d + i] += ig.step_weight(0) / h;
  blk::axpy(lhs.data(), I * h * ig.gregory_weight(n, n), sigma.ret_ptr(n, n), d);
  // Solve lhs X = rhs for all tau at once (columns of rhs are independent).
  std::vector<cplx> b(d * (ntau + 1) * d);
  const int nrhs = (ntau + 1) * d;
  for (int m = 0; m <= ntau; ++m)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) b[i * nrhs + m * d + j] = rhs[m * es + i * d + j];
  lu_solve(lhs, d, b.data(), nrhs);
  for (int m = 0; m <= ntau; ++m)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) g.tv_ptr(n, m)[i * d + j] = b[i * nrhs + m * d + j];
}

// G^<(m, n) for m = 0..n along the first argument (serial scheme); with
// m_first > k only rows m_first..n are computed from the existing history.
inline void dyson_les_column(int n, int m_first, HermMatrix& g, double mu, const ContourFunction& eps,
                             const HermMatrix& sigma, double beta, double h, int k) {
  const int d = g.size(), es = d * d;
  ContourAccess sa(sigma, sigma);
  std::vector<cplx> q((n + 1) * es, cplx{}), sc(es);
  Convolver cs(sigma, sigma, nullptr, g, g, beta, h, k);
  const int m0 = m_first > k ? m_first : 1;
  cs.les2_column(n, m0, n, q.data(), -I);
  cs.les3_column(n, m0, n, q.data(), -I);
  cplx* y = g.les_ptr(0, n);
  auto kern = [&](int i, int j, cplx* out) { detail::scaled_copy(out, sa.ret_ext(i, j, sc.data()), I, d); };
  auto mass = [&](int m, cplx* out) { detail::shifted_h(out, eps, m, mu, I, d); };
  auto src = [&](int m, cplx* out) { blk::copy(out, q.data() + m * es, d); };
  if (m_first <= k) {
    blk::neg_adjoint(y, g.tv_ptr(n, 0), d);
    volterra::vide_start(k, h, d, kern, mass, src, y);
  }
  for (int m = std::max(m_first, k + 1); m <= n; ++m) volterra::vide_step(k, h, d, m, kern, mass, src, y);
}

}  // namespace detail

// Slice n > k of G, given slices 0..n-1 and Sigma on slices 0..n.
inline void dyson_timestep(int n, HermMatrix& g, double mu, const ContourFunction& eps, const HermMatrix& sigma,
                           double beta, double h, int k, StepVariant variant = StepVariant::Serial, int threads = 0) {
  detail::check_dyson_args(g, eps, sigma, n);
  require(n > k, "dyson_timestep: n must exceed the solver order (use dyson_start)");
  const int d = g.size(), es = d * d;
  ContourAccess sa(sigma, sigma);

  if (variant == StepVariant::Serial) {
    detail::dyson_ret_rows(n, n, g, mu, eps, sa, h, k);
    detail::dyson_tv_step(n, g, mu, eps, sigma, beta, h, k);
    detail::dyson_les_column(n, 0, g, mu, eps, sigma, beta, h, k);
    detail::antihermitian_les_diag(g, n);
    return;
  }

  // Retarded: independent single steps along columns m < n-k, boundary band from rows.
  parallel_for(
      0, n - k,
      [&](int m) {
        const int N = n - m;
        std::vector<cplx> y((N + 1) * es);
        for (int b = 0; b < N; ++b) blk::copy(y.data() + b * es, g.ret_ptr(m + b, m), d);
        auto kern = [&](int a, int b, cplx* out) { detail::scaled_copy(out, sigma.ret_ptr(m + a, m + b), I, d); };
        auto mass = [&](int a, cplx* out) { detail::shifted_h(out, eps, m + a, mu, I, d); };
        auto src = [&](int, cplx* out) { blk::zero(out, d); };
        volterra::vide_step(k, h, d, N, kern, mass, src, y.data());
        blk::copy(g.ret_ptr(n, m), y.data() + N * es, d);
      },
      threads);
  detail::dyson_ret_rows(n, k, g, mu, eps, sa, h, k);
  detail::dyson_tv_step(n, g, mu, eps, sigma, beta, h, k);

  if (n < 2 * k + 1) {
    detail::dyson_les_column(n, 0, g, mu, eps, sigma, beta, h, k);
    return;
  }
  // Lesser: rows m = 1..n-k-1 from the conjugate equation in the second argument.
  const int mlast = n - k - 1;
  std::vector<cplx> q((n + 1) * es, cplx{});
  Convolver cg(g, g, nullptr, sigma, sigma, beta, h, k);
  cg.les1_column(n, 1, mlast, q.data(), I);
  cg.les3_column(n, 1, mlast, q.data(), I);
  ContourAccess ga(g, g);
  parallel_for(
      1, mlast + 1,
      [&](int m) {
        std::vector<cplx> y((n + 1) * es);
        for (int j = 0; j < n; ++j) {
          const cplx* p = ga.les(m, j, y.data() + j * es);
          if (p != y.data() + j * es) blk::copy(y.data() + j * es, p, d);
        }
        auto kern = [&](int s, int t, cplx* out) {
          blk::adjoint(out, sigma.ret_ptr(t, s), d);
          blk::scale(out, -I, d);
        };
        auto mass = [&](int t, cplx* out) { detail::shifted_h(out, eps, t, mu, -I, d); };
        auto src = [&](int, cplx* out) { blk::copy(out, q.data() + m * es, d); };
        volterra::vide_step(k, h, d, n, kern, mass, src, y.data(), volterra::Form::Conjugate);
        blk::copy(g.les_ptr(m, n), y.data() + n * es, d);
      },
      threads);
  blk::neg_adjoint(g.les_ptr(0, n), g.tv_ptr(n, 0), d);
  // no projection of the diagonal in this variant: the row/band coupling
  // amplifies it
  detail::dyson_les_column(n, n - k, g, mu, eps, sigma, beta, h, k);
}

inline void dyson_timestep_parallel(int n, HermMatrix& g, double mu, const ContourFunction& eps,
                                    const HermMatrix& sigma, double beta, double h, int k, int threads = 0) {
  dyson_timestep(n, g, mu, eps, sigma, beta, h, k, StepVariant::Parallel, threads);
}

// Full solve for a fixed self-energy: Matsubara, start-up and all time steps.
inline MatsubaraReport dyson(HermMatrix& g, double mu, const ContourFunction& eps, const HermMatrix& sigma, double beta,
                             double h, int k, const MatsubaraOptions& opt = {},
                             StepVariant variant = StepVariant::Serial) {
  auto rep = dyson_mat(g, mu, eps, sigma, beta, k, opt);
  if (g.nt() < 0) return rep;
  require(g.nt() >= k, "dyson: nt must be at least k");
  dyson_start(g, mu, eps, sigma, beta, h, k);
  for (int n = k + 1; n <= g.nt(); ++n) dyson_timestep(n, g, mu, eps, sigma, beta, h, k, variant);
  return rep;
}

}  // namespace kbe
