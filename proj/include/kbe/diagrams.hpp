#pragma once

#include "vie2.hpp"

// Bubble products of two contour functions and the weak-coupling self-energies
// of the Hubbard chain. Products act on one time slice and read only the
// same slice of their inputs.
namespace kbe {

namespace detail {

// Scalar entries of one slice of C, completed with the conjugate function.
struct SliceEntries {
  ConstSliceView c, cc;
  int d;

  SliceEntries(const ConstSliceView& c_, const ConstSliceView& cc_) : c(c_), cc(cc_), d(c_.size) {
    require(c.tstp == cc.tstp && c.ntau == cc.ntau && c.size == cc.size && c.sig == cc.sig,
            "bubble: conjugate slice has a different shape");
  }

  cplx at(const cplx* b, int a1, int a2) const { return b[a1 * d + a2]; }
  cplx dag(const cplx* b, int a1, int a2) const { return std::conj(b[a2 * d + a1]); }

  cplx mat(int m, int a1, int a2) const { return at(c.mat_at(m), a1, a2); }
  // C^M(-tau_m) = xi C^M(beta - tau_m)
  cplx mat_neg(int m, int a1, int a2) const { return double(c.sig) * at(c.mat_at(c.ntau - m), a1, a2); }
  cplx tv(int m, int a1, int a2) const { return at(c.tv_at(m), a1, a2); }
  // C^vt(tau_m, t_n)
  cplx vt(int m, int a1, int a2) const { return -double(c.sig) * dag(cc.tv_at(c.ntau - m), a1, a2); }
  // C^R(n,j), C^<(j,n), C^<(n,j) for j <= n
  cplx ret(int j, int a1, int a2) const { return at(c.ret_at(j), a1, a2); }
  cplx les(int j, int a1, int a2) const { return at(c.les_at(j), a1, a2); }
  cplx les_t(int j, int a1, int a2) const { return j == c.tstp ? les(j, a1, a2) : -dag(cc.les_at(j), a1, a2); }
  // C^>(n,j)
  cplx gtr(int j, int a1, int a2) const { return ret(j, a1, a2) + les_t(j, a1, a2); }
  // C^A(j,n)
  cplx adv_t(int j, int a1, int a2) const { return dag(cc.ret_at(j), a1, a2); }
};

inline void check_bubble_out(const SliceView& c, const ConstSliceView& a, const ConstSliceView& b) {
  require(c.tstp == a.tstp && c.tstp == b.tstp && c.ntau == a.ntau && c.ntau == b.ntau,
          "bubble: slices are not compatible");
}

}  // namespace detail

// C_{c1c2}(t,t') = i A_{a1a2}(t,t') B_{b2b1}(t',t) on one slice.
inline void bubble1(const SliceView& c, int c1, int c2, const ConstSliceView& a, const ConstSliceView& acc, int a1,
                    int a2, const ConstSliceView& b, const ConstSliceView& bcc, int b1, int b2) {
  detail::check_bubble_out(c, a, b);
  const detail::SliceEntries A(a, acc), B(b, bcc);
  const int n = c.tstp, dc = c.size;
  auto out = [&](cplx* blkp) -> cplx& { return blkp[c1 * dc + c2]; };
  if (n == -1) {
    for (int m = 0; m <= c.ntau; ++m) out(c.mat_at(m)) = -A.mat(m, a1, a2) * B.mat_neg(m, b2, b1);
    return;
  }
  for (int j = 0; j <= n; ++j) {
    out(c.ret_at(j)) = I * (A.ret(j, a1, a2) * B.les(j, b2, b1) + A.les_t(j, a1, a2) * B.adv_t(j, b2, b1));
    out(c.les_at(j)) = I * A.les(j, a1, a2) * B.gtr(j, b2, b1);
  }
  for (int m = 0; m <= c.ntau; ++m) out(c.tv_at(m)) = I * A.tv(m, a1, a2) * B.vt(m, b2, b1);
}

// C_{c1c2}(t,t') = i A_{a1a2}(t,t') B_{b1b2}(t,t') on one slice.
inline void bubble2(const SliceView& c, int c1, int c2, const ConstSliceView& a, const ConstSliceView& acc, int a1,
                    int a2, const ConstSliceView& b, const ConstSliceView& bcc, int b1, int b2) {
  detail::check_bubble_out(c, a, b);
  const detail::SliceEntries A(a, acc), B(b, bcc);
  const int n = c.tstp, dc = c.size;
  auto out = [&](cplx* blkp) -> cplx& { return blkp[c1 * dc + c2]; };
  if (n == -1) {
    for (int m = 0; m <= c.ntau; ++m) out(c.mat_at(m)) = -A.mat(m, a1, a2) * B.mat(m, b1, b2);
    return;
  }
  for (int j = 0; j <= n; ++j) {
    const cplx ar = A.ret(j, a1, a2), br = B.ret(j, b1, b2);
    out(c.ret_at(j)) = I * (ar * br + A.les_t(j, a1, a2) * br + ar * B.les_t(j, b1, b2));
    out(c.les_at(j)) = I * A.les(j, a1, a2) * B.les(j, b1, b2);
  }
  for (int m = 0; m <= c.ntau; ++m) out(c.tv_at(m)) = I * A.tv(m, a1, a2) * B.tv(m, b1, b2);
}

inline void bubble1(int n, HermMatrix& c, int c1, int c2, const HermMatrix& a, const HermMatrix& acc, int a1, int a2,
                    const HermMatrix& b, const HermMatrix& bcc, int b1, int b2) {
  bubble1(c.slice(n), c1, c2, a.slice(n), acc.slice(n), a1, a2, b.slice(n), bcc.slice(n), b1, b2);
}
inline void bubble1(int n, HermMatrix& c, int c1, int c2, const HermMatrix& a, int a1, int a2, const HermMatrix& b,
                    int b1, int b2) {
  bubble1(n, c, c1, c2, a, a, a1, a2, b, b, b1, b2);
}
inline void bubble2(int n, HermMatrix& c, int c1, int c2, const HermMatrix& a, const HermMatrix& acc, int a1, int a2,
                    const HermMatrix& b, const HermMatrix& bcc, int b1, int b2) {
  bubble2(c.slice(n), c1, c2, a.slice(n), acc.slice(n), a1, a2, b.slice(n), bcc.slice(n), b1, b2);
}
inline void bubble2(int n, HermMatrix& c, int c1, int c2, const HermMatrix& a, int a1, int a2, const HermMatrix& b,
                    int b1, int b2) {
  bubble2(n, c, c1, c2, a, a, a1, a2, b, b, b1, b2);
}

// Matrix forms: C_ij = i A_ij(t,t') B_ji(t',t) and C_ij = i A_ij(t,t') B_ij(t,t').
inline void bubble1(const SliceView& c, const ConstSliceView& a, const ConstSliceView& b) {
  require(c.size == a.size && c.size == b.size, "bubble1: size mismatch");
  for (int i = 0; i < c.size; ++i)
    for (int j = 0; j < c.size; ++j) bubble1(c, i, j, a, a, i, j, b, b, i, j);
}
inline void bubble2(const SliceView& c, const ConstSliceView& a, const ConstSliceView& b) {
  require(c.size == a.size && c.size == b.size, "bubble2: size mismatch");
  for (int i = 0; i < c.size; ++i)
    for (int j = 0; j < c.size; ++j) bubble2(c, i, j, a, a, i, j, b, b, i, j);
}

// ---- Hubbard chain ----

// U(t) as a contour function: u(n) times the identity on d sites.
inline ContourFunction hubbard_u(int nt, int d, double u) {
  ContourFunction f(nt, d);
  f.set_constant(u * CMatrix::Identity(d, d));
  return f;
}

// P_ij(t,t') = -i G_ij(t,t') G_ji(t',t) on slice n.
inline void polarization(int n, const HermMatrix& g, const SliceView& p) {
  require(p.sig == BOSON, "polarization: P must be bosonic");
  bubble1(p, g.slice(n), g.slice(n));
  slice_ops::smul(p, -1.0);
}
inline void polarization(int n, const HermMatrix& g, HermMatrix& p) { polarization(n, g, p.slice(n)); }

// Second Born: Sigma_ij = i U(t) U(t') G_ij(t,t') P_ij(t,t'), P built from the
// opposite-spin propagator gbar (equal to g in the paramagnetic case).
inline void sigma_2b(int n, const HermMatrix& g, const HermMatrix& gbar, const ContourFunction& u,
                     HermMatrix& sigma) {
  TimeSlice p(n, g.ntau(), g.size(), BOSON);
  polarization(n, gbar, p.view());
  p.right_multiply(u);
  p.left_multiply(u);
  bubble2(sigma.slice(n), g.slice(n), p.view());
}
inline void sigma_2b(int n, const HermMatrix& g, const ContourFunction& u, HermMatrix& sigma) {
  sigma_2b(n, g, g, u, sigma);
}

namespace detail {

// Kernel of [1 + K] * X = Q with K = s Q U (right) and its conjugate s U Q (left).
inline void kernel_slice(int n, const HermMatrix& q, const ContourFunction& u, double s, HermMatrix& k,
                         HermMatrix& kcc) {
  k.set_timestep(n, q);
  kcc.set_timestep(n, q);
  k.right_multiply(n, u, s);
  kcc.left_multiply(n, u, s);
}

}  // namespace detail

// Susceptibility chi = P + P * U * chi on slice n (-1 for Matsubara, n > k for
// time stepping). P must be known on slices <= n.
inline void chi_timestep(int n, const HermMatrix& pol, const ContourFunction& u, HermMatrix& pxu, HermMatrix& uxp,
                         HermMatrix& chi, double beta, double h, int k) {
  detail::kernel_slice(n, pol, u, -1.0, pxu, uxp);
  if (n == -1)
    vie2_mat(chi, pxu, uxp, pol, beta, k);
  else
    vie2_timestep(n, chi, pxu, uxp, pol, beta, h, k);
}
// Slices 0..k of chi.
inline void chi_start(const HermMatrix& pol, const ContourFunction& u, HermMatrix& pxu, HermMatrix& uxp,
                      HermMatrix& chi, double beta, double h, int k) {
  for (int n = 0; n <= k; ++n) detail::kernel_slice(n, pol, u, -1.0, pxu, uxp);
  vie2_start(chi, pxu, uxp, pol, beta, h, k);
}

// GW: Sigma_ij = i G_ij(t,t') dW_ij(t,t'), dW = U chi U.
inline void sigma_gw(int n, const HermMatrix& g, const ContourFunction& u, const HermMatrix& chi, HermMatrix& sigma) {
  TimeSlice w = chi.get_timestep(n);
  w.left_multiply(u);
  w.right_multiply(u);
  bubble2(sigma.slice(n), g.slice(n), w.view());
}

// Particle-particle bubble Phi_ij = -i G_ij(t,t') G_ij(t,t').
inline void pp_bubble(int n, const HermMatrix& g, HermMatrix& phi) {
  require(phi.sig() == BOSON, "pp_bubble: Phi must be bosonic");
  bubble2(phi.slice(n), g.slice(n), g.slice(n));
  phi.smul(n, -1.0);
}

// T-matrix T = Phi - Phi * U * T on slice n (-1 or n > k), and slices 0..k.
inline void tmatrix_timestep(int n, const HermMatrix& phi, const ContourFunction& u, HermMatrix& kxu,
                             HermMatrix& uxk, HermMatrix& t, double beta, double h, int k) {
  detail::kernel_slice(n, phi, u, 1.0, kxu, uxk);
  if (n == -1)
    vie2_mat(t, kxu, uxk, phi, beta, k);
  else
    vie2_timestep(n, t, kxu, uxk, phi, beta, h, k);
}
inline void tmatrix_start(const HermMatrix& phi, const ContourFunction& u, HermMatrix& kxu, HermMatrix& uxk,
                          HermMatrix& t, double beta, double h, int k) {
  for (int n = 0; n <= k; ++n) detail::kernel_slice(n, phi, u, 1.0, kxu, uxk);
  vie2_start(t, kxu, uxk, phi, beta, h, k);
}

// Sigma_ij = i U(t) T_ij(t,t') U(t') G_ji(t',t).
inline void sigma_tpp(int n, const HermMatrix& g, const ContourFunction& u, const HermMatrix& t, HermMatrix& sigma) {
  TimeSlice w = t.get_timestep(n);
  w.left_multiply(u);
  w.right_multiply(u);
  bubble1(sigma.slice(n), w.view(), g.slice(n));
}

// Mean-field Hamiltonian eps_mf(n) = eps0(n) + U(n) diag(n_i - nbar), with n_i
// the occupation per spin from the density matrix of G.
inline void ham_mf(int n, const HermMatrix& g, const ContourFunction& u, const ContourFunction& eps0, double nbar,
                   ContourFunction& eps_mf) {
  const CMatrix rho = g.density_matrix(n);
  CMatrix e = eps0.get(n);
  const CMatrix un = u.get(n);
  for (int i = 0; i < g.size(); ++i) e(i, i) += un(i, i) * (rho(i, i).real() - nbar);
  eps_mf.set(n, e);
}

}  // namespace kbe
