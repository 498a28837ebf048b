#pragma once

#include "contour.hpp"

namespace kbe {

// Discretized pieces of C = A * f * B on the contour. Every method accumulates
// s * (value) into out[idx] (blocks of size*size), so callers can assemble
// sources such as -i (C2 + C3) without temporaries. A null f means f = 1.
class Convolver {
 public:
  Convolver(const HermMatrix& a, const HermMatrix& acc, const ContourFunction* f, const HermMatrix& b,
            const HermMatrix& bcc, double beta, double h, int k)
      : A_(a, acc), B_(b, bcc), f_(f), beta_(beta), h_(h), k_(k), ig_(integrator(k)) {
    require(a.size() == b.size() && a.ntau() == b.ntau(), "convolution: operand shapes differ");
    require(a.sig() == b.sig(), "convolution: operands have different statistics");
    require(!f || f->size() == a.size(), "convolution: contour function size mismatch");
    require(a.ntau() >= k, "convolution: ntau must be >= k");
    require(beta > 0.0, "convolution: beta must be positive");
    d_ = a.size();
    es_ = d_ * d_;
    htau_ = beta / a.ntau();
  }

  int size() const { return d_; }

  // C^M(m) for m = 0..ntau
  void mat(cplx* out, cplx s) const {
    const int nt = ntau();
    const double xi = A_.sig();
    std::vector<cplx> af((nt + 1) * es_);
    for (int j = 0; j <= nt; ++j) right_f(af.data() + j * es_, A_.mat(j), -1);
    auto bm = [&](int l) { return B_.mat(l); };
    for (int m = 0; m <= nt; ++m) {
      cplx* o = out + m * es_;
      if (m <= k_) {
        for (int j = 0; j <= k_; ++j)
          for (int l = 0; l <= k_; ++l) blk::gemm_acc(o, s * htau_ * ig_.rcorr(m, j, l), AF(af, j), bm(l), d_);
      } else {
        for (int l = 0; l <= m; ++l) blk::gemm_acc(o, s * htau_ * ig_.gregory_weight(m, l), AF(af, m - l), bm(l), d_);
      }
      const int M = nt - m;
      if (M <= k_) {
        for (int j = 0; j <= k_; ++j)
          for (int l = 0; l <= k_; ++l)
            blk::gemm_acc(o, s * xi * htau_ * ig_.rcorr(M, j, l), AF(af, nt - j), bm(nt - l), d_);
      } else {
        for (int l = 0; l <= M; ++l)
          blk::gemm_acc(o, s * xi * htau_ * ig_.gregory_weight(M, l), AF(af, nt - l), bm(m + l), d_);
      }
    }
  }

  // C^R(n,m) for m = 0..n
  void ret_row(int n, cplx* out, cplx s) const {
    const int top = std::max(n, k_);
    std::vector<cplx> af((top + 1) * es_), sc(es_);
    for (int j = 0; j <= top; ++j) right_f(af.data() + j * es_, A_.ret_ext(n, j, sc.data()), j);
    for (int m = 0; m <= n; ++m) {
      cplx* o = out + m * es_;
      if (n > k_ && n - m > k_) {
        for (int j = m; j <= n; ++j)
          blk::gemm_acc(o, s * h_ * ig_.gregory_weight(n - m, j - m), AF(af, j), B_.fn().ret_ptr(j, m), d_);
      } else if (n > k_) {
        for (int j = 0; j <= k_; ++j)
          blk::gemm_acc(o, s * h_ * ig_.start_weight(n - m, j), AF(af, n - j), B_.ret_ext(n - j, m, sc.data()), d_);
      } else {
        for (int j = 0; j <= k_; ++j)
          blk::gemm_acc(o, s * h_ * ig_.poly_integ(m, n, j), AF(af, j), B_.ret_ext(j, m, sc.data()), d_);
      }
    }
  }

  // int_0^{t_n} A^R(n,t) f(t) B^tv(t,m) for m = 0..ntau
  void tv1_row(int n, cplx* out, cplx s) const {
    const int top = std::max(n, k_);
    std::vector<cplx> af((top + 1) * es_), sc(es_);
    for (int j = 0; j <= top; ++j) right_f(af.data() + j * es_, A_.ret_ext(n, j, sc.data()), j);
    std::vector<double> w(top + 1);
    for (int j = 0; j <= top; ++j) w[j] = h_ * ig_.gregory_weight(n, j);
    for (int m = 0; m <= ntau(); ++m) {
      cplx* o = out + m * es_;
      for (int j = 0; j <= top; ++j) blk::gemm_acc(o, s * w[j], AF(af, j), B_.tv(j, m), d_);
    }
  }

  // Imaginary-branch part of C^tv(n,m): int_0^beta A^tv(n,tau') f B^M(tau'-tau_m)
  void tv23_row(int n, cplx* out, cplx s) const {
    const int nt = ntau();
    const double xi = B_.sig();
    std::vector<cplx> af((nt + 1) * es_);
    for (int l = 0; l <= nt; ++l) right_f(af.data() + l * es_, A_.tv(n, l), -1);
    for (int m = 0; m <= nt; ++m) {
      cplx* o = out + m * es_;
      if (m <= k_) {
        for (int j = 0; j <= k_; ++j)
          for (int l = 0; l <= k_; ++l)
            blk::gemm_acc(o, s * xi * htau_ * ig_.rcorr(m, j, l), AF(af, l), B_.mat(nt - j), d_);
      } else {
        for (int l = 0; l <= m; ++l)
          blk::gemm_acc(o, s * xi * htau_ * ig_.gregory_weight(m, l), AF(af, m - l), B_.mat(nt - l), d_);
      }
      const int M = nt - m;
      if (M <= k_) {
        for (int j = 0; j <= k_; ++j)
          for (int l = 0; l <= k_; ++l)
            blk::gemm_acc(o, s * htau_ * ig_.rcorr(M, j, l), AF(af, nt - l), B_.mat(j), d_);
      } else {
        for (int l = 0; l <= M; ++l)
          blk::gemm_acc(o, s * htau_ * ig_.gregory_weight(M, l), AF(af, m + l), B_.mat(l), d_);
      }
    }
  }

  // int_0^{t_m} A^R(m,t) f(t) B^<(t,n) for m = m0..m1 (out indexed by m)
  void les1_column(int n, int m0, int m1, cplx* out, cplx s) const {
    const int top = std::max(m1, k_);
    std::vector<cplx> fb((top + 1) * es_), sc(es_);
    for (int j = 0; j <= top; ++j) left_f(fb.data() + j * es_, j, B_.les(j, n, sc.data()));
    for (int m = m0; m <= m1; ++m) {
      cplx* o = out + m * es_;
      const int tj = std::max(m, k_);
      for (int j = 0; j <= tj; ++j)
        blk::gemm_acc(o, s * h_ * ig_.gregory_weight(m, j), A_.ret_ext(m, j, sc.data()), FB(fb, j), d_);
    }
  }

  // int_0^{t_n} A^<(m,t) f(t) B^A(t,n) for m = m0..m1
  void les2_column(int n, int m0, int m1, cplx* out, cplx s) const {
    const int top = std::max(n, k_);
    std::vector<cplx> fb((top + 1) * es_), sc(es_);
    for (int j = 0; j <= top; ++j) left_f(fb.data() + j * es_, j, B_.adv_ext(j, n, sc.data()));
    std::vector<double> w(top + 1);
    for (int j = 0; j <= top; ++j) w[j] = h_ * ig_.gregory_weight(n, j);
    for (int m = m0; m <= m1; ++m) {
      cplx* o = out + m * es_;
      for (int j = 0; j <= top; ++j) blk::gemm_acc(o, s * w[j], A_.les(m, j, sc.data()), FB(fb, j), d_);
    }
  }

  // -i int_0^beta A^tv(m,tau) f B^vt(tau,n) for m = m0..m1
  void les3_column(int n, int m0, int m1, cplx* out, cplx s) const {
    const int nt = ntau();
    std::vector<cplx> fb((nt + 1) * es_), sc(es_);
    for (int j = 0; j <= nt; ++j) left_f(fb.data() + j * es_, -1, B_.vt(j, n, sc.data()));
    std::vector<double> w(nt + 1);
    for (int j = 0; j <= nt; ++j) w[j] = htau_ * ig_.gregory_weight(nt, j);
    for (int m = m0; m <= m1; ++m) {
      cplx* o = out + m * es_;
      for (int j = 0; j <= nt; ++j) blk::gemm_acc(o, -I * s * w[j], A_.tv(m, j), FB(fb, j), d_);
    }
  }

 private:
  int ntau() const { return A_.ntau(); }
  const cplx* AF(const std::vector<cplx>& v, int j) const { return v.data() + j * es_; }
  const cplx* FB(const std::vector<cplx>& v, int j) const { return v.data() + j * es_; }

  // dst = x f_j (or x if f is absent)
  void right_f(cplx* dst, const cplx* x, int j) const {
    if (!f_)
      blk::copy(dst, x, d_);
    else
      blk::gemm(dst, x, f_->ptr(j), d_);
  }
  void left_f(cplx* dst, int j, const cplx* x) const {
    if (!f_)
      blk::copy(dst, x, d_);
    else
      blk::gemm(dst, f_->ptr(j), x, d_);
  }

  ContourAccess A_, B_;
  const ContourFunction* f_;
  double beta_, h_, htau_;
  int k_, d_, es_;
  const Integrator& ig_;
};

// C^M of C = A * f * B.
inline void convolution_matsubara(HermMatrix& c, const HermMatrix& a, const HermMatrix& acc,
                                  const ContourFunction* f, const HermMatrix& b, const HermMatrix& bcc,
                                  double beta, int k) {
  require(c.ntau() == a.ntau() && c.size() == a.size(), "convolution: result shape differs");
  Convolver conv(a, acc, f, b, bcc, beta, 1.0, k);
  c.set_timestep_zero(-1);
  conv.mat(c.mat_ptr(0), 1.0);
}

// Slice n of C = A * f * B. For n <= k, A and B must be known on slices 0..k.
inline void convolution_timestep(int n, HermMatrix& c, const HermMatrix& a, const HermMatrix& acc,
                                 const ContourFunction* f, const HermMatrix& b, const HermMatrix& bcc,
                                 double beta, double h, int k) {
  require(n >= -1 && n <= c.nt() && n <= a.nt() && n <= b.nt(), "convolution_timestep: slice out of range");
  require(n == -1 || std::max(n, k) <= std::min(a.nt(), b.nt()), "convolution_timestep: inputs must cover 0..k");
  if (n == -1) {
    convolution_matsubara(c, a, acc, f, b, bcc, beta, k);
    return;
  }
  require(!f || f->nt() >= std::max(n, k), "convolution_timestep: contour function too short");
  Convolver conv(a, acc, f, b, bcc, beta, h, k);
  c.set_timestep_zero(n);
  conv.ret_row(n, c.ret_ptr(n, 0), 1.0);
  conv.tv1_row(n, c.tv_ptr(n, 0), 1.0);
  conv.tv23_row(n, c.tv_ptr(n, 0), 1.0);
  conv.les1_column(n, 0, n, c.les_ptr(0, n), 1.0);
  conv.les2_column(n, 0, n, c.les_ptr(0, n), 1.0);
  conv.les3_column(n, 0, n, c.les_ptr(0, n), 1.0);
}

// Hermitian operands.
inline void convolution_timestep(int n, HermMatrix& c, const HermMatrix& a, const ContourFunction* f,
                                 const HermMatrix& b, double beta, double h, int k) {
  convolution_timestep(n, c, a, a, f, b, b, beta, h, k);
}

// All slices -1..nt of C.
inline void convolution(HermMatrix& c, const HermMatrix& a, const HermMatrix& acc, const ContourFunction* f,
                        const HermMatrix& b, const HermMatrix& bcc, double beta, double h, int k) {
  for (int n = -1; n <= c.nt(); ++n) convolution_timestep(n, c, a, acc, f, b, bcc, beta, h, k);
}

// c(t_n) = int_C A(t_n, t) f(t) dt. For n = -1 the value at tau = 0 is returned.
inline CMatrix response_convolution(int n, const HermMatrix& a, const HermMatrix& acc, const ContourFunction& f,
                                    double beta, double h, int k) {
  require(n >= -1 && n <= a.nt() && f.size() == a.size(), "response_convolution: bad arguments");
  require(a.ntau() >= k, "response_convolution: ntau must be >= k");
  const auto& ig = integrator(k);
  const int d = a.size(), nt = a.ntau();
  const double htau = beta / nt;
  ContourAccess A(a, acc);
  std::vector<cplx> out(d * d, cplx{}), sc(d * d);
  if (n == -1) {
    const double xi = a.sig();
    for (int l = 0; l <= nt; ++l) blk::gemm_acc(out.data(), xi * htau * ig.gregory_weight(nt, l), A.mat(nt - l), f.ptr(-1), d);
    return blk::to_matrix(out.data(), d);
  }
  require(std::max(n, k) <= a.nt() && f.nt() >= std::max(n, k), "response_convolution: need slices 0..k");
  for (int j = 0; j <= std::max(n, k); ++j)
    blk::gemm_acc(out.data(), h * ig.gregory_weight(n, j), A.ret_ext(n, j, sc.data()), f.ptr(j), d);
  for (int m = 0; m <= nt; ++m) blk::gemm_acc(out.data(), -I * htau * ig.gregory_weight(nt, m), A.tv(n, m), f.ptr(-1), d);
  return blk::to_matrix(out.data(), d);
}

inline CMatrix response_convolution(int n, const HermMatrix& a, const ContourFunction& f, double beta, double h,
                                    int k) {
  return response_convolution(n, a, a, f, beta, h, k);
}

// E_corr(t_n) = 1/2 Im Tr [Sigma * G]^<(t_n, t_n); n = -1 uses [Sigma * G]^M(beta).
inline double correlation_energy(int n, const HermMatrix& g, const HermMatrix& sigma, double beta, double h, int k) {
  require(g.size() == sigma.size() && n >= -1 && n <= g.nt() && n <= sigma.nt(), "correlation_energy: bad arguments");
  const int d = g.size();
  Convolver conv(sigma, sigma, nullptr, g, g, beta, h, k);
  std::vector<cplx> c;
  CMatrix les;
  if (n == -1) {
    c.assign((g.ntau() + 1) * d * d, cplx{});
    conv.mat(c.data(), 1.0);
    les = I * static_cast<double>(g.sig()) * blk::to_matrix(c.data() + g.ntau() * d * d, d);
  } else {
    require(std::max(n, k) <= std::min(g.nt(), sigma.nt()), "correlation_energy: need slices 0..k");
    c.assign((n + 1) * d * d, cplx{});
    conv.les1_column(n, n, n, c.data(), 1.0);
    conv.les2_column(n, n, n, c.data(), 1.0);
    conv.les3_column(n, n, n, c.data(), 1.0);
    les = blk::to_matrix(c.data() + n * d * d, d);
  }
  return 0.5 * les.trace().imag();
}

}  // namespace kbe
