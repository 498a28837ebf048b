#pragma once

#include "core.hpp"
#include "weights.hpp"

namespace kbe {

// f(t) on the contour: index -1 is the imaginary branch, 0..nt the real-time grid.
class ContourFunction {
 public:
  ContourFunction() = default;
  ContourFunction(int nt, int size) : nt_(nt), size_(size), data_(static_cast<size_t>(nt + 2) * size * size) {
    require(nt >= -1 && size >= 1, "ContourFunction: nt >= -1 and size >= 1 required");
  }

  int nt() const { return nt_; }
  int size() const { return size_; }

  cplx* ptr(int n) { return data_.data() + static_cast<size_t>(n + 1) * size_ * size_; }
  const cplx* ptr(int n) const { return data_.data() + static_cast<size_t>(n + 1) * size_ * size_; }

  CMatrix get(int n) const {
    check(n);
    return blk::to_matrix(ptr(n), size_);
  }
  void set(int n, const CMatrix& m) {
    check(n);
    blk::from_matrix(ptr(n), m, size_);
  }
  void set_constant(const CMatrix& m) {
    for (int n = -1; n <= nt_; ++n) set(n, m);
  }

 private:
  void check(int n) const { require(n >= -1 && n <= nt_, "ContourFunction: time index out of range"); }

  int nt_ = -1, size_ = 1;
  std::vector<cplx> data_;
};

// Pointers to the components of one time slice. For tstp = -1 only mat is set;
// otherwise ret[j] = C^R(n,j), les[j] = C^<(j,n) for j <= n and tv[m] = C^tv(n,m).
template <class T>
struct BasicSliceView {
  int tstp, ntau, size, sig;
  T* ret;
  T* les;
  T* tv;
  T* mat;

  int es() const { return size * size; }
  T* ret_at(int j) const { return ret + j * es(); }
  T* les_at(int j) const { return les + j * es(); }
  T* tv_at(int m) const { return tv + m * es(); }
  T* mat_at(int m) const { return mat + m * es(); }

  operator BasicSliceView<const T>() const
    requires(!std::is_const_v<T>)
  {
    return {tstp, ntau, size, sig, ret, les, tv, mat};
  }
};
using SliceView = BasicSliceView<cplx>;
using ConstSliceView = BasicSliceView<const cplx>;

namespace slice_ops {

template <class F>
void for_each_block(const SliceView& v, F&& fn) {
  const int es = v.es();
  if (v.tstp == -1) {
    for (int m = 0; m <= v.ntau; ++m) fn(v.mat + m * es);
    return;
  }
  for (int j = 0; j <= v.tstp; ++j) fn(v.ret + j * es), fn(v.les + j * es);
  for (int m = 0; m <= v.ntau; ++m) fn(v.tv + m * es);
}

inline void check_compatible(const SliceView& a, const ConstSliceView& b) {
  require(a.tstp == b.tstp && a.ntau == b.ntau && a.size == b.size, "time slices are not compatible");
}

inline void copy(const SliceView& dst, const ConstSliceView& src) {
  check_compatible(dst, src);
  const int es = dst.es();
  if (dst.tstp == -1) {
    std::copy(src.mat, src.mat + (src.ntau + 1) * es, dst.mat);
    return;
  }
  std::copy(src.ret, src.ret + (src.tstp + 1) * es, dst.ret);
  std::copy(src.les, src.les + (src.tstp + 1) * es, dst.les);
  std::copy(src.tv, src.tv + (src.ntau + 1) * es, dst.tv);
}

inline void incr(const SliceView& dst, const ConstSliceView& src, cplx alpha) {
  check_compatible(dst, src);
  const int es = dst.es();
  auto add = [&](cplx* d, const cplx* s, int count) {
    for (int i = 0; i < count * es; ++i) d[i] += alpha * s[i];
  };
  if (dst.tstp == -1) {
    add(dst.mat, src.mat, src.ntau + 1);
    return;
  }
  add(dst.ret, src.ret, src.tstp + 1);
  add(dst.les, src.les, src.tstp + 1);
  add(dst.tv, src.tv, src.ntau + 1);
}

inline void smul(const SliceView& v, cplx alpha) {
  for_each_block(v, [&](cplx* b) { blk::scale(b, alpha, v.size); });
}

// side = +1: C(t,t') -> f(t) C(t,t'); side = -1: C(t,t') -> C(t,t') f(t')
inline void multiply(const SliceView& v, const ContourFunction& f, cplx alpha, int side) {
  require(f.size() == v.size && f.nt() >= v.tstp, "multiply: contour function does not cover the slice");
  const int d = v.size;
  std::vector<cplx> tmp(d * d);
  auto apply = [&](cplx* b, const cplx* fm) {
    if (side > 0)
      blk::gemm(tmp.data(), fm, b, d);
    else
      blk::gemm(tmp.data(), b, fm, d);
    for (int i = 0; i < d * d; ++i) b[i] = alpha * tmp[i];
  };
  const int n = v.tstp;
  if (n == -1) {
    for (int m = 0; m <= v.ntau; ++m) apply(v.mat_at(m), f.ptr(-1));
    return;
  }
  for (int j = 0; j <= n; ++j) {
    apply(v.ret_at(j), f.ptr(side > 0 ? n : j));
    apply(v.les_at(j), f.ptr(side > 0 ? j : n));
  }
  for (int m = 0; m <= v.ntau; ++m) apply(v.tv_at(m), f.ptr(side > 0 ? n : -1));
}

inline void zero(const SliceView& v) {
  for_each_block(v, [&](cplx* b) { blk::zero(b, v.size); });
}

}  // namespace slice_ops

// Components of a single time slice, owning storage.
class TimeSlice {
 public:
  TimeSlice() = default;
  TimeSlice(int tstp, int ntau, int size, int sig) : tstp_(tstp), ntau_(ntau), size_(size), sig_(sig) {
    require(tstp >= -1 && ntau >= 0 && size >= 1, "TimeSlice: invalid dimensions");
    check_statistics(sig);
    const size_t es = static_cast<size_t>(size) * size;
    if (tstp == -1) {
      mat_.assign((ntau + 1) * es, cplx{});
    } else {
      ret_.assign((tstp + 1) * es, cplx{});
      les_.assign((tstp + 1) * es, cplx{});
      tv_.assign((ntau + 1) * es, cplx{});
    }
  }

  int tstp() const { return tstp_; }
  int ntau() const { return ntau_; }
  int size() const { return size_; }
  int sig() const { return sig_; }

  SliceView view() { return {tstp_, ntau_, size_, sig_, ret_.data(), les_.data(), tv_.data(), mat_.data()}; }
  ConstSliceView view() const {
    return {tstp_, ntau_, size_, sig_, ret_.data(), les_.data(), tv_.data(), mat_.data()};
  }

  cplx* ret_ptr(int j) { return view().ret_at(j); }
  cplx* les_ptr(int j) { return view().les_at(j); }
  cplx* tv_ptr(int m) { return view().tv_at(m); }
  cplx* mat_ptr(int m) { return view().mat_at(m); }
  const cplx* ret_ptr(int j) const { return view().ret_at(j); }
  const cplx* les_ptr(int j) const { return view().les_at(j); }
  const cplx* tv_ptr(int m) const { return view().tv_at(m); }
  const cplx* mat_ptr(int m) const { return view().mat_at(m); }

  void smul(cplx alpha) { slice_ops::smul(view(), alpha); }
  void incr(const TimeSlice& other, cplx alpha = 1.0) { slice_ops::incr(view(), other.view(), alpha); }
  void left_multiply(const ContourFunction& f, cplx alpha = 1.0) { slice_ops::multiply(view(), f, alpha, +1); }
  void right_multiply(const ContourFunction& f, cplx alpha = 1.0) { slice_ops::multiply(view(), f, alpha, -1); }

 private:
  int tstp_ = -1, ntau_ = 0, size_ = 1, sig_ = FERMION;
  std::vector<cplx> ret_, les_, tv_, mat_;
};

// Two-time contour function stored on the hermitian-symmetric domain.
class HermMatrix {
 public:
  HermMatrix() = default;
  HermMatrix(int nt, int ntau, int size, int sig) : nt_(nt), ntau_(ntau), size_(size), sig_(sig) {
    require(nt >= -1 && ntau >= 0 && size >= 1, "HermMatrix: invalid dimensions");
    check_statistics(sig);
    const size_t es = static_cast<size_t>(size) * size;
    mat_.assign((ntau + 1) * es, cplx{});
    if (nt >= 0) {
      const size_t tri = static_cast<size_t>(nt + 1) * (nt + 2) / 2;
      ret_.assign(tri * es, cplx{});
      les_.assign(tri * es, cplx{});
      tv_.assign(static_cast<size_t>(nt + 1) * (ntau + 1) * es, cplx{});
    }
  }

  int nt() const { return nt_; }
  int ntau() const { return ntau_; }
  int size() const { return size_; }
  int sig() const { return sig_; }
  int element_size() const { return size_ * size_; }

  // Raw storage, blocks of size*size in row-major order.
  std::vector<cplx>& mat_data() { return mat_; }
  std::vector<cplx>& ret_data() { return ret_; }
  std::vector<cplx>& les_data() { return les_; }
  std::vector<cplx>& tv_data() { return tv_; }
  const std::vector<cplx>& mat_data() const { return mat_; }
  const std::vector<cplx>& ret_data() const { return ret_; }
  const std::vector<cplx>& les_data() const { return les_; }
  const std::vector<cplx>& tv_data() const { return tv_; }

  static size_t tri(int n, int j) { return static_cast<size_t>(n) * (n + 1) / 2 + j; }

  cplx* mat_ptr(int m) { return mat_.data() + m * element_size(); }
  cplx* ret_ptr(int n, int j) { return ret_.data() + tri(n, j) * element_size(); }
  cplx* les_ptr(int j, int n) { return les_.data() + tri(n, j) * element_size(); }
  cplx* tv_ptr(int n, int m) { return tv_.data() + (static_cast<size_t>(n) * (ntau_ + 1) + m) * element_size(); }
  const cplx* mat_ptr(int m) const { return mat_.data() + m * element_size(); }
  const cplx* ret_ptr(int n, int j) const { return ret_.data() + tri(n, j) * element_size(); }
  const cplx* les_ptr(int j, int n) const { return les_.data() + tri(n, j) * element_size(); }
  const cplx* tv_ptr(int n, int m) const {
    return tv_.data() + (static_cast<size_t>(n) * (ntau_ + 1) + m) * element_size();
  }

  CMatrix get_mat(int m) const { return blk::to_matrix(mat_ptr(check_tau(m)), size_); }
  CMatrix get_ret(int n, int j) const { return blk::to_matrix(ret_ptr(check_tt(n, j), j), size_); }
  CMatrix get_les(int j, int n) const { return blk::to_matrix(les_ptr(j, check_tt(n, j)), size_); }
  CMatrix get_tv(int n, int m) const { return blk::to_matrix(tv_ptr(check_t(n), check_tau(m)), size_); }
  void set_mat(int m, const CMatrix& x) { blk::from_matrix(mat_ptr(check_tau(m)), x, size_); }
  void set_ret(int n, int j, const CMatrix& x) { blk::from_matrix(ret_ptr(check_tt(n, j), j), x, size_); }
  void set_les(int j, int n, const CMatrix& x) { blk::from_matrix(les_ptr(j, check_tt(n, j)), x, size_); }
  void set_tv(int n, int m, const CMatrix& x) { blk::from_matrix(tv_ptr(check_t(n), check_tau(m)), x, size_); }

  SliceView slice(int n) {
    check_slice(n);
    if (n == -1) return {-1, ntau_, size_, sig_, nullptr, nullptr, nullptr, mat_.data()};
    return {n, ntau_, size_, sig_, ret_ptr(n, 0), les_ptr(0, n), tv_ptr(n, 0), nullptr};
  }
  ConstSliceView slice(int n) const {
    check_slice(n);
    if (n == -1) return {-1, ntau_, size_, sig_, nullptr, nullptr, nullptr, mat_.data()};
    return {n, ntau_, size_, sig_, ret_ptr(n, 0), les_ptr(0, n), tv_ptr(n, 0), nullptr};
  }

  TimeSlice get_timestep(int n) const {
    TimeSlice s(n, ntau_, size_, sig_);
    slice_ops::copy(s.view(), slice(n));
    return s;
  }
  void set_timestep(int n, const TimeSlice& s) { slice_ops::copy(slice(n), s.view()); }
  void set_timestep(int n, const HermMatrix& other) { slice_ops::copy(slice(n), other.slice(n)); }
  void set_timestep_zero(int n) { slice_ops::zero(slice(n)); }
  void incr_timestep(int n, const TimeSlice& s, cplx alpha = 1.0) { slice_ops::incr(slice(n), s.view(), alpha); }
  void incr_timestep(int n, const HermMatrix& other, cplx alpha = 1.0) {
    slice_ops::incr(slice(n), other.slice(n), alpha);
  }
  void smul(int n, cplx alpha) { slice_ops::smul(slice(n), alpha); }
  void left_multiply(int n, const ContourFunction& f, cplx alpha = 1.0) {
    slice_ops::multiply(slice(n), f, alpha, +1);
  }
  void right_multiply(int n, const ContourFunction& f, cplx alpha = 1.0) {
    slice_ops::multiply(slice(n), f, alpha, -1);
  }

  // rho(t_n) = i xi C^<(n,n); rho at n = -1 is -C^M(beta).
  CMatrix density_matrix(int n) const {
    check_slice(n);
    if (n == -1) return -get_mat(ntau_);
    return I * static_cast<double>(sig_) * get_les(n, n);
  }

 private:
  int check_tau(int m) const {
    require(m >= 0 && m <= ntau_, "HermMatrix: tau index out of range");
    return m;
  }
  int check_t(int n) const {
    require(n >= 0 && n <= nt_, "HermMatrix: time index out of range");
    return n;
  }
  int check_tt(int n, int j) const {
    require(n >= 0 && n <= nt_ && j >= 0 && j <= n, "HermMatrix: index outside the stored triangle");
    return n;
  }
  void check_slice(int n) const { require(n >= -1 && n <= nt_, "HermMatrix: time slice out of range"); }

  int nt_ = -1, ntau_ = 0, size_ = 1, sig_ = FERMION;
  std::vector<cplx> mat_, ret_, les_, tv_;
};

// Block access to the full two-time plane of C, using the conjugate function
// C^dagger (cc) for entries outside the stored triangles. For hermitian
// functions pass the same object twice. Functions returning const cplx* either
// point into storage or into `scratch` (d*d entries).
class ContourAccess {
 public:
  ContourAccess(const HermMatrix& c, const HermMatrix& cc) : c_(c), cc_(cc) {
    require(c.nt() == cc.nt() && c.ntau() == cc.ntau() && c.size() == cc.size() && c.sig() == cc.sig(),
            "conjugate function has a different shape");
  }

  const HermMatrix& fn() const { return c_; }
  int size() const { return c_.size(); }
  int sig() const { return c_.sig(); }
  int ntau() const { return c_.ntau(); }

  const cplx* mat(int m) const { return c_.mat_ptr(m); }
  const cplx* tv(int n, int m) const { return c_.tv_ptr(n, m); }

  // Modified retarded function C^>(i,j) - C^<(i,j), defined for all i, j.
  const cplx* ret_ext(int i, int j, cplx* scratch) const {
    if (i >= j) return c_.ret_ptr(i, j);
    blk::neg_adjoint(scratch, cc_.ret_ptr(j, i), size());
    return scratch;
  }
  // C^<(i,j) for all i, j.
  const cplx* les(int i, int j, cplx* scratch) const {
    if (i <= j) return c_.les_ptr(i, j);
    blk::neg_adjoint(scratch, cc_.les_ptr(j, i), size());
    return scratch;
  }
  // Advanced component C^A(i,j) = [(C^dagger)^R(j,i)]^dagger for i <= j,
  // continued as minus the modified retarded function for i > j.
  const cplx* adv_ext(int i, int j, cplx* scratch) const {
    if (i <= j) {
      blk::adjoint(scratch, cc_.ret_ptr(j, i), size());
      return scratch;
    }
    blk::copy(scratch, c_.ret_ptr(i, j), size());
    blk::scale(scratch, -1.0, size());
    return scratch;
  }
  // C^vt(tau_m, t_n) = -xi [(C^dagger)^tv(n, beta - tau_m)]^dagger
  const cplx* vt(int m, int n, cplx* scratch) const {
    blk::neg_adjoint(scratch, cc_.tv_ptr(n, ntau() - m), size());
    if (sig() == FERMION) blk::scale(scratch, -1.0, size());
    return scratch;
  }

 private:
  const HermMatrix& c_;
  const HermMatrix& cc_;
};

enum class Component { Mat, Ret, RetExt, Adv, Les, Gtr, TV, VT };

// Reads one component, reconstructing values outside the stored domain from
// the conjugate function cc.
inline CMatrix get_component(const HermMatrix& c, const HermMatrix& cc, Component which, int i, int j = 0) {
  ContourAccess acc(c, cc);
  const int d = c.size();
  std::vector<cplx> s(d * d), s2(d * d);
  auto in_t = [&](int x) { require(x >= 0 && x <= c.nt(), "get_component: time index out of range"); };
  auto in_tau = [&](int x) { require(x >= 0 && x <= c.ntau(), "get_component: tau index out of range"); };
  switch (which) {
    case Component::Mat:
      in_tau(i);
      return blk::to_matrix(acc.mat(i), d);
    case Component::TV:
      in_t(i), in_tau(j);
      return blk::to_matrix(acc.tv(i, j), d);
    case Component::VT:
      in_tau(i), in_t(j);
      return blk::to_matrix(acc.vt(i, j, s.data()), d);
    case Component::RetExt:
      in_t(i), in_t(j);
      return blk::to_matrix(acc.ret_ext(i, j, s.data()), d);
    case Component::Ret:
      in_t(i), in_t(j);
      if (i < j) return CMatrix::Zero(d, d);
      return blk::to_matrix(acc.ret_ext(i, j, s.data()), d);
    case Component::Adv:
      in_t(i), in_t(j);
      if (i > j) return CMatrix::Zero(d, d);
      return blk::to_matrix(acc.adv_ext(i, j, s.data()), d);
    case Component::Les:
      in_t(i), in_t(j);
      return blk::to_matrix(acc.les(i, j, s.data()), d);
    case Component::Gtr:
      in_t(i), in_t(j);
      return blk::to_matrix(acc.ret_ext(i, j, s.data()), d) + blk::to_matrix(acc.les(i, j, s2.data()), d);
  }
  return {};
}

// Hermitian-symmetric functions are their own conjugate.
inline CMatrix get_component(const HermMatrix& c, Component which, int i, int j = 0) {
  return get_component(c, c, which, i, j);
}

// Sum of absolute entrywise differences on slice n.
inline double distance_norm2(int n, const HermMatrix& a, const HermMatrix& b) {
  require(a.ntau() == b.ntau() && a.size() == b.size(), "distance_norm2: shapes differ");
  require(n >= -1 && n <= a.nt() && n <= b.nt(), "distance_norm2: slice out of range");
  const int d = a.size();
  double s = 0.0;
  if (n == -1) {
    for (int m = 0; m <= a.ntau(); ++m) s += blk::abs_sum(a.mat_ptr(m), b.mat_ptr(m), d);
    return s;
  }
  for (int j = 0; j <= n; ++j) {
    s += blk::abs_sum(a.ret_ptr(n, j), b.ret_ptr(n, j), d);
    s += blk::abs_sum(a.les_ptr(j, n), b.les_ptr(j, n), d);
  }
  for (int m = 0; m <= a.ntau(); ++m) s += blk::abs_sum(a.tv_ptr(n, m), b.tv_ptr(n, m), d);
  return s;
}

namespace detail {

// Values of slice n implied by the Matsubara component through KMS:
// tv = i xi C^M(beta - tau), les = i xi C^M(beta), ret = i C^M(0) - i xi C^M(beta).
inline void slice_from_mat(HermMatrix& c, int n) {
  const int d = c.size(), nt = c.ntau();
  const double xi = c.sig();
  for (int m = 0; m <= nt; ++m) {
    blk::copy(c.tv_ptr(n, m), c.mat_ptr(nt - m), d);
    blk::scale(c.tv_ptr(n, m), I * xi, d);
  }
  std::vector<cplx> les(d * d), ret(d * d);
  blk::copy(les.data(), c.mat_ptr(nt), d);
  blk::scale(les.data(), I * xi, d);
  blk::copy(ret.data(), c.mat_ptr(0), d);
  blk::scale(ret.data(), I, d);
  blk::axpy(ret.data(), -1.0, les.data(), d);
  for (int j = 0; j <= n; ++j) {
    blk::copy(c.les_ptr(j, n), les.data(), d);
    blk::copy(c.ret_ptr(n, j), ret.data(), d);
  }
}

}  // namespace detail

// Sets slice 0 from the Matsubara component (boundary conditions at t = 0).
inline void init_from_matsubara(HermMatrix& c) {
  require(c.nt() >= 0, "init_from_matsubara: no real-time slices");
  detail::slice_from_mat(c, 0);
}

// Initial guess for slices 0..k: time-independent continuation of t = 0.
inline void set_tk_from_mat(HermMatrix& c, int k) {
  require(c.nt() >= k, "set_tk_from_mat: nt < k");
  for (int n = 0; n <= k; ++n) detail::slice_from_mat(c, n);
}

// Fills slice n+1 by order-k polynomial extrapolation from slices n-k..n.
// Assumes hermitian symmetry of c.
inline void extrapolate_timestep(int n, HermMatrix& c, int k) {
  require(n >= k && n + 1 <= c.nt(), "extrapolate_timestep: need k <= n < nt");
  const auto& ig = integrator(k);
  const int d = c.size(), es = d * d;
  auto combine = [&](cplx* out, auto&& sample) {
    blk::zero(out, d);
    for (int l = 0; l <= k; ++l) blk::axpy(out, ig.extrap_weight(l), sample(n - l), d);
  };
  ContourAccess acc(c, c);
  for (int m = 0; m <= c.ntau(); ++m)
    combine(c.tv_ptr(n + 1, m), [&](int t) { return c.tv_ptr(t, m); });
  std::vector<std::vector<cplx>> buf(k + 1, std::vector<cplx>(es));
  // Near the time origin extrapolate along t for fixed j, along diagonals elsewhere.
  for (int j = 0; j <= k; ++j) {
    combine(c.ret_ptr(n + 1, j), [&](int t) { return acc.ret_ext(t, j, buf[n - t].data()); });
    combine(c.les_ptr(j, n + 1), [&](int t) { return acc.les(j, t, buf[n - t].data()); });
  }
  for (int j = k + 1; j <= n + 1; ++j) {
    const int shift = n + 1 - j;
    combine(c.ret_ptr(n + 1, j), [&](int t) { return c.ret_ptr(t, t - shift); });
    combine(c.les_ptr(j, n + 1), [&](int t) { return c.les_ptr(t - shift, t); });
  }
}

}  // namespace kbe
