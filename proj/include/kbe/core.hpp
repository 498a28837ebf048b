#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace kbe {

using cplx = std::complex<double>;
inline constexpr cplx I{0.0, 1.0};

inline constexpr int FERMION = -1;
inline constexpr int BOSON = +1;

using CMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<CMatrix>;
using CConstMap = Eigen::Map<const CMatrix>;

// Raised when a linear system in a solver step is numerically singular.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

inline void check_statistics(int sig) {
  require(sig == FERMION || sig == BOSON, "statistics must be -1 (fermion) or +1 (boson)");
}

// Dense d x d row-major block kernels.
namespace blk {

inline void zero(cplx* a, int d) { std::fill(a, a + d * d, cplx{}); }

inline void copy(cplx* dst, const cplx* src, int d) { std::copy(src, src + d * d, dst); }

inline void identity(cplx* a, int d) {
  zero(a, d);
  for (int i = 0; i < d; ++i) a[i * d + i] = 1.0;
}

inline void scale(cplx* a, cplx s, int d) {
  for (int i = 0; i < d * d; ++i) a[i] *= s;
}

// y += s * x
inline void axpy(cplx* y, cplx s, const cplx* x, int d) {
  for (int i = 0; i < d * d; ++i) y[i] += s * x[i];
}

// dst = -src^dagger
inline void neg_adjoint(cplx* dst, const cplx* src, int d) {
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) dst[i * d + j] = -std::conj(src[j * d + i]);
}

inline void adjoint(cplx* dst, const cplx* src, int d) {
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) dst[i * d + j] = std::conj(src[j * d + i]);
}

// c += s * a * b
inline void gemm_acc(cplx* c, cplx s, const cplx* a, const cplx* b, int d) {
  switch (d) {
    case 1:
      c[0] += s * a[0] * b[0];
      return;
    case 2: {
      const cplx a0 = s * a[0], a1 = s * a[1], a2 = s * a[2], a3 = s * a[3];
      c[0] += a0 * b[0] + a1 * b[2];
      c[1] += a0 * b[1] + a1 * b[3];
      c[2] += a2 * b[0] + a3 * b[2];
      c[3] += a2 * b[1] + a3 * b[3];
      return;
    }
    default:
      for (int i = 0; i < d; ++i)
        for (int l = 0; l < d; ++l) {
          const cplx ail = s * a[i * d + l];
          const cplx* br = b + l * d;
          cplx* cr = c + i * d;
          for (int j = 0; j < d; ++j) cr[j] += ail * br[j];
        }
  }
}

// c = a * b (c must not alias a or b)
inline void gemm(cplx* c, const cplx* a, const cplx* b, int d) {
  zero(c, d);
  gemm_acc(c, 1.0, a, b, d);
}

inline CMatrix to_matrix(const cplx* a, int d) { return CConstMap(a, d, d); }

inline void from_matrix(cplx* dst, const CMatrix& m, int d) {
  require(m.rows() == d && m.cols() == d, "matrix size mismatch");
  CMap(dst, d, d) = m;
}

inline double abs_sum(const cplx* a, const cplx* b, int d) {
  double s = 0.0;
  for (int i = 0; i < d * d; ++i) s += std::abs(a[i] - b[i]);
  return s;
}

}  // namespace blk

// Gaussian elimination with partial pivoting. Solves A X = B in place;
// A is n x n row-major, B is n x nrhs row-major and receives X.
inline void lu_solve(std::vector<cplx>& a, int n, cplx* b, int nrhs) {
  constexpr double tiny = 1e-14;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    double best = std::abs(a[c * n + c]);
    for (int r = c + 1; r < n; ++r) {
      double v = std::abs(a[r * n + c]);
      if (v > best) best = v, piv = r;
    }
    double scale = 0.0;
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(a[piv * n + j]));
    if (best <= tiny * scale || best == 0.0) throw SolverError("singular system in solver step");
    if (piv != c) {
      for (int j = 0; j < n; ++j) std::swap(a[c * n + j], a[piv * n + j]);
      for (int j = 0; j < nrhs; ++j) std::swap(b[c * nrhs + j], b[piv * nrhs + j]);
    }
    const cplx inv = 1.0 / a[c * n + c];
    for (int r = c + 1; r < n; ++r) {
      const cplx f = a[r * n + c] * inv;
      if (f == cplx{}) continue;
      for (int j = c; j < n; ++j) a[r * n + j] -= f * a[c * n + j];
      for (int j = 0; j < nrhs; ++j) b[r * nrhs + j] -= f * b[c * nrhs + j];
    }
  }
  for (int c = n - 1; c >= 0; --c) {
    const cplx inv = 1.0 / a[c * n + c];
    for (int j = 0; j < nrhs; ++j) {
      cplx s = b[c * nrhs + j];
      for (int l = c + 1; l < n; ++l) s -= a[c * n + l] * b[l * nrhs + j];
      b[c * nrhs + j] = s * inv;
    }
  }
}

// Runs fn(i) for i in [begin, end) on up to `threads` workers (0 = hardware).
template <class Fn>
void parallel_for(int begin, int end, Fn&& fn, int threads = 0) {
  int n = end - begin;
  if (n <= 0) return;
  int nthr = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  nthr = std::clamp(nthr, 1, n);
  if (nthr == 1) {
    for (int i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex mtx;
  pool.reserve(nthr);
  for (int t = 0; t < nthr; ++t)
    pool.emplace_back([&, t] {
      try {
        for (int i = begin + t; i < end; i += nthr) fn(i);
      } catch (...) {
        std::lock_guard lock(mtx);
        if (!err) err = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace kbe
