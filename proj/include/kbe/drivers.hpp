#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <regex>
#include <set>
#include <sstream>

#include "diagrams.hpp"
#include "dyson.hpp"
#include "freegf.hpp"
#include "io.hpp"
#include "vie2.hpp"

// Demo drivers: accuracy tests of the solvers and the Hubbard chain.
namespace kbe {

// ---- input files ----

// Parameters from lines `__Name=value`. Later duplicates override earlier ones;
// other non-empty lines (except # comments) are skipped with a warning.
class Params {
 public:
  Params() = default;

  static Params parse(std::istream& is, const std::string& source = "input") {
    static const std::regex line_re(R"(^\s*__([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(\S(?:.*\S)?)\s*$)");
    Params p;
    std::string line;
    int no = 0;
    while (std::getline(is, line)) {
      ++no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      std::smatch m;
      if (std::regex_match(line, m, line_re))
        p.values_[m[1]] = m[2];
      else
        p.warnings_.push_back(source + ":" + std::to_string(no) + ": ignoring malformed line '" + line + "'");
    }
    return p;
  }

  static Params from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open input file " + path);
    return parse(is, path);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const std::map<std::string, std::string>& values() const { return values_; }

  template <class T>
  T get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::invalid_argument("missing required key: " + key);
    return convert<T>(key, it->second);
  }
  template <class T>
  T get(const std::string& key, const T& fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }

 private:
  template <class T>
  static T convert(const std::string& key, const std::string& s) {
    if constexpr (std::is_same_v<T, std::string>) {
      return s;
    } else {
      std::istringstream is(s);
      is.imbue(std::locale::classic());
      T v;
      if (!(is >> v) || !(is >> std::ws).eof()) throw std::invalid_argument("bad value for key " + key + ": '" + s + "'");
      return v;
    }
  }

  std::map<std::string, std::string> values_;
  std::vector<std::string> warnings_;
};

// ---- helpers ----

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "loglog_slope: need two or more points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    require(x[i] > 0 && y[i] > 0, "loglog_slope: values must be positive");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Integers round(10^x) for `count` values of x evenly spaced in [lo, hi], duplicates dropped.
inline std::vector<int> log_grid(double lo, double hi, int count) {
  std::vector<int> out;
  for (int i = 0; i < count; ++i) {
    const double x = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
    const int v = static_cast<int>(std::lround(std::pow(10.0, x)));
    if (out.empty() || v != out.back()) out.push_back(v);
  }
  return out;
}

namespace detail {

// Sum of absolute differences of one component on slice n.
inline double distance_les(int n, const HermMatrix& a, const HermMatrix& b) {
  double s = 0.0;
  for (int j = 0; j <= n; ++j) s += blk::abs_sum(a.les_ptr(j, n), b.les_ptr(j, n), a.size());
  return s;
}
inline double distance_ret(int n, const HermMatrix& a, const HermMatrix& b) {
  double s = 0.0;
  for (int j = 0; j <= n; ++j) s += blk::abs_sum(a.ret_ptr(n, j), b.ret_ptr(n, j), a.size());
  return s;
}
inline double distance_tv(int n, const HermMatrix& a, const HermMatrix& b) {
  double s = 0.0;
  for (int m = 0; m <= a.ntau(); ++m) s += blk::abs_sum(a.tv_ptr(n, m), b.tv_ptr(n, m), a.size());
  return s;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

// ---- quadrature ----

struct GregoryResult {
  int k;
  io::Table mean_error;  // N, h, err
  io::Table profile;     // x, err  at the reference step
  double slope;
};

// Mean absolute error (1/N) sum_n |I_n - I_n^ex| of int_0^x exp(ix') dx' on [0, 5pi/2].
inline GregoryResult run_gregory_test(int k, const std::vector<int>& ns, double h_profile = 0.025 * std::numbers::pi) {
  const double xmax = 2.5 * std::numbers::pi;
  auto errors = [&](int N, double h) {
    std::vector<cplx> y(std::max(N, k) + 1);
    for (size_t j = 0; j < y.size(); ++j) y[j] = std::exp(I * (h * j));
    std::vector<double> e(N + 1);
    for (int n = 0; n <= N; ++n) {
      const cplx ex = -I * (std::exp(I * (h * n)) - 1.0);
      e[n] = std::abs(gregory_integrate<cplx>(k, h, y, n) - ex);
    }
    return e;
  };
  GregoryResult r{k, {{"N", "h", "err"}, {}}, {{"x", "err"}, {}}, 0.0};
  std::vector<double> xs, ys;
  for (int N : ns) {
    const double h = xmax / N;
    const auto e = errors(N, h);
    double s = 0.0;
    for (double v : e) s += v;
    r.mean_error.add({double(N), h, s / N});
    xs.push_back(N), ys.push_back(s / N);
  }
  r.slope = loglog_slope(xs, ys);
  const int np = static_cast<int>(std::lround(xmax / h_profile));
  const auto e = errors(np, h_profile);
  for (int n = 0; n <= np; ++n) r.profile.add({n * h_profile, e[n]});
  return r;
}

// ---- downfolding tests ----

// Two-level model eps = [[e1, i lam], [-i lam, e2]]; the (1,1) element solves a
// 1x1 Dyson equation with Sigma = lam^2 g2.
struct DownfoldModel {
  double e1 = -1.0, e2 = 1.0, lam = 0.5, mu = 0.0, beta = 20.0;

  CMatrix hamiltonian() const {
    CMatrix e(2, 2);
    e << e1, I * lam, -I * lam, e2;
    return e;
  }
  HermMatrix exact(int nt, int ntau, double h) const {
    HermMatrix full(nt, ntau, 2, FERMION), g(nt, ntau, 1, FERMION);
    green_from_H(full, mu, hamiltonian(), beta, h);
    for (int m = 0; m <= ntau; ++m) g.mat_ptr(m)[0] = full.mat_ptr(m)[0];
    for (int n = 0; n <= nt; ++n) {
      for (int j = 0; j <= n; ++j) g.ret_ptr(n, j)[0] = full.ret_ptr(n, j)[0], g.les_ptr(j, n)[0] = full.les_ptr(j, n)[0];
      for (int m = 0; m <= ntau; ++m) g.tv_ptr(n, m)[0] = full.tv_ptr(n, m)[0];
    }
    return g;
  }
  HermMatrix sigma(int nt, int ntau, double h) const {
    HermMatrix s(nt, ntau, 1, FERMION);
    green_from_H(s, mu, CMatrix::Constant(1, 1, e2), beta, h);
    for (int n = -1; n <= nt; ++n) s.smul(n, lam * lam);
    return s;
  }
  ContourFunction eps1(int nt) const {
    ContourFunction f(nt, 1);
    f.set_constant(CMatrix::Constant(1, 1, e1));
    return f;
  }
};

struct EquilibriumResult {
  int k;
  io::Table table;  // Ntau, err_fourier, err_fixpoint
  double seconds;
};

inline EquilibriumResult run_test_equilibrium(int k, const std::vector<int>& ntaus, const DownfoldModel& mod = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  EquilibriumResult r{k, {{"Ntau", "err_fourier", "err_fixpoint"}, {}}, 0.0};
  const auto eps = mod.eps1(-1);
  for (int ntau : ntaus) {
    const HermMatrix ex = mod.exact(-1, ntau, 1.0), sigma = mod.sigma(-1, ntau, 1.0);
    HermMatrix g(-1, ntau, 1, FERMION);
    MatsubaraOptions opt;
    opt.method = MatsubaraMethod::Fourier;
    dyson_mat(g, mod.mu, eps, sigma, mod.beta, k, opt);
    const double ef = distance_norm2(-1, ex, g) / ntau;
    opt.method = MatsubaraMethod::Fixpoint;
    dyson_mat(g, mod.mu, eps, sigma, mod.beta, k, opt);
    r.table.add({double(ntau), ef, distance_norm2(-1, ex, g) / ntau});
  }
  r.seconds = detail::seconds_since(t0);
  return r;
}

struct NonequilibriumResult {
  int k;
  io::Table table;  // Nt, h, err_dyson, err_vie2
  double seconds;
};

// Average error over the two-time plane: les and ret on the triangle / Nt^2, tv / (Nt Ntau).
inline double noneq_error(const HermMatrix& a, const HermMatrix& b) {
  const int nt = a.nt(), ntau = a.ntau();
  double e = 0.0;
  for (int n = 0; n <= nt; ++n) {
    e += detail::distance_les(n, a, b) / (double(nt) * nt);
    e += detail::distance_ret(n, a, b) / (double(nt) * nt);
    e += detail::distance_tv(n, a, b) / (double(nt) * ntau);
  }
  return e;
}

inline NonequilibriumResult run_test_nonequilibrium(int k, const std::vector<int>& nts, int ntau = 800,
                                                    double tmax = 5.0, const DownfoldModel& mod = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  NonequilibriumResult r{k, {{"Nt", "h", "err_dyson", "err_vie2"}, {}}, 0.0};
  for (int nt : nts) {
    require(nt > k, "run_test_nonequilibrium: Nt must exceed k");
    const double h = tmax / nt;
    const HermMatrix ex = mod.exact(nt, ntau, h), sigma = mod.sigma(nt, ntau, h);
    const auto eps = mod.eps1(nt);
    HermMatrix g(nt, ntau, 1, FERMION);
    dyson(g, mod.mu, eps, sigma, mod.beta, h, k);
    const double ed = noneq_error(ex, g);

    HermMatrix g0(nt, ntau, 1, FERMION), f(nt, ntau, 1, FERMION), fcc(nt, ntau, 1, FERMION);
    green_from_H(g0, mod.mu, CMatrix::Constant(1, 1, mod.e1), mod.beta, h);
    auto kernel = [&](int n) {
      convolution_timestep(n, f, g0, nullptr, sigma, mod.beta, h, k);
      convolution_timestep(n, fcc, sigma, nullptr, g0, mod.beta, h, k);
      f.smul(n, -1.0);
      fcc.smul(n, -1.0);
    };
    HermMatrix gv(nt, ntau, 1, FERMION);
    kernel(-1);
    vie2_mat(gv, f, fcc, g0, mod.beta, k);
    for (int n = 0; n <= k; ++n) kernel(n);
    vie2_start(gv, f, fcc, g0, mod.beta, h, k);
    for (int n = k + 1; n <= nt; ++n) {
      kernel(n);
      vie2_timestep(n, gv, f, fcc, g0, mod.beta, h, k);
    }
    r.table.add({double(nt), h, ed, noneq_error(ex, gv)});
  }
  r.seconds = detail::seconds_since(t0);
  return r;
}

// ---- Hubbard chain ----

enum class Approximation { SecondBorn, GW, TMatrix };

inline Approximation parse_approximation(const std::string& s) {
  if (s == "2B") return Approximation::SecondBorn;
  if (s == "GW") return Approximation::GW;
  if (s == "TPP") return Approximation::TMatrix;
  throw std::invalid_argument("unknown approximation '" + s + "' (expected 2B, GW or TPP)");
}

struct HubbardParams {
  int nsites = 2;
  double hopping = 1.0, u = 1.0, nbar = 0.5, w0 = 5.0, beta = 20.0, mu = 0.0;
  int nt = 400, ntau = 400, k = 5;
  double h = 0.025;
  Approximation approx = Approximation::SecondBorn;
  int mats_max_iter = 200, boot_max_iter = 200, corrector_steps = 5;
  double mats_max_err = 1e-8, boot_max_err = 1e-8;
  StepVariant variant = StepVariant::Serial;

  static HubbardParams from(const Params& p) {
    HubbardParams hp;
    hp.nsites = p.get("Nsites", hp.nsites);
    hp.hopping = p.get("J", hp.hopping);
    hp.u = p.get("U", hp.u);
    hp.nbar = p.get("n", hp.nbar);
    hp.w0 = p.get("w0", hp.w0);
    hp.beta = p.get("beta", hp.beta);
    hp.mu = p.get("MuChem", hp.mu);
    hp.ntau = p.get("Ntau", hp.ntau);
    hp.k = p.get("SolveOrder", hp.k);
    hp.h = p.get("h", hp.h);
    if (p.has("Nt"))
      hp.nt = p.get<int>("Nt");
    else if (p.has("Tmax"))
      hp.nt = static_cast<int>(std::lround(p.get<double>("Tmax") / hp.h));
    else
      hp.nt = static_cast<int>(std::lround(5.0 * 2.0 * std::numbers::pi / hp.u / hp.h));
    hp.approx = parse_approximation(p.get<std::string>("Approx", "2B"));
    hp.mats_max_iter = p.get("MatsMaxIter", hp.mats_max_iter);
    hp.mats_max_err = p.get("MatsMaxErr", hp.mats_max_err);
    hp.boot_max_iter = p.get("BootstrapMaxIter", hp.boot_max_iter);
    hp.boot_max_err = p.get("BootstrapMaxErr", hp.boot_max_err);
    hp.corrector_steps = p.get("CorrectorSteps", hp.corrector_steps);
    hp.variant = p.get("Parallel", 0) ? StepVariant::Parallel : StepVariant::Serial;
    return hp;
  }
};

struct HubbardResult {
  io::Table observables;  // t, n1, ekin, etot
  double drift = 0.0;     // max |E(t) - E(0)|
  int mats_iterations = 0, boot_iterations = 0;
  bool mats_converged = false, boot_converged = false;
  double tmax = 0.0, seconds = 0.0;
  HermMatrix g;
};

namespace detail {

// Auxiliary containers of one self-energy approximation.
class SelfEnergy {
 public:
  SelfEnergy(const HubbardParams& p, const ContourFunction& u)
      : p_(p), u_(u), d_(p.nsites) {
    if (p.approx != Approximation::SecondBorn) {
      q_ = HermMatrix(p.nt, p.ntau, d_, BOSON);
      x_ = kxu_ = uxk_ = q_;
    }
  }

  void update(int n, const HermMatrix& g, HermMatrix& sigma) {
    switch (p_.approx) {
      case Approximation::SecondBorn:
        sigma_2b(n, g, u_, sigma);
        return;
      case Approximation::GW:
        polarization(n, g, q_);
        chi_timestep(n, q_, u_, kxu_, uxk_, x_, p_.beta, p_.h, p_.k);
        sigma_gw(n, g, u_, x_, sigma);
        return;
      case Approximation::TMatrix:
        pp_bubble(n, g, q_);
        tmatrix_timestep(n, q_, u_, kxu_, uxk_, x_, p_.beta, p_.h, p_.k);
        sigma_tpp(n, g, u_, x_, sigma);
        return;
    }
  }

  // Slices 0..k together.
  void update_start(const HermMatrix& g, HermMatrix& sigma) {
    if (p_.approx == Approximation::SecondBorn) {
      for (int n = 0; n <= p_.k; ++n) sigma_2b(n, g, u_, sigma);
      return;
    }
    for (int n = 0; n <= p_.k; ++n) {
      if (p_.approx == Approximation::GW)
        polarization(n, g, q_);
      else
        pp_bubble(n, g, q_);
    }
    if (p_.approx == Approximation::GW) {
      chi_start(q_, u_, kxu_, uxk_, x_, p_.beta, p_.h, p_.k);
      for (int n = 0; n <= p_.k; ++n) sigma_gw(n, g, u_, x_, sigma);
    } else {
      tmatrix_start(q_, u_, kxu_, uxk_, x_, p_.beta, p_.h, p_.k);
      for (int n = 0; n <= p_.k; ++n) sigma_tpp(n, g, u_, x_, sigma);
    }
  }

 private:
  const HubbardParams& p_;
  const ContourFunction& u_;
  int d_;
  HermMatrix q_, x_, kxu_, uxk_;
};

}  // namespace detail

// Hopping matrix -J on nearest neighbours of an open chain.
inline CMatrix chain_hopping(int nsites, double hopping) {
  CMatrix e = CMatrix::Zero(nsites, nsites);
  for (int i = 0; i + 1 < nsites; ++i) e(i, i + 1) = e(i + 1, i) = -hopping;
  return e;
}

// Self-consistent Matsubara solution, bootstrap of slices 0..k, then predictor-corrector
// propagation after the quench eps0 -> eps0 + w0 on the first site.
inline HubbardResult run_hubbard_chain(const HubbardParams& p) {
  const auto t0 = std::chrono::steady_clock::now();
  require(p.nsites >= 1 && p.nt > p.k && p.h > 0 && p.beta > 0, "run_hubbard_chain: bad parameters");
  const int d = p.nsites, nt = p.nt, k = p.k;
  const CMatrix hop = chain_hopping(d, p.hopping);
  ContourFunction eps0(nt, d), eps_mf(nt, d);
  eps0.set_constant(hop);
  const ContourFunction u = hubbard_u(nt, d, p.u);

  HubbardResult res;
  res.g = HermMatrix(nt, p.ntau, d, FERMION);
  HermMatrix& g = res.g;
  HermMatrix sigma(nt, p.ntau, d, FERMION);
  detail::SelfEnergy se(p, u);
  green_from_H(g, p.mu, hop, p.beta, p.h);

  // Matsubara self-consistency
  TimeSlice prev = g.get_timestep(-1);
  for (int iter = 0; iter <= p.mats_max_iter; ++iter) {
    ham_mf(-1, g, u, eps0, p.nbar, eps_mf);
    se.update(-1, g, sigma);
    dyson_mat(g, p.mu, eps_mf, sigma, p.beta, k);
    res.mats_iterations = iter + 1;
    HermMatrix tmp(-1, p.ntau, d, FERMION);
    tmp.set_timestep(-1, prev);
    const double err = distance_norm2(-1, g, tmp);
    if (err < p.mats_max_err) {
      res.mats_converged = true;
      break;
    }
    prev = g.get_timestep(-1);
  }

  // quench
  CMatrix quenched = hop;
  quenched(0, 0) += p.w0;
  for (int n = 0; n <= nt; ++n) eps0.set(n, quenched);

  // bootstrap
  set_tk_from_mat(g, k);
  std::vector<TimeSlice> last(k + 1);
  for (int n = 0; n <= k; ++n) last[n] = g.get_timestep(n);
  for (int iter = 0; iter <= p.boot_max_iter; ++iter) {
    for (int n = 0; n <= k; ++n) ham_mf(n, g, u, eps0, p.nbar, eps_mf);
    se.update_start(g, sigma);
    dyson_start(g, p.mu, eps_mf, sigma, p.beta, p.h, k);
    double err = 0.0;
    for (int n = 0; n <= k; ++n) {
      const auto cur = g.slice(n);
      const auto old = last[n].view();
      for (int j = 0; j <= n; ++j) err += blk::abs_sum(cur.ret_at(j), old.ret_at(j), d) + blk::abs_sum(cur.les_at(j), old.les_at(j), d);
      for (int m = 0; m <= p.ntau; ++m) err += blk::abs_sum(cur.tv_at(m), old.tv_at(m), d);
      last[n] = g.get_timestep(n);
    }
    res.boot_iterations = iter + 1;
    if (err < p.boot_max_err && iter > 2) {
      res.boot_converged = true;
      break;
    }
  }

  // propagation
  for (int n = k + 1; n <= nt; ++n) {
    extrapolate_timestep(n - 1, g, k);
    for (int it = 0; it < p.corrector_steps; ++it) {
      ham_mf(n, g, u, eps0, p.nbar, eps_mf);
      se.update(n, g, sigma);
      dyson_timestep(n, g, p.mu, eps_mf, sigma, p.beta, p.h, k, p.variant);
    }
  }

  // observables
  res.observables = io::Table{{"t", "n1", "ekin", "etot"}, {}};
  double e_first = 0.0;
  for (int n = 0; n <= nt; ++n) {
    ham_mf(n, g, u, eps0, p.nbar, eps_mf);
    const CMatrix rho = g.density_matrix(n);
    const double ekin = (rho * hop).trace().real();
    const double etot = 0.5 * (rho * (eps0.get(n) + eps_mf.get(n))).trace().real() +
                        correlation_energy(n, g, sigma, p.beta, p.h, k);
    if (n == 0) e_first = etot;
    res.drift = std::max(res.drift, std::abs(etot - e_first));
    res.observables.add({n * p.h, rho(0, 0).real(), ekin, etot});
  }
  res.tmax = nt * p.h;
  res.seconds = detail::seconds_since(t0);
  return res;
}

}  // namespace kbe
