#include <gtest/gtest.h>

#include <cstring>

#include "helpers.hpp"
#include "kbe/convolution.hpp"
#include "kbe/diagrams.hpp"
#include "kbe/dyson.hpp"
#include "kbe/vie2.hpp"

// Randomized invariants, one test instance per seed.
using namespace kbe;
using namespace testutil;

namespace {

constexpr int kSeeds = 100;

class Seeded : public ::testing::TestWithParam<int> {
 public:
  std::mt19937 rng{static_cast<unsigned>(7919 * GetParam() + 13)};
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  int statistics() { return pick(0, 1) ? BOSON : FERMION; }
};

double herm_error(const CMatrix& m) { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }

// A small random problem: G solves the Dyson equation with eps and a hermitian Sigma.
struct Problem {
  int nt, ntau, d, k, sig;
  double beta, h, mu = 0.0;
  ContourFunction eps;
  HermMatrix sigma;
};

Problem random_problem(Seeded& s, std::mt19937& rng, int nt, int ntau) {
  Problem p{nt, ntau, s.pick(1, 2), s.pick(1, 5), s.statistics(), s.uniform(0.5, 3.0), s.uniform(0.01, 0.05),
            0.0, ContourFunction(nt, 1), HermMatrix()};
  CMatrix e = random_hermitian(rng, p.d);
  if (p.sig == BOSON) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(e);
    e += (1.5 - es.eigenvalues().minCoeff()) * CMatrix::Identity(p.d, p.d);
  }
  p.eps = ContourFunction(nt, p.d);
  for (int n = -1; n <= nt; ++n) p.eps.set(n, e + 0.3 * std::sin(0.7 * std::max(n, 0) * p.h) * CMatrix::Identity(p.d, p.d));
  p.sigma = random_free_gf(rng, nt, ntau, p.d, p.sig, p.beta, p.h);
  const double lam2 = s.uniform(0.05, 0.3);
  for (int n = -1; n <= nt; ++n) p.sigma.smul(n, lam2);
  return p;
}

bool same_slice(const HermMatrix& a, const HermMatrix& b, int n) {
  const auto x = a.get_timestep(n), y = b.get_timestep(n);
  const auto u = x.view(), v = y.view();
  auto eq = [](const cplx* p, const cplx* q, size_t count) { return std::memcmp(p, q, count * sizeof(cplx)) == 0; };
  const size_t es = a.element_size();
  if (n == -1) return eq(u.mat, v.mat, (a.ntau() + 1) * es);
  return eq(u.ret, v.ret, (n + 1) * es) && eq(u.les, v.les, (n + 1) * es) && eq(u.tv, v.tv, (a.ntau() + 1) * es);
}

// Adds noise to slices > n0 of c.
void perturb_after(HermMatrix& c, int n0, std::mt19937& rng) {
  std::normal_distribution<double> nd(0.0, 0.1);
  for (int n = n0 + 1; n <= c.nt(); ++n) {
    for (int j = 0; j <= n; ++j)
      for (int e = 0; e < c.element_size(); ++e) c.ret_ptr(n, j)[e] += cplx(nd(rng), nd(rng)), c.les_ptr(j, n)[e] += cplx(nd(rng), nd(rng));
    for (int m = 0; m <= c.ntau(); ++m)
      for (int e = 0; e < c.element_size(); ++e) c.tv_ptr(n, m)[e] += cplx(nd(rng), nd(rng));
  }
}

// ---- hermitian symmetry ----

TEST_P(Seeded, FreeGreenFunctionIsHermitian) {
  const int d = pick(1, 3), sig = statistics(), nt = pick(3, 12), ntau = pick(5, 20);
  const auto g = random_free_gf(rng, nt, ntau, d, sig, uniform(0.5, 5.0), uniform(0.01, 0.1));
  const CMatrix mi = -I * CMatrix::Identity(d, d);
  for (int m = 0; m <= ntau; ++m) EXPECT_LT(herm_error(g.get_mat(m)), 1e-13);
  for (int n = 0; n <= nt; ++n) {
    EXPECT_LT((g.get_ret(n, n) - mi).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LT(herm_error(I * g.get_les(n, n)), 1e-13);
    EXPECT_LT(herm_error(g.density_matrix(n)), 1e-13);
    for (int j = 0; j < n; ++j) {
      EXPECT_LT((get_component(g, Component::Les, n, j) + get_component(g, Component::Les, j, n).adjoint())
                    .cwiseAbs()
                    .maxCoeff(),
                1e-13);
      EXPECT_LT((get_component(g, Component::Adv, j, n) - g.get_ret(n, j).adjoint()).cwiseAbs().maxCoeff(), 1e-13);
    }
  }
}

TEST_P(Seeded, DysonSolutionIsHermitian) {
  auto p = random_problem(*this, rng, 12, 30);
  HermMatrix g(p.nt, p.ntau, p.d, p.sig);
  dyson(g, p.mu, p.eps, p.sigma, p.beta, p.h, p.k);
  for (int m = 0; m <= p.ntau; ++m) EXPECT_LT(herm_error(g.get_mat(m)), 1e-12);
  for (int n = 0; n <= p.nt; ++n) {
    EXPECT_LT((g.get_ret(n, n) + I * CMatrix::Identity(p.d, p.d)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(herm_error(I * g.get_les(n, n)), 1e-12) << "n=" << n << " k=" << p.k;
  }
}

TEST_P(Seeded, Vie2SolutionIsHermitian) {
  const int nt = 12, ntau = 30, d = pick(1, 2), k = pick(1, 5), sig = statistics();
  const double beta = uniform(0.5, 3.0), h = uniform(0.01, 0.05);
  auto f = random_free_gf(rng, nt, ntau, d, sig, beta, h);
  for (int n = -1; n <= nt; ++n) f.smul(n, uniform(0.1, 0.5));
  HermMatrix g(nt, ntau, d, sig);
  vie2(g, f, f, f, beta, h, k);
  for (int m = 0; m <= ntau; ++m) EXPECT_LT(herm_error(g.get_mat(m)), 1e-12);
  for (int n = 0; n <= nt; ++n) EXPECT_LT(herm_error(I * g.get_les(n, n)), 1e-12) << "n=" << n << " k=" << k;
}

// ---- KMS corner ----

// Slice 0 of c against the values implied by its Matsubara component.
double kms_corner_error(const HermMatrix& c) {
  HermMatrix k = c;
  init_from_matsubara(k);
  double err = 0.0;
  for (int m = 0; m <= c.ntau(); ++m) err = std::max(err, (k.get_tv(0, m) - c.get_tv(0, m)).cwiseAbs().maxCoeff());
  err = std::max(err, (k.get_ret(0, 0) - c.get_ret(0, 0)).cwiseAbs().maxCoeff());
  err = std::max(err, (k.get_les(0, 0) - c.get_les(0, 0)).cwiseAbs().maxCoeff());
  return err;
}

TEST_P(Seeded, BubblesKeepKmsCorner) {
  const int d = pick(1, 2), ntau = pick(4, 16), sa = statistics(), sb = statistics();
  const double beta = uniform(0.5, 4.0);
  const auto a = random_free_gf(rng, 0, ntau, d, sa, beta, 0.1), b = random_free_gf(rng, 0, ntau, d, sb, beta, 0.1);
  HermMatrix c1(0, ntau, d, sa * sb), c2 = c1;
  for (int n = -1; n <= 0; ++n) {
    bubble1(c1.slice(n), a.slice(n), b.slice(n));
    bubble2(c2.slice(n), a.slice(n), b.slice(n));
  }
  EXPECT_LT(kms_corner_error(c1), 1e-13);
  EXPECT_LT(kms_corner_error(c2), 1e-13);
}

TEST_P(Seeded, ConvolutionKeepsKmsCorner) {
  const int d = pick(1, 2), sig = statistics(), k = pick(3, 5), ntau = 80;
  const double beta = uniform(0.5, 2.0), h = 0.05;
  const auto a = random_free_gf(rng, k, ntau, d, sig, beta, h), b = random_free_gf(rng, k, ntau, d, sig, beta, h);
  HermMatrix c(k, ntau, d, sig);
  convolution_timestep(-1, c, a, nullptr, b, beta, h, k);
  convolution_timestep(0, c, a, nullptr, b, beta, h, k);
  EXPECT_LT(kms_corner_error(c), 1e-5) << "k=" << k << " beta=" << beta;
}

// ---- causality: slice n does not see inputs beyond n ----

TEST_P(Seeded, DysonIsCausal) {
  auto p = random_problem(*this, rng, 14, 12);
  const int n0 = pick(p.k, p.nt - 1);
  const auto variant = pick(0, 1) ? StepVariant::Parallel : StepVariant::Serial;
  HermMatrix g1(p.nt, p.ntau, p.d, p.sig), g2 = g1;
  dyson(g1, p.mu, p.eps, p.sigma, p.beta, p.h, p.k, {}, variant);
  perturb_after(p.sigma, n0, rng);
  for (int n = n0 + 1; n <= p.nt; ++n) p.eps.set(n, p.eps.get(n) + uniform(-1, 1) * CMatrix::Identity(p.d, p.d));
  dyson(g2, p.mu, p.eps, p.sigma, p.beta, p.h, p.k, {}, variant);
  for (int n = -1; n <= n0; ++n) EXPECT_TRUE(same_slice(g1, g2, n)) << "slice " << n << " n0=" << n0;
  EXPECT_FALSE(same_slice(g1, g2, p.nt));
}

TEST_P(Seeded, Vie2IsCausal) {
  const int nt = 12, ntau = 12, d = pick(1, 2), k = pick(1, 5), sig = statistics();
  const double beta = uniform(0.5, 2.0), h = 0.05;
  const int n0 = pick(k, nt - 1);
  auto f = random_free_gf(rng, nt, ntau, d, sig, beta, h), q = random_free_gf(rng, nt, ntau, d, sig, beta, h);
  for (int n = -1; n <= nt; ++n) f.smul(n, 0.3);
  const auto variant = pick(0, 1) ? StepVariant::Parallel : StepVariant::Serial;
  HermMatrix fcc = f, g1(nt, ntau, d, sig), g2 = g1;
  vie2(g1, f, fcc, q, beta, h, k, {}, variant);
  perturb_after(f, n0, rng);
  perturb_after(fcc, n0, rng);
  perturb_after(q, n0, rng);
  vie2(g2, f, fcc, q, beta, h, k, {}, variant);
  for (int n = -1; n <= n0; ++n) EXPECT_TRUE(same_slice(g1, g2, n)) << "slice " << n;
}

TEST_P(Seeded, ConvolutionAndBubblesAreCausal) {
  const int nt = 10, ntau = 10, d = pick(1, 2), k = pick(1, 5), sig = statistics();
  const double beta = uniform(0.5, 2.0), h = 0.05;
  const int n0 = pick(k, nt - 1);
  auto a = random_free_gf(rng, nt, ntau, d, sig, beta, h), b = random_free_gf(rng, nt, ntau, d, sig, beta, h);
  HermMatrix c1(nt, ntau, d, sig), c2 = c1, p1(nt, ntau, d, BOSON), p2 = p1;
  auto run = [&](HermMatrix& c, HermMatrix& pp) {
    convolution(c, a, a, nullptr, b, b, beta, h, k);
    for (int n = -1; n <= nt; ++n) bubble1(pp.slice(n), a.slice(n), b.slice(n));
  };
  run(c1, p1);
  perturb_after(a, n0, rng);
  perturb_after(b, n0, rng);
  run(c2, p2);
  for (int n = -1; n <= n0; ++n) {
    EXPECT_TRUE(same_slice(c1, c2, n)) << "slice " << n;
    EXPECT_TRUE(same_slice(p1, p2, n)) << "slice " << n;
  }
}

// ---- weight tables ----

struct Poly {
  std::vector<double> c;
  double operator()(double x) const {
    double s = 0, xp = 1;
    for (double v : c) s += v * xp, xp *= x;
    return s;
  }
  double integral(double a, double b) const {
    double s = 0;
    for (size_t p = 0; p < c.size(); ++p) s += c[p] * (std::pow(b, p + 1) - std::pow(a, p + 1)) / (p + 1);
    return s;
  }
  double derivative(double x) const {
    double s = 0;
    for (size_t p = 1; p < c.size(); ++p) s += p * c[p] * std::pow(x, p - 1);
    return s;
  }
};

TEST_P(Seeded, WeightTablesExactOnPolynomials) {
  const int k = pick(1, 5);
  const auto& ig = integrator(k);
  auto poly = [&](int deg) {
    Poly p;
    for (int i = 0; i <= deg; ++i) p.c.push_back(uniform(-1, 1));
    return p;
  };
  const Poly p = poly(k), q = poly(k), p1 = poly(k + 1);
  const int n = pick(0, 40);
  const double scale = std::pow(std::max(n, k) + 1.0, k + 2);

  double greg = 0;
  for (int j = 0; j < ig.gregory_points(n); ++j) greg += ig.gregory_weight(n, j) * p(j);
  EXPECT_NEAR(greg, p.integral(0, n), 1e-11 * scale) << "k=" << k << " n=" << n;

  const int nb = std::max(n, k + 1);
  double bd = 0, st = 0;
  for (int l = 0; l <= k; ++l) bd += ig.bd_weight(l) * p(nb - l);
  for (int l = 0; l <= k + 1; ++l) st += ig.step_weight(l) * p1(nb - l);
  EXPECT_NEAR(bd, p.derivative(nb), 1e-10 * scale);
  EXPECT_NEAR(st, p1.derivative(nb), 1e-10 * scale * nb);

  const int m = pick(0, k);
  double dif = 0, ext = 0, rc = 0;
  for (int l = 0; l <= k; ++l) dif += ig.poly_diff(m, l) * p(l);
  for (int l = 0; l <= k; ++l) ext += ig.extrap_weight(l) * p(nb - l);
  EXPECT_NEAR(dif, p.derivative(m), 1e-11);
  EXPECT_NEAR(ext, p(nb + 1), 1e-9 * scale);

  // int_0^m p(m - x) q(x) dx = sum p_a q_b m^(a+b+1) a! b! / (a+b+1)!
  double exact = 0;
  for (int a = 0; a <= k; ++a)
    for (int b = 0; b <= k; ++b)
      exact += p.c[a] * q.c[b] * std::pow(m, a + b + 1) * std::exp(std::lgamma(a + 1) + std::lgamma(b + 1) - std::lgamma(a + b + 2));
  for (int r = 0; r <= k; ++r)
    for (int s = 0; s <= k; ++s) rc += ig.rcorr(m, r, s) * p(r) * q(s);
  EXPECT_NEAR(rc, exact, 1e-12 * std::max(1.0, std::abs(exact)));
}

// ---- serial vs parallel time step ----

TEST_P(Seeded, SerialAndParallelStepAgree) {
  auto p = random_problem(*this, rng, 20, 20);
  p.h = 0.01;
  p.k = 5;
  p.sigma = random_free_gf(rng, p.nt, p.ntau, p.d, p.sig, p.beta, p.h);
  for (int n = -1; n <= p.nt; ++n) p.sigma.smul(n, 0.2);
  HermMatrix g(p.nt, p.ntau, p.d, p.sig);
  dyson(g, p.mu, p.eps, p.sigma, p.beta, p.h, p.k);
  const int n = pick(p.k + 1, p.nt);
  HermMatrix gs = g, gp = g;
  gs.set_timestep_zero(n);
  gp.set_timestep_zero(n);
  dyson_timestep(n, gs, p.mu, p.eps, p.sigma, p.beta, p.h, p.k, StepVariant::Serial);
  dyson_timestep_parallel(n, gp, p.mu, p.eps, p.sigma, p.beta, p.h, p.k, pick(1, 4));
  double err = 0;
  for (int j = 0; j <= n; ++j)
    err = std::max({err, (gs.get_les(j, n) - gp.get_les(j, n)).cwiseAbs().maxCoeff(),
                    (gs.get_ret(n, j) - gp.get_ret(n, j)).cwiseAbs().maxCoeff()});
  for (int m = 0; m <= p.ntau; ++m) err = std::max(err, (gs.get_tv(n, m) - gp.get_tv(n, m)).cwiseAbs().maxCoeff());
  EXPECT_LT(err, 1e-8) << "n=" << n << " k=" << p.k;
}

TEST_P(Seeded, Vie2SerialAndParallelStepAgree) {
  const int nt = 16, ntau = 16, d = pick(1, 2), k = 5, sig = statistics();
  const double beta = uniform(0.5, 2.0), h = 0.01;
  auto f = random_free_gf(rng, nt, ntau, d, sig, beta, h);
  for (int n = -1; n <= nt; ++n) f.smul(n, 0.3);
  const HermMatrix q = f;  // Q commutes with F, so a hermitian solution exists
  HermMatrix g(nt, ntau, d, sig);
  vie2(g, f, f, q, beta, h, k);
  const int n = pick(k + 1, nt);
  HermMatrix gs = g, gp = g;
  vie2_timestep(n, gs, f, f, q, beta, h, k, StepVariant::Serial);
  vie2_timestep(n, gp, f, f, q, beta, h, k, StepVariant::Parallel, pick(1, 4));
  double err = 0;
  for (int j = 0; j <= n; ++j)
    err = std::max({err, (gs.get_les(j, n) - gp.get_les(j, n)).cwiseAbs().maxCoeff(),
                    (gs.get_ret(n, j) - gp.get_ret(n, j)).cwiseAbs().maxCoeff()});
  EXPECT_LT(err, 1e-8) << "n=" << n << " k=" << k;
}

INSTANTIATE_TEST_SUITE_P(Seeds, Seeded, ::testing::Range(0, kSeeds));

}  // namespace
