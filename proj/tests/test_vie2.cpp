#include <gtest/gtest.h>

#include "embedding.hpp"
#include "kbe/vie2.hpp"

using namespace kbe;
using namespace testutil;

namespace {

// Integral form of the embedding problem: G + F * G = g0 with F = -g0 * Sigma, F^dagger = -Sigma * g0,
// where g0 is the free GF of the system block.
struct IntegralForm {
  Embedding emb;
  HermMatrix g0, f, fcc;
  IntegralForm(int sig, int nt, int ntau, double beta, double h, int k, double mu = 0.0)
      : emb(scalar_case(sig, nt, ntau, beta, h, mu)),
        g0(nt, ntau, 1, sig),
        f(nt, ntau, 1, sig),
        fcc(nt, ntau, 1, sig) {
    green_from_H(g0, mu, emb.eps.get(-1), beta, h);
    convolution(f, g0, g0, nullptr, emb.sigma, emb.sigma, beta, h, k);
    convolution(fcc, emb.sigma, emb.sigma, nullptr, g0, g0, beta, h, k);
    for (int n = -1; n <= nt; ++n) f.smul(n, -1.0), fcc.smul(n, -1.0);
  }
};

TEST(Vie2, ZeroKernelReturnsSource) {
  std::mt19937 rng(2);
  for (int sig : {FERMION, BOSON}) {
    HermMatrix q = random_free_gf(rng, 20, 30, 2, sig, 2.0, 0.05);
    HermMatrix zero(20, 30, 2, sig), g(20, 30, 2, sig);
    for (auto variant : {StepVariant::Serial, StepVariant::Parallel}) {
      auto rep = vie2(g, zero, zero, q, 2.0, 0.05, 4, {}, variant);
      EXPECT_TRUE(rep.converged);
      EXPECT_LT(max_diff(g, q), 1e-9);
    }
  }
}

TEST(Vie2, MatsubaraMatchesExact) {
  for (int sig : {FERMION, BOSON}) {
    IntegralForm p(sig, -1, 300, 4.0, 1.0, 5, 0.1);
    HermMatrix g(-1, 300, 1, sig);
    auto rep = vie2_mat(g, p.f, p.fcc, p.g0, 4.0, 5);
    EXPECT_TRUE(rep.converged);
    EXPECT_LT(max_diff(g, p.emb.exact, -1), 1e-8);
  }
}

TEST(Vie2, FullSolveMatchesEmbedding) {
  const int nt = 80, ntau = 200, k = 5;
  const double beta = 2.0, h = 0.025;
  for (int sig : {FERMION, BOSON}) {
    IntegralForm p(sig, nt, ntau, beta, h, k, 0.05);
    HermMatrix gs(nt, ntau, 1, sig), gp(nt, ntau, 1, sig);
    vie2(gs, p.f, p.fcc, p.g0, beta, h, k, {}, StepVariant::Serial);
    vie2(gp, p.f, p.fcc, p.g0, beta, h, k, {}, StepVariant::Parallel);
    EXPECT_LT(max_diff(gs, p.emb.exact), 1e-7) << sig;
    EXPECT_LT(max_diff(gp, p.emb.exact), 1e-7) << sig;
    EXPECT_LT(max_diff(gs, gp), 1e-8) << sig;
    EXPECT_LT(vie2_compatibility(nt, p.f, p.fcc, p.g0, beta, h, k), 1e-7);
  }
}

TEST(Vie2, ConvergenceOrder) {
  auto err = [](int nt, int k) {
    const double h = 2.0 / nt;
    IntegralForm p(FERMION, nt, 200, 2.0, h, k);
    HermMatrix g(nt, 200, 1, FERMION);
    vie2(g, p.f, p.fcc, p.g0, 2.0, h, k);
    double e = 0;
    for (int j = 0; j <= nt; ++j) e = std::max(e, std::abs(g.get_ret(nt, j)(0, 0) - p.emb.exact.get_ret(nt, j)(0, 0)));
    return e;
  };
  for (int k : {1, 3}) {
    const double e1 = err(20, k), e2 = err(40, k);
    EXPECT_LT(std::log(e2 / e1) / std::log(2.0), -(k + 0.5)) << k;
  }
}

TEST(Vie2, RejectsBadArguments) {
  IntegralForm p(FERMION, 10, 20, 1.0, 0.1, 3);
  HermMatrix g(10, 20, 1, FERMION), wrong(10, 21, 1, FERMION);
  EXPECT_THROW(vie2_timestep(3, g, p.f, p.fcc, p.g0, 1.0, 0.1, 3), std::invalid_argument);
  EXPECT_THROW(vie2_mat(wrong, p.f, p.fcc, p.g0, 1.0, 3), std::invalid_argument);
}

}  // namespace
