#include <gtest/gtest.h>

#include "helpers.hpp"
#include "embedding.hpp"
#include "kbe/dyson.hpp"

using namespace kbe;
using namespace testutil;

namespace {

TEST(DysonMat, FourierAndFixpointMatchExact) {
  for (int sig : {FERMION, BOSON}) {
    auto emb = scalar_case(sig, -1, 400, 5.0, 1.0, 0.1);
    for (auto method : {MatsubaraMethod::Fourier, MatsubaraMethod::Fixpoint}) {
      HermMatrix g(-1, 400, 1, sig);
      MatsubaraOptions opt;
      opt.method = method;
      auto rep = dyson_mat(g, 0.1, emb.eps, emb.sigma, 5.0, 5, opt);
      EXPECT_TRUE(rep.converged);
      // the Fourier route is limited by the truncated frequency sum
      const double tol = method == MatsubaraMethod::Fixpoint ? 1e-9 : 2e-4;
      EXPECT_LT(max_diff(g, emb.exact, -1), tol) << "sig=" << sig;
    }
  }
}

TEST(DysonMat, MatrixValuedFixpoint) {
  std::mt19937 rng(4);
  const CMatrix e = random_hermitian(rng, 2), b = random_hermitian(rng, 3), v = CMatrix::Random(2, 3);
  Embedding emb(e, v, b, FERMION, -1, 300, 4.0, 1.0, 0.2);
  HermMatrix g(-1, 300, 2, FERMION);
  auto rep = dyson_mat(g, 0.2, emb.eps, emb.sigma, 4.0, 5);
  EXPECT_TRUE(rep.converged);
  EXPECT_LE(rep.iterations, 8);
  EXPECT_LT(max_diff(g, emb.exact, -1), 1e-9);
}

class DysonOrder : public ::testing::TestWithParam<int> {};

TEST_P(DysonOrder, FullSolveMatchesEmbedding) {
  const int k = GetParam();
  const int nt = 100, ntau = 200;
  const double beta = 2.0, h = 0.025;
  for (int sig : {FERMION, BOSON}) {
    auto emb = scalar_case(sig, nt, ntau, beta, h, 0.05);
    HermMatrix g(nt, ntau, 1, sig);
    dyson(g, 0.05, emb.eps, emb.sigma, beta, h, k);
    const double tol = std::vector<double>{0, 5e-2, 2e-3, 1e-4, 1e-5, 1e-6}[k];
    EXPECT_LT(max_diff(g, emb.exact), tol) << "k=" << k << " sig=" << sig;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOrders, DysonOrder, ::testing::Values(1, 2, 3, 4, 5));

TEST(Dyson, ConvergenceOrder) {
  auto err = [](int nt) {
    const double T = 2.0, h = T / nt;
    auto emb = scalar_case(FERMION, nt, 200, 2.0, h);
    HermMatrix g(nt, 200, 1, FERMION);
    MatsubaraOptions opt;
    dyson(g, 0.0, emb.eps, emb.sigma, 2.0, h, 3, opt);
    double e = 0;
    for (int j = 0; j <= nt; ++j) e = std::max(e, std::abs(g.get_ret(nt, j)(0, 0) - emb.exact.get_ret(nt, j)(0, 0)));
    return e;
  };
  const double e1 = err(20), e2 = err(40);
  EXPECT_LT(std::log(e2 / e1) / std::log(2.0), -2.5);
}

TEST(Dyson, MatrixSerialAndParallelAgree) {
  std::mt19937 rng(8);
  const CMatrix e = random_hermitian(rng, 2), b = random_hermitian(rng, 2), v = 0.5 * random_hermitian(rng, 2);
  const int nt = 60, ntau = 100, k = 5;
  const double beta = 2.0, h = 0.02;
  Embedding emb(e, v, b, FERMION, nt, ntau, beta, h, 0.0);
  HermMatrix gs(nt, ntau, 2, FERMION), gp(nt, ntau, 2, FERMION);
  dyson(gs, 0.0, emb.eps, emb.sigma, beta, h, k, {}, StepVariant::Serial);
  dyson(gp, 0.0, emb.eps, emb.sigma, beta, h, k, {}, StepVariant::Parallel);
  EXPECT_LT(max_diff(gs, emb.exact), 2e-7);
  EXPECT_LT(max_diff(gp, emb.exact), 2e-7);
  EXPECT_LT(max_diff(gs, gp), 5e-8);
}

TEST(Dyson, RejectsBadArguments) {
  auto emb = scalar_case(FERMION, 10, 20, 1.0, 0.1);
  HermMatrix g(10, 20, 1, FERMION), wrong(10, 20, 1, BOSON), shortg(3, 20, 1, FERMION);
  EXPECT_THROW(dyson_timestep(5, g, 0.0, emb.eps, emb.sigma, 1.0, 0.1, 5), std::invalid_argument);
  EXPECT_THROW(dyson_mat(wrong, 0.0, emb.eps, emb.sigma, 1.0, 5), std::invalid_argument);
  EXPECT_THROW(dyson(shortg, 0.0, emb.eps, emb.sigma, 1.0, 0.1, 5), std::invalid_argument);
}

}  // namespace
