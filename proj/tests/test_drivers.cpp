#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "helpers.hpp"
#include "kbe/drivers.hpp"

using namespace kbe;

namespace {

Params parse(const std::string& text) {
  std::istringstream is(text);
  return Params::parse(is, "t.in");
}

TEST(Params, LaterDuplicatesOverride) {
  const auto p = parse("__Ntau=800\n__h=0.1\n__Ntau=400\n");
  EXPECT_EQ(p.get<int>("Ntau"), 400);
  EXPECT_DOUBLE_EQ(p.get<double>("h"), 0.1);
  EXPECT_TRUE(p.warnings().empty());
}

TEST(Params, MalformedLinesWarnAndAreSkipped) {
  const auto p = parse("# comment\n\n__beta=20\nNtau=800\n__=3\n  __Approx = GW  \r\n");
  EXPECT_EQ(p.values().size(), 2u);
  EXPECT_EQ(p.get<std::string>("Approx"), "GW");
  ASSERT_EQ(p.warnings().size(), 2u);
  EXPECT_NE(p.warnings()[0].find("t.in:4"), std::string::npos);
}

TEST(Params, MissingKeyIsNamed) {
  const auto p = parse("");
  try {
    p.get<int>("SolveOrder");
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("SolveOrder"), std::string::npos);
  }
  EXPECT_EQ(p.get("Ntau", 17), 17);
  EXPECT_THROW(parse("__Ntau=12x\n").get<int>("Ntau"), std::invalid_argument);
}

TEST(Params, HubbardDefaults) {
  auto hp = HubbardParams::from(parse("__U=2\n__h=0.05\n"));
  EXPECT_EQ(hp.nt, static_cast<int>(std::lround(5 * 2 * std::numbers::pi / 2 / 0.05)));
  EXPECT_EQ(hp.corrector_steps, 5);
  EXPECT_DOUBLE_EQ(hp.mats_max_err, 1e-8);
  EXPECT_DOUBLE_EQ(hp.boot_max_err, 1e-8);
  EXPECT_EQ(HubbardParams::from(parse("__Tmax=1\n__h=0.1\n")).nt, 10);
  EXPECT_EQ(HubbardParams::from(parse("__Approx=TPP\n")).approx, Approximation::TMatrix);
  EXPECT_THROW(HubbardParams::from(parse("__Approx=RPA\n")), std::invalid_argument);
}

TEST(Helpers, LogGridAndSlope) {
  const auto g = log_grid(1, 3, 20);
  EXPECT_EQ(g.front(), 10);
  EXPECT_EQ(g.back(), 1000);
  EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
  std::vector<double> x{1, 2, 4, 8}, y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -2.5));
  EXPECT_NEAR(loglog_slope(x, y), -2.5, 1e-12);
}

TEST(Drivers, GregorySmall) {
  const auto r = run_gregory_test(2, {20, 40, 80});
  EXPECT_NEAR(r.slope, -4.0, 0.5);
  EXPECT_EQ(r.profile.rows.size(), 101u);
  EXPECT_LT(r.profile.rows.back()[1], 1e-5);
}

TEST(Drivers, EquilibriumSmall) {
  const auto r = run_test_equilibrium(3, {20, 40, 80});
  const auto ef = r.table.column(1), ex = r.table.column(2);
  for (size_t i = 1; i < ef.size(); ++i) {
    EXPECT_LT(ef[i], ef[i - 1]);
    EXPECT_LT(ex[i], ex[i - 1]);
  }
  EXPECT_LT(ex.back(), ef.back());
}

TEST(Drivers, NonequilibriumSmall) {
  const auto r = run_test_nonequilibrium(1, {10, 20, 40}, 200, 2.0);
  const auto ed = r.table.column(2), ev = r.table.column(3);
  EXPECT_NEAR(loglog_slope(r.table.column(0), ed), -2.0, 0.5);
  EXPECT_LT(ev.back(), ev.front());
}

HubbardParams small_hubbard(Approximation a) {
  HubbardParams p;
  p.approx = a;
  p.nt = 40;
  p.ntau = 100;
  p.h = 0.025;
  p.beta = 5.0;
  return p;
}

// U = 0: the density follows the free evolution under the quenched hopping matrix.
TEST(Hubbard, NonInteractingMatchesFreeEvolution) {
  auto p = small_hubbard(Approximation::SecondBorn);
  p.u = 0.0;
  p.h = 0.01;
  p.nt = 100;
  const auto r = run_hubbard_chain(p);
  const CMatrix hop = chain_hopping(p.nsites, p.hopping);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hop);
  CMatrix f = CMatrix::Zero(p.nsites, p.nsites);
  for (int i = 0; i < p.nsites; ++i) f(i, i) = 1.0 / (std::exp(p.beta * es.eigenvalues()(i)) + 1.0);
  const CMatrix rho0 = es.eigenvectors() * f * es.eigenvectors().adjoint();
  CMatrix hq = hop;
  hq(0, 0) += p.w0;
  double err = 0.0;
  for (const auto& row : r.observables.rows) {
    const CMatrix u = (CMatrix(-I * row[0] * hq)).exp();
    err = std::max(err, std::abs((u * rho0 * u.adjoint())(0, 0).real() - row[1]));
  }
  EXPECT_LT(err, 1e-6);
  EXPECT_LT(r.drift, 1e-6);
}

class HubbardApprox : public ::testing::TestWithParam<Approximation> {};

// w0 = 0: the equilibrium state is stationary.
TEST_P(HubbardApprox, NoQuenchIsStationary) {
  auto p = small_hubbard(GetParam());
  p.w0 = 0.0;
  const auto r = run_hubbard_chain(p);
  EXPECT_TRUE(r.mats_converged);
  EXPECT_TRUE(r.boot_converged);
  const auto& first = r.observables.rows.front();
  for (const auto& row : r.observables.rows)
    for (size_t c = 1; c < row.size(); ++c) EXPECT_NEAR(row[c], first[c], 1e-7) << "column " << c << " t=" << row[0];
}

// With the quench the occupation of site 1 moves; the energy drift is the
// scheme's own error and shrinks like h^6 at k = 5.
TEST_P(HubbardApprox, QuenchConservesEnergy) {
  auto p = small_hubbard(GetParam());
  const auto r = run_hubbard_chain(p);
  EXPECT_LT(r.observables.rows.back()[1], 0.45);
  EXPECT_LT(r.drift, 5e-5);
  p.h /= 2;
  p.nt *= 2;
  const auto r2 = run_hubbard_chain(p);
  EXPECT_LT(r2.drift, r.drift / 16);
}

INSTANTIATE_TEST_SUITE_P(All, HubbardApprox,
                         ::testing::Values(Approximation::SecondBorn, Approximation::GW, Approximation::TMatrix));

}  // namespace
