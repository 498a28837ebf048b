#include "cli.hpp"

namespace {

kbe::DownfoldModel model(const kbe::Params& p) {
  kbe::DownfoldModel m;
  m.e1 = p.get("eps1", m.e1);
  m.e2 = p.get("eps2", m.e2);
  m.lam = p.get("lambda", m.lam);
  m.mu = p.get("MuChem", m.mu);
  m.beta = p.get("beta", m.beta);
  return m;
}

}  // namespace

// Matsubara Dyson equation of the downfolded two-level model, FOURIER vs FIXPOINT.
int main(int argc, char** argv) {
  auto o = cli::parse(argc, argv, "equilibrium downfolding test");
  return cli::guarded([&] {
    const auto& p = o.params;
    const int k = p.get<int>("SolveOrder");
    const auto ntaus = kbe::log_grid(std::log10(p.get("NtauMin", 10.0)), std::log10(p.get("NtauMax", 1000.0)), p.get("Npoints", 20));
    const auto r = kbe::run_test_equilibrium(k, ntaus, model(p));
    cli::write_table(o, "test_equilibrium_k" + std::to_string(k) + ".csv", r.table);
    if (o.format == "container") {
      const int ntau = ntaus.back();
      const auto m = model(p);
      auto ex = m.exact(-1, ntau, 1.0);
      kbe::HermMatrix g(-1, ntau, 1, kbe::FERMION);
      kbe::dyson_mat(g, m.mu, m.eps1(-1), m.sigma(-1, ntau, 1.0), m.beta, k);
      const auto file = cli::path(o, "test_equilibrium_k" + std::to_string(k) + ".kbe");
      kbe::io::write_container(file, {{"G", &g}, {"Gexact", &ex}}, cli::params_json(p));
      std::cout << "wrote " << file << '\n';
    }
    const auto n = r.table.column(0);
    std::cout << "k=" << k << " slope fourier " << kbe::loglog_slope(n, r.table.column(1)) << " fixpoint "
              << kbe::loglog_slope(n, r.table.column(2)) << '\n';
  });
}
