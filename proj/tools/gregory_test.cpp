#include "cli.hpp"

// Mean error of Gregory quadrature for exp(ix) on [0, 5pi/2].
int main(int argc, char** argv) {
  auto o = cli::parse(argc, argv, "Gregory quadrature convergence");
  return cli::guarded([&] {
    const auto& p = o.params;
    const int k = p.get<int>("SolveOrder");
    const auto ns = kbe::log_grid(std::log10(p.get("Nmin", 10.0)), std::log10(p.get("Nmax", 1000.0)), p.get("Npoints", 20));
    const auto r = kbe::run_gregory_test(k, ns, p.get("h", 0.025 * std::numbers::pi));
    const std::string tag = "k" + std::to_string(k);
    cli::write_table(o, "gregory_error_" + tag + ".csv", r.mean_error);
    cli::write_table(o, "gregory_profile_" + tag + ".csv", r.profile);
    if (o.format == "container") std::cerr << "note: gregory_test has no contour functions to store\n";
    std::cout << "k=" << k << " slope " << r.slope << '\n';
  });
}
