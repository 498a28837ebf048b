#include "cli.hpp"

// Hubbard chain after a quench of the first site, in 2B, GW or T-matrix (TPP) approximation.
int main(int argc, char** argv) {
  auto o = cli::parse(argc, argv, "Hubbard chain quench");
  return cli::guarded([&] {
    const auto hp = kbe::HubbardParams::from(o.params);
    const auto r = kbe::run_hubbard_chain(hp);
    const std::string approx = o.params.get<std::string>("Approx", "2B");
    if (!r.mats_converged) std::cerr << "warning: Matsubara loop not converged after " << r.mats_iterations << " iterations\n";
    if (!r.boot_converged) std::cerr << "warning: bootstrap not converged after " << r.boot_iterations << " iterations\n";
    cli::write_table(o, "hubbard_" + approx + "_obs.csv", r.observables);
    nlohmann::json meta = cli::params_json(o.params);
    meta["Tmax"] = r.tmax;
    meta["Nt"] = hp.nt;
    meta["drift"] = r.drift;
    meta["mats_iterations"] = r.mats_iterations;
    meta["boot_iterations"] = r.boot_iterations;
    std::ofstream(cli::path(o, "hubbard_" + approx + "_meta.json")) << meta.dump(2) << '\n';
    if (o.format == "container") {
      const auto file = cli::path(o, "hubbard_" + approx + ".kbe");
      kbe::io::write_container(file, {{"G", &r.g}}, meta);
      std::cout << "wrote " << file << '\n';
    }
    std::cout << approx << " Tmax=" << r.tmax << " drift " << r.drift << " time " << r.seconds << " s\n";
  });
}
