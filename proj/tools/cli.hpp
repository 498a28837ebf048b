#pragma once

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "kbe/drivers.hpp"

// Command line shared by the driver programs: input file, --out, --format.
namespace cli {

struct Options {
  std::string input;
  std::string out = ".";
  std::string format = "csv";
  kbe::Params params;
};

inline Options parse(int argc, char** argv, const std::string& what) {
  Options o;
  CLI::App app{what};
  app.add_option("input", o.input, "input file with __Name=value lines")->required()->check(CLI::ExistingFile);
  app.add_option("--out", o.out, "output directory");
  app.add_option("--format", o.format, "output format")->check(CLI::IsMember({"csv", "container"}));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::exit(app.exit(e));
  }
  o.params = kbe::Params::from_file(o.input);
  for (const auto& w : o.params.warnings()) std::cerr << "warning: " << w << '\n';
  std::filesystem::create_directories(o.out);
  return o;
}

inline std::string path(const Options& o, const std::string& name) { return (std::filesystem::path(o.out) / name).string(); }

inline void write_table(const Options& o, const std::string& name, const kbe::io::Table& t) {
  kbe::io::export_csv(path(o, name), t);
  std::cout << "wrote " << path(o, name) << '\n';
}

inline nlohmann::json params_json(const kbe::Params& p) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : p.values()) j[k] = v;
  return j;
}

// Runs `body`, turning exceptions into a message and exit status 1.
template <class F>
int guarded(F&& body) {
  try {
    body();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace cli
