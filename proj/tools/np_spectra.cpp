#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "npspec/errors.hpp"
#include "npspec/experiment.hpp"
#include "npspec/geometry.hpp"

namespace {

int cmd_run(const std::string& config_path, bool strict,
            const std::string& output_dir) {
  npspec::ExperimentConfig config;
  try {
    config = npspec::load_experiment_config(config_path);
  } catch (const npspec::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return npspec::run_experiment(config, strict, output_dir);
}

int cmd_geometry(const std::string& spec_path, int sample) {
  std::ifstream f(spec_path, std::ios::binary);
  if (!f) {
    std::fprintf(stderr, "error: %s: cannot read geometry file\n",
                 spec_path.c_str());
    return 2;
  }
  std::ostringstream buf;
  buf << f.rdbuf();
  try {
    const npspec::Geometry geom = npspec::geometry_from_json(buf.str());
    npspec::write_geometry_csv(geom, sample, std::cout);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s: %s\n", spec_path.c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral experiments for planar and surface boundary "
               "integral operators"};
  app.require_subcommand(1);

  std::string config_path;
  bool strict = false;
  std::string run_output_dir;
  CLI::App* run = app.add_subcommand("run", "Execute an experiment config");
  run->add_option("config", config_path, "experiment config (JSON)")
      ->required();
  run->add_flag("--strict", strict, "exit 4 when a probe reports fail");
  run->add_option("--output-dir", run_output_dir,
                  "override the config's output directory");

  bool quick = false;
  std::string verify_output_dir = "np-verify-out";
  CLI::App* verify =
      app.add_subcommand("verify", "Run the built-in oracle suite");
  verify->add_flag("--quick", quick, "circle-only subset, a few seconds");
  verify->add_option("--output-dir", verify_output_dir,
                     "where the oracle artifacts go");

  std::string spec_path;
  int sample = 0;
  CLI::App* geometry = app.add_subcommand(
      "geometry", "Sample boundary points and normals as CSV on stdout");
  geometry->add_option("spec", spec_path, "geometry recipe (JSON)")
      ->required();
  geometry->add_option("--sample", sample, "number of parameter samples")
      ->required()
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (run->parsed()) return cmd_run(config_path, strict, run_output_dir);
  if (verify->parsed()) return npspec::run_verify(quick, verify_output_dir);
  return cmd_geometry(spec_path, sample);
}
