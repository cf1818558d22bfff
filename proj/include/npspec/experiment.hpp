#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "npspec/analysis.hpp"
#include "npspec/discretize.hpp"
#include "npspec/geometry.hpp"

namespace npspec {

// One requested diagnostic probe with its parameters. Fields not used by a
// given probe keep their defaults. `sample` is the pair/triple budget.
struct ProbeSpec {
  std::string name;  // kernel_singularity | convolution | holder | sobolev |
                     // tangential | smoothing
  double alpha = 0.4;
  double beta = 0.4;
  int n = 1;
  double nu = 0.3;
  int l = 1;
  double s = 1.0;
  double source_decay = 1.0;
  int sample = 0;
  std::uint64_t seed = 0;
  bool has_seed = false;
};

// Parsed and semantically validated experiment description. Grids are
// (n_theta, n_phi) pairs with n_phi = 0 on curves; `geometry_json` is the
// canonical construction recipe (see docs/config-schema.md).
struct ExperimentConfig {
  std::string source_name;  // config file name, used in diagnostics
  std::string geometry_json;
  int dimension = 1;
  std::vector<std::array<int, 2>> grids;
  DiagonalRule rule = DiagonalRule::kRowSum;
  bool want_spectrum = false;
  bool want_decay = false;
  bool want_probes = false;
  int composed_power = 1;
  std::vector<ProbeSpec> probes;
  std::string output_directory = "np-spectra-out";
  bool emit_csv = true;
  bool emit_json = true;
  bool emit_svg = false;
};

// Parses a config document and validates every field against the schema in
// docs/config-schema.md, including cross-field rules (grid monotonicity,
// probe parameter domains for the chosen geometry, seed presence). Throws
// ConfigError with a "file:line" location. `base_dir` resolves a relative
// "geometry_file" reference.
ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::string& source_name,
                                         const std::string& base_dir = ".");

// Reads the file and parses it; the directory of `path` resolves geometry
// file references.
ExperimentConfig load_experiment_config(const std::string& path);

// Executes the experiment: assembles matrices on every grid, computes
// spectra, fits decay, runs the requested probes, and writes the result
// files plus a manifest.json with SHA-256 content hashes into the output
// directory. Outputs are byte-identical for identical config and seeds.
// Returns the process exit status: 0 on success, 3 on numeric failure,
// 4 when --strict is set and some probe reports pass = false.
// `output_dir_override` replaces the config's output directory when
// nonempty.
int run_experiment(const ExperimentConfig& config, bool strict,
                   const std::string& output_dir_override = "");

// Runs the built-in oracle suite (circle, ellipse, sphere, Weyl
// majorization, composition power identity), prints a pass/fail table to
// stdout, and writes the computed artifacts into `output_directory`.
// `quick` restricts the suite to its circle subset. Returns 0 iff every
// oracle passes, 4 on oracle failure, 3 on numeric failure.
int run_verify(bool quick, const std::string& output_directory);

// Writes sampled boundary points and outward normals as CSV. Curves emit
// `sample` rows "t,x,y,nx,ny" at t = i/sample; surfaces emit sample^2 rows
// "u,v,x,y,z,nx,ny,nz" at u = (i+1/2)/sample, v = j/sample.
void write_geometry_csv(const Geometry& geom, int sample, std::ostream& out);

// --- Report serialization --------------------------------------------------

// Stable-field JSON for probe and fit results (2-space indent, sorted keys,
// shortest round-trip numbers).
std::string probe_report_json(const ProbeReport& report);
std::string decay_fit_json(const DecayFit& fit, const std::string& source,
                           int j_resolved, bool has_prediction);
std::string smoothing_report_json(const SmoothingReport& report);

// Scatter rows "separation,measured,bound".
void write_scatter_csv(std::ostream& out,
                       const std::vector<std::array<double, 3>>& scatter);

// Hex SHA-256 of a byte string (the manifest hash).
std::string sha256_hex(const std::string& bytes);

// Effective worker-thread cap: NP_SPECTRA_THREADS when set to a positive
// integer, otherwise (or when 0) the hardware concurrency.
int worker_cap();

}  // namespace npspec
