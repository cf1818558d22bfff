#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <sys/wait.h>

#include "npspec/errors.hpp"
#include "npspec/experiment.hpp"
#include "npspec/geometry.hpp"

using namespace npspec;
using nlohmann::json;

namespace {

// Scratch directory per test name, wiped on entry so reruns start clean.
std::filesystem::path scratch(const std::string& name) {
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / ("np_exp_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  REQUIRE(f.good());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

// Runs the CLI through the shell, captures combined stdout/stderr, returns
// the exit status. `env` is a prefix like "NP_SPECTRA_FAULT=kernel_sign ".
int run_cli(const std::string& args, std::string* output,
            const std::string& env = "") {
  const std::string cmd = env + "OPENBLAS_NUM_THREADS=1 " +
                          std::string(NPSPEC_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string captured;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) {
    captured.append(buf, got);
  }
  const int status = pclose(pipe);
  if (output != nullptr) *output = captured;
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

ConfigError capture_config_error(const std::string& text) {
  try {
    parse_experiment_config(text, "test.json");
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("expected ConfigError");
  return ConfigError("", "");
}

const char* kCircleSpectrum = R"({
  "geometry": {"type": "circle", "parameters": {"radius": 1.0}},
  "grids": [16],
  "operations": ["spectrum"]
})";

}  // namespace

TEST_CASE("config parsing accepts the documented shape") {
  const ExperimentConfig config =
      parse_experiment_config(kCircleSpectrum, "test.json");
  CHECK(config.dimension == 1);
  CHECK(config.grids == std::vector<std::array<int, 2>>{{16, 0}});
  CHECK(config.rule == DiagonalRule::kRowSum);
  CHECK(config.want_spectrum);
  CHECK_FALSE(config.want_decay);
  CHECK_FALSE(config.want_probes);
  CHECK(config.composed_power == 1);
  CHECK(config.output_directory == "np-spectra-out");
  CHECK(config.emit_csv);
  CHECK(config.emit_json);
  CHECK_FALSE(config.emit_svg);

  const Geometry geom = geometry_from_json(config.geometry_json);
  CHECK(geom.boundary_dimension() == 1);
}

TEST_CASE("config parsing pins every schema rule") {
  auto fails_with = [](const std::string& text, const std::string& needle) {
    const ConfigError e = capture_config_error(text);
    CAPTURE(e.what());
    CHECK(std::string(e.what()).find(needle) != std::string::npos);
  };

  SUBCASE("geometry is required, and only one source of it") {
    fails_with(R"({"grids": [16], "operations": ["spectrum"]})", "geometry");
    fails_with(
        R"({"geometry": {"type": "circle", "parameters": {"radius": 1}},
            "geometry_file": "x.json", "grids": [16],
            "operations": ["spectrum"]})",
        "exactly one");
  }
  SUBCASE("unknown keys are rejected at every level") {
    fails_with(
        R"({"geometry": {"type": "circle", "parameters": {"radius": 1}},
            "grids": [16], "operations": ["spectrum"], "extra": 1})",
        "unknown key \"extra\"");
    fails_with(
        R"({"geometry": {"type": "circle", "parameters": {"radius": 1}},
            "grids": [16, 32], "operations": ["probes"],
            "probes": {"sobolev": {"n": 1, "nu": 0.3, "bogus": 2}}})",
        "unknown key \"bogus\"");
    fails_with(
        R"({"geometry": {"type": "circle", "parameters": {"radius": 1}},
            "grids": [16], "operations": ["probes"],
            "probes": {"mystery": {}}})",
        "unknown probe");
  }
  SUBCASE("grids must be present, sized, and strictly increasing") {
    fails_with(
        R"({"geometry": {"type": "circle", "parameters": {"radius": 1}},
            "grids": [], "operations": ["spectrum"]})",
        "grids");
    fails_with(
        R"({"geometry": {"type": "circle", "parameters": {"radius": 1}},
            "grids": [4], "operations": ["spectrum"]})",
        "at least 8");
    fails_with(
        R"({"geometry": {"type": "circle", "parameters": {"radius": 1}},
            "grids": [32, 16], "operations": ["spectrum"]})",
        "strictly increasing");
    fails_with(
        R"({"geometry": {"type": "circle", "parameters": {"radius": 1}},
            "grids": [[16, 32]], "operations": ["spectrum"]})",
        "plain integers");
  }
  SUBCASE("operations are validated") {
    fails_with(
        R"({"geometry": {"type": "circle", "parameters": {"radius": 1}},
            "grids": [16], "operations": []})",
        "operations");
    fails_with(
        R"({"geometry": {"type": "circle", "parameters": {"radius": 1}},
            "grids": [16], "operations": ["spectra"]})",
        "unknown operation");
    fails_with(
        R"({"geometry": {"type": "circle", "parameters": {"radius": 1}},
            "grids": [16], "operations": ["decay"]})",
        "two grids");
    fails_with(
        R"({"geometry": {"type": "circle", "parameters": {"radius": 1}},
            "grids": [16], "operations": ["probes"]})",
        "probes");
    fails_with(
        R"({"geometry": {"type": "circle", "parameters": {"radius": 1}},
            "grids": [16], "operations": ["spectrum"],
            "probes": {"kernel_singularity": {"seed": 1}}})",
        "not requested");
  }
  SUBCASE("sampling probes demand an explicit seed") {
    fails_with(
        R"({"geometry": {"type": "circle", "parameters": {"radius": 1}},
            "grids": [16], "operations": ["probes"],
            "probes": {"kernel_singularity": {"pairs": 64}}})",
        "seed");
    // sobolev is deterministic: no seed wanted, two grids required
    const ExperimentConfig ok = parse_experiment_config(
        R"({"geometry": {"type": "circle", "parameters": {"radius": 1}},
            "grids": [16, 32], "operations": ["probes"],
            "probes": {"sobolev": {"n": 1, "nu": 0.25}}})",
        "test.json");
    REQUIRE(ok.probes.size() == 1);
    CHECK(ok.probes[0].name == "sobolev");
    CHECK_FALSE(ok.probes[0].has_seed);
    CHECK(ok.probes[0].nu == 0.25);
  }
  SUBCASE("probe parameter domains") {
    fails_with(
        R"({"geometry": {"type": "circle", "parameters": {"radius": 1}},
            "grids": [16], "operations": ["probes"],
            "probes": {"convolution":
                       {"alpha": 0.7, "beta": 0.7, "seed": 1}}})",
        "alpha + beta");
    fails_with(
        R"({"geometry": {"type": "weierstrass_curve",
                         "regularity": {"k": 1, "alpha": 0.5},
                         "levels": 6, "amplitude": 0.1},
            "grids": [64], "operations": ["probes"],
            "probes": {"tangential": {"l": 2, "seed": 1}}})",
        "l <= k");
    fails_with(
        R"({"geometry": {"type": "circle", "parameters": {"radius": 1}},
            "grids": [16], "operations": ["probes"],
            "probes": {"holder": {"n": 0, "seed": 1}}})",
        "at least 1");
  }
  SUBCASE("surface-only and curve-only restrictions") {
    fails_with(
        R"({"geometry": {"type": "perturbed_sphere",
                         "parameters": {"harmonics": []}},
            "grids": [[16, 32]], "operations": ["probes"],
            "probes": {"kernel_singularity": {"seed": 1}}})",
        "curves only");
    fails_with(
        R"({"geometry": {"type": "perturbed_sphere",
                         "parameters": {"harmonics": []}},
            "grids": [[16, 32]], "operations": ["spectrum"],
            "diagonal_rule": "diagonal_limit"})",
        "curves only");
    fails_with(
        R"({"geometry": {"type": "perturbed_sphere",
                         "parameters": {"harmonics": []}},
            "grids": [16], "operations": ["spectrum"]})",
        "pairs");
  }
  SUBCASE("composed power and formats") {
    fails_with(
        R"({"geometry": {"type": "circle", "parameters": {"radius": 1}},
            "grids": [16], "operations": ["spectrum"],
            "composed_power": 0})",
        "at least 1");
    fails_with(
        R"({"geometry": {"type": "circle", "parameters": {"radius": 1}},
            "grids": [16], "operations": ["spectrum"],
            "output": {"formats": ["pdf"]}})",
        "unknown output format");
  }
}

TEST_CASE("config errors carry file and line anchors") {
  const std::string text = R"({
  "geometry": {"type": "circle", "parameters": {"radius": 1.0}},
  "operations": ["spectrum"],
  "grids": [32,
            16]
})";
  const ConfigError e = capture_config_error(text);
  CHECK(e.location() == "test.json:4");
  CHECK(std::string(e.what()).rfind("test.json:4: ", 0) == 0);

  // A syntax error anchors at the offending line, not at line 1.
  const ConfigError p = capture_config_error("{\n  \"grids\": oops\n}");
  CHECK(p.location() == "test.json:2");

  // A bad geometry recipe anchors at the geometry key.
  const ConfigError g = capture_config_error(R"({
  "geometry": {"type": "heptagon"},
  "grids": [16],
  "operations": ["spectrum"]
})");
  CHECK(g.location() == "test.json:2");
  CHECK(std::string(g.what()).find("heptagon") != std::string::npos);
}

TEST_CASE("geometry file references resolve against the config directory") {
  const auto dir = scratch("geomfile");
  write_file(dir / "shape.json",
             R"({"type": "ellipse", "parameters": {"a": 2.0, "b": 1.0}})");
  write_file(dir / "config.json", R"({
  "geometry_file": "shape.json",
  "grids": [16],
  "operations": ["spectrum"]
})");
  const ExperimentConfig config =
      load_experiment_config((dir / "config.json").string());
  const Geometry geom = geometry_from_json(config.geometry_json);
  CHECK(geom.boundary_dimension() == 1);
  CHECK(geom.description().find("ellipse") != std::string::npos);

  write_file(dir / "missing.json", R"({
  "geometry_file": "nope.json",
  "grids": [16],
  "operations": ["spectrum"]
})");
  CHECK_THROWS_AS(load_experiment_config((dir / "missing.json").string()),
                  ConfigError);
}

TEST_CASE("geometry csv sampler emits points and outward normals") {
  const Geometry ellipse = make_ellipse(2.0, 1.0);
  std::ostringstream out;
  write_geometry_csv(ellipse, 4, out);
  const auto lines = split_lines(out.str());
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] == "t,x,y,nx,ny");
  const auto row = split_csv(lines[1]);
  REQUIRE(row.size() == 5);
  CHECK(std::stod(row[0]) == 0.0);
  CHECK(std::stod(row[1]) == doctest::Approx(2.0));
  CHECK(std::stod(row[2]) == doctest::Approx(0.0));
  CHECK(std::stod(row[3]) == doctest::Approx(1.0));
  CHECK(std::stod(row[4]) == doctest::Approx(0.0));

  const Geometry sphere = make_unit_sphere();
  std::ostringstream sout;
  write_geometry_csv(sphere, 3, sout);
  const auto slines = split_lines(sout.str());
  REQUIRE(slines.size() == 10);
  CHECK(slines[0] == "u,v,x,y,z,nx,ny,nz");
  for (std::size_t i = 1; i < slines.size(); ++i) {
    const auto fields = split_csv(slines[i]);
    REQUIRE(fields.size() == 8);
    // unit sphere: point equals normal
    for (int c = 0; c < 3; ++c) {
      CHECK(std::stod(fields[2 + c]) ==
            doctest::Approx(std::stod(fields[5 + c])).epsilon(1e-12));
    }
  }

  CHECK_THROWS_AS(write_geometry_csv(ellipse, 0, out), std::invalid_argument);
}

TEST_CASE("sha256 matches the reference digests") {
  CHECK(sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("cli: circle spectrum run emits the anchor csv and manifest") {
  const auto dir = scratch("cli_circle");
  write_file(dir / "config.json", kCircleSpectrum);
  std::string output;
  const int code = run_cli("run " + (dir / "config.json").string() +
                               " --output-dir " + (dir / "out").string(),
                           &output);
  CAPTURE(output);
  REQUIRE(code == 0);

  const auto lines = split_lines(read_file(dir / "out" / "spectrum_n16.csv"));
  REQUIRE(lines.size() == 9);
  CHECK(lines[0] == "j,re_lambda,im_lambda,abs_lambda,s_j");
  const auto row = split_csv(lines[1]);
  REQUIRE(row.size() == 5);
  CHECK(std::stod(row[0]) == 1.0);
  CHECK(std::stod(row[1]) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::stod(row[2]) == 0.0);
  CHECK(std::stod(row[3]) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::stod(row[4]) == doctest::Approx(0.5).epsilon(1e-12));
  for (std::size_t i = 2; i < lines.size(); ++i) {
    CHECK(lines[i] == std::to_string(i) + ",0,0,0,0");
  }

  // Manifest lists every file with its true content hash.
  const json manifest =
      json::parse(read_file(dir / "out" / "manifest.json"));
  REQUIRE(manifest.contains("files"));
  bool saw_csv = false;
  for (const auto& entry : manifest.at("files")) {
    const std::string name = entry.at("name").get<std::string>();
    const std::string body = read_file(dir / "out" / name);
    CHECK(entry.at("sha256").get<std::string>() == sha256_hex(body));
    CHECK(entry.at("bytes").get<std::size_t>() == body.size());
    if (name == "spectrum_n16.csv") saw_csv = true;
  }
  CHECK(saw_csv);
}

TEST_CASE("cli: identical config and seed give byte-identical outputs") {
  const auto dir = scratch("cli_determinism");
  write_file(dir / "config.json", R"({
  "geometry": {
    "type": "weierstrass_curve",
    "regularity": {"k": 1, "alpha": 0.5},
    "levels": 6, "amplitude": 0.1
  },
  "grids": [64, 128],
  "operations": ["all"],
  "probes": {
    "kernel_singularity": {"pairs": 200, "seed": 7},
    "holder": {"n": 1, "triples": 200, "seed": 8},
    "sobolev": {"n": 1, "nu": 0.2},
    "smoothing": {"s": 1.0, "source_decay": 1.0, "seed": 9}
  },
  "output": {"formats": ["csv", "json", "svg"]}
})");
  std::string output;
  REQUIRE(run_cli("run " + (dir / "config.json").string() + " --output-dir " +
                      (dir / "a").string(),
                  &output) == 0);
  REQUIRE(run_cli("run " + (dir / "config.json").string() + " --output-dir " +
                      (dir / "b").string(),
                  &output, "NP_SPECTRA_THREADS=2 ") == 0);
  std::size_t compared = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir / "a")) {
    const std::string name = entry.path().filename().string();
    CAPTURE(name);
    CHECK(read_file(entry.path()) == read_file(dir / "b" / name));
    ++compared;
  }
  CHECK(compared >= 8);

  // svg requested: present and listed in the manifest
  const json manifest = json::parse(read_file(dir / "a" / "manifest.json"));
  bool saw_svg = false;
  for (const auto& entry : manifest.at("files")) {
    if (entry.at("name").get<std::string>() == "spectrum_n128.svg") {
      saw_svg = true;
    }
  }
  CHECK(saw_svg);
}

TEST_CASE("cli: ellipse refinement flags the non-power-law decay") {
  const auto dir = scratch("cli_ellipse");
  write_file(dir / "config.json", R"({
  "geometry": {"type": "ellipse", "parameters": {"a": 2.0, "b": 1.0}},
  "grids": [256, 512],
  "operations": ["decay"]
})");
  std::string output;
  REQUIRE(run_cli("run " + (dir / "config.json").string() + " --output-dir " +
                      (dir / "out").string(),
                  &output) == 0);
  const json fit = json::parse(read_file(dir / "out" / "decay.json"));
  CHECK(fit.at("power_law_plausible").get<bool>() == false);
  CHECK(fit.at("q_predicted").is_null());
  CHECK(fit.at("j_resolved").get<int>() >= 40);
}

TEST_CASE("cli: rough-curve singularity probe passes under strict mode") {
  const auto dir = scratch("cli_probe");
  write_file(dir / "config.json", R"({
  "geometry": {
    "type": "weierstrass_curve",
    "regularity": {"k": 1, "alpha": 0.5},
    "levels": 8, "amplitude": 0.1
  },
  "grids": [256],
  "operations": ["probes"],
  "probes": {"kernel_singularity": {"pairs": 400, "seed": 33}}
})");
  std::string output;
  const int code = run_cli("run " + (dir / "config.json").string() +
                               " --strict --output-dir " +
                               (dir / "out").string(),
                           &output);
  CAPTURE(output);
  REQUIRE(code == 0);
  const json report =
      json::parse(read_file(dir / "out" / "probe_kernel_singularity.json"));
  CHECK(report.at("pass").get<bool>() == true);
  CHECK(report.at("samples").get<int>() == 400);
  const auto scatter = split_lines(
      read_file(dir / "out" / "probe_kernel_singularity_scatter.csv"));
  CHECK(scatter.size() > 100);
  CHECK(scatter[0] == "separation,measured,bound");
}

TEST_CASE("cli: exit codes distinguish config, numeric, and strict failures") {
  const auto dir = scratch("cli_codes");
  std::string output;

  write_file(dir / "garbage.json", "not json at all\n");
  CHECK(run_cli("run " + (dir / "garbage.json").string(), &output) == 2);
  CHECK(output.find("garbage.json:1") != std::string::npos);

  write_file(dir / "bad.json", R"({
  "geometry": {"type": "circle", "parameters": {"radius": 1.0}},
  "grids": [32, 16],
  "operations": ["spectrum"]
})");
  CHECK(run_cli("run " + (dir / "bad.json").string(), &output) == 2);
  CHECK(output.find("bad.json:3") != std::string::npos);

  CHECK(run_cli("run " + (dir / "does_not_exist.json").string(), &output) ==
        2);

  // rank-one circle spectrum: nothing beyond lambda_1 survives refinement
  write_file(dir / "insufficient.json", R"({
  "geometry": {"type": "circle", "parameters": {"radius": 1.0}},
  "grids": [16, 24],
  "operations": ["decay"]
})");
  CHECK(run_cli("run " + (dir / "insufficient.json").string() +
                    " --output-dir " + (dir / "o1").string(),
                &output) == 3);
  CHECK(output.find("insufficient") != std::string::npos);

  // smooth circle violates no probe, but a hypothesis-violating composition
  // order reports pass = false under strict
  write_file(dir / "strict.json", R"({
  "geometry": {
    "type": "weierstrass_curve",
    "regularity": {"k": 1, "alpha": 0.5},
    "levels": 6, "amplitude": 0.1
  },
  "grids": [128],
  "operations": ["probes"],
  "probes": {"holder": {"n": 3, "triples": 400, "seed": 44}}
})");
  const int strict_code = run_cli("run " + (dir / "strict.json").string() +
                                      " --strict --output-dir " +
                                      (dir / "o2").string(),
                                  &output);
  CAPTURE(output);
  CHECK(strict_code == 4);
  const int lax_code = run_cli("run " + (dir / "strict.json").string() +
                                   " --output-dir " + (dir / "o3").string(),
                               &output);
  CHECK(lax_code == 0);

  CHECK(run_cli("frobnicate", &output) == 2);
}

TEST_CASE("cli: quick verify passes fast and is deterministic") {
  const auto dir = scratch("cli_verify");
  std::string output;
  const auto t0 = std::chrono::steady_clock::now();
  const int code = run_cli("verify --quick --output-dir " +
                               (dir / "v1").string(),
                           &output);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  CAPTURE(output);
  REQUIRE(code == 0);
  CHECK(secs < 5.0);
  CHECK(output.find("circle eigenvalue anchor") != std::string::npos);

  REQUIRE(run_cli("verify --quick --output-dir " + (dir / "v2").string(),
                  &output) == 0);
  std::size_t compared = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir / "v1")) {
    const std::string name = entry.path().filename().string();
    CAPTURE(name);
    CHECK(read_file(entry.path()) == read_file(dir / "v2" / name));
    ++compared;
  }
  CHECK(compared >= 4);
}

TEST_CASE("cli: kernel sign mutation trips the oracle suite") {
  const auto dir = scratch("cli_mutation");
  std::string output;
  const int code = run_cli("verify --quick --output-dir " +
                               (dir / "v").string(),
                           &output, "NP_SPECTRA_FAULT=kernel_sign ");
  CAPTURE(output);
  CHECK(code == 4);
  CHECK(output.find("FAIL") != std::string::npos);
}

TEST_CASE("cli: geometry subcommand dumps sampled boundary data") {
  const auto dir = scratch("cli_geometry");
  write_file(dir / "shape.json",
             R"({"type": "ellipse", "parameters": {"a": 2.0, "b": 1.0}})");
  std::string output;
  REQUIRE(run_cli("geometry " + (dir / "shape.json").string() + " --sample 16",
                  &output) == 0);
  const auto lines = split_lines(output);
  REQUIRE(lines.size() == 17);
  CHECK(lines[0] == "t,x,y,nx,ny");
  const auto row = split_csv(lines[1]);
  REQUIRE(row.size() == 5);
  CHECK(std::stod(row[1]) == doctest::Approx(2.0));
  CHECK(std::stod(row[3]) == doctest::Approx(1.0));

  write_file(dir / "bad.json", R"({"type": "dodecahedron"})");
  CHECK(run_cli("geometry " + (dir / "bad.json").string() + " --sample 4",
                &output) == 2);
}
