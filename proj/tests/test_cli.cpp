#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "relaxhjb/cli.hpp"
#include "relaxhjb/config.hpp"
#include "relaxhjb/errors.hpp"

using namespace relaxhjb;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("relaxhjb_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

int run_quiet(std::string_view sub, const ExperimentConfig& c, const fs::path& out,
              std::string* log_text = nullptr) {
  std::ostringstream log;
  RunOptions o;
  o.out_dir = out.string();
  o.log = &log;
  const int code = run(sub, c, o);
  if (log_text) *log_text = log.str();
  return code;
}

}  // namespace

TEST_CASE("config defaults") {
  const ExperimentConfig c = parse_config_text("problem = uniform-f\n");
  CHECK(c.problem == "uniform-f");
  CHECK(c.grid == std::vector<int>{101});
  CHECK(c.generator == GeneratorKind::Entropy);
  CHECK(c.eps_list == std::vector<double>{0.4, 0.2, 0.1, 0.05, 0.025});
  CHECK(c.beta == 0.5);
  CHECK(c.solver.tolerance == 1e-10);
  CHECK(c.t_list == std::vector<double>{1e-1, 3e-2, 1e-2, 3e-3, 1e-3});
  CHECK(c.mc_paths == 10000);
  CHECK(c.mc_dt == 1e-4);
  CHECK(c.seed == 0);
  CHECK(c.threads == 1);
}

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config_text(
      "# comment\n"
      "problem = two-action-gap   # trailing comment\n"
      "grid = 51\n"
      "generator = zang\n"
      "eps = [1, 0.5]\n"
      "\n"
      "[problem]\n"
      "f2 = \"1 + 0.5*sin(pi*x1)\"\n"
      "[perturbation]\n"
      "t = [0.1, 0.01]\n"
      "df1 = x1\n"
      "[montecarlo]\n"
      "x0 = [0.25]\n"
      "bridge = false\n"
      "[output]\n"
      "dir = \"runs/a b\"\n");
  CHECK(c.grid == std::vector<int>{51});
  CHECK(c.generator == GeneratorKind::Zang);
  CHECK(c.eps_list == std::vector<double>{1.0, 0.5});
  CHECK(c.coefficients.at("f2") == "1 + 0.5*sin(pi*x1)");
  CHECK(c.perturbation.at("f1") == "x1");
  CHECK(c.x0 == std::vector<double>{0.25});
  CHECK_FALSE(c.mc_bridge);
  CHECK(c.output_dir == "runs/a b");

  const ProblemDefinition p = resolve_problem(c);
  CHECK(p.coefficients.at("f2") == "1 + 0.5*sin(pi*x1)");
  CHECK(p.coefficients.at("f1") == "0");
}

TEST_CASE("config errors") {
  auto line_of = [](const std::string& text) {
    try {
      parse_config_text(text);
    } catch (const ConfigError& e) {
      return e.line();
    }
    return -1;
  };
  CHECK(line_of("problem = uniform-f\nfoo = 1\n") == 2);
  CHECK(line_of("problem = uniform-f\n[nowhere]\n") == 2);
  CHECK(line_of("problem = uniform-f\ngrid = 11\ngrid = 21\n") == 3);
  CHECK(line_of("problem = uniform-f\nbeta = abc\n") == 2);
  CHECK(line_of("problem = uniform-f\neps = [0.1, \n") == 2);
  CHECK(line_of("problem = uniform-f\nno equals sign\n") == 2);
  CHECK(line_of("problem = uniform-f\n[problem]\nq7 = 1\n") == 3);

  try {
    parse_config_text("problem = uniform-f\neps = [-1]\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("eps") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config_text("problem = uniform-f\nbeta = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("problem = uniform-f\ngrid = [11, 11]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("problem = nope\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("/nonexistent/relaxhjb.cfg"), ConfigError);
}

TEST_CASE("config round trip") {
  ExperimentConfig c = parse_config_text(
      "problem = box-2d\ngrid = [21, 17]\ngenerator = chks\neps = [0.3, 0.1, 0]\n"
      "seed = 18446744073709551615\nthreads = 3\ntol = 1e-11\n"
      "[problem]\nb1_2 = \"0.1*x2\"\n[solve]\neps = 0.05\n"
      "[perturbation]\nt = [0.1]\ndg = \"x1*x2\"\n[montecarlo]\nx0 = [0.3, 0.7]\n"
      "paths = 123\ndt = 0.001\n[surface]\npoints = 5\nspan = 2.5\n[output]\ndir = out\n");
  c.beta = 0.1 + 0.2;
  c.gap_threshold = 1.0 / 3.0;
  const std::string text = serialize(c);
  const ExperimentConfig back = parse_config_text(text);
  CHECK(back == c);
  CHECK(serialize(back) == text);

  for (double v : {0.1, 1e-4, 1.0 / 3.0, 6.02e23, 0.0, -2.5}) {
    double r = 0.0;
    std::istringstream(format_double(v)) >> r;
    CHECK(r == v);
  }
}

TEST_CASE("config hash ignores the output directory") {
  ExperimentConfig a = parse_config_text("problem = uniform-f\n");
  ExperimentConfig b = a;
  b.output_dir = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 1;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("surface values") {
  const fs::path out = scratch("surface");
  ExperimentConfig c = parse_config_text("problem = uniform-f\n[surface]\npoints = 4\nspan = 3\n");
  REQUIRE(run_quiet("surface", c, out) == kExitOk);
  const auto rows = read_csv(out / "surface.csv");
  REQUIRE(rows.size() == 1 + 10);
  CHECK(rows[0] == std::vector<std::string>{"y1", "y2", "y3", "x1", "x2", "x3", "H_en_gap",
                                            "H_zang_gap", "rho_en", "rho_zang"});
  bool saw_center = false, saw_vertex = false;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    std::vector<double> v;
    for (const auto& s : row) v.push_back(std::stod(s));
    if (std::abs(v[0] - 1.0 / 3.0) < 1e-12 && std::abs(v[1] - 1.0 / 3.0) < 1e-12) {
      saw_center = true;
      CHECK(v[6] == doctest::Approx(std::log(3.0)).epsilon(1e-12));
      CHECK(v[8] == doctest::Approx(-std::log(3.0)).epsilon(1e-12));
    }
    if (v[0] == 1.0) {
      saw_vertex = true;
      CHECK(std::abs(v[9]) < 1e-9);
      CHECK(std::abs(v[8]) < 1e-15);
    }
    CHECK(v[6] >= -1e-12);
    CHECK(v[7] >= -1e-12);
  }
  CHECK(saw_center);
  CHECK(saw_vertex);
  CHECK_THROWS_AS(emit_surface(1, 3.0), ArgumentError);
}

TEST_CASE("sweep-eps output and manifest") {
  const fs::path out = scratch("sweep");
  ExperimentConfig c =
      parse_config_text("problem = uniform-f\nK = 3\ngrid = 101\neps = [0.2, 0.1]\nseed = 9\n");
  REQUIRE(run_quiet("sweep-eps", c, out) == kExitOk);
  const auto rows = read_csv(out / "eps_sweep.csv");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] ==
        std::vector<std::string>{"eps", "sup_gap", "bound_rhs", "monotone_ok", "c2beta_gap"});
  CHECK(rows[1][0] == "0.2");
  CHECK(rows[1][3] == "true");

  const auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
  for (const char* key : {"subcommand", "config_hash", "seed", "threads", "version",
                          "eigen_version", "timestamp", "outputs", "results", "violations",
                          "warnings", "exit_code"}) {
    CHECK(m.contains(key));
  }
  CHECK(m["subcommand"] == "sweep-eps");
  CHECK(m["seed"] == 9);
  CHECK(m["exit_code"] == 0);
  CHECK(m["config_hash"].get<std::string>().size() == 16);
  CHECK(m["outputs"] == nlohmann::json::array({"eps_sweep.csv"}));

  for (const auto& entry : fs::directory_iterator(out)) {
    CHECK(entry.path().extension() != ".tmp");
  }
}

TEST_CASE("solve output is byte-identical across runs") {
  const fs::path a = scratch("solve_a");
  const fs::path b = scratch("solve_b");
  ExperimentConfig c = parse_config_text("problem = box-2d\ngrid = [11, 11]\n[solve]\neps = 0.1\n");
  REQUIRE(run_quiet("solve", c, a) == kExitOk);
  REQUIRE(run_quiet("solve", c, b) == kExitOk);
  CHECK(slurp(a / "value.csv") == slurp(b / "value.csv"));
  CHECK(slurp(a / "control.csv") == slurp(b / "control.csv"));
  const auto rows = read_csv(a / "control.csv");
  CHECK(rows[0] == std::vector<std::string>{"x1", "x2", "lambda1", "lambda2"});
  CHECK(rows.size() == 1 + 81);
  CHECK(read_csv(a / "value.csv").size() == 1 + 121);
}

TEST_CASE("mc-verify reports a violation for a biased estimator") {
  const fs::path out = scratch("mc");
  ExperimentConfig c = parse_config_text(
      "problem = two-action-gap\ngrid = 101\n[solve]\neps = 0\n"
      "[montecarlo]\npaths = 4000\ndt = 0.01\nbridge = false\n");
  std::string log;
  CHECK(run_quiet("mc-verify", c, out, &log) == kExitViolation);
  CHECK(log.find("violation") != std::string::npos);
  const auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(m["exit_code"] == 2);
  CHECK_FALSE(m["violations"].empty());

  c.mc_dt = 1e-4;
  c.mc_bridge = true;
  c.mc_paths = 2000;
  CHECK(run_quiet("mc-verify", c, out) == kExitOk);
  const auto rows = read_csv(out / "mc_verify.csv");
  CHECK(rows[0] == std::vector<std::string>{"x1", "mc_mean", "mc_stderr", "n_paths", "dt",
                                            "seed", "pde_value", "z"});
}

TEST_CASE("every subcommand runs on a small problem") {
  ExperimentConfig c = parse_config_text(
      "problem = sign-switch-drift\ngrid = 41\neps = [0.2, 0.1]\n[perturbation]\n"
      "t = [0.1, 0.01]\ndf2 = 1\n[montecarlo]\npaths = 200\ndt = 0.001\n[surface]\npoints = 3\n");
  for (const auto& sub : subcommand_names()) {
    CAPTURE(sub);
    const fs::path out = scratch("all_" + sub);
    const int code = run_quiet(sub, c, out);
    CHECK(code != kExitError);
    CHECK(fs::exists(out / "manifest.json"));
  }
  std::string log;
  CHECK(run_quiet("bogus", c, scratch("bogus"), &log) == kExitError);
  CHECK(log.find("error") != std::string::npos);
}

TEST_CASE("atomic write replaces the file") {
  const fs::path dir = scratch("atomic");
  fs::create_directories(dir);
  write_file_atomic(dir / "x.txt", "first");
  write_file_atomic(dir / "x.txt", "second");
  CHECK(slurp(dir / "x.txt") == "second");
  CHECK_FALSE(fs::exists(dir / "x.txt.tmp"));
}
