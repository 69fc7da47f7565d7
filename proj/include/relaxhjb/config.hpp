#ifndef RELAXHJB_CONFIG_HPP
#define RELAXHJB_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relaxhjb/problems.hpp"
#include "relaxhjb/smoothmax.hpp"
#include "relaxhjb/solver.hpp"

namespace relaxhjb {

// Experiment description read from a small INI-style file:
//
//   # comment
//   problem = uniform-f
//   K = 3
//   grid = 201
//   eps = [0.4, 0.2, 0.1]
//
//   [problem]            # inline problem or coefficient overrides
//   f2 = "1 + 0.5*sin(pi*x1)"
//
//   [perturbation]
//   t = [0.1, 0.03]
//   df2 = 1
//
// Top level: problem, K, grid, generator, eps, beta, tol, max_iterations,
// tie_tolerance, gap_threshold, seed, threads.
// [problem]: dim, lo, hi, nu and coefficient expressions (a1, b1_2, c1, f1,
// g, ...). [solve]: eps. [perturbation]: t and d<coefficient> deltas.
// [montecarlo]: x0, paths, dt, bridge. [surface]: points, span.
// [output]: dir.
struct ExperimentConfig {
  std::string problem;  // built-in name; empty for a fully inline problem
  int K = 0;            // 0: the problem's default
  std::vector<int> grid;
  GeneratorKind generator = GeneratorKind::Entropy;
  std::vector<double> eps_list = {0.4, 0.2, 0.1, 0.05, 0.025};
  double beta = 0.5;
  SolverOptions solver;
  double gap_threshold = 0.5;
  std::uint64_t seed = 0;
  int threads = 1;

  std::optional<int> dim;
  std::optional<std::vector<double>> lo;
  std::optional<std::vector<double>> hi;
  std::optional<double> nu;
  CoefficientExpressions coefficients;  // overrides or inline definition

  double solve_eps = 0.1;

  std::vector<double> t_list = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  CoefficientExpressions perturbation;  // keyed without the leading 'd'

  std::vector<double> x0;
  int mc_paths = 10000;
  double mc_dt = 1e-4;
  bool mc_bridge = true;

  int surface_points = 21;
  double surface_span = 3.0;

  std::string output_dir;

  bool operator==(const ExperimentConfig&) const = default;
};

// Throws ConfigError with the line number for syntax errors and unknown keys,
// and with the key name for invalid values.
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig parse_config(const std::string& path);

// Canonical text form; parse_config_text(serialize(c)) == c.
std::string serialize(const ExperimentConfig& config);

// The problem the config describes: a built-in with overrides applied, or the
// inline definition. Throws ConfigError when the result is incomplete.
ProblemDefinition resolve_problem(const ExperimentConfig& config);

// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

}  // namespace relaxhjb

#endif  // RELAXHJB_CONFIG_HPP
