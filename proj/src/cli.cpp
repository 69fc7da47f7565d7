#include "relaxhjb/cli.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "relaxhjb/analysis.hpp"
#include "relaxhjb/errors.hpp"
#include "relaxhjb/simulate.hpp"

namespace relaxhjb {

namespace {

namespace fs = std::filesystem;

std::string fmt(double x) { return format_double(x); }
std::string fmt(bool b) { return b ? "true" : "false"; }

class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) { row(header); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

std::vector<std::string> coordinate_names(int dim) {
  std::vector<std::string> names;
  for (int i = 1; i <= dim; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

std::vector<std::string> coordinates(const Grid& grid, int node) {
  std::vector<std::string> cells;
  for (int i = 0; i < grid.dim(); ++i) cells.push_back(fmt(grid.coordinate(node, i)));
  return cells;
}

std::string node_field_csv(const Grid& grid, const Field& u, const std::string& name) {
  auto header = coordinate_names(grid.dim());
  header.push_back(name);
  Csv csv(header);
  for (int node = 0; node < grid.node_count(); ++node) {
    auto cells = coordinates(grid, node);
    cells.push_back(fmt(u[node]));
    csv.row(cells);
  }
  return csv.text();
}

std::string control_csv(const Grid& grid, const ControlField& control, const std::string& prefix) {
  auto header = coordinate_names(grid.dim());
  for (Eigen::Index k = 1; k <= control.cols(); ++k) header.push_back(prefix + std::to_string(k));
  Csv csv(header);
  for (int p = 0; p < grid.interior_count(); ++p) {
    auto cells = coordinates(grid, grid.interior()[p]);
    for (Eigen::Index k = 0; k < control.cols(); ++k) cells.push_back(fmt(control(p, k)));
    csv.row(cells);
  }
  return csv.text();
}

std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex64(std::uint64_t x) {
  static const char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[x & 0xf];
    x >>= 4;
  }
  return out;
}

// max/min of num/den over rows with den > 0; 1 when every numerator is zero.
template <typename Rows, typename Num>
double ratio_spread(const Rows& rows, Num num) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& r : rows) {
    if (!(r.E_per > 0.0)) continue;
    const double q = num(r) / r.E_per;
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  }
  if (hi == 0.0) return 1.0;
  return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

struct Context {
  ExperimentConfig config;
  ProblemDefinition problem;
  Grid grid;
  ActionModel model;
  SmoothMaxFamily family;
  AnalysisOptions analysis;
};

Context make_context(const ExperimentConfig& config) {
  const ProblemDefinition problem = resolve_problem(config);
  std::vector<int> nodes = config.grid;
  const Grid grid = Grid::build(problem.domain, nodes);
  ActionModel model = sample_model(problem, grid);
  AnalysisOptions analysis;
  analysis.solver = config.solver;
  analysis.beta = config.beta;
  analysis.gap_threshold = config.gap_threshold;
  analysis.threads = config.threads;
  return Context{config, problem, grid, std::move(model),
                 SmoothMaxFamily::build(config.generator, problem.K), analysis};
}

struct Outcome {
  std::vector<std::pair<std::string, std::string>> files;
  std::vector<std::string> violations;
  std::vector<std::string> warnings;
  nlohmann::ordered_json results = nlohmann::ordered_json::object();
};

Outcome run_solve(const Context& ctx) {
  const SolveResult sol = solve_hjb(ctx.model, ctx.grid, ctx.family, ctx.config.solve_eps,
                                    ctx.config.solver);
  Outcome out;
  out.files.emplace_back("value.csv", node_field_csv(ctx.grid, sol.u, "u"));
  out.files.emplace_back("control.csv", control_csv(ctx.grid, sol.control, "lambda"));
  out.results["eps"] = sol.eps;
  out.results["iterations"] = sol.iterations;
  out.results["final_residual"] = sol.final_residual;
  return out;
}

Outcome run_sweep(const Context& ctx) {
  const auto rows = eps_sweep(ctx.model, ctx.grid, ctx.family, ctx.config.eps_list, ctx.analysis);
  Outcome out;
  Csv csv({"eps", "sup_gap", "bound_rhs", "monotone_ok", "c2beta_gap"});
  for (const auto& r : rows) {
    csv.row({fmt(r.eps), fmt(r.sup_gap), fmt(r.bound_rhs), fmt(r.monotone_ok), fmt(r.c2beta_gap)});
    if (!r.bound_ok) {
      out.violations.push_back("error bound violated at eps = " + fmt(r.eps));
    }
    if (!r.monotone_ok) {
      out.violations.push_back("eps-monotonicity violated at eps = " + fmt(r.eps));
    }
  }
  out.files.emplace_back("eps_sweep.csv", csv.text());
  return out;
}

Outcome run_perturb(const Context& ctx) {
  const PerturbationSpec spec = sample_perturbation(ctx.config.perturbation, ctx.model, ctx.grid);
  const auto rows = stability_sweep(ctx.model, spec, ctx.config.t_list, ctx.grid, ctx.family,
                                    ctx.config.solve_eps, ctx.analysis);
  Outcome out;
  Csv csv({"t", "E_per", "value_gap_norm", "control_gap_norm", "subopt_gap_norm", "subopt_ok"});
  for (const auto& r : rows) {
    csv.row({fmt(r.t), fmt(r.E_per), fmt(r.value_gap_norm), fmt(r.control_gap_norm),
             fmt(r.subopt_gap_norm), fmt(r.subopt_ok)});
    if (!r.subopt_ok) out.violations.push_back("u_hat < u_bar at t = " + fmt(r.t));
  }
  const double value_spread = ratio_spread(rows, [](const auto& r) { return r.value_gap_norm; });
  const double control_spread =
      ratio_spread(rows, [](const auto& r) { return r.control_gap_norm; });
  out.results["value_ratio_spread"] = value_spread;
  out.results["control_ratio_spread"] = control_spread;
  if (value_spread > 3.0) out.violations.push_back("value_gap_norm / E_per varies by more than 3x");
  if (control_spread > 3.0) {
    out.violations.push_back("control_gap_norm / E_per varies by more than 3x");
  }
  out.files.emplace_back("stability.csv", csv.text());
  return out;
}

Outcome run_sensitivity(const Context& ctx) {
  const PerturbationSpec spec = sample_perturbation(ctx.config.perturbation, ctx.model, ctx.grid);
  const double eps = ctx.config.solve_eps;
  const SolveResult base = solve_hjb(ctx.model, ctx.grid, ctx.family, eps, ctx.config.solver);
  const SensitivityResult sens = solve_sensitivity(ctx.model, ctx.grid, ctx.family, eps, base, spec);
  const auto rows = validate_sensitivity(ctx.model, ctx.grid, ctx.family, eps, spec,
                                         ctx.config.t_list, ctx.analysis);
  Outcome out;
  out.files.emplace_back("delta_u.csv", node_field_csv(ctx.grid, sens.delta_u, "delta_u"));
  out.files.emplace_back("delta_lambda.csv",
                         control_csv(ctx.grid, sens.delta_lambda, "delta_lambda"));
  Csv csv({"t", "remainder", "order"});
  for (const auto& r : rows) csv.row({fmt(r.t), fmt(r.remainder), r.order ? fmt(*r.order) : ""});
  out.files.emplace_back("remainder.csv", csv.text());

  const double tangency = sens.delta_lambda.rowwise().sum().cwiseAbs().maxCoeff();
  out.results["tangency"] = tangency;
  if (tangency > 1e-9) out.violations.push_back("delta_lambda rows do not sum to zero");

  // remainder(t) / t must shrink; skipped when every remainder is at solver noise.
  const RemainderRow* small = nullptr;
  const RemainderRow* large = nullptr;
  for (const auto& r : rows) {
    if (!(r.t > 0.0)) continue;
    if (!small || r.t < small->t) small = &r;
    if (!large || r.t > large->t) large = &r;
  }
  if (small && large && small != large && large->remainder > 100.0 * ctx.config.solver.tolerance &&
      small->remainder / small->t > 0.5 * large->remainder / large->t) {
    out.violations.push_back("remainder(t) / t does not decrease with t");
  }
  return out;
}

Outcome run_mc(const Context& ctx) {
  const int dim = ctx.problem.dim;
  Point x0(dim);
  if (ctx.config.x0.empty()) {
    for (int i = 0; i < dim; ++i) {
      x0[i] = 0.5 * (ctx.problem.domain.lo[i] + ctx.problem.domain.hi[i]);
    }
  } else {
    for (int i = 0; i < dim; ++i) x0[i] = ctx.config.x0[i];
  }
  const SolveResult sol =
      solve_hjb(ctx.model, ctx.grid, ctx.family, ctx.config.solve_eps, ctx.config.solver);
  McOptions mc;
  mc.n_paths = ctx.config.mc_paths;
  mc.dt = ctx.config.mc_dt;
  mc.seed = ctx.config.seed;
  mc.threads = ctx.config.threads;
  mc.bridge_exit = ctx.config.mc_bridge;
  const McEstimate est = simulate_value(ctx.model, ctx.grid, sol, ctx.family, x0, mc);
  const double pde = ctx.grid.interpolate(sol.u, x0);
  const double diff = est.mean - pde;
  double z = 0.0;
  if (est.std_error > 0.0) z = diff / est.std_error;
  else if (diff != 0.0) z = std::copysign(std::numeric_limits<double>::infinity(), diff);

  auto header = coordinate_names(dim);
  for (const char* h : {"mc_mean", "mc_stderr", "n_paths", "dt", "seed", "pde_value", "z"}) {
    header.emplace_back(h);
  }
  Csv csv(header);
  std::vector<std::string> cells;
  for (int i = 0; i < dim; ++i) cells.push_back(fmt(x0[i]));
  cells.insert(cells.end(), {fmt(est.mean), fmt(est.std_error), std::to_string(est.n_paths),
                             fmt(est.dt), std::to_string(est.seed), fmt(pde), fmt(z)});
  csv.row(cells);

  Outcome out;
  out.files.emplace_back("mc_verify.csv", csv.text());
  out.results["total_steps"] = est.total_steps;
  if (std::abs(z) > 3.0) out.violations.push_back("|z| = " + fmt(std::abs(z)) + " exceeds 3");
  return out;
}

Outcome run_exact_reg(const Context& ctx) {
  const auto report =
      control_convergence(ctx.model, ctx.grid, ctx.family, ctx.config.eps_list, ctx.analysis);
  Outcome out;
  out.warnings = report.warnings;
  Csv csv({"eps", "sup_distance", "exact", "exact_expected", "mask_nodes"});
  for (const auto& r : report.rows) {
    csv.row({fmt(r.eps), fmt(r.sup_distance), r.exact ? fmt(*r.exact) : "",
             fmt(r.exact_expected), std::to_string(report.mask_nodes)});
    if (r.exact_expected && r.exact && !*r.exact) {
      out.violations.push_back("control differs from the eps = 0 control at eps = " + fmt(r.eps));
    }
  }
  out.files.emplace_back("control_convergence.csv", csv.text());
  return out;
}

Outcome run_surface(const Context& ctx) {
  Outcome out;
  out.files.emplace_back("surface.csv",
                         emit_surface(ctx.config.surface_points, ctx.config.surface_span));
  return out;
}

Outcome run_eps_probe(const Context& ctx) {
  const PerturbationSpec spec = sample_perturbation(ctx.config.perturbation, ctx.model, ctx.grid);
  std::vector<double> eps_list;
  for (double e : ctx.config.eps_list) {
    if (e > 0.0) eps_list.push_back(e);
  }
  const auto rows =
      eps_scaling_probe(ctx.model, ctx.grid, ctx.family, eps_list, spec, ctx.analysis);
  Csv csv({"eps", "delta_u_norm", "delta_u_sup"});
  for (const auto& r : rows) csv.row({fmt(r.eps), fmt(r.delta_u_norm), fmt(r.delta_u_sup)});
  Outcome out;
  out.files.emplace_back("eps_probe.csv", csv.text());
  return out;
}

}  // namespace

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names = {"solve",     "sweep-eps", "perturb",
                                                 "sensitivity", "mc-verify", "exact-reg",
                                                 "surface",   "eps-probe"};
  return names;
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.output_dir.clear();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string emit_surface(int points, double span) {
  if (points < 2) throw ArgumentError("surface needs at least 2 points per edge");
  const auto ent = SmoothMaxFamily::build(GeneratorKind::Entropy, 3);
  const auto zang = SmoothMaxFamily::build(GeneratorKind::Zang, 3);
  const int N = points - 1;
  Csv csv({"y1", "y2", "y3", "x1", "x2", "x3", "H_en_gap", "H_zang_gap", "rho_en", "rho_zang"});
  for (int i = 0; i <= N; ++i) {
    for (int j = 0; i + j <= N; ++j) {
      Vector y(3);
      y << static_cast<double>(i) / N, static_cast<double>(j) / N,
          static_cast<double>(N - i - j) / N;
      const Vector x = span * (y.array() - 1.0 / 3.0).matrix();
      const double m = x.maxCoeff();
      csv.row({fmt(y[0]), fmt(y[1]), fmt(y[2]), fmt(x[0]), fmt(x[1]), fmt(x[2]),
               fmt(ent.value(x) - m), fmt(zang.value(x) - m), fmt(rho_entropy(y)),
               fmt(conjugate_rho(zang, y))});
    }
  }
  return csv.text();
}

int run(std::string_view subcommand, const ExperimentConfig& input, const RunOptions& options) {
  std::ostream& log = options.log ? *options.log : std::cerr;
  try {
    ExperimentConfig config = input;
    if (options.seed) config.seed = *options.seed;
    if (options.threads) config.threads = *options.threads;
    if (options.out_dir) config.output_dir = *options.out_dir;
    if (config.threads < 1) throw ArgumentError("threads must be >= 1");
    const fs::path dir = config.output_dir.empty() ? fs::path(".") : fs::path(config.output_dir);

    const Context ctx = make_context(config);
    Outcome outcome;
    if (subcommand == "solve") outcome = run_solve(ctx);
    else if (subcommand == "sweep-eps") outcome = run_sweep(ctx);
    else if (subcommand == "perturb") outcome = run_perturb(ctx);
    else if (subcommand == "sensitivity") outcome = run_sensitivity(ctx);
    else if (subcommand == "mc-verify") outcome = run_mc(ctx);
    else if (subcommand == "exact-reg") outcome = run_exact_reg(ctx);
    else if (subcommand == "surface") outcome = run_surface(ctx);
    else if (subcommand == "eps-probe") outcome = run_eps_probe(ctx);
    else throw ArgumentError("unknown subcommand '" + std::string(subcommand) + "'");

    const int code = outcome.violations.empty() ? kExitOk : kExitViolation;
    fs::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["subcommand"] = std::string(subcommand);
    manifest["config_hash"] = hex64(config_hash(config));
    manifest["seed"] = config.seed;
    manifest["threads"] = config.threads;
    manifest["version"] = std::string(kVersion);
    manifest["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                                std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                std::to_string(EIGEN_MINOR_VERSION);
    manifest["timestamp"] = iso_timestamp();
    manifest["outputs"] = nlohmann::ordered_json::array();
    for (const auto& [name, text] : outcome.files) {
      write_file_atomic(dir / name, text);
      manifest["outputs"].push_back(name);
    }
    manifest["results"] = outcome.results;
    manifest["violations"] = outcome.violations;
    manifest["warnings"] = outcome.warnings;
    manifest["exit_code"] = code;
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");

    for (const auto& w : outcome.warnings) log << "warning: " << w << "\n";
    for (const auto& v : outcome.violations) log << "violation: " << v << "\n";
    return code;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace relaxhjb
