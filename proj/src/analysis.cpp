#include "relaxhjb/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "relaxhjb/errors.hpp"
#include "relaxhjb/stencil.hpp"

namespace relaxhjb {

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  std::vector<std::exception_ptr> errors(count);
  const int workers = std::clamp(threads, 1, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

void check_eps_list(const std::vector<double>& eps_list, bool allow_zero) {
  if (eps_list.empty()) throw ArgumentError("eps list is empty");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    const double e = eps_list[i];
    if (!std::isfinite(e) || e < 0.0 || (!allow_zero && e == 0.0)) {
      throw ArgumentError("eps list entries must be finite and " +
                          std::string(allow_zero ? ">= 0" : "> 0"));
    }
    if (i > 0 && !(e < eps_list[i - 1])) {
      throw ArgumentError("eps list must be strictly decreasing");
    }
  }
}

double top_two_gap(const Eigen::RowVectorXd& r) {
  if (r.size() < 2) return std::numeric_limits<double>::infinity();
  double first = -std::numeric_limits<double>::infinity();
  double second = first;
  for (Eigen::Index k = 0; k < r.size(); ++k) {
    if (r[k] > first) {
      second = first;
      first = r[k];
    } else if (r[k] > second) {
      second = r[k];
    }
  }
  return first - second;
}

// sup over flagged rows of the l1 distance between two control fields.
double masked_distance(const ControlField& a, const ControlField& b,
                       const std::vector<char>& mask) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    if (mask[r]) worst = std::max(worst, (a.row(r) - b.row(r)).lpNorm<1>());
  }
  return worst;
}

}  // namespace

double error_bound_rhs(const ActionModel& model, const SmoothMaxFamily& family, double eps) {
  if (eps < 0.0) throw ArgumentError("eps must be >= 0");
  if (eps == 0.0) return 0.0;
  double drift = 0.0;
  for (const auto& action : model.actions) {
    double sum = 0.0;
    for (const auto& b : action.b) sum += b.size() ? b.cwiseAbs().maxCoeff() : 0.0;
    drift = std::max(drift, sum);
  }
  const double diam = model.domain.diameter();
  return std::expm1((drift / (model.nu / 2.0) + 1.0) * diam) * 2.0 * eps * family.c0() / model.nu;
}

std::vector<char> stable_mask(const Eigen::MatrixXd& residual0, const Grid& grid,
                              double gap_threshold) {
  const int n_int = grid.interior_count();
  if (residual0.rows() != n_int) throw ArgumentError("residual does not match the grid");
  std::vector<char> raw(n_int, 0);
  for (int p = 0; p < n_int; ++p) raw[p] = top_two_gap(residual0.row(p)) >= gap_threshold;

  std::vector<char> mask(n_int, 0);
  const int nx = grid.nodes_per_axis()[0];
  const int ny = grid.dim() == 2 ? grid.nodes_per_axis()[1] : 1;
  const int reach_y = grid.dim() == 2 ? 1 : 0;
  for (int p = 0; p < n_int; ++p) {
    if (!raw[p]) continue;
    const auto idx = grid.multi_index(grid.interior()[p]);
    bool keep = true;
    for (int dj = -reach_y; dj <= reach_y && keep; ++dj) {
      for (int di = -1; di <= 1 && keep; ++di) {
        const int i = idx[0] + di;
        const int j = idx[1] + dj;
        if (i < 0 || i >= nx || j < 0 || j >= ny) continue;
        const int q = grid.interior_index(grid.node_at(i, j));
        if (q >= 0 && !raw[q]) keep = false;
      }
    }
    mask[p] = keep;
  }
  return mask;
}

std::vector<EpsSweepRow> eps_sweep(const ActionModel& model, const Grid& grid,
                                   const SmoothMaxFamily& family,
                                   const std::vector<double>& eps_list,
                                   const AnalysisOptions& opts) {
  check_eps_list(eps_list, true);
  const SolveResult ref = solve_hjb(model, grid, family, 0.0, opts.solver);
  const std::vector<char> mask = stable_mask(ref.residual, grid, opts.gap_threshold);
  const bool have_mask = std::any_of(mask.begin(), mask.end(), [](char c) { return c != 0; });

  const int n = static_cast<int>(eps_list.size());
  std::vector<SolveResult> solves(n);
  parallel_for(n, opts.threads, [&](int i) {
    solves[i] = eps_list[i] == 0.0 ? ref : solve_hjb(model, grid, family, eps_list[i], opts.solver);
  });

  const double slack = 2.0 * opts.solver.tolerance;
  std::vector<EpsSweepRow> rows(n);
  for (int i = 0; i < n; ++i) {
    EpsSweepRow& row = rows[i];
    const Field diff = solves[i].u - ref.u;
    row.eps = eps_list[i];
    row.sup_gap = diff.maxCoeff();
    row.min_gap = diff.minCoeff();
    row.bound_rhs = error_bound_rhs(model, family, row.eps);
    row.bound_ok = row.min_gap >= -slack && row.sup_gap <= row.bound_rhs + slack;
    row.monotone_ok =
        i == 0 || (solves[i].u - solves[i - 1].u).maxCoeff() <= slack;
    row.c2beta_gap = discrete_norm(diff, grid, 2, opts.beta).combined;
    if (have_mask) row.control_distance = masked_distance(solves[i].control, ref.control, mask);
  }
  return rows;
}

std::vector<StabilityRow> stability_sweep(const ActionModel& base, const PerturbationSpec& spec,
                                          const std::vector<double>& t_list, const Grid& grid,
                                          const SmoothMaxFamily& family, double eps,
                                          const AnalysisOptions& opts) {
  const SolveResult ref = solve_hjb(base, grid, family, eps, opts.solver);
  const Grid inner = grid.interior_grid();
  const int n = static_cast<int>(t_list.size());
  std::vector<StabilityRow> rows(n);
  parallel_for(n, opts.threads, [&](int i) {
    const double t = t_list[i];
    const ActionModel perturbed = apply_perturbation(base, spec, t, grid);
    const SolveResult hat = solve_hjb(perturbed, grid, family, eps, opts.solver);
    const Field bar = solve_suboptimal(ref, perturbed, grid, family, eps);

    StabilityRow& row = rows[i];
    row.t = t;
    row.E_per = perturbation_size(base, perturbed, grid, opts.beta);
    row.value_gap_norm = discrete_norm(hat.u - ref.u, grid, 2, opts.beta).combined;
    for (Eigen::Index k = 0; k < ref.control.cols(); ++k) {
      const Field d = hat.control.col(k) - ref.control.col(k);
      row.control_gap_norm =
          std::max(row.control_gap_norm, discrete_norm(d, inner, 0, opts.beta).combined);
    }
    const Field sub = hat.u - bar;
    row.subopt_gap_norm = discrete_norm(sub, grid, 2, opts.beta).combined;
    row.subopt_min = sub.minCoeff();
    row.subopt_ok = row.subopt_min >= -2.0 * opts.solver.tolerance;
  });
  return rows;
}

SensitivityResult solve_sensitivity(const ActionModel& base, const Grid& grid,
                                    const SmoothMaxFamily& family, double eps,
                                    const SolveResult& base_solve, const PerturbationSpec& spec) {
  if (!(eps > 0.0)) throw ArgumentError("sensitivity needs eps > 0");
  if (family.kind() == GeneratorKind::Max) {
    throw CapabilityError("sensitivity needs a differentiable generator");
  }
  if (base_solve.eps != eps || base_solve.u.size() != grid.node_count() ||
      base_solve.control.rows() != grid.interior_count()) {
    throw ArgumentError("base solve does not match the grid and eps");
  }
  if (spec.actions.size() != base.actions.size() || spec.g.size() != grid.node_count()) {
    throw ArgumentError("perturbation does not match the model");
  }
  const int n_int = grid.interior_count();
  const int K = base.action_count();
  const LinearDirichletSolver linear(DiscreteOperators::assemble(base, grid), grid);
  const DiscreteOperators& ops = linear.operators();

  // s_k = L^delta_k u + delta f_k on interior nodes.
  Eigen::MatrixXd s(n_int, K);
  for (int k = 0; k < K; ++k) {
    const SparseMatrix ld = assemble_linearized(spec.actions[k], base.actions[k], grid);
    s.col(k) = ld * base_solve.u + grid.restrict_interior(spec.actions[k].f);
  }
  const Eigen::VectorXd source = base_solve.control.cwiseProduct(s).rowwise().sum();

  SensitivityResult out;
  out.delta_u = linear.solve(base_solve.control, source, spec.g);

  const Eigen::MatrixXd dr = residual_components(ops, out.delta_u) -
                             ops.f_interior + s;
  out.delta_lambda.resize(n_int, K);
  for (int p = 0; p < n_int; ++p) {
    const Matrix hess = family.hessian_eps(eps, base_solve.residual.row(p).transpose());
    out.delta_lambda.row(p) = (hess * dr.row(p).transpose()).transpose();
  }
  return out;
}

std::vector<RemainderRow> validate_sensitivity(const ActionModel& base, const Grid& grid,
                                               const SmoothMaxFamily& family, double eps,
                                               const PerturbationSpec& spec,
                                               const std::vector<double>& t_list,
                                               const AnalysisOptions& opts) {
  if (t_list.size() < 2) throw ArgumentError("remainder table needs at least two scales");
  const SolveResult ref = solve_hjb(base, grid, family, eps, opts.solver);
  const SensitivityResult lin = solve_sensitivity(base, grid, family, eps, ref, spec);

  const int n = static_cast<int>(t_list.size());
  std::vector<RemainderRow> rows(n);
  parallel_for(n, opts.threads, [&](int i) {
    const double t = t_list[i];
    const ActionModel perturbed = apply_perturbation(base, spec, t, grid);
    const SolveResult hat = solve_hjb(perturbed, grid, family, eps, opts.solver);
    rows[i].t = t;
    rows[i].remainder = (hat.u - ref.u - t * lin.delta_u).cwiseAbs().maxCoeff();
  });
  for (int i = 1; i < n; ++i) {
    const double r0 = rows[i - 1].remainder;
    const double r1 = rows[i].remainder;
    const double t0 = rows[i - 1].t;
    const double t1 = rows[i].t;
    if (r0 > 0.0 && r1 > 0.0 && t0 > 0.0 && t1 > 0.0 && t0 != t1) {
      rows[i].order = std::log(r0 / r1) / std::log(t0 / t1);
    }
  }
  return rows;
}

ControlConvergenceReport control_convergence(const ActionModel& model, const Grid& grid,
                                             const SmoothMaxFamily& family,
                                             const std::vector<double>& eps_list,
                                             const AnalysisOptions& opts) {
  check_eps_list(eps_list, true);
  const SolveResult ref = solve_hjb(model, grid, family, 0.0, opts.solver);
  const std::vector<char> mask = stable_mask(ref.residual, grid, opts.gap_threshold);

  ControlConvergenceReport report;
  report.mask_nodes = static_cast<int>(std::count(mask.begin(), mask.end(), 1));
  if (report.mask_nodes == 0) {
    report.warnings.push_back("no interior node keeps a top-two residual gap >= " +
                              std::to_string(opts.gap_threshold) +
                              " after erosion; control distances are vacuous");
  }
  const std::optional<double> theta = family.theta_sloc();

  const int n = static_cast<int>(eps_list.size());
  report.rows.resize(n);
  parallel_for(n, opts.threads, [&](int i) {
    const double eps = eps_list[i];
    const SolveResult sol = eps == 0.0 ? ref : solve_hjb(model, grid, family, eps, opts.solver);
    ControlConvergenceRow& row = report.rows[i];
    row.eps = eps;
    row.sup_distance = masked_distance(sol.control, ref.control, mask);
    if (theta) {
      row.exact_expected = eps * *theta <= opts.gap_threshold;
      if (report.mask_nodes > 0) {
        bool same = true;
        for (int p = 0; p < grid.interior_count() && same; ++p) {
          if (mask[p]) same = sol.control.row(p) == ref.control.row(p);
        }
        row.exact = same;
      }
    }
  });
  return report;
}

std::vector<EpsProbeRow> eps_scaling_probe(const ActionModel& base, const Grid& grid,
                                           const SmoothMaxFamily& family,
                                           const std::vector<double>& eps_list,
                                           const PerturbationSpec& spec,
                                           const AnalysisOptions& opts) {
  check_eps_list(eps_list, false);
  const int n = static_cast<int>(eps_list.size());
  std::vector<EpsProbeRow> rows(n);
  parallel_for(n, opts.threads, [&](int i) {
    const double eps = eps_list[i];
    const SolveResult sol = solve_hjb(base, grid, family, eps, opts.solver);
    const SensitivityResult sens = solve_sensitivity(base, grid, family, eps, sol, spec);
    rows[i].eps = eps;
    rows[i].delta_u_norm = discrete_norm(sens.delta_u, grid, 2, opts.beta).combined;
    rows[i].delta_u_sup = sens.delta_u.cwiseAbs().maxCoeff();
  });
  return rows;
}

}  // namespace relaxhjb
