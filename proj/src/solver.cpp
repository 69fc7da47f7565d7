#include "relaxhjb/solver.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/SparseLU>

#include "relaxhjb/errors.hpp"

namespace relaxhjb {

namespace {

using Triplet = Eigen::Triplet<double>;

bool is_smooth(const SmoothMaxFamily& family, double eps) {
  return eps > 0.0 && family.kind() != GeneratorKind::Max;
}

void check_mixing(const ControlField& mixing, int rows, int K) {
  if (mixing.rows() != rows || mixing.cols() != K) {
    throw ArgumentError("mixing field must be " + std::to_string(rows) + " x " +
                        std::to_string(K));
  }
  for (int r = 0; r < rows; ++r) {
    const double sum = mixing.row(r).sum();
    if (mixing.row(r).minCoeff() < -1e-12 || std::abs(sum - 1.0) > 1e-10) {
      throw ArgumentError("mixing weights at interior node " + std::to_string(r) +
                          " are not a probability vector");
    }
  }
}

}  // namespace

LinearDirichletSolver::LinearDirichletSolver(const DiscreteOperators& ops, const Grid& grid)
    : ops_(ops), grid_(grid) {
  const int n_int = grid.interior_count();
  const int n_bnd = static_cast<int>(grid.boundary().size());
  for (const auto& op : ops.ops) {
    std::vector<Triplet> inner;
    std::vector<Triplet> outer;
    for (int row = 0; row < op.matrix.rows(); ++row) {
      for (SparseMatrix::InnerIterator it(op.matrix, row); it; ++it) {
        const int col = static_cast<int>(it.col());
        const int p = grid.interior_index(col);
        if (p >= 0) inner.emplace_back(row, p, it.value());
        else outer.emplace_back(row, grid.boundary_index(col), it.value());
      }
    }
    SparseMatrix a(n_int, n_int);
    a.setFromTriplets(inner.begin(), inner.end());
    SparseMatrix b(n_int, n_bnd);
    b.setFromTriplets(outer.begin(), outer.end());
    interior_blocks_.push_back(std::move(a));
    boundary_blocks_.push_back(std::move(b));
  }
}

Field LinearDirichletSolver::solve(const ControlField& mixing, const Eigen::VectorXd& source,
                                   const Field& boundary) const {
  const int n_int = grid_.interior_count();
  const int K = ops_.action_count();
  check_mixing(mixing, n_int, K);
  if (source.size() != n_int) throw ArgumentError("source must have one value per interior node");
  if (boundary.size() != grid_.node_count()) {
    throw ArgumentError("boundary data must have one value per grid node");
  }

  Eigen::VectorXd g_b(grid_.boundary().size());
  for (std::size_t q = 0; q < grid_.boundary().size(); ++q) g_b[q] = boundary[grid_.boundary()[q]];

  std::vector<Triplet> triplets;
  Eigen::VectorXd rhs = -source;
  for (int k = 0; k < K; ++k) {
    const Eigen::VectorXd weights = mixing.col(k);
    if (weights.isZero(0.0)) continue;
    const SparseMatrix& a = interior_blocks_[k];
    for (int row = 0; row < n_int; ++row) {
      const double w = weights[row];
      if (w == 0.0) continue;
      for (SparseMatrix::InnerIterator it(a, row); it; ++it) {
        triplets.emplace_back(row, static_cast<int>(it.col()), w * it.value());
      }
    }
    rhs -= weights.cwiseProduct(boundary_blocks_[k] * g_b);
  }
  Eigen::SparseMatrix<double> system(n_int, n_int);
  system.setFromTriplets(triplets.begin(), triplets.end());
  system.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(system);
  lu.factorize(system);
  if (lu.info() != Eigen::Success) {
    throw SolverError("mixed operator is singular: " + lu.lastErrorMessage(), {});
  }
  Eigen::VectorXd w = lu.solve(rhs);
  // One step of iterative refinement.
  const Eigen::VectorXd defect = rhs - system * w;
  w += lu.solve(defect);

  Field out = boundary;
  for (int p = 0; p < n_int; ++p) out[grid_.interior()[p]] = w[p];
  return out;
}

Field solve_linear_dirichlet(const ControlField& mixing, const ActionModel& model,
                             const Grid& grid, const Eigen::VectorXd& source,
                             const Field& boundary) {
  validate(model, grid);
  const LinearDirichletSolver solver(DiscreteOperators::assemble(model, grid), grid);
  return solver.solve(mixing, source, boundary);
}

ControlField feedback_control(const Eigen::MatrixXd& residual, const SmoothMaxFamily& family,
                              double eps, double tie_tolerance) {
  if (eps < 0.0) throw ArgumentError("eps must be >= 0");
  const Eigen::Index rows = residual.rows();
  const Eigen::Index K = residual.cols();
  ControlField control = ControlField::Zero(rows, K);
  const bool smooth = is_smooth(family, eps);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vector x = residual.row(r).transpose();
    if (smooth) {
      control.row(r) = family.gradient_eps(eps, x).transpose();
    } else {
      control(r, argmax_lowest(x, tie_tolerance)) = 1.0;
    }
  }
  return control;
}

ControlField feedback_control(const Field& u, const ActionModel& model, const Grid& grid,
                              const SmoothMaxFamily& family, double eps, double tie_tolerance) {
  return feedback_control(residual_components(model, grid, u), family, eps, tie_tolerance);
}

Eigen::VectorXd exploration_costs(const Eigen::MatrixXd& residual, const SmoothMaxFamily& family,
                                  double eps) {
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(residual.rows());
  if (!is_smooth(family, eps)) return cost;
  for (Eigen::Index r = 0; r < residual.rows(); ++r) {
    cost[r] = family.exploration_cost(eps, residual.row(r).transpose());
  }
  return cost;
}

double hjb_residual(const Eigen::MatrixXd& residual, const SmoothMaxFamily& family, double eps) {
  const double e = is_smooth(family, eps) ? eps : 0.0;
  double worst = 0.0;
  for (Eigen::Index r = 0; r < residual.rows(); ++r) {
    worst = std::max(worst, std::abs(family.value_eps(e, residual.row(r).transpose())));
  }
  return worst;
}

SolveResult solve_hjb(const ActionModel& model, const Grid& grid, const SmoothMaxFamily& family,
                      double eps, const SolverOptions& opts) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw ArgumentError("eps must be a finite value >= 0");
  if (!(opts.tolerance > 0.0)) throw ArgumentError("solver tolerance must be positive");
  if (family.size() != model.action_count()) {
    throw ArgumentError("generator dimension does not match the number of actions");
  }
  validate(model, grid);
  const LinearDirichletSolver linear(DiscreteOperators::assemble(model, grid), grid);
  const DiscreteOperators& ops = linear.operators();
  const int n_int = grid.interior_count();
  const int K = model.action_count();

  SolveResult result;
  result.eps = eps;

  // Initial iterate: the uniform mixture without exploration term.
  ControlField policy = ControlField::Constant(n_int, K, 1.0 / K);
  Eigen::VectorXd source = policy.cwiseProduct(ops.f_interior).rowwise().sum();
  Field u = linear.solve(policy, source, model.g);

  for (int iter = 0;; ++iter) {
    if (opts.record_iterates) result.iterates.push_back(u);
    Eigen::MatrixXd r = residual_components(ops, u);
    const double res = hjb_residual(r, family, eps);
    result.residual_history.push_back(res);
    if (res <= opts.tolerance) {
      result.control = feedback_control(r, family, eps, opts.tie_tolerance);
      result.residual = std::move(r);
      result.u = std::move(u);
      result.iterations = iter;
      result.final_residual = res;
      return result;
    }
    if (iter >= opts.max_iterations) {
      std::ostringstream os;
      os << "policy iteration did not reach tolerance " << opts.tolerance << " in "
         << opts.max_iterations << " iterations (last residual " << res << ")";
      throw SolverError(os.str(), result.residual_history);
    }
    policy = feedback_control(r, family, eps, opts.tie_tolerance);
    source = policy.cwiseProduct(ops.f_interior).rowwise().sum() -
             exploration_costs(r, family, eps);
    u = linear.solve(policy, source, model.g);
  }
}

Field solve_suboptimal(const SolveResult& base, const ActionModel& perturbed, const Grid& grid,
                       const SmoothMaxFamily& family, double eps) {
  if (base.control.rows() != grid.interior_count() ||
      base.control.cols() != perturbed.action_count() ||
      base.residual.rows() != base.control.rows() || base.residual.cols() != base.control.cols()) {
    throw ArgumentError("frozen control does not match the perturbed model and grid");
  }
  if (eps != base.eps) throw ArgumentError("eps differs from the base solve");
  validate(perturbed, grid);
  const LinearDirichletSolver linear(DiscreteOperators::assemble(perturbed, grid), grid);
  const Eigen::VectorXd source =
      base.control.cwiseProduct(linear.operators().f_interior).rowwise().sum() -
      exploration_costs(base.residual, family, eps);
  return linear.solve(base.control, source, perturbed.g);
}

}  // namespace relaxhjb
