#ifndef RELAXHJB_SOLVER_HPP
#define RELAXHJB_SOLVER_HPP

#include <vector>

#include <Eigen/Dense>

#include "relaxhjb/grid.hpp"
#include "relaxhjb/model.hpp"
#include "relaxhjb/smoothmax.hpp"
#include "relaxhjb/stencil.hpp"

namespace relaxhjb {

// One probability vector per interior node (rows), K columns.
using ControlField = Eigen::MatrixXd;

struct SolverOptions {
  double tolerance = 1e-10;  // on sup |H_eps(L u + f)|
  int max_iterations = 200;
  double tie_tolerance = kDefaultTieTolerance;  // argmax ties at eps = 0
  bool record_iterates = false;

  bool operator==(const SolverOptions&) const = default;
};

struct SolveResult {
  Field u;                   // all nodes
  ControlField control;      // grad H_eps(r) per interior node, or argmax unit vectors
  Eigen::MatrixXd residual;  // r_k = L_k u + f_k, interior x K
  int iterations = 0;
  double final_residual = 0.0;
  double eps = 0.0;
  std::vector<double> residual_history;
  std::vector<Field> iterates;  // only with SolverOptions::record_iterates
};

// Dirichlet solves for frozen mixing fields:
//   sum_k mixing_k (L_k w) + source = 0 inside,  w = boundary on the boundary.
// The interior/boundary blocks of every L_k are split once.
class LinearDirichletSolver {
 public:
  LinearDirichletSolver(const DiscreteOperators& ops, const Grid& grid);

  // `source` has one value per interior node, `boundary` one per grid node
  // (only boundary entries are read).
  Field solve(const ControlField& mixing, const Eigen::VectorXd& source,
              const Field& boundary) const;

  const DiscreteOperators& operators() const noexcept { return ops_; }

 private:
  DiscreteOperators ops_;
  Grid grid_;
  std::vector<SparseMatrix> interior_blocks_;
  std::vector<SparseMatrix> boundary_blocks_;
};

Field solve_linear_dirichlet(const ControlField& mixing, const ActionModel& model,
                             const Grid& grid, const Eigen::VectorXd& source,
                             const Field& boundary);

// Policy iteration for H_eps(L u + f) = 0, u = g on the boundary. eps = 0
// solves the unregularised equation with lowest-index argmax policies.
// Throws SolverError (with the residual history) when the tolerance is not
// met within max_iterations.
SolveResult solve_hjb(const ActionModel& model, const Grid& grid, const SmoothMaxFamily& family,
                      double eps, const SolverOptions& opts = {});

// grad H_eps(L u + f) at each interior node; eps = 0 gives the lowest-index
// argmax unit vector.
ControlField feedback_control(const Field& u, const ActionModel& model, const Grid& grid,
                              const SmoothMaxFamily& family, double eps,
                              double tie_tolerance = kDefaultTieTolerance);
ControlField feedback_control(const Eigen::MatrixXd& residual, const SmoothMaxFamily& family,
                              double eps, double tie_tolerance = kDefaultTieTolerance);

// eps * rho(control) per interior node, re-derived from stored residuals by
// the conjugate identity; zero when eps == 0.
Eigen::VectorXd exploration_costs(const Eigen::MatrixXd& residual, const SmoothMaxFamily& family,
                                  double eps);

// sup over interior nodes of |H_eps(r)|.
double hjb_residual(const Eigen::MatrixXd& residual, const SmoothMaxFamily& family, double eps);

// Value of the frozen base control on a perturbed model:
//   control^T (L_hat w + f_hat) - eps rho(control) = 0,  w = g_hat,
// with the exploration term taken from the base residual.
Field solve_suboptimal(const SolveResult& base, const ActionModel& perturbed, const Grid& grid,
                       const SmoothMaxFamily& family, double eps);

}  // namespace relaxhjb

#endif  // RELAXHJB_SOLVER_HPP
