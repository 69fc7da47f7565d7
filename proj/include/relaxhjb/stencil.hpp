#ifndef RELAXHJB_STENCIL_HPP
#define RELAXHJB_STENCIL_HPP

#include <vector>

#include <Eigen/SparseCore>

#include "relaxhjb/grid.hpp"
#include "relaxhjb/model.hpp"

namespace relaxhjb {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Finite-difference discretisation of
//   L_k u = a_k^{ij} d_ij u + b_k^i d_i u - c_k u
// with one row per interior node and one column per grid node, so boundary
// values enter through the stencil (Dirichlet data by elimination).
struct StencilOperator {
  int action = 0;
  SparseMatrix matrix;
};

// Centred second differences, drift upwinded, seven-point cross term. The
// result is an M-matrix row by row; throws DiscretizationError when the
// cross-diffusion breaks diagonal dominance.
StencilOperator assemble_Lk(const ActionModel& model, int k, const Grid& grid);

// The operator u -> delta_a d_ij u + delta_b d_i u - delta_c u obtained by
// differentiating the scheme of assemble_Lk along the coefficient direction
// `delta`; upwind and cross-term orientations follow `base` (and `delta`
// where the base coefficient vanishes). No sign pattern is implied.
SparseMatrix assemble_linearized(const ActionFields& delta, const ActionFields& base,
                                 const Grid& grid);

// Interior values of op * u.
Eigen::VectorXd apply(const StencilOperator& op, const Field& u);

// All L_k of a model plus the interior running rewards, assembled once.
struct DiscreteOperators {
  std::vector<StencilOperator> ops;
  Eigen::MatrixXd f_interior;  // interior_count x K

  static DiscreteOperators assemble(const ActionModel& model, const Grid& grid);
  int action_count() const noexcept { return static_cast<int>(ops.size()); }
};

// r_k = L_k u + f_k on interior nodes; column k of the result is r_k.
Eigen::MatrixXd residual_components(const DiscreteOperators& ops, const Field& u);
Eigen::MatrixXd residual_components(const ActionModel& model, const Grid& grid, const Field& u);

// Row-wise check of the M-matrix sign pattern; returns the first offending
// interior row or -1.
int find_sign_violation(const SparseMatrix& matrix, const Grid& grid, double slack = 0.0);

}  // namespace relaxhjb

#endif  // RELAXHJB_STENCIL_HPP
