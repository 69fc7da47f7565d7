#ifndef RELAXHJB_MODEL_HPP
#define RELAXHJB_MODEL_HPP

#include <array>
#include <vector>

#include "relaxhjb/grid.hpp"

namespace relaxhjb {

// Node-sampled coefficients of one action. `a` holds the n*n entries of the
// diffusion matrix a_k = sigma_k sigma_k^T / 2 in row-major order.
struct ActionFields {
  std::vector<Field> a;
  std::vector<Field> b;
  Field c;
  Field f;

  const Field& a_entry(int i, int j, int dim) const { return a[i * dim + j]; }

  static ActionFields zeros(int dim, int nodes);
  bool operator==(const ActionFields&) const;
};

// Coefficient bundle of the exit-time control problem, sampled on the nodes
// of the grid it is solved on.
struct ActionModel {
  int dim = 1;
  Box domain;
  double nu = 1.0;  // sigma sigma^T >= nu I, i.e. a_k >= nu / 2
  std::vector<ActionFields> actions;
  Field g;  // exit reward; only boundary values enter the PDE

  int action_count() const noexcept { return static_cast<int>(actions.size()); }
  int node_count() const noexcept { return static_cast<int>(g.size()); }
  bool operator==(const ActionModel&) const;
};

// Coefficient deltas in the same layout as ActionModel.
struct PerturbationSpec {
  std::vector<ActionFields> actions;
  Field g;

  static PerturbationSpec zeros(const ActionModel& like);
  bool is_zero() const;
  PerturbationSpec scaled(double t) const;
};

struct ModelDiagnostics {
  std::vector<double> min_diffusion_eigenvalue;  // per action, over nodes
  std::vector<double> max_diffusion_eigenvalue;  // per action (Lambda)
  std::vector<double> min_discount;              // per action
  double sup_a = 0.0;
  double sup_b = 0.0;
  double sup_c = 0.0;
  double sup_f = 0.0;
  double sup_g = 0.0;

  bool operator==(const ModelDiagnostics&) const = default;
};

// Checks shapes, symmetry of a_k, ellipticity a_k >= nu/2 and c_k >= 0 at
// every node. Throws ModelError naming the first offending node and action.
ModelDiagnostics validate(const ActionModel& model, const Grid& grid);

// base + t * delta, re-validated. Throws PerturbationError if the result is
// no longer a valid model.
ActionModel apply_perturbation(const ActionModel& base, const PerturbationSpec& spec, double t,
                               const Grid& grid);

struct DiscreteNormReport {
  int order = 0;
  double beta = 0.5;
  std::array<double, 3> sup_norms{0.0, 0.0, 0.0};  // sum over |alpha| = j of sup|D^alpha u|
  double holder_seminorm = 0.0;  // sum over |alpha| = order of [D^alpha u]_beta
  double combined = 0.0;         // sum of the sup norms up to `order` plus the seminorm
};

// Discrete derivatives D^alpha u for all multi-indices with |alpha| = order:
// centred differences inside, second-order one-sided at the boundary.
std::vector<Field> discrete_derivatives(const Field& u, const Grid& grid, int order);

// Exact pairwise Holder seminorm max |u(x) - u(y)| / |x - y|^beta.
double holder_seminorm(const Field& u, const Grid& grid, double beta);

// Discrete analogue of the C^{order,beta} norm of a node field.
DiscreteNormReport discrete_norm(const Field& u, const Grid& grid, int order, double beta);

// Discrete analogue of the Holder-norm perturbation size: the largest over
// actions of max|da|_beta + max|db|_beta + |dc|_beta + |df|_beta, plus
// |dg|_{2,beta}.
double perturbation_size(const ActionModel& base, const ActionModel& perturbed, const Grid& grid,
                         double beta);

}  // namespace relaxhjb

#endif  // RELAXHJB_MODEL_HPP
