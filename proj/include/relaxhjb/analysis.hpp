#ifndef RELAXHJB_ANALYSIS_HPP
#define RELAXHJB_ANALYSIS_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "relaxhjb/grid.hpp"
#include "relaxhjb/model.hpp"
#include "relaxhjb/smoothmax.hpp"
#include "relaxhjb/solver.hpp"

namespace relaxhjb {

// Runs fn(0..count-1) on up to `threads` workers. Results must be written to
// index-keyed slots so the outcome does not depend on scheduling. The first
// exception (by index) is rethrown after all workers finish.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

struct AnalysisOptions {
  SolverOptions solver;
  double beta = 0.5;
  double gap_threshold = 0.5;
  int threads = 1;
};

// Right-hand side of the first-order regularisation bound
//   (exp[(max_k sum_i sup|b_k^i| / (nu/2) + 1) diam] - 1) * 2 eps c0 / nu
// with drift sup-norms taken over the sampled nodes.
double error_bound_rhs(const ActionModel& model, const SmoothMaxFamily& family, double eps);

struct EpsSweepRow {
  double eps = 0.0;
  double sup_gap = 0.0;    // sup(u^eps - u^0)
  double min_gap = 0.0;    // inf(u^eps - u^0)
  double bound_rhs = 0.0;
  bool bound_ok = false;   // -2 tol <= u^eps - u^0 and sup_gap <= bound_rhs + 2 tol
  bool monotone_ok = false;  // u^eps <= u^(previous eps) + 2 tol nodewise
  double c2beta_gap = 0.0;   // discrete C^{2,beta} norm of u^eps - u^0
  std::optional<double> control_distance;  // sup |lambda^eps - lambda^0|_1 on the eroded mask
};

// eps_list must be strictly decreasing with entries >= 0; the eps = 0
// reference is solved once.
std::vector<EpsSweepRow> eps_sweep(const ActionModel& model, const Grid& grid,
                                   const SmoothMaxFamily& family,
                                   const std::vector<double>& eps_list,
                                   const AnalysisOptions& opts = {});

struct StabilityRow {
  double t = 0.0;
  double E_per = 0.0;
  double value_gap_norm = 0.0;    // |u_hat - u|_{2,beta}
  double control_gap_norm = 0.0;  // max_k |lambda_hat_k - lambda_k|_beta on interior nodes
  double subopt_gap_norm = 0.0;   // |u_hat - u_bar|_{2,beta}
  double subopt_min = 0.0;        // min(u_hat - u_bar)
  bool subopt_ok = false;         // u_hat >= u_bar - 2 tol
};

std::vector<StabilityRow> stability_sweep(const ActionModel& base, const PerturbationSpec& spec,
                                          const std::vector<double>& t_list, const Grid& grid,
                                          const SmoothMaxFamily& family, double eps,
                                          const AnalysisOptions& opts = {});

struct RemainderRow {
  double t = 0.0;
  double remainder = 0.0;        // sup |S[base + t delta] - u - t du|
  std::optional<double> order;   // against the previous row
};

struct SensitivityResult {
  Field delta_u;
  ControlField delta_lambda;  // rows sum to zero
  std::vector<RemainderRow> remainder;
};

// Linearised solve around a converged base solution; eps > 0 and a smooth
// family are required for the control derivative.
SensitivityResult solve_sensitivity(const ActionModel& base, const Grid& grid,
                                    const SmoothMaxFamily& family, double eps,
                                    const SolveResult& base_solve, const PerturbationSpec& spec);

// Remainder table of the first-order expansion; needs at least two t values.
std::vector<RemainderRow> validate_sensitivity(const ActionModel& base, const Grid& grid,
                                               const SmoothMaxFamily& family, double eps,
                                               const PerturbationSpec& spec,
                                               const std::vector<double>& t_list,
                                               const AnalysisOptions& opts = {});

struct ControlConvergenceRow {
  double eps = 0.0;
  double sup_distance = 0.0;   // sup over the mask of |lambda^eps - lambda^0|_1
  std::optional<bool> exact;   // S_loc families only: lambda^eps == lambda^0 on the mask
  bool exact_expected = false; // eps * theta <= gap_threshold
};

struct ControlConvergenceReport {
  int mask_nodes = 0;  // interior nodes kept after erosion
  std::vector<ControlConvergenceRow> rows;
  std::vector<std::string> warnings;
};

// Interior nodes whose eps = 0 residual has a top-two gap >= threshold,
// eroded by one layer (boundary neighbours do not erode). One flag per
// interior node.
std::vector<char> stable_mask(const Eigen::MatrixXd& residual0, const Grid& grid,
                              double gap_threshold);

ControlConvergenceReport control_convergence(const ActionModel& model, const Grid& grid,
                                             const SmoothMaxFamily& family,
                                             const std::vector<double>& eps_list,
                                             const AnalysisOptions& opts = {});

struct EpsProbeRow {
  double eps = 0.0;
  double delta_u_norm = 0.0;  // discrete C^{2,beta} norm of du
  double delta_u_sup = 0.0;
};

std::vector<EpsProbeRow> eps_scaling_probe(const ActionModel& base, const Grid& grid,
                                           const SmoothMaxFamily& family,
                                           const std::vector<double>& eps_list,
                                           const PerturbationSpec& spec,
                                           const AnalysisOptions& opts = {});

}  // namespace relaxhjb

#endif  // RELAXHJB_ANALYSIS_HPP
