#ifndef RELAXHJB_PROBLEMS_HPP
#define RELAXHJB_PROBLEMS_HPP

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "relaxhjb/grid.hpp"
#include "relaxhjb/model.hpp"

namespace relaxhjb {

// Coefficients as closed-form expressions keyed by name:
//   a<k>, b<k>               (1-D)
//   a<k>_11, a<k>_12, a<k>_22, b<k>_1, b<k>_2   (2-D; a<k>_21 mirrors a<k>_12)
//   c<k>, f<k>, g
// Actions are numbered from 1; absent entries are zero.
using CoefficientExpressions = std::map<std::string, std::string>;

struct ProblemDefinition {
  std::string name;
  int dim = 1;
  Box domain;
  double nu = 1.0;
  int K = 1;
  CoefficientExpressions coefficients;

  bool operator==(const ProblemDefinition&) const = default;
};

// Built-in problems: uniform-f (any K >= 1), two-action-gap, sign-switch-drift
// and box-2d (K = 2). `K` = 0 picks the problem's default.
ProblemDefinition builtin_problem(std::string_view name, int K = 0);
const std::vector<std::string>& builtin_problem_names();

// Throws ArgumentError for names that do not address a coefficient of a
// K-action problem in `dim` dimensions.
void check_coefficient_key(const std::string& key, int dim, int K);

ActionModel sample_model(const ProblemDefinition& problem, const Grid& grid);

// Deltas keyed like CoefficientExpressions.
PerturbationSpec sample_perturbation(const CoefficientExpressions& deltas, const ActionModel& like,
                                     const Grid& grid);

}  // namespace relaxhjb

#endif  // RELAXHJB_PROBLEMS_HPP
