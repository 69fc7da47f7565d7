#include "relaxhjb/problems.hpp"

#include <regex>

#include "relaxhjb/errors.hpp"
#include "relaxhjb/expression.hpp"

namespace relaxhjb {

namespace {

struct Slot {
  enum Kind { A, B, C, F, G } kind;
  int action = 0;  // 0-based
  int i = 0;
  int j = 0;
};

Slot parse_key(const std::string& key, int dim, int K) {
  static const std::regex pattern(R"(^(?:(a)(\d+)(?:_(\d)(\d))?|(b)(\d+)(?:_(\d))?|([cf])(\d+)|(g))$)");
  std::smatch m;
  if (!std::regex_match(key, m, pattern)) throw ArgumentError("unknown coefficient '" + key + "'");
  auto action_of = [&](const std::string& digits) {
    const int k = std::stoi(digits);
    if (k < 1 || k > K) {
      throw ArgumentError("coefficient '" + key + "' refers to action " + digits + " but K = " +
                          std::to_string(K));
    }
    return k - 1;
  };
  auto axis_of = [&](const std::string& digit) {
    const int i = std::stoi(digit);
    if (i < 1 || i > dim) throw ArgumentError("coefficient '" + key + "' has an axis out of range");
    return i - 1;
  };
  if (m[1].matched) {
    Slot s{Slot::A, action_of(m[2])};
    if (m[3].matched) {
      s.i = axis_of(m[3]);
      s.j = axis_of(m[4]);
    } else if (dim != 1) {
      throw ArgumentError("coefficient '" + key + "' needs an index pair in 2-D");
    }
    return s;
  }
  if (m[5].matched) {
    Slot s{Slot::B, action_of(m[6])};
    if (m[7].matched) s.i = axis_of(m[7]);
    else if (dim != 1) throw ArgumentError("coefficient '" + key + "' needs an axis in 2-D");
    return s;
  }
  if (m[8].matched) return Slot{m[8] == "c" ? Slot::C : Slot::F, action_of(m[9])};
  return Slot{Slot::G};
}

void fill(const CoefficientExpressions& exprs, std::vector<ActionFields>& actions, Field& g,
          int dim, const Grid& grid) {
  const int K = static_cast<int>(actions.size());
  for (const auto& [key, text] : exprs) {
    const Slot s = parse_key(key, dim, K);
    const Expression e = Expression::parse(text, dim);
    const Field values = grid.sample([&](const Point& x) { return e(x); });
    switch (s.kind) {
      case Slot::A:
        actions[s.action].a[s.i * dim + s.j] = values;
        actions[s.action].a[s.j * dim + s.i] = values;
        break;
      case Slot::B: actions[s.action].b[s.i] = values; break;
      case Slot::C: actions[s.action].c = values; break;
      case Slot::F: actions[s.action].f = values; break;
      case Slot::G: g = values; break;
    }
  }
}

ProblemDefinition one_d(std::string name, int K, double nu) {
  ProblemDefinition p;
  p.name = std::move(name);
  p.dim = 1;
  p.domain = Box{{0.0}, {1.0}};
  p.nu = nu;
  p.K = K;
  p.coefficients["g"] = "0";
  return p;
}

}  // namespace

const std::vector<std::string>& builtin_problem_names() {
  static const std::vector<std::string> names = {"uniform-f", "two-action-gap",
                                                 "sign-switch-drift", "box-2d"};
  return names;
}

ProblemDefinition builtin_problem(std::string_view name, int K) {
  auto fixed = [&](int expected) {
    if (K != 0 && K != expected) {
      throw ArgumentError("problem '" + std::string(name) + "' has exactly " +
                          std::to_string(expected) + " actions");
    }
  };
  if (name == "uniform-f") {
    if (K == 0) K = 3;
    if (K < 1) throw ArgumentError("uniform-f needs K >= 1");
    ProblemDefinition p = one_d("uniform-f", K, 2.0);
    for (int k = 1; k <= K; ++k) {
      const std::string s = std::to_string(k);
      p.coefficients["a" + s] = "1";
      p.coefficients["f" + s] = "1";
    }
    return p;
  }
  if (name == "two-action-gap") {
    fixed(2);
    ProblemDefinition p = one_d("two-action-gap", 2, 2.0);
    p.coefficients["a1"] = "1";
    p.coefficients["a2"] = "1";
    p.coefficients["f1"] = "0";
    p.coefficients["f2"] = "1";
    return p;
  }
  if (name == "sign-switch-drift") {
    fixed(2);
    // f1 - f2 = x - 1/2 changes sign at the midpoint.
    ProblemDefinition p = one_d("sign-switch-drift", 2, 2.0);
    p.coefficients["a1"] = "1";
    p.coefficients["a2"] = "1";
    p.coefficients["f1"] = "x1";
    p.coefficients["f2"] = "0.5";
    return p;
  }
  if (name == "box-2d") {
    fixed(2);
    ProblemDefinition p;
    p.name = "box-2d";
    p.dim = 2;
    p.domain = Box{{0.0, 0.0}, {1.0, 1.0}};
    p.nu = 1.0;
    p.K = 2;
    p.coefficients = {
        {"a1_11", "1"},   {"a1_22", "0.5"}, {"a2_11", "0.5"}, {"a2_22", "1"},
        {"b1_1", "0.5"},  {"b2_2", "-0.5"}, {"c2", "0.1"},    {"f1", "1"},
        {"f2", "1 + 0.5*(x1 - x2)"},        {"g", "0"},
    };
    return p;
  }
  throw ArgumentError("unknown built-in problem '" + std::string(name) + "'");
}

void check_coefficient_key(const std::string& key, int dim, int K) { parse_key(key, dim, K); }

ActionModel sample_model(const ProblemDefinition& problem, const Grid& grid) {
  if (problem.dim != grid.dim() || !(problem.domain == grid.domain())) {
    throw ArgumentError("grid does not cover the problem domain");
  }
  if (problem.K < 1) throw ArgumentError("problem needs at least one action");
  ActionModel model;
  model.dim = problem.dim;
  model.domain = problem.domain;
  model.nu = problem.nu;
  model.actions.assign(problem.K, ActionFields::zeros(problem.dim, grid.node_count()));
  model.g = Field::Zero(grid.node_count());
  fill(problem.coefficients, model.actions, model.g, problem.dim, grid);
  return model;
}

PerturbationSpec sample_perturbation(const CoefficientExpressions& deltas, const ActionModel& like,
                                     const Grid& grid) {
  PerturbationSpec spec = PerturbationSpec::zeros(like);
  fill(deltas, spec.actions, spec.g, like.dim, grid);
  return spec;
}

}  // namespace relaxhjb
