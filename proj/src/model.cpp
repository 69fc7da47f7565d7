#include "relaxhjb/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <limits>

#include "relaxhjb/errors.hpp"

namespace relaxhjb {

namespace {

std::string describe_point(const Grid& grid, int node) {
  std::ostringstream os;
  os << "node " << node << " (x = ";
  const Point x = grid.point(node);
  for (int i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

void check_field(const Field& f, int nodes, const char* name, int action) {
  if (f.size() != nodes) {
    throw ArgumentError(std::string("field ") + name + " of action " +
                        std::to_string(action + 1) + " has " + std::to_string(f.size()) +
                        " values, grid has " + std::to_string(nodes));
  }
}

// Smallest and largest eigenvalue of the symmetric n x n matrix at a node.
std::pair<double, double> eigen_range(const ActionFields& act, int dim, int node) {
  if (dim == 1) return {act.a[0][node], act.a[0][node]};
  const double a11 = act.a[0][node];
  const double a12 = act.a[1][node];
  const double a22 = act.a[3][node];
  const double mean = 0.5 * (a11 + a22);
  const double radius = std::hypot(0.5 * (a11 - a22), a12);
  return {mean - radius, mean + radius};
}

double sup_abs(const Field& f) { return f.size() ? f.cwiseAbs().maxCoeff() : 0.0; }

// One-dimensional stencil helpers along `axis` at node `node`.
double first_difference(const Field& u, const Grid& grid, int node, int axis) {
  const int n = grid.nodes_per_axis()[axis];
  const int j = grid.multi_index(node)[axis];
  const int stride = axis == 0 ? 1 : grid.nodes_per_axis()[0];
  const double h = grid.spacing()[axis];
  if (n == 1) return 0.0;
  if (n == 2) return (u[node + (j == 0 ? stride : 0)] - u[node - (j == 0 ? 0 : stride)]) / h;
  if (j == 0) return (-3.0 * u[node] + 4.0 * u[node + stride] - u[node + 2 * stride]) / (2.0 * h);
  if (j == n - 1) {
    return (3.0 * u[node] - 4.0 * u[node - stride] + u[node - 2 * stride]) / (2.0 * h);
  }
  return (u[node + stride] - u[node - stride]) / (2.0 * h);
}

double second_difference(const Field& u, const Grid& grid, int node, int axis) {
  const int n = grid.nodes_per_axis()[axis];
  const int j = grid.multi_index(node)[axis];
  const int stride = axis == 0 ? 1 : grid.nodes_per_axis()[0];
  const double h2 = grid.spacing()[axis] * grid.spacing()[axis];
  if (n < 3) return 0.0;
  if (j > 0 && j < n - 1) return (u[node - stride] - 2.0 * u[node] + u[node + stride]) / h2;
  const int dir = j == 0 ? stride : -stride;
  if (n == 3) return (u[node] - 2.0 * u[node + dir] + u[node + 2 * dir]) / h2;
  return (2.0 * u[node] - 5.0 * u[node + dir] + 4.0 * u[node + 2 * dir] - u[node + 3 * dir]) / h2;
}

Field along_axis_first(const Field& u, const Grid& grid, int axis) {
  Field out(u.size());
  for (int node = 0; node < grid.node_count(); ++node) {
    out[node] = first_difference(u, grid, node, axis);
  }
  return out;
}

}  // namespace

ActionFields ActionFields::zeros(int dim, int nodes) {
  ActionFields act;
  act.a.assign(dim * dim, Field::Zero(nodes));
  act.b.assign(dim, Field::Zero(nodes));
  act.c = Field::Zero(nodes);
  act.f = Field::Zero(nodes);
  return act;
}

bool ActionFields::operator==(const ActionFields& o) const {
  if (a.size() != o.a.size() || b.size() != o.b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != o.a[i].size() || a[i] != o.a[i]) return false;
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i].size() != o.b[i].size() || b[i] != o.b[i]) return false;
  }
  return c.size() == o.c.size() && c == o.c && f.size() == o.f.size() && f == o.f;
}

bool ActionModel::operator==(const ActionModel& o) const {
  return dim == o.dim && domain == o.domain && nu == o.nu && actions == o.actions &&
         g.size() == o.g.size() && g == o.g;
}

PerturbationSpec PerturbationSpec::zeros(const ActionModel& like) {
  PerturbationSpec spec;
  spec.actions.assign(like.action_count(), ActionFields::zeros(like.dim, like.node_count()));
  spec.g = Field::Zero(like.node_count());
  return spec;
}

bool PerturbationSpec::is_zero() const {
  auto zero = [](const Field& f) { return f.size() == 0 || f.isZero(0.0); };
  for (const auto& act : actions) {
    for (const auto& f : act.a) if (!zero(f)) return false;
    for (const auto& f : act.b) if (!zero(f)) return false;
    if (!zero(act.c) || !zero(act.f)) return false;
  }
  return zero(g);
}

PerturbationSpec PerturbationSpec::scaled(double t) const {
  PerturbationSpec out = *this;
  for (auto& act : out.actions) {
    for (auto& f : act.a) f *= t;
    for (auto& f : act.b) f *= t;
    act.c *= t;
    act.f *= t;
  }
  out.g *= t;
  return out;
}

ModelDiagnostics validate(const ActionModel& model, const Grid& grid) {
  const int n = model.dim;
  const int nodes = grid.node_count();
  if (n != grid.dim()) throw ArgumentError("model and grid dimensions differ");
  if (model.actions.empty()) throw ArgumentError("model has no actions");
  if (!(model.nu > 0.0)) throw ModelError("ellipticity constant nu must be positive");
  if (model.g.size() != nodes) {
    throw ArgumentError("exit reward has " + std::to_string(model.g.size()) +
                        " values, grid has " + std::to_string(nodes));
  }

  ModelDiagnostics diag;
  diag.sup_g = sup_abs(model.g);
  const double floor = model.nu / 2.0 - 1e-12;
  for (int k = 0; k < model.action_count(); ++k) {
    const ActionFields& act = model.actions[k];
    if (static_cast<int>(act.a.size()) != n * n || static_cast<int>(act.b.size()) != n) {
      throw ArgumentError("action " + std::to_string(k + 1) + " has wrongly shaped a or b");
    }
    for (const auto& f : act.a) check_field(f, nodes, "a", k);
    for (const auto& f : act.b) check_field(f, nodes, "b", k);
    check_field(act.c, nodes, "c", k);
    check_field(act.f, nodes, "f", k);

    double min_eig = std::numeric_limits<double>::infinity();
    double max_eig = -std::numeric_limits<double>::infinity();
    int violations = 0;
    int first_violation = -1;
    for (int node = 0; node < nodes; ++node) {
      if (n == 2 && std::abs(act.a[1][node] - act.a[2][node]) > 1e-12) {
        throw ModelError("diffusion of action " + std::to_string(k + 1) +
                         " is not symmetric at " + describe_point(grid, node));
      }
      const auto [lo, hi] = eigen_range(act, n, node);
      min_eig = std::min(min_eig, lo);
      max_eig = std::max(max_eig, hi);
      if (!(lo >= floor)) {
        if (violations++ == 0) first_violation = node;
      }
      if (!(act.c[node] >= 0.0)) {
        throw ModelError("discount of action " + std::to_string(k + 1) + " is negative at " +
                         describe_point(grid, node));
      }
    }
    if (violations > 0) {
      std::ostringstream os;
      os << "ellipticity fails for action " << k + 1 << " at " << describe_point(grid, first_violation)
         << ": smallest eigenvalue of a is " << eigen_range(act, n, first_violation).first
         << " < nu/2 = " << model.nu / 2.0 << " (" << violations << " of " << nodes
         << " nodes violate)";
      throw ModelError(os.str());
    }
    diag.min_diffusion_eigenvalue.push_back(min_eig);
    diag.max_diffusion_eigenvalue.push_back(max_eig);
    diag.min_discount.push_back(act.c.minCoeff());
    for (const auto& f : act.a) diag.sup_a = std::max(diag.sup_a, sup_abs(f));
    for (const auto& f : act.b) diag.sup_b = std::max(diag.sup_b, sup_abs(f));
    diag.sup_c = std::max(diag.sup_c, sup_abs(act.c));
    diag.sup_f = std::max(diag.sup_f, sup_abs(act.f));
  }
  return diag;
}

ActionModel apply_perturbation(const ActionModel& base, const PerturbationSpec& spec, double t,
                               const Grid& grid) {
  if (static_cast<int>(spec.actions.size()) != base.action_count() ||
      spec.g.size() != base.g.size()) {
    throw ArgumentError("perturbation does not match the model shape");
  }
  ActionModel out = base;
  for (int k = 0; k < base.action_count(); ++k) {
    ActionFields& act = out.actions[k];
    const ActionFields& d = spec.actions[k];
    if (d.a.size() != act.a.size() || d.b.size() != act.b.size()) {
      throw ArgumentError("perturbation of action " + std::to_string(k + 1) + " is misshaped");
    }
    for (std::size_t i = 0; i < act.a.size(); ++i) act.a[i] += t * d.a[i];
    for (std::size_t i = 0; i < act.b.size(); ++i) act.b[i] += t * d.b[i];
    act.c += t * d.c;
    act.f += t * d.f;
  }
  out.g += t * spec.g;
  try {
    validate(out, grid);
  } catch (const ModelError& e) {
    throw PerturbationError(std::string("perturbed model is invalid: ") + e.what());
  }
  return out;
}

std::vector<Field> discrete_derivatives(const Field& u, const Grid& grid, int order) {
  if (u.size() != grid.node_count()) throw ArgumentError("field size does not match grid");
  if (order < 0 || order > 2) throw ArgumentError("derivative order must be 0, 1 or 2");
  if (order == 0) return {u};
  std::vector<Field> out;
  if (order == 1) {
    for (int axis = 0; axis < grid.dim(); ++axis) out.push_back(along_axis_first(u, grid, axis));
    return out;
  }
  for (int axis = 0; axis < grid.dim(); ++axis) {
    Field d(u.size());
    for (int node = 0; node < grid.node_count(); ++node) {
      d[node] = second_difference(u, grid, node, axis);
    }
    out.push_back(std::move(d));
    if (axis == 0 && grid.dim() == 2) {
      out.push_back(along_axis_first(along_axis_first(u, grid, 1), grid, 0));
    }
  }
  return out;
}

double holder_seminorm(const Field& u, const Grid& grid, double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw ArgumentError("Holder exponent must lie in (0, 1]");
  const int nodes = grid.node_count();
  if (u.size() != nodes) throw ArgumentError("field size does not match grid");
  std::vector<Point> pts;
  pts.reserve(nodes);
  for (int node = 0; node < nodes; ++node) pts.push_back(grid.point(node));
  double best = 0.0;
  for (int p = 0; p < nodes; ++p) {
    for (int q = p + 1; q < nodes; ++q) {
      const double du = std::abs(u[p] - u[q]);
      if (du == 0.0) continue;
      const double dist = (pts[p] - pts[q]).norm();
      const double ratio = beta == 1.0 ? du / dist : du / std::pow(dist, beta);
      best = std::max(best, ratio);
    }
  }
  return best;
}

DiscreteNormReport discrete_norm(const Field& u, const Grid& grid, int order, double beta) {
  DiscreteNormReport report;
  report.order = order;
  report.beta = beta;
  std::vector<Field> top;
  for (int j = 0; j <= order; ++j) {
    std::vector<Field> derivs = discrete_derivatives(u, grid, j);
    double sum = 0.0;
    for (const auto& d : derivs) sum += sup_abs(d);
    report.sup_norms[j] = sum;
    if (j == order) top = std::move(derivs);
  }
  for (const auto& d : top) report.holder_seminorm += holder_seminorm(d, grid, beta);
  report.combined = report.holder_seminorm;
  for (int j = 0; j <= order; ++j) report.combined += report.sup_norms[j];
  return report;
}

double perturbation_size(const ActionModel& base, const ActionModel& perturbed, const Grid& grid,
                         double beta) {
  if (base.action_count() != perturbed.action_count() || base.dim != perturbed.dim) {
    throw ArgumentError("models differ in shape");
  }
  auto norm0 = [&](const Field& x, const Field& y) {
    const Field diff = y - x;
    if (diff.isZero(0.0)) return 0.0;
    return discrete_norm(diff, grid, 0, beta).combined;
  };
  double worst = 0.0;
  for (int k = 0; k < base.action_count(); ++k) {
    const ActionFields& x = base.actions[k];
    const ActionFields& y = perturbed.actions[k];
    double da = 0.0;
    double db = 0.0;
    for (std::size_t i = 0; i < x.a.size(); ++i) da = std::max(da, norm0(x.a[i], y.a[i]));
    for (std::size_t i = 0; i < x.b.size(); ++i) db = std::max(db, norm0(x.b[i], y.b[i]));
    worst = std::max(worst, da + db + norm0(x.c, y.c) + norm0(x.f, y.f));
  }
  const Field dg = perturbed.g - base.g;
  const double g_part = dg.isZero(0.0) ? 0.0 : discrete_norm(dg, grid, 2, beta).combined;
  return worst + g_part;
}

}  // namespace relaxhjb
