#include "relaxhjb/stencil.hpp"

#include <cmath>
#include <sstream>

#include "relaxhjb/errors.hpp"

namespace relaxhjb {

namespace {

using Triplet = Eigen::Triplet<double>;

struct DominanceFailure {
  int node = -1;
  double excess = 0.0;
};

// Shared assembly for the monotone operator (coef == orient) and its
// linearisation (coef = delta, orient = base).
SparseMatrix assemble_rows(const ActionFields& coef, const ActionFields& orient, const Grid& grid,
                           DominanceFailure* dominance) {
  const int n = grid.dim();
  const auto& h = grid.spacing();
  const int strides[2] = {1, grid.nodes_per_axis()[0]};
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(grid.interior_count()) * (n == 1 ? 3 : 9));

  for (int row = 0; row < grid.interior_count(); ++row) {
    const int node = grid.interior()[row];
    auto add = [&](int offset, double value) {
      if (value != 0.0) triplets.emplace_back(row, node + offset, value);
    };

    for (int d = 0; d < n; ++d) {
      const int s = strides[d];
      const double add_diag = coef.a[d * n + d][node] / (h[d] * h[d]);
      add(-s, add_diag);
      add(s, add_diag);
      add(0, -2.0 * add_diag);

      const double drift = coef.b[d][node];
      if (drift != 0.0) {
        const double o = orient.b[d][node];
        const bool forward = o > 0.0 || (o == 0.0 && drift > 0.0);
        if (forward) {
          add(s, drift / h[d]);
          add(0, -drift / h[d]);
        } else {
          add(0, drift / h[d]);
          add(-s, -drift / h[d]);
        }
      }
    }

    if (n == 2) {
      const double a12 = coef.a[1][node];
      if (a12 != 0.0) {
        const double o = orient.a[1][node];
        const bool positive = o > 0.0 || (o == 0.0 && a12 > 0.0);
        const double w = (positive ? a12 : -a12) / (h[0] * h[1]);
        const int sx = strides[0];
        const int sy = strides[1];
        add(0, 2.0 * w);
        add(sx, -w);
        add(-sx, -w);
        add(sy, -w);
        add(-sy, -w);
        if (positive) {
          add(sx + sy, w);
          add(-sx - sy, w);
        } else {
          add(sx - sy, w);
          add(-sx + sy, w);
        }
      }
      if (dominance != nullptr) {
        const double cross = std::abs(a12) / (h[0] * h[1]);
        const double limit = std::min(coef.a[0][node] / (h[0] * h[0]),
                                      coef.a[3][node] / (h[1] * h[1]));
        const double excess = cross - limit;
        if (excess > 1e-14 * limit && excess > dominance->excess) {
          dominance->node = node;
          dominance->excess = excess;
        }
      }
    }

    add(0, -coef.c[node]);
  }

  SparseMatrix matrix(grid.interior_count(), grid.node_count());
  matrix.setFromTriplets(triplets.begin(), triplets.end());
  matrix.makeCompressed();
  return matrix;
}

}  // namespace

StencilOperator assemble_Lk(const ActionModel& model, int k, const Grid& grid) {
  if (k < 0 || k >= model.action_count()) throw ArgumentError("action index out of range");
  if (model.node_count() != grid.node_count() || model.dim != grid.dim()) {
    throw ArgumentError("model is not sampled on this grid");
  }
  DominanceFailure failure;
  StencilOperator op;
  op.action = k;
  op.matrix = assemble_rows(model.actions[k], model.actions[k], grid, &failure);
  if (failure.node >= 0) {
    std::ostringstream os;
    const Point x = grid.point(failure.node);
    os << "cross-diffusion of action " << k + 1 << " violates diagonal dominance; worst at node "
       << failure.node << " (x = " << x[0] << ", " << x[1] << "), |a12| exceeds the limit by "
       << failure.excess * grid.spacing()[0] * grid.spacing()[1];
    throw DiscretizationError(os.str());
  }
  return op;
}

SparseMatrix assemble_linearized(const ActionFields& delta, const ActionFields& base,
                                 const Grid& grid) {
  return assemble_rows(delta, base, grid, nullptr);
}

Eigen::VectorXd apply(const StencilOperator& op, const Field& u) {
  if (u.size() != op.matrix.cols()) throw ArgumentError("field size does not match operator");
  return op.matrix * u;
}

DiscreteOperators DiscreteOperators::assemble(const ActionModel& model, const Grid& grid) {
  DiscreteOperators out;
  const int K = model.action_count();
  out.ops.reserve(K);
  out.f_interior.resize(grid.interior_count(), K);
  for (int k = 0; k < K; ++k) {
    out.ops.push_back(assemble_Lk(model, k, grid));
    out.f_interior.col(k) = grid.restrict_interior(model.actions[k].f);
  }
  return out;
}

Eigen::MatrixXd residual_components(const DiscreteOperators& ops, const Field& u) {
  Eigen::MatrixXd r(ops.f_interior.rows(), ops.action_count());
  for (int k = 0; k < ops.action_count(); ++k) {
    r.col(k) = apply(ops.ops[k], u) + ops.f_interior.col(k);
  }
  return r;
}

Eigen::MatrixXd residual_components(const ActionModel& model, const Grid& grid, const Field& u) {
  return residual_components(DiscreteOperators::assemble(model, grid), u);
}

int find_sign_violation(const SparseMatrix& matrix, const Grid& grid, double slack) {
  for (int row = 0; row < matrix.rows(); ++row) {
    const int node = grid.interior()[row];
    double sum = 0.0;
    for (SparseMatrix::InnerIterator it(matrix, row); it; ++it) {
      sum += it.value();
      const bool diagonal = it.col() == node;
      if (diagonal ? it.value() > slack : it.value() < -slack) return row;
    }
    if (sum > slack) return row;
  }
  return -1;
}

}  // namespace relaxhjb
