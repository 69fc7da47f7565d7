#include "relaxhjb/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "relaxhjb/errors.hpp"

namespace relaxhjb {

double Box::diameter() const {
  double sum = 0.0;
  for (int i = 0; i < dim(); ++i) sum += (hi[i] - lo[i]) * (hi[i] - lo[i]);
  return std::sqrt(sum);
}

bool Box::contains_open(const Point& x) const {
  for (int i = 0; i < dim(); ++i) {
    if (!(x[i] > lo[i] && x[i] < hi[i])) return false;
  }
  return true;
}

Grid Grid::build(const Box& domain, std::vector<int> nodes_per_axis) {
  const int n = domain.dim();
  if (n < 1 || n > 2) throw ArgumentError("grids support dimension 1 or 2");
  if (static_cast<int>(domain.hi.size()) != n) throw ArgumentError("box lo/hi size mismatch");
  if (static_cast<int>(nodes_per_axis.size()) == 1 && n == 2) {
    nodes_per_axis.push_back(nodes_per_axis.front());
  }
  if (static_cast<int>(nodes_per_axis.size()) != n) {
    throw ArgumentError("need one node count per axis");
  }
  for (int i = 0; i < n; ++i) {
    if (!(domain.hi[i] > domain.lo[i]) || !std::isfinite(domain.hi[i] - domain.lo[i])) {
      throw ArgumentError("degenerate box on axis " + std::to_string(i + 1));
    }
    if (nodes_per_axis[i] < 3) throw ArgumentError("grids need >= 3 nodes per axis");
  }
  Grid g;
  g.domain_ = domain;
  g.nodes_ = std::move(nodes_per_axis);
  g.index_nodes();
  return g;
}

void Grid::index_nodes() {
  const int n = dim();
  h_.resize(n);
  count_ = 1;
  for (int i = 0; i < n; ++i) {
    h_[i] = (domain_.hi[i] - domain_.lo[i]) / (nodes_[i] - 1);
    count_ *= nodes_[i];
  }
  interior_.clear();
  boundary_.clear();
  interior_pos_.assign(count_, -1);
  boundary_pos_.assign(count_, -1);
  for (int node = 0; node < count_; ++node) {
    const auto idx = multi_index(node);
    bool on_boundary = false;
    for (int i = 0; i < n; ++i) {
      if (idx[i] == 0 || idx[i] == nodes_[i] - 1) on_boundary = true;
    }
    if (on_boundary) {
      boundary_pos_[node] = static_cast<int>(boundary_.size());
      boundary_.push_back(node);
    } else {
      interior_pos_[node] = static_cast<int>(interior_.size());
      interior_.push_back(node);
    }
  }
}

std::array<int, 2> Grid::multi_index(int node) const {
  if (dim() == 1) return {node, 0};
  return {node % nodes_[0], node / nodes_[0]};
}

double Grid::coordinate(int node, int axis) const {
  const int i = multi_index(node)[axis];
  if (i == nodes_[axis] - 1) return domain_.hi[axis];
  return domain_.lo[axis] + i * h_[axis];
}

Point Grid::point(int node) const {
  Point x(dim());
  for (int i = 0; i < dim(); ++i) x[i] = coordinate(node, i);
  return x;
}

int Grid::nearest_node(const Point& x) const {
  std::array<int, 2> idx{0, 0};
  for (int i = 0; i < dim(); ++i) {
    const double s = std::round((x[i] - domain_.lo[i]) / h_[i]);
    idx[i] = static_cast<int>(std::clamp(s, 0.0, static_cast<double>(nodes_[i] - 1)));
  }
  return node_at(idx[0], idx[1]);
}

int Grid::nearest_interior_node(const Point& x) const {
  std::array<int, 2> idx{0, 0};
  for (int i = 0; i < dim(); ++i) {
    const double s = std::round((x[i] - domain_.lo[i]) / h_[i]);
    idx[i] = static_cast<int>(std::clamp(s, 1.0, static_cast<double>(nodes_[i] - 2)));
  }
  return node_at(idx[0], idx[1]);
}

Grid Grid::interior_grid() const {
  Grid g;
  g.domain_ = domain_;
  g.nodes_ = nodes_;
  for (int i = 0; i < dim(); ++i) {
    g.domain_.lo[i] = domain_.lo[i] + h_[i];
    g.domain_.hi[i] = domain_.hi[i] - h_[i];
    g.nodes_[i] = nodes_[i] - 2;
  }
  g.index_nodes();
  // Single-node axes have no spacing of their own; keep the parent's.
  for (int i = 0; i < dim(); ++i) g.h_[i] = h_[i];
  return g;
}

double Grid::interpolate(const Field& field, const Point& x) const {
  std::array<int, 2> base{0, 0};
  std::array<double, 2> frac{0.0, 0.0};
  for (int i = 0; i < dim(); ++i) {
    const double s = std::clamp((x[i] - domain_.lo[i]) / h_[i], 0.0,
                                static_cast<double>(nodes_[i] - 1));
    int j = static_cast<int>(std::floor(s));
    if (j >= nodes_[i] - 1) j = nodes_[i] - 2;
    base[i] = j;
    frac[i] = s - j;
  }
  if (dim() == 1) {
    return (1.0 - frac[0]) * field[base[0]] + frac[0] * field[base[0] + 1];
  }
  const double f00 = field[node_at(base[0], base[1])];
  const double f10 = field[node_at(base[0] + 1, base[1])];
  const double f01 = field[node_at(base[0], base[1] + 1)];
  const double f11 = field[node_at(base[0] + 1, base[1] + 1)];
  return (1.0 - frac[1]) * ((1.0 - frac[0]) * f00 + frac[0] * f10) +
         frac[1] * ((1.0 - frac[0]) * f01 + frac[0] * f11);
}

Eigen::VectorXd Grid::restrict_interior(const Field& field) const {
  Eigen::VectorXd out(interior_count());
  for (int p = 0; p < interior_count(); ++p) out[p] = field[interior_[p]];
  return out;
}

}  // namespace relaxhjb
