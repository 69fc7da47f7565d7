#ifndef RELAXHJB_GRID_HPP
#define RELAXHJB_GRID_HPP

#include <array>
#include <vector>

#include <Eigen/Dense>

namespace relaxhjb {

// Values at every node of a grid, axis 0 varying fastest.
using Field = Eigen::VectorXd;

// A point of the state space (n <= 2 entries used).
using Point = Eigen::VectorXd;

struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  int dim() const noexcept { return static_cast<int>(lo.size()); }
  double diameter() const;
  bool contains_open(const Point& x) const;
  bool operator==(const Box&) const = default;
};

// Uniform tensor grid on an axis-aligned box in one or two dimensions.
class Grid {
 public:
  // Needs >= 3 nodes per axis and hi > lo on every axis.
  static Grid build(const Box& domain, std::vector<int> nodes_per_axis);

  int dim() const noexcept { return static_cast<int>(nodes_.size()); }
  const Box& domain() const noexcept { return domain_; }
  const std::vector<int>& nodes_per_axis() const noexcept { return nodes_; }
  const std::vector<double>& spacing() const noexcept { return h_; }

  int node_count() const noexcept { return count_; }
  int interior_count() const noexcept { return static_cast<int>(interior_.size()); }

  // Node indices, ascending.
  const std::vector<int>& interior() const noexcept { return interior_; }
  const std::vector<int>& boundary() const noexcept { return boundary_; }

  // Position of `node` in interior() / boundary(), or -1.
  int interior_index(int node) const { return interior_pos_[node]; }
  int boundary_index(int node) const { return boundary_pos_[node]; }
  bool is_boundary(int node) const { return interior_pos_[node] < 0; }

  std::array<int, 2> multi_index(int node) const;
  int node_at(int i, int j = 0) const { return i + nodes_[0] * j; }

  double coordinate(int node, int axis) const;
  Point point(int node) const;

  // Nearest node (any) and nearest interior node to an arbitrary point.
  int nearest_node(const Point& x) const;
  int nearest_interior_node(const Point& x) const;

  // The interior nodes as a grid of their own; interior fields are ordered
  // exactly like its nodes.
  Grid interior_grid() const;

  // Multilinear interpolation of a node field at x (x clamped to the box).
  double interpolate(const Field& field, const Point& x) const;

  // Restrict a node field to interior nodes, and scatter back.
  Eigen::VectorXd restrict_interior(const Field& field) const;

  // Node-field samples of a function of the point.
  template <typename Fn>
  Field sample(Fn&& fn) const {
    Field out(count_);
    for (int node = 0; node < count_; ++node) out[node] = fn(point(node));
    return out;
  }

  bool operator==(const Grid& other) const {
    return domain_ == other.domain_ && nodes_ == other.nodes_;
  }

 private:
  Grid() = default;
  void index_nodes();

  Box domain_;
  std::vector<int> nodes_;
  std::vector<double> h_;
  int count_ = 0;
  std::vector<int> interior_;
  std::vector<int> boundary_;
  std::vector<int> interior_pos_;
  std::vector<int> boundary_pos_;
};

}  // namespace relaxhjb

#endif  // RELAXHJB_GRID_HPP
