#ifndef RELAXHJB_SMOOTHMAX_HPP
#define RELAXHJB_SMOOTHMAX_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace relaxhjb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class GeneratorKind { Max, Entropy, Chks, Zang };

std::string_view to_string(GeneratorKind kind);
GeneratorKind parse_generator_kind(std::string_view name);

// Default absolute tolerance for deciding ties in the pointwise max.
inline constexpr double kDefaultTieTolerance = 1e-9;

// Smooth majorants H of the pointwise maximum on R^K together with their
// scaled versions H_eps(x) = eps * H(x / eps).
//
// Entropy is log-sum-exp. Chks and Zang are built by nesting a
// two-dimensional smoother over a binary tree on the coordinates; each
// internal node splits its index range after the first floor((m + 1) / 2)
// entries and single coordinates pass through unchanged.
//
// The scaled primitives are evaluated directly in terms of eps (never by
// forming x / eps), so the identity branches of Zang return the dominating
// coordinate bit for bit.
//
// Instances are immutable; all member functions are thread-safe.
class SmoothMaxFamily {
 public:
  struct Node {
    int first = 0;   // first coordinate covered
    int count = 1;   // number of coordinates covered
    int left = -1;   // child node indices, -1 for leaves
    int right = -1;
    double excess = 0.0;  // sup (phi - max) of the subtree
    double theta = 0.0;   // S_loc constant of the subtree (Zang only)

    bool is_leaf() const noexcept { return left < 0; }
  };

  static SmoothMaxFamily build(GeneratorKind kind, int K);

  GeneratorKind kind() const noexcept { return kind_; }
  int size() const noexcept { return K_; }

  // Constant with H - c0 <= max <= H.
  double c0() const noexcept { return c0_; }

  // S_loc constant; empty for Entropy and Chks.
  std::optional<double> theta_sloc() const noexcept { return theta_; }

  const std::vector<Node>& tree() const noexcept { return tree_; }

  // Unscaled generator H(x).
  double value(const Vector& x) const { return value_eps(1.0, x); }

  // H_eps(x); eps == 0 gives max_k x_k for every kind.
  double value_eps(double eps, const Vector& x) const;

  // grad H_eps(x), a point of the probability simplex. Requires eps > 0 and a
  // differentiable kind.
  Vector gradient_eps(double eps, const Vector& x) const;

  // Hessian of H_eps at x (symmetric PSD, rows sum to zero).
  Matrix hessian_eps(double eps, const Vector& x) const;

  // eps * rho(grad H_eps(x)) = x^T grad H_eps(x) - H_eps(x); lies in
  // [-eps * c0, 0].
  double exploration_cost(double eps, const Vector& x) const;

  // True iff some coordinate dominates every other by at least
  // eps * theta_sloc. Throws CapabilityError without an S_loc constant.
  bool sloc_holds_at(double eps, const Vector& x) const;

 private:
  struct Eval {
    double value = 0.0;
    Vector grad;
    Matrix hess;
  };

  SmoothMaxFamily(GeneratorKind kind, int K) : kind_(kind), K_(K) {}

  int build_node(int first, int count);
  Eval eval_node(int node, double eps, const Vector& x, int order) const;
  void check_input(const Vector& x) const;
  void check_differentiable(double eps) const;

  GeneratorKind kind_;
  int K_;
  double c0_ = 0.0;
  std::optional<double> theta_;
  std::vector<Node> tree_;
};

// Indices k with x_k >= max_j x_j - tol (0-based, ascending).
std::vector<int> subdiff_H0(const Vector& x, double tol = kDefaultTieTolerance);

// Lowest index attaining max x within tol.
int argmax_lowest(const Vector& x, double tol = kDefaultTieTolerance);

// Negative Shannon entropy sum_k l_k ln l_k with 0 ln 0 = 0.
double rho_entropy(const Vector& lambda);

// Validates a probability vector: entries below -1e-12 or a sum off by more
// than 1e-10 throw ArgumentError; small negative entries are clamped to zero
// and the vector renormalised.
Vector to_simplex(Vector weights);

// rho(y) for y in the simplex, computed as sup_x (x^T y - H(x)) by a damped
// Newton ascent. Entropy uses the closed form, Max returns 0.
double conjugate_rho(const SmoothMaxFamily& family, const Vector& y);

}  // namespace relaxhjb

#endif  // RELAXHJB_SMOOTHMAX_HPP
