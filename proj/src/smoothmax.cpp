#include "relaxhjb/smoothmax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "relaxhjb/errors.hpp"

namespace relaxhjb {

namespace {

// Value and derivatives of a scaled two-dimensional smoother h_eps(a, b).
struct PairEval {
  double v, da, db, daa, dab, dbb;
};

PairEval chks_pair(double a, double b, double eps) {
  const double d = a - b;
  const double s = std::hypot(d, eps);
  // 0.5 * (s + a + b) written as max + 0.5 * (s - |d|) to keep H >= max.
  const double v = std::max(a, b) + 0.5 * eps * eps / (s + std::abs(d));
  const double q = d / s;
  const double w = eps * eps / (2.0 * s * s * s);
  return {v, 0.5 * (1.0 + q), 0.5 * (1.0 - q), w, -w, w};
}

PairEval zang_pair(double a, double b, double eps) {
  const double d = a - b;
  const double half = 0.5 * eps;
  if (d >= half) return {a, 1.0, 0.0, 0.0, 0.0, 0.0};
  if (-d >= half) return {b, 0.0, 1.0, 0.0, 0.0, 0.0};
  const double t = d / eps;
  const double t2 = t * t;
  const double v = eps * (-0.5 * t2 * t2 + 0.75 * t2 + 3.0 / 32.0) + 0.5 * (a + b);
  const double p = -2.0 * t2 * t + 1.5 * t;
  const double s = (-6.0 * t2 + 1.5) / eps;
  return {v, 0.5 + p, 0.5 - p, s, -s, s};
}

}  // namespace

std::string_view to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::Max: return "max";
    case GeneratorKind::Entropy: return "entropy";
    case GeneratorKind::Chks: return "chks";
    case GeneratorKind::Zang: return "zang";
  }
  return "unknown";
}

GeneratorKind parse_generator_kind(std::string_view name) {
  if (name == "max") return GeneratorKind::Max;
  if (name == "entropy") return GeneratorKind::Entropy;
  if (name == "chks") return GeneratorKind::Chks;
  if (name == "zang") return GeneratorKind::Zang;
  throw ArgumentError("unknown generator kind '" + std::string(name) + "'");
}

SmoothMaxFamily SmoothMaxFamily::build(GeneratorKind kind, int K) {
  if (K < 1) throw ArgumentError("generator needs K >= 1");
  const bool tree_based = kind == GeneratorKind::Chks || kind == GeneratorKind::Zang;
  if (tree_based && K < 2) throw ArgumentError("tree generators need K >= 2");

  SmoothMaxFamily family(kind, K);
  switch (kind) {
    case GeneratorKind::Max:
      family.c0_ = 0.0;
      family.theta_ = 0.0;
      break;
    case GeneratorKind::Entropy:
      family.c0_ = std::log(static_cast<double>(K));
      break;
    case GeneratorKind::Chks:
      family.c0_ = (std::log2(K - 1.0) + 1.0) / 2.0;
      break;
    case GeneratorKind::Zang:
      family.c0_ = 3.0 * (std::log2(K - 1.0) + 1.0) / 32.0;
      break;
  }
  if (tree_based) {
    family.tree_.reserve(2 * K - 1);
    family.build_node(0, K);
    if (kind == GeneratorKind::Zang) family.theta_ = family.tree_.front().theta;
  }
  return family;
}

int SmoothMaxFamily::build_node(int first, int count) {
  const int index = static_cast<int>(tree_.size());
  tree_.push_back(Node{first, count});
  if (count == 1) return index;

  const int split = (count + 1) / 2;
  const int left = build_node(first, split);
  const int right = build_node(first + split, count - split);
  const Node& l = tree_[left];
  const Node& r = tree_[right];

  // Composition rule for phi_1(phi_2, phi_3) with the 2-D smoother as phi_1:
  // the root smoother contributes its own excess and S_loc constant 1/2.
  const double pair_excess = kind_ == GeneratorKind::Zang ? 3.0 / 32.0 : 0.5;
  const double excess = pair_excess + std::max(l.excess, r.excess);
  const double theta = std::max({l.theta, r.theta, l.excess + 0.5, r.excess + 0.5});

  Node& node = tree_[index];
  node.left = left;
  node.right = right;
  node.excess = excess;
  node.theta = theta;
  return index;
}

void SmoothMaxFamily::check_input(const Vector& x) const {
  if (x.size() != K_) {
    throw ArgumentError("expected a vector of length " + std::to_string(K_) +
                        ", got " + std::to_string(x.size()));
  }
  if (!x.allFinite()) throw ArgumentError("non-finite input to generator");
}

void SmoothMaxFamily::check_differentiable(double eps) const {
  if (kind_ == GeneratorKind::Max) {
    throw CapabilityError("the pointwise max has no gradient; use subdiff_H0");
  }
  if (!(eps > 0.0)) {
    throw ArgumentError("gradient and Hessian need eps > 0; use subdiff_H0 at eps = 0");
  }
}

SmoothMaxFamily::Eval SmoothMaxFamily::eval_node(int index, double eps, const Vector& x,
                                                 int order) const {
  const Node& node = tree_[index];
  Eval out;
  if (node.is_leaf()) {
    out.value = x[node.first];
    if (order >= 1) out.grad = Vector::Ones(1);
    if (order >= 2) out.hess = Matrix::Zero(1, 1);
    return out;
  }

  const Eval a = eval_node(node.left, eps, x, order);
  const Eval b = eval_node(node.right, eps, x, order);
  const PairEval p = kind_ == GeneratorKind::Zang ? zang_pair(a.value, b.value, eps)
                                                  : chks_pair(a.value, b.value, eps);
  out.value = p.v;
  if (order < 1) return out;

  const int na = tree_[node.left].count;
  const int nb = tree_[node.right].count;
  out.grad.resize(node.count);
  out.grad.head(na) = p.da * a.grad;
  out.grad.tail(nb) = p.db * b.grad;
  if (order < 2) return out;

  out.hess.resize(node.count, node.count);
  out.hess.topLeftCorner(na, na) = p.daa * a.grad * a.grad.transpose() + p.da * a.hess;
  out.hess.bottomRightCorner(nb, nb) = p.dbb * b.grad * b.grad.transpose() + p.db * b.hess;
  out.hess.topRightCorner(na, nb) = p.dab * a.grad * b.grad.transpose();
  out.hess.bottomLeftCorner(nb, na) = out.hess.topRightCorner(na, nb).transpose();
  return out;
}

double SmoothMaxFamily::value_eps(double eps, const Vector& x) const {
  check_input(x);
  if (eps < 0.0 || !std::isfinite(eps)) throw ArgumentError("eps must be a finite value >= 0");
  const double m = x.maxCoeff();
  if (eps == 0.0 || kind_ == GeneratorKind::Max) return m;
  if (kind_ == GeneratorKind::Entropy) {
    const double s = ((x.array() - m) / eps).exp().sum();
    return m + eps * std::log(s);
  }
  return eval_node(0, eps, x, 0).value;
}

Vector SmoothMaxFamily::gradient_eps(double eps, const Vector& x) const {
  check_input(x);
  check_differentiable(eps);
  if (kind_ == GeneratorKind::Entropy) {
    const double m = x.maxCoeff();
    Vector p = ((x.array() - m) / eps).exp();
    p /= p.sum();
    return to_simplex(std::move(p));
  }
  return to_simplex(eval_node(0, eps, x, 1).grad);
}

Matrix SmoothMaxFamily::hessian_eps(double eps, const Vector& x) const {
  check_input(x);
  check_differentiable(eps);
  if (kind_ == GeneratorKind::Entropy) {
    const Vector p = gradient_eps(eps, x);
    Matrix h = -p * p.transpose();
    h.diagonal() += p;
    return h / eps;
  }
  return eval_node(0, eps, x, 2).hess;
}

double SmoothMaxFamily::exploration_cost(double eps, const Vector& x) const {
  check_input(x);
  check_differentiable(eps);
  // Both terms are translation covariant; shifting by the max keeps the
  // difference free of cancellation and makes it exactly 0 on S_loc regions.
  const Vector shifted = x.array() - x.maxCoeff();
  const Vector lambda = gradient_eps(eps, shifted);
  return shifted.dot(lambda) - value_eps(eps, shifted);
}

bool SmoothMaxFamily::sloc_holds_at(double eps, const Vector& x) const {
  if (!theta_) {
    throw CapabilityError("generator '" + std::string(to_string(kind_)) +
                          "' has no S_loc constant");
  }
  check_input(x);
  if (!(eps > 0.0)) throw ArgumentError("sloc_holds_at needs eps > 0");
  Eigen::Index k = 0;
  x.maxCoeff(&k);
  const double gap = eps * *theta_;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (j != k && !(x[k] >= x[j] + gap)) return false;
  }
  return true;
}

std::vector<int> subdiff_H0(const Vector& x, double tol) {
  if (!(tol > 0.0)) throw ArgumentError("tie tolerance must be positive");
  const double m = x.maxCoeff();
  std::vector<int> active;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (x[k] >= m - tol) active.push_back(static_cast<int>(k));
  }
  return active;
}

int argmax_lowest(const Vector& x, double tol) { return subdiff_H0(x, tol).front(); }

double rho_entropy(const Vector& lambda) {
  const Vector p = to_simplex(lambda);
  double sum = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (p[k] > 0.0) sum += p[k] * std::log(p[k]);
  }
  return sum;
}

Vector to_simplex(Vector weights) {
  constexpr double kNegativeSlack = 1e-12;
  constexpr double kSumSlack = 1e-10;
  bool clamped = false;
  for (Eigen::Index k = 0; k < weights.size(); ++k) {
    if (!(weights[k] >= -kNegativeSlack)) {
      throw ArgumentError("simplex entry " + std::to_string(k) + " is negative");
    }
    if (weights[k] < 0.0) {
      weights[k] = 0.0;
      clamped = true;
    }
  }
  const double sum = weights.sum();
  if (!(std::abs(sum - 1.0) <= kSumSlack)) {
    throw ArgumentError("simplex entries sum to " + std::to_string(sum));
  }
  if (clamped) weights /= sum;
  weights = weights.cwiseMin(1.0);
  return weights;
}

double conjugate_rho(const SmoothMaxFamily& family, const Vector& y) {
  const Vector p = to_simplex(y);
  if (family.kind() == GeneratorKind::Entropy) return rho_entropy(p);
  if (family.kind() == GeneratorKind::Max) return 0.0;

  // H is translation covariant and y sums to one, so the last coordinate can
  // be pinned at zero.
  const int K = family.size();
  const int m = K - 1;
  auto objective = [&](const Vector& x) { return x.dot(p) - family.value(x); };

  Vector x = Vector::Zero(K);
  double f = objective(x);
  double mu = 1e-3;
  for (int iter = 0; iter < 500; ++iter) {
    const Vector g = (p - family.gradient_eps(1.0, x)).head(m);
    if (g.lpNorm<Eigen::Infinity>() <= 1e-13) break;
    const Matrix h = family.hessian_eps(1.0, x).topLeftCorner(m, m);
    bool improved = false;
    for (int tries = 0; tries < 60 && !improved; ++tries) {
      const Matrix system = h + mu * Matrix::Identity(m, m);
      Vector step = Vector::Zero(K);
      step.head(m) = system.ldlt().solve(g);
      const Vector trial = x + step;
      const double ft = objective(trial);
      if (ft >= f) {
        improved = ft > f || step.norm() == 0.0;
        x = trial;
        f = ft;
        mu = std::max(mu * 0.3, 1e-12);
        if (!improved) break;
      } else {
        mu *= 10.0;
      }
    }
    if (!improved) break;
  }
  return f;
}

}  // namespace relaxhjb
