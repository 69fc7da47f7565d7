#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "relaxhjb/errors.hpp"
#include "relaxhjb/smoothmax.hpp"

using namespace relaxhjb;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Vector random_point(std::mt19937_64& rng, int K, double lo = -10.0, double hi = 10.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector x(K);
  for (int k = 0; k < K; ++k) x[k] = u(rng);
  return x;
}

// Central differences of H_eps, the oracle for the analytic gradient.
Vector fd_gradient(const SmoothMaxFamily& fam, double eps, const Vector& x, double step) {
  Vector g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Vector p = x, m = x;
    p[k] += step;
    m[k] -= step;
    g[k] = (fam.value_eps(eps, p) - fam.value_eps(eps, m)) / (2.0 * step);
  }
  return g;
}

Matrix fd_hessian(const SmoothMaxFamily& fam, double eps, const Vector& x, double step) {
  Matrix h(x.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Vector p = x, m = x;
    p[k] += step;
    m[k] -= step;
    h.col(k) = (fam.gradient_eps(eps, p) - fam.gradient_eps(eps, m)) / (2.0 * step);
  }
  return h;
}

const GeneratorKind kSmoothKinds[] = {GeneratorKind::Entropy, GeneratorKind::Chks,
                                      GeneratorKind::Zang};

}  // namespace

TEST_CASE("build_family sets the sandwich and S_loc constants") {
  const auto zang2 = SmoothMaxFamily::build(GeneratorKind::Zang, 2);
  CHECK(*zang2.theta_sloc() == 0.5);
  CHECK(zang2.c0() == doctest::Approx(3.0 / 32.0));

  CHECK(SmoothMaxFamily::build(GeneratorKind::Entropy, 3).c0() == doctest::Approx(std::log(3.0)));
  CHECK(SmoothMaxFamily::build(GeneratorKind::Chks, 3).c0() == doctest::Approx(1.0));
  CHECK(SmoothMaxFamily::build(GeneratorKind::Chks, 5).c0() == doctest::Approx(1.5));
  CHECK(SmoothMaxFamily::build(GeneratorKind::Zang, 5).c0() == doctest::Approx(3.0 * 3.0 / 32.0));

  const auto max3 = SmoothMaxFamily::build(GeneratorKind::Max, 3);
  CHECK(max3.c0() == 0.0);
  CHECK(*max3.theta_sloc() == 0.0);
  CHECK_FALSE(SmoothMaxFamily::build(GeneratorKind::Entropy, 4).theta_sloc());
  CHECK_FALSE(SmoothMaxFamily::build(GeneratorKind::Chks, 4).theta_sloc());

  // Recursion: a pair node has theta 1/2 and excess 3/32; the root over a
  // pair and anything smaller needs 3/32 + 1/2.
  CHECK(*SmoothMaxFamily::build(GeneratorKind::Zang, 3).theta_sloc() == 19.0 / 32.0);
  CHECK(*SmoothMaxFamily::build(GeneratorKind::Zang, 4).theta_sloc() == 19.0 / 32.0);
  CHECK(*SmoothMaxFamily::build(GeneratorKind::Zang, 5).theta_sloc() == 22.0 / 32.0);

  CHECK_THROWS_AS(SmoothMaxFamily::build(GeneratorKind::Entropy, 0), ArgumentError);
  CHECK_THROWS_AS(SmoothMaxFamily::build(GeneratorKind::Zang, 1), ArgumentError);
  CHECK_THROWS_AS(SmoothMaxFamily::build(GeneratorKind::Chks, 1), ArgumentError);
}

TEST_CASE("tree splits after floor((m+1)/2) and covers every coordinate once") {
  for (int K = 2; K <= 9; ++K) {
    const auto fam = SmoothMaxFamily::build(GeneratorKind::Chks, K);
    std::vector<int> hits(K, 0);
    for (const auto& node : fam.tree()) {
      if (node.is_leaf()) {
        CHECK(node.count == 1);
        ++hits[node.first];
      } else {
        const auto& l = fam.tree()[node.left];
        const auto& r = fam.tree()[node.right];
        CHECK(l.count == (node.count + 1) / 2);
        CHECK(l.first == node.first);
        CHECK(r.first == node.first + l.count);
        CHECK(l.count + r.count == node.count);
      }
    }
    for (int h : hits) CHECK(h == 1);
  }
}

TEST_CASE("Zang K=4 S_loc constant survives a sampling check") {
  const auto fam = SmoothMaxFamily::build(GeneratorKind::Zang, 4);
  const double theta = *fam.theta_sloc();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> gap(0.0, 3.0);
  std::uniform_int_distribution<int> pick(0, 3);
  for (int s = 0; s < 100000; ++s) {
    const int k = pick(rng);
    Vector x = random_point(rng, 4);
    for (int j = 0; j < 4; ++j) {
      if (j != k) x[j] = x[k] - theta - gap(rng);
    }
    REQUIRE(fam.value(x) == x[k]);
  }
}

TEST_CASE("generator values at reference points") {
  CHECK(SmoothMaxFamily::build(GeneratorKind::Entropy, 3).value(vec({0, 0, 0})) ==
        doctest::Approx(std::log(3.0)));
  CHECK(SmoothMaxFamily::build(GeneratorKind::Chks, 2).value(vec({0, 0})) ==
        doctest::Approx(0.5));
  const auto zang = SmoothMaxFamily::build(GeneratorKind::Zang, 2);
  CHECK(zang.value(vec({0, 0})) == doctest::Approx(3.0 / 32.0));
  CHECK(zang.value(vec({1, 0})) == 1.0);
}

TEST_CASE("scaled values") {
  CHECK(SmoothMaxFamily::build(GeneratorKind::Entropy, 3).value_eps(0.1, vec({0, 0, 0})) ==
        doctest::Approx(0.1 * std::log(3.0)));
  for (auto kind : {GeneratorKind::Max, GeneratorKind::Entropy, GeneratorKind::Chks,
                    GeneratorKind::Zang}) {
    CHECK(SmoothMaxFamily::build(kind, 3).value_eps(0.0, vec({3, -1, 2})) == 3.0);
  }
  CHECK(SmoothMaxFamily::build(GeneratorKind::Zang, 2).value_eps(1.0, vec({1, 0})) == 1.0);
  CHECK_THROWS_AS(SmoothMaxFamily::build(GeneratorKind::Zang, 2).value_eps(-1.0, vec({1, 0})),
                  ArgumentError);
}

TEST_CASE("entropy evaluation does not overflow for small eps") {
  const auto fam = SmoothMaxFamily::build(GeneratorKind::Entropy, 2);
  const Vector x = vec({1000.0, 0.0});
  CHECK(fam.value_eps(0.01, x) == doctest::Approx(1000.0));
  const Vector g = fam.gradient_eps(0.01, x);
  CHECK(g[0] == 1.0);
  CHECK(g[1] < 1e-300);
  CHECK(std::isfinite(fam.exploration_cost(0.01, x)));
}

TEST_CASE("gradients") {
  const Vector uniform = SmoothMaxFamily::build(GeneratorKind::Entropy, 3).gradient_eps(1.0, vec({0, 0, 0}));
  for (int k = 0; k < 3; ++k) CHECK(uniform[k] == doctest::Approx(1.0 / 3.0));

  const Vector e1 = SmoothMaxFamily::build(GeneratorKind::Zang, 2).gradient_eps(1.0, vec({1, 0}));
  CHECK(e1[0] == 1.0);
  CHECK(e1[1] == 0.0);

  const auto chks = SmoothMaxFamily::build(GeneratorKind::Chks, 2);
  const Vector x = vec({0, 0});
  const Vector g = chks.gradient_eps(1.0, x);
  CHECK(g[0] == doctest::Approx(0.5));
  CHECK(g[1] == doctest::Approx(0.5));
  const Vector fd = fd_gradient(chks, 1.0, x, 1e-6);
  CHECK((g - fd).norm() / g.norm() < 1e-7);

  CHECK_THROWS_AS(chks.gradient_eps(0.0, x), ArgumentError);
  CHECK_THROWS_AS(SmoothMaxFamily::build(GeneratorKind::Max, 2).gradient_eps(1.0, x),
                  CapabilityError);
}

TEST_CASE("Hessians") {
  const Matrix h = SmoothMaxFamily::build(GeneratorKind::Entropy, 2).hessian_eps(1.0, vec({0, 0}));
  CHECK(h(0, 0) == doctest::Approx(0.25));
  CHECK(h(0, 1) == doctest::Approx(-0.25));
  CHECK(h(1, 0) == doctest::Approx(-0.25));
  CHECK(h(1, 1) == doctest::Approx(0.25));

  CHECK(SmoothMaxFamily::build(GeneratorKind::Zang, 2).hessian_eps(1.0, vec({1, 0})).isZero(0.0));

  const auto chks = SmoothMaxFamily::build(GeneratorKind::Chks, 3);
  std::mt19937_64 rng(11);
  for (int s = 0; s < 50; ++s) {
    const Vector x = random_point(rng, 3, -1.0, 1.0);
    const Matrix analytic = chks.hessian_eps(0.5, x);
    const Matrix numeric = fd_hessian(chks, 0.5, x, 1e-6);
    CHECK((analytic - numeric).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("exploration cost") {
  const auto ent = SmoothMaxFamily::build(GeneratorKind::Entropy, 3);
  CHECK(ent.exploration_cost(1.0, vec({0, 0, 0})) == doctest::Approx(-std::log(3.0)));
  CHECK(ent.exploration_cost(1.0, vec({0, 0, 0})) ==
        doctest::Approx(rho_entropy(vec({1.0 / 3, 1.0 / 3, 1.0 / 3}))));

  CHECK(SmoothMaxFamily::build(GeneratorKind::Zang, 2).exploration_cost(1.0, vec({1, 0})) == 0.0);

  // eps * sum p ln p with p = softmax(x / eps) is the closed-form oracle.
  const auto ent2 = SmoothMaxFamily::build(GeneratorKind::Entropy, 2);
  const double eps = 0.5;
  const Vector x = vec({1, 0});
  const double e = std::exp(2.0);
  const Vector p = vec({e / (e + 1.0), 1.0 / (e + 1.0)});
  const double oracle = eps * (p[0] * std::log(p[0]) + p[1] * std::log(p[1]));
  CHECK(ent2.exploration_cost(eps, x) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(ent2.exploration_cost(eps, x) ==
        doctest::Approx(x.dot(p) - ent2.value_eps(eps, x)).epsilon(1e-12));
}

TEST_CASE("negative entropy") {
  CHECK(rho_entropy(vec({1, 0})) == 0.0);
  CHECK(rho_entropy(vec({0.25, 0.25, 0.25, 0.25})) == doctest::Approx(-std::log(4.0)));
  CHECK(rho_entropy(vec({0.7, 0.3})) ==
        doctest::Approx(0.7 * std::log(0.7) + 0.3 * std::log(0.3)));
  CHECK(rho_entropy(vec({0.7, 0.3})) == doctest::Approx(-0.6109).epsilon(1e-4));
  CHECK_THROWS_AS(rho_entropy(vec({0.7, 0.7})), ArgumentError);
}

TEST_CASE("subdifferential of the max") {
  CHECK(subdiff_H0(vec({3, 1, 2}), 1e-9) == std::vector<int>{0});
  CHECK(subdiff_H0(vec({1, 1, 0}), 1e-9) == std::vector<int>{0, 1});
  CHECK(subdiff_H0(vec({1, 1 - 1e-12, 0}), 1e-9) == std::vector<int>{0, 1});
  CHECK(subdiff_H0(vec({1 - 1e-12, 1, 0}), 1e-9) == std::vector<int>{0, 1});
  CHECK(argmax_lowest(vec({1 - 1e-12, 1, 0})) == 0);
  CHECK_THROWS_AS(subdiff_H0(vec({1, 2}), 0.0), ArgumentError);
}

TEST_CASE("S_loc region test") {
  const auto zang2 = SmoothMaxFamily::build(GeneratorKind::Zang, 2);
  CHECK(zang2.sloc_holds_at(1.0, vec({1, 0})));
  CHECK_FALSE(zang2.sloc_holds_at(4.0, vec({1, 0})));

  const auto zang4 = SmoothMaxFamily::build(GeneratorKind::Zang, 4);
  const double theta = *zang4.theta_sloc();
  const Vector x = vec({0.3, 0.3 - theta - 0.01, -2.0, 0.3 - theta - 0.01});
  REQUIRE(zang4.sloc_holds_at(1.0, x));
  const Vector g = zang4.gradient_eps(1.0, x);
  CHECK(g == vec({1, 0, 0, 0}));
  CHECK(zang4.value_eps(1.0, x) == 0.3);

  CHECK_THROWS_AS(SmoothMaxFamily::build(GeneratorKind::Entropy, 2).sloc_holds_at(1.0, vec({1, 0})),
                  CapabilityError);
  CHECK_THROWS_AS(SmoothMaxFamily::build(GeneratorKind::Chks, 2).sloc_holds_at(1.0, vec({1, 0})),
                  CapabilityError);
}

TEST_CASE("property battery over random points") {
  std::mt19937_64 rng(2024);
  for (auto kind : kSmoothKinds) {
    for (int K : {2, 3, 5}) {
      const auto fam = SmoothMaxFamily::build(kind, K);
      for (double eps : {1.0, 0.1, 0.01}) {
        CAPTURE(to_string(kind));
        CAPTURE(K);
        CAPTURE(eps);
        for (int s = 0; s < 500; ++s) {
          const Vector x = random_point(rng, K);
          const Vector y = random_point(rng, K);
          const double hx = fam.value_eps(eps, x);
          const double hy = fam.value_eps(eps, y);
          const double mx = x.maxCoeff();
          REQUIRE(hx - eps * fam.c0() - 1e-9 <= mx);
          REQUIRE(mx <= hx + 1e-12);

          const Vector g = fam.gradient_eps(eps, x);
          REQUIRE(g.minCoeff() >= 0.0);
          REQUIRE(std::abs(g.sum() - 1.0) <= 1e-10);

          REQUIRE(std::abs(hx - hy) <= (x - y).norm() + 1e-9);
          REQUIRE(fam.value_eps(eps, 0.5 * (x + y)) <= 0.5 * (hx + hy) + 1e-10);

          const double cost = fam.exploration_cost(eps, x);
          REQUIRE(cost >= -eps * fam.c0() - 1e-9);
          REQUIRE(cost <= 1e-9);

          const double shift = std::uniform_real_distribution<double>(-5, 5)(rng);
          const Vector xs = x.array() + shift;
          REQUIRE(std::abs(fam.value_eps(eps, xs) - (hx + shift)) <= 1e-10);

          const Matrix h = fam.hessian_eps(eps, x);
          REQUIRE((h - h.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + h.norm()));
          REQUIRE(h.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + h.norm()));
          const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()));
          REQUIRE(es.eigenvalues().minCoeff() >= -1e-9 * (1.0 + h.norm()));
        }
      }
    }
  }
}

TEST_CASE("gradient and Hessian agree with finite differences") {
  std::mt19937_64 rng(99);
  for (auto kind : kSmoothKinds) {
    for (int K : {2, 3, 4}) {
      const auto fam = SmoothMaxFamily::build(kind, K);
      for (double eps : {1.0, 0.1}) {
        for (int s = 0; s < 200; ++s) {
          // Keep the points inside the smoothing layer where the test bites.
          const Vector x = random_point(rng, K, -eps, eps);
          const Vector g = fam.gradient_eps(eps, x);
          const Vector fd = fd_gradient(fam, eps, x, 1e-6 * eps);
          REQUIRE((g - fd).norm() <= 1e-5 * g.norm());
          const Matrix h = fam.hessian_eps(eps, x);
          const Matrix fdh = fd_hessian(fam, eps, x, 1e-6 * eps);
          REQUIRE((h - fdh).norm() <= 1e-4 * std::max(1.0, h.norm()));
        }
      }
    }
  }
}

TEST_CASE("S_loc region gives the max and a unit gradient exactly") {
  std::mt19937_64 rng(5);
  for (int K : {2, 3, 4, 6}) {
    const auto fam = SmoothMaxFamily::build(GeneratorKind::Zang, K);
    const double theta = *fam.theta_sloc();
    for (double eps : {1.0, 0.1}) {
      std::uniform_int_distribution<int> pick(0, K - 1);
      std::uniform_real_distribution<double> gap(0.0, 2.0);
      for (int s = 0; s < 2000; ++s) {
        const int k = pick(rng);
        Vector x = random_point(rng, K);
        for (int j = 0; j < K; ++j) {
          if (j != k) x[j] = x[k] - eps * theta - gap(rng);
        }
        REQUIRE(fam.sloc_holds_at(eps, x));
        REQUIRE(fam.value_eps(eps, x) == x[k]);
        const Vector g = fam.gradient_eps(eps, x);
        REQUIRE(g == Vector::Unit(K, k));
        REQUIRE(fam.exploration_cost(eps, x) == 0.0);
      }
    }
  }
}

TEST_CASE("permutation equivariance") {
  std::mt19937_64 rng(3);
  const auto ent = SmoothMaxFamily::build(GeneratorKind::Entropy, 4);
  std::vector<int> perm = {2, 0, 3, 1};
  for (int s = 0; s < 100; ++s) {
    const Vector x = random_point(rng, 4, -2, 2);
    Vector px(4);
    for (int k = 0; k < 4; ++k) px[k] = x[perm[k]];
    const Vector g = ent.gradient_eps(0.5, x);
    const Vector pg = ent.gradient_eps(0.5, px);
    for (int k = 0; k < 4; ++k) CHECK(pg[k] == doctest::Approx(g[perm[k]]).epsilon(1e-14));
  }
  // Tree families: swapping the two leaves of a pair node.
  for (auto kind : {GeneratorKind::Chks, GeneratorKind::Zang}) {
    const auto fam = SmoothMaxFamily::build(kind, 4);
    for (int s = 0; s < 100; ++s) {
      const Vector x = random_point(rng, 4, -1, 1);
      const Vector px = vec({x[1], x[0], x[3], x[2]});
      const Vector g = fam.gradient_eps(0.5, x);
      const Vector pg = fam.gradient_eps(0.5, px);
      CHECK(pg[0] == doctest::Approx(g[1]).epsilon(1e-12));
      CHECK(pg[1] == doctest::Approx(g[0]).epsilon(1e-12));
      CHECK(pg[2] == doctest::Approx(g[3]).epsilon(1e-12));
      CHECK(pg[3] == doctest::Approx(g[2]).epsilon(1e-12));
    }
  }
}

TEST_CASE("conjugate reward on the simplex") {
  const auto ent = SmoothMaxFamily::build(GeneratorKind::Entropy, 3);
  CHECK(conjugate_rho(ent, vec({1.0 / 3, 1.0 / 3, 1.0 / 3})) == doctest::Approx(-std::log(3.0)));
  const auto zang = SmoothMaxFamily::build(GeneratorKind::Zang, 3);
  CHECK(conjugate_rho(zang, vec({1, 0, 0})) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(conjugate_rho(zang, vec({0, 0, 1})) == doctest::Approx(0.0).epsilon(1e-12));

  // At y = grad H(x) the supremum is attained at x.
  std::mt19937_64 rng(17);
  for (auto kind : {GeneratorKind::Chks, GeneratorKind::Zang}) {
    const auto fam = SmoothMaxFamily::build(kind, 3);
    for (int s = 0; s < 20; ++s) {
      const Vector x = random_point(rng, 3, -0.3, 0.3);
      const Vector y = fam.gradient_eps(1.0, x);
      const double expected = x.dot(y) - fam.value(x);
      CHECK(conjugate_rho(fam, y) == doctest::Approx(expected).epsilon(1e-8));
      CHECK(conjugate_rho(fam, y) >= -fam.c0() - 1e-9);
    }
  }
}
