#include "relaxhjb/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "relaxhjb/analysis.hpp"
#include "relaxhjb/errors.hpp"

namespace relaxhjb {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

struct PathContext {
  const ActionModel& model;
  const Grid& grid;
  const ControlField& control;
  const Eigen::VectorXd& cost;
  const McOptions& opts;
};

struct PathResult {
  double value = 0.0;
  long long steps = 0;
};

PathResult simulate_path(const PathContext& ctx, const Point& x0, std::uint64_t seed) {
  const int n = ctx.model.dim;
  const int K = ctx.model.action_count();
  const Box& box = ctx.model.domain;
  const double dt = ctx.opts.dt;
  const double sqrt_dt = std::sqrt(dt);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;

  Point x = x0;
  Point next(n);
  Vector b(n);
  Matrix a(n, n);
  Vector z(n);
  double discount = 1.0;
  PathResult out;

  for (long long step = 0;; ++step) {
    if (step >= ctx.opts.max_steps) {
      std::ostringstream os;
      os << "path did not leave the domain within " << ctx.opts.max_steps << " steps";
      throw SimulationError(os.str());
    }
    const int p = ctx.grid.interior_index(ctx.grid.nearest_interior_node(x));
    b.setZero();
    a.setZero();
    double c = 0.0;
    double f = 0.0;
    for (int k = 0; k < K; ++k) {
      const double w = ctx.control(p, k);
      if (w == 0.0) continue;
      const ActionFields& act = ctx.model.actions[k];
      for (int i = 0; i < n; ++i) {
        b[i] += w * ctx.grid.interpolate(act.b[i], x);
        for (int j = i; j < n; ++j) {
          const double v = 2.0 * w * ctx.grid.interpolate(act.a[i * n + j], x);
          a(i, j) += v;
          if (j != i) a(j, i) += v;
        }
      }
      c += w * ctx.grid.interpolate(act.c, x);
      f += w * ctx.grid.interpolate(act.f, x);
    }

    out.value += discount * (f - ctx.cost[p]) * dt;
    discount *= std::exp(-dt * c);

    for (int i = 0; i < n; ++i) z[i] = normal(rng);
    if (n == 1) {
      next[0] = x[0] + b[0] * dt + std::sqrt(std::max(a(0, 0), 0.0)) * sqrt_dt * z[0];
    } else {
      next = x + b * dt + psd_sqrt(a) * z * sqrt_dt;
    }
    out.steps = step + 1;

    if (!box.contains_open(next)) {
      for (int i = 0; i < n; ++i) next[i] = std::clamp(next[i], box.lo[i], box.hi[i]);
      out.value += discount * ctx.grid.interpolate(ctx.model.g, next);
      return out;
    }
    if (ctx.opts.bridge_exit) {
      for (int i = 0; i < n; ++i) {
        const double s = a(i, i) * dt;
        if (!(s > 0.0)) continue;
        for (const double face : {box.lo[i], box.hi[i]}) {
          const double d0 = std::abs(x[i] - face);
          const double d1 = std::abs(next[i] - face);
          if (uniform(rng) < std::exp(-2.0 * d0 * d1 / s)) {
            next[i] = face;
            out.value += discount * ctx.grid.interpolate(ctx.model.g, next);
            return out;
          }
        }
      }
    }
    x = next;
  }
}

}  // namespace

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path) {
  return splitmix64(seed ^ splitmix64(path));
}

Matrix psd_sqrt(const Matrix& a, double tol) {
  if (a.rows() != a.cols() || a.rows() == 0) throw ArgumentError("psd_sqrt needs a square matrix");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ArgumentError("psd_sqrt needs a symmetric matrix");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es;
  if (a.rows() == 2) es.computeDirect(a);
  else es.compute(a);
  Vector ev = es.eigenvalues();
  if (ev.minCoeff() < -tol) {
    std::ostringstream os;
    os << "matrix is not positive semidefinite (smallest eigenvalue " << ev.minCoeff() << ")";
    throw NotPsdError(os.str());
  }
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  Matrix s = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (s + s.transpose());
}

std::vector<MixedDiffusion> mixed_coefficients(const ActionModel& model, const Grid& grid,
                                               const ControlField& control) {
  const int n = model.dim;
  const int n_int = grid.interior_count();
  if (control.rows() != n_int || control.cols() != model.action_count()) {
    throw ArgumentError("control field does not match the model and grid");
  }
  std::vector<MixedDiffusion> out(n_int);
  for (int p = 0; p < n_int; ++p) {
    const int node = grid.interior()[p];
    const Vector w = to_simplex(control.row(p).transpose());
    Vector b = Vector::Zero(n);
    Matrix a = Matrix::Zero(n, n);
    for (int k = 0; k < model.action_count(); ++k) {
      const ActionFields& act = model.actions[k];
      for (int i = 0; i < n; ++i) {
        b[i] += w[k] * act.b[i][node];
        for (int j = 0; j < n; ++j) a(i, j) += 2.0 * w[k] * act.a[i * n + j][node];
      }
    }
    out[p] = MixedDiffusion{b, psd_sqrt(a)};
  }
  return out;
}

McEstimate simulate_value(const ActionModel& model, const Grid& grid, const SolveResult& solution,
                          const SmoothMaxFamily& family, const Point& x0, const McOptions& opts) {
  if (x0.size() != model.dim || !model.domain.contains_open(x0)) {
    throw ArgumentError("x0 must lie strictly inside the domain");
  }
  if (opts.n_paths < 1) throw ArgumentError("need at least one path");
  if (!(opts.dt > 0.0) || !std::isfinite(opts.dt)) throw ArgumentError("dt must be positive");
  if (solution.control.rows() != grid.interior_count() ||
      solution.control.cols() != model.action_count() ||
      solution.residual.rows() != solution.control.rows()) {
    throw ArgumentError("solution does not match the model and grid");
  }
  const Eigen::VectorXd cost = exploration_costs(solution.residual, family, solution.eps);
  const PathContext ctx{model, grid, solution.control, cost, opts};

  std::vector<double> values(opts.n_paths);
  std::vector<long long> steps(opts.n_paths);
  const int chunk = 64;
  const int chunks = (opts.n_paths + chunk - 1) / chunk;
  parallel_for(chunks, opts.threads, [&](int c) {
    const int end = std::min(opts.n_paths, (c + 1) * chunk);
    for (int path = c * chunk; path < end; ++path) {
      const PathResult r = simulate_path(ctx, x0, path_seed(opts.seed, path));
      values[path] = r.value;
      steps[path] = r.steps;
    }
  });

  McEstimate est;
  est.n_paths = opts.n_paths;
  est.dt = opts.dt;
  est.seed = opts.seed;
  est.mean = pairwise_sum(values) / opts.n_paths;
  std::vector<double> sq(opts.n_paths);
  for (int i = 0; i < opts.n_paths; ++i) sq[i] = (values[i] - est.mean) * (values[i] - est.mean);
  if (opts.n_paths > 1) {
    est.std_error = std::sqrt(pairwise_sum(sq) / (opts.n_paths - 1) / opts.n_paths);
  }
  for (long long s : steps) est.total_steps += s;
  return est;
}

}  // namespace relaxhjb
