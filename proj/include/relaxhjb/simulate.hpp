#ifndef RELAXHJB_SIMULATE_HPP
#define RELAXHJB_SIMULATE_HPP

#include <cstdint>
#include <vector>

#include "relaxhjb/grid.hpp"
#include "relaxhjb/model.hpp"
#include "relaxhjb/smoothmax.hpp"
#include "relaxhjb/solver.hpp"

namespace relaxhjb {

// Symmetric square root of a symmetric matrix whose eigenvalues are >= -tol;
// slightly negative eigenvalues are clamped to zero. Throws NotPsdError
// otherwise.
Matrix psd_sqrt(const Matrix& a, double tol = 1e-12);

// Mixed drift and diffusion of the relaxed dynamics at one point:
//   b = sum_k lambda_k b_k,  sigma sigma^T = sum_k lambda_k 2 a_k.
struct MixedDiffusion {
  Vector b;
  Matrix sigma;
};

// Per-node mixed coefficients for an interior control field (one entry per
// interior node, in interior() order).
std::vector<MixedDiffusion> mixed_coefficients(const ActionModel& model, const Grid& grid,
                                               const ControlField& control);

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;  // sample standard deviation / sqrt(n_paths)
  int n_paths = 0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  long long total_steps = 0;
};

struct McOptions {
  int n_paths = 10000;
  double dt = 1e-4;
  std::uint64_t seed = 0;
  int threads = 1;
  long long max_steps = 10'000'000;  // per path
  // Between two in-domain steps, also stop with the Brownian-bridge crossing
  // probability exp(-2 d0 d1 / (s dt)) per face. Removes most of the
  // O(sqrt(dt)) overshoot of step-resolution exit detection.
  bool bridge_exit = true;
};

// Euler-Maruyama estimate of the expected discounted reward collected under
// the feedback control of `solution` from x0 until the state leaves the box.
// Coefficients are interpolated multilinearly; the control and exploration
// cost come from the nearest interior node.
McEstimate simulate_value(const ActionModel& model, const Grid& grid, const SolveResult& solution,
                          const SmoothMaxFamily& family, const Point& x0,
                          const McOptions& opts = {});

// Seed of path `path` derived from the run seed.
std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path);

}  // namespace relaxhjb

#endif  // RELAXHJB_SIMULATE_HPP
