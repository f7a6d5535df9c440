#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asgd/rng.hpp"

namespace asgd {

enum class LossKind { Squared };

// Finite dataset for empirical-risk objectives. One feature row per point,
// |labels| == |points|.
struct Dataset {
  std::vector<std::vector<double>> points;
  std::vector<double> labels;
  LossKind loss = LossKind::Squared;

  std::size_t size() const { return points.size(); }
  std::size_t feature_dim() const {
    return points.empty() ? 0 : points.front().size();
  }
};

// Parses "f1,...,fd,label" rows. Blank lines and '#' comments are skipped.
Dataset load_dataset_csv(const std::string& path);

// Bookkeeping of the randomness one oracle call consumed, so runs can be
// replayed and audited.
struct RandomnessRecord {
  std::uint64_t words = 0;              // generator words consumed
  int dataset_index = -1;               // sampled point, -1 if none
  std::vector<double> noise;            // additive noise, empty if none
};

struct GradientSample {
  std::vector<double> value;
  std::vector<double> source_view;
  RandomnessRecord draw;
};

// A convex objective together with the constants the convergence analysis
// consumes: strong convexity c, expected-Lipschitz constant of the stochastic
// gradient L, a second-moment bound M^2 valid on the ball of radius
// box_radius around the minimizer, and the minimizer itself.
struct ProblemSpec {
  enum class Kind { Quadratic, Regression };

  Kind kind = Kind::Quadratic;
  int dim = 0;
  double strong_convexity = 0.0;   // c
  double lipschitz = 0.0;          // L
  double second_moment = 0.0;      // M^2
  std::vector<double> minimizer;   // x*
  double noise_sigma = 0.0;        // quadratic instance only
  double box_radius = 10.0;        // domain of validity for M^2

  // Regression payload.
  Dataset data;
  double ridge = 0.0;

  double grad_bound() const;       // M = sqrt(M^2)
};

// f(x) = 1/2 ||x||^2 with oracle g(x) = x - u, u ~ N(0, sigma^2 I).
// c = L = 1, x* = 0, M^2 = (R + 3 sigma sqrt(d))^2 on the box of radius R.
ProblemSpec quadratic_problem(int dim, double sigma, double box_radius = 10.0);

// Ridge-regularized least squares over the dataset. The oracle returns the
// gradient of one uniformly sampled per-point loss. x* and the constants are
// computed numerically from the empirical second-moment matrix.
ProblemSpec regression_problem(const Dataset& data, double ridge);

// Unbiased oracle draw: E[sample_gradient(...).value] = mean_gradient(view).
// Deterministic given (rng state, view). Throws on non-finite view entries.
GradientSample sample_gradient(const ProblemSpec& spec,
                               std::span<const double> view, Rng& rng);

// Allocation-free variant for hot loops; writes into `out` (length dim).
void sample_gradient_into(const ProblemSpec& spec, std::span<const double> view,
                          Rng& rng, std::span<double> out);

// Exact gradient of f at `view` (the oracle mean).
std::vector<double> mean_gradient(const ProblemSpec& spec,
                                  std::span<const double> view);

// Regression only: gradient of the index-th per-point loss at `view`.
std::vector<double> gradient_for_index(const ProblemSpec& spec,
                                       std::span<const double> view,
                                       std::size_t index);

}  // namespace asgd
