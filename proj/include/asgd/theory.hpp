#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "asgd/problems.hpp"
#include "asgd/rng.hpp"

namespace asgd::theory {

// Constant bundle feeding every closed-form bound.
struct BoundParams {
  double strong_convexity = 1.0;  // c
  double lipschitz = 1.0;         // L
  double grad_bound = 1.0;        // M (not squared)
  int dim = 1;                    // d
  int threads = 1;                // n
  int tau_max = 0;
  double epsilon = 0.0;           // success radius squared
  double theta = 1.0;             // rate-tuning constant in (0, 1]
  double alpha = 0.0;             // step size
  double x0_dist_sq = 0.0;        // ||x_0 - x*||^2
  std::uint64_t horizon = 0;      // T

  void validate() const;          // throws on out-of-range constants
};

// Piecewise logarithm: log(e x) for x >= 1, identity below 1. Continuous and
// nondecreasing, with plog(x) <= x for x >= 1.
double plog(double x);

// C = 2 sqrt(tau_max n), the contention factor multiplying the delay penalty.
double contention_factor(const BoundParams& p);

// epsilon / (2 alpha c epsilon - alpha^2 M^2); throws "invalid step size"
// when the denominator is not positive.
double martingale_coeff(const BoundParams& p);

// W_t at a given squared distance: martingale_coeff * plog(dist/eps) + t.
// The success-freeze rule is the caller's job (see MartingaleTracker).
double martingale_value(const BoundParams& p, double dist_sq, std::uint64_t t);

// Lipschitz constant of W in its first coordinate:
// H = 2 sqrt(epsilon) / (2 alpha c epsilon - alpha^2 M^2).
double martingale_lipschitz(const BoundParams& p);

// Step sizes. tuned_learning_rate is the contention-aware choice
// c eps theta / (M^2 + 4 sqrt(eps) L M sqrt(tau_max n) sqrt(d)); the other
// two are the sequential baseline c eps theta / M^2 and the linear-delay
// variant c eps theta / (M^2 + 2 L M tau sqrt(eps)).
double tuned_learning_rate(const BoundParams& p);
double sequential_learning_rate(const BoundParams& p);
double linear_delay_learning_rate(const BoundParams& p);

enum class FailureBound {
  Sequential,       // M^2 / (c^2 eps theta T) * plog(...)
  LinearDelay,      // (M^2 + 2 L M tau sqrt(eps)) / (c^2 eps theta T) * plog
  SqrtContention,   // (M^2 + 4 sqrt(eps) L M sqrt(tau n d)) / (...) * plog
  Supermartingale,  // W_0 / ((1 - alpha^2 H L M C sqrt(d)) T)
};

std::string to_string(FailureBound kind);

// A bound above 1 is mathematically satisfied but uninformative; reports must
// distinguish "vacuous" from "violated", so both forms are kept.
struct BoundValue {
  double raw = 0.0;
  bool vacuous() const { return raw > 1.0; }
  double clamped() const;
};

// Upper bound on P(no iterate enters the success region by T). Throws
// "feasibility violated" for the Supermartingale/SqrtContention variants when
// alpha^2 H L M C sqrt(d) >= 1, and on T = 0.
BoundValue failure_prob_bound(const BoundParams& p, FailureBound kind);

struct Feasibility {
  double value = 0.0;   // alpha^2 H L M C sqrt(d)
  bool feasible = false;
  double margin = 0.0;  // 1 - value
};

Feasibility feasibility_check(const BoundParams& p);

// Slowdown factor tau * log(1-alpha) / (log(alpha) - log(2)) achieved by the
// stale-replay adversary, and the smallest tau with 2 (1-alpha)^tau <= alpha.
double slowdown_factor(double alpha, int tau);
int minimal_slowdown_delay(double alpha);

// Variance of the accumulated noise after one adversarial round:
// alpha^2 sigma^2 (1 + (1 - (1-alpha)^(2 tau)) / (1 - (1-alpha)^2)).
double stale_noise_variance(double alpha, double sigma, int tau);

// Follows one trajectory applying the success-freeze rule: after the first
// iterate enters the region the value stays pinned at its pre-entry value.
class MartingaleTracker {
 public:
  MartingaleTracker(const BoundParams& p, double dist_sq0);

  void step(double dist_sq_next);

  std::uint64_t t() const { return t_; }
  double value() const { return value_; }
  bool succeeded() const { return succeeded_; }
  std::uint64_t freeze_index() const { return freeze_index_; }

 private:
  BoundParams params_;
  std::uint64_t t_ = 0;
  double value_ = 0.0;
  bool succeeded_ = false;
  std::uint64_t freeze_index_ = 0;
};

struct SupermartingaleCheck {
  double state_dist_sq = 0.0;
  double w_before = 0.0;
  double w_after_mean = 0.0;
  double stderr_mean = 0.0;
  bool frozen = false;
  bool pass = false;
};

struct SupermartingaleReport {
  std::vector<SupermartingaleCheck> checks;
  bool pass = false;
};

// One-sided Monte-Carlo check of E[W_{t+1}] <= W_t for one sequential SGD
// step from each supplied state (estimate <= W_t + 4 stderr). States inside
// the success region must freeze exactly.
SupermartingaleReport check_supermartingale(const ProblemSpec& spec,
                                            const BoundParams& p,
                                            std::span<const double> state_dist,
                                            std::span<const std::vector<double>> states,
                                            int samples, Rng& rng);

// Post-hoc evaluation of the compensated process
//   V_t = W_t - alpha^2 H L M C sqrt(d) t
//         + alpha H L sqrt(d) sum_k ||x_{t-k+1} - x_{t-k}|| sum_{m>=k} 1{tau_{t-k+m} >= m}
// over a completed trace, with the same freeze rule as W. `step_norms[t]` is
// ||x_{t+1} - x_t|| and `dist_sq[t]` is ||x_t - x*||^2.
double v_process_value(const BoundParams& p, std::span<const double> dist_sq,
                       std::span<const double> step_norms,
                       std::span<const int> tau, std::uint64_t t);

}  // namespace asgd::theory
