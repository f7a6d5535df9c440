#include "asgd/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace asgd::theory {

namespace {

double denom(const BoundParams& p) {
  const double m2 = p.grad_bound * p.grad_bound;
  return 2.0 * p.alpha * p.strong_convexity * p.epsilon - p.alpha * p.alpha * m2;
}

}  // namespace

void BoundParams::validate() const {
  if (strong_convexity <= 0 || lipschitz <= 0 || grad_bound <= 0)
    throw std::invalid_argument("constants c, L, M must be positive");
  if (dim < 1 || threads < 1 || tau_max < 0)
    throw std::invalid_argument("d, n must be >= 1 and tau_max >= 0");
  if (epsilon <= 0) throw std::invalid_argument("epsilon must be positive");
  if (theta <= 0 || theta > 1)
    throw std::invalid_argument("theta must lie in (0, 1]");
}

double plog(double x) { return x >= 1.0 ? 1.0 + std::log(x) : x; }

double contention_factor(const BoundParams& p) {
  return 2.0 * std::sqrt(double(p.tau_max) * double(p.threads));
}

double martingale_coeff(const BoundParams& p) {
  const double den = denom(p);
  if (den <= 0) throw std::invalid_argument("invalid step size");
  return p.epsilon / den;
}

double martingale_value(const BoundParams& p, double dist_sq, std::uint64_t t) {
  return martingale_coeff(p) * plog(dist_sq / p.epsilon) + double(t);
}

double martingale_lipschitz(const BoundParams& p) {
  const double den = denom(p);
  if (den <= 0) throw std::invalid_argument("invalid step size");
  return 2.0 * std::sqrt(p.epsilon) / den;
}

double tuned_learning_rate(const BoundParams& p) {
  const double m2 = p.grad_bound * p.grad_bound;
  const double penalty = 2.0 * std::sqrt(p.epsilon) * p.lipschitz * p.grad_bound *
                         contention_factor(p) * std::sqrt(double(p.dim));
  return p.strong_convexity * p.epsilon * p.theta / (m2 + penalty);
}

double sequential_learning_rate(const BoundParams& p) {
  const double m2 = p.grad_bound * p.grad_bound;
  return p.strong_convexity * p.epsilon * p.theta / m2;
}

double linear_delay_learning_rate(const BoundParams& p) {
  const double m2 = p.grad_bound * p.grad_bound;
  const double penalty = 2.0 * p.lipschitz * p.grad_bound * double(p.tau_max) *
                         std::sqrt(p.epsilon);
  return p.strong_convexity * p.epsilon * p.theta / (m2 + penalty);
}

std::string to_string(FailureBound kind) {
  switch (kind) {
    case FailureBound::Sequential: return "sequential";
    case FailureBound::LinearDelay: return "linear-delay";
    case FailureBound::SqrtContention: return "sqrt-contention";
    case FailureBound::Supermartingale: return "supermartingale";
  }
  return "?";
}

double BoundValue::clamped() const { return std::clamp(raw, 0.0, 1.0); }

BoundValue failure_prob_bound(const BoundParams& p, FailureBound kind) {
  p.validate();
  if (p.horizon == 0) throw std::invalid_argument("horizon T must be positive");
  const double m2 = p.grad_bound * p.grad_bound;
  const double log_factor = plog(p.x0_dist_sq / p.epsilon);
  const double t = double(p.horizon);
  const double rate_denom =
      p.strong_convexity * p.strong_convexity * p.epsilon * p.theta * t;

  BoundValue out;
  switch (kind) {
    case FailureBound::Sequential:
      out.raw = m2 / rate_denom * log_factor;
      break;
    case FailureBound::LinearDelay: {
      const double numer = m2 + 2.0 * p.lipschitz * p.grad_bound *
                                    double(p.tau_max) * std::sqrt(p.epsilon);
      out.raw = numer / rate_denom * log_factor;
      break;
    }
    case FailureBound::SqrtContention: {
      const auto feas = feasibility_check(p);
      if (!feas.feasible) throw std::runtime_error("feasibility violated");
      const double numer = m2 + 2.0 * std::sqrt(p.epsilon) * p.lipschitz *
                                    p.grad_bound * contention_factor(p) *
                                    std::sqrt(double(p.dim));
      out.raw = numer / rate_denom * log_factor;
      break;
    }
    case FailureBound::Supermartingale: {
      const auto feas = feasibility_check(p);
      if (!feas.feasible) throw std::runtime_error("feasibility violated");
      const double w0 = martingale_value(p, p.x0_dist_sq, 0);
      out.raw = w0 / (feas.margin * t);
      break;
    }
  }
  return out;
}

Feasibility feasibility_check(const BoundParams& p) {
  Feasibility f;
  f.value = p.alpha * p.alpha * martingale_lipschitz(p) * p.lipschitz *
            p.grad_bound * contention_factor(p) * std::sqrt(double(p.dim));
  f.feasible = f.value < 1.0;
  f.margin = 1.0 - f.value;
  return f;
}

double slowdown_factor(double alpha, int tau) {
  if (alpha <= 0 || alpha >= 1) throw std::invalid_argument("alpha must be in (0,1)");
  if (tau < 1) throw std::invalid_argument("tau must be >= 1");
  return double(tau) * std::log1p(-alpha) / (std::log(alpha) - std::log(2.0));
}

int minimal_slowdown_delay(double alpha) {
  if (alpha <= 0 || alpha >= 1) throw std::invalid_argument("alpha must be in (0,1)");
  // smallest tau with 2 (1-alpha)^tau <= alpha: closed form, then verify the
  // integer neighborhood to absorb rounding
  const double raw = std::log(alpha / 2.0) / std::log1p(-alpha);
  long long tau = std::max(1ll, (long long)std::ceil(raw - 1e-9));
  auto holds = [&](long long t) {
    return 2.0 * std::exp(double(t) * std::log1p(-alpha)) <= alpha;
  };
  while (!holds(tau)) ++tau;
  while (tau > 1 && holds(tau - 1)) --tau;
  if (tau > std::numeric_limits<int>::max())
    throw std::runtime_error("delay threshold out of range");
  return int(tau);
}

double stale_noise_variance(double alpha, double sigma, int tau) {
  if (alpha <= 0 || alpha >= 1) throw std::invalid_argument("alpha must be in (0,1)");
  if (tau < 1) throw std::invalid_argument("tau must be >= 1");
  const double q = 1.0 - alpha;
  const double geo = (1.0 - std::pow(q, 2.0 * tau)) / (1.0 - q * q);
  return alpha * alpha * sigma * sigma * (1.0 + geo);
}

MartingaleTracker::MartingaleTracker(const BoundParams& p, double dist_sq0)
    : params_(p) {
  if (dist_sq0 <= p.epsilon) {
    succeeded_ = true;
    freeze_index_ = 0;
    // Succeeded at t = 0: frozen at W_{-1}, conventionally W_0's coefficient
    // part evaluated at the entry state (no prior value exists).
    value_ = martingale_value(p, dist_sq0, 0);
  } else {
    value_ = martingale_value(p, dist_sq0, 0);
  }
}

void MartingaleTracker::step(double dist_sq_next) {
  ++t_;
  if (succeeded_) return;
  if (dist_sq_next <= params_.epsilon) {
    succeeded_ = true;
    freeze_index_ = t_;
    return;  // value_ stays at W_{u-1}
  }
  value_ = martingale_value(params_, dist_sq_next, t_);
}

SupermartingaleReport check_supermartingale(
    const ProblemSpec& spec, const BoundParams& p,
    std::span<const double> state_dist, std::span<const std::vector<double>> states,
    int samples, Rng& rng) {
  p.validate();
  SupermartingaleReport report;
  report.pass = true;
  std::vector<double> stepped(spec.dim);
  std::vector<double> grad(spec.dim);
  for (std::size_t s = 0; s < states.size(); ++s) {
    SupermartingaleCheck check;
    check.state_dist_sq = state_dist[s];
    check.w_before = martingale_value(p, check.state_dist_sq, 0);
    if (check.state_dist_sq <= p.epsilon) {
      // Already in the success region: frozen, equality by definition.
      check.frozen = true;
      check.w_after_mean = check.w_before;
      check.pass = true;
      report.checks.push_back(check);
      continue;
    }
    double sum = 0.0, sum_sq = 0.0;
    for (int it = 0; it < samples; ++it) {
      sample_gradient_into(spec, states[s], rng, grad);
      double dist_sq = 0.0;
      for (int j = 0; j < spec.dim; ++j) {
        stepped[j] = states[s][j] - p.alpha * grad[j];
        const double diff = stepped[j] - spec.minimizer[j];
        dist_sq += diff * diff;
      }
      const double w_next = dist_sq <= p.epsilon
                                ? check.w_before  // freeze at W_{u-1} = W_t
                                : martingale_value(p, dist_sq, 1);
      sum += w_next;
      sum_sq += w_next * w_next;
    }
    const double mean = sum / samples;
    const double var = std::max(0.0, sum_sq / samples - mean * mean);
    check.w_after_mean = mean;
    check.stderr_mean = std::sqrt(var / samples);
    check.pass = mean <= check.w_before + 4.0 * check.stderr_mean;
    report.pass = report.pass && check.pass;
    report.checks.push_back(check);
  }
  return report;
}

double v_process_value(const BoundParams& p, std::span<const double> dist_sq,
                       std::span<const double> step_norms,
                       std::span<const int> tau, std::uint64_t t) {
  p.validate();
  const std::uint64_t total = step_norms.size();  // T
  if (dist_sq.size() != total + 1)
    throw std::invalid_argument("dist_sq must have one more entry than step_norms");
  if (t > total) throw std::invalid_argument("t beyond trace end");

  int tau_max = 0;
  for (int v : tau) tau_max = std::max(tau_max, v);

  const double h = martingale_lipschitz(p);
  const double c_factor = contention_factor(p);
  const double sqrt_d = std::sqrt(double(p.dim));
  const double drift = p.alpha * p.alpha * h * p.lipschitz * p.grad_bound *
                       c_factor * sqrt_d;

  // Apply the freeze rule: V_t = V_{u-1} once the trajectory has succeeded.
  std::uint64_t eval_t = t;
  for (std::uint64_t i = 0; i <= t; ++i) {
    if (dist_sq[i] <= p.epsilon) {
      if (i == 0) return martingale_value(p, dist_sq[0], 0);
      eval_t = i - 1;
      break;
    }
  }

  const double w = martingale_value(p, dist_sq[eval_t], eval_t);
  double correction = 0.0;
  for (std::uint64_t k = 1; k <= std::min<std::uint64_t>(eval_t, tau_max); ++k) {
    int indicator_sum = 0;
    for (int m = int(k); m <= tau_max; ++m) {
      const std::uint64_t idx = eval_t - k + m;
      if (idx < tau.size() && tau[idx] >= m) ++indicator_sum;
    }
    if (indicator_sum > 0)
      correction += step_norms[eval_t - k] * indicator_sum;  // ||x_{t-k+1} - x_{t-k}||
  }
  return w - drift * double(eval_t) +
         p.alpha * h * p.lipschitz * sqrt_d * correction;
}

}  // namespace asgd::theory
