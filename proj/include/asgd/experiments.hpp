#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asgd/config.hpp"
#include "asgd/engine.hpp"
#include "asgd/report.hpp"
#include "asgd/sim.hpp"
#include "asgd/theory.hpp"

namespace asgd {

// Monte-Carlo estimate of the failure probability (no iterate in the success
// region by T) over `trials` independently seeded executions, compared
// one-sidedly against the requested closed-form bound: PASS iff the upper
// 95% Wilson bound on the empirical frequency is below the theoretical value
// (or the theoretical value exceeds 1 and is flagged vacuous). Trials run on
// the simulator by default; `backend_sim = false` uses real threads.
ExperimentReport run_failure_prob_experiment(
    const ProblemSpec& spec, const theory::BoundParams& params,
    const EpochConfig& cfg, const StrategyDesc& strategy, std::uint64_t trials,
    theory::FailureBound bound, bool backend_sim = true, int jobs = 0);

// For each tau: stale-replay run and sequential baseline to the same target
// contraction; reports the iteration-count ratio against the closed-form
// slowdown factor (PASS iff ratio >= 0.9 * factor) and checks the per-round
// contraction |(1-alpha)^tau - alpha| exactly. Noise-free setting.
ExperimentReport run_slowdown_experiment(double alpha,
                                         const std::vector<int>& taus,
                                         std::uint64_t trials = 3,
                                         double target_contraction = 1e-6,
                                         std::uint64_t seed = 1);

struct SweepEntry {
  ProblemDesc problem;
  int threads = 2;
  std::uint64_t iterations = 2048;
  double alpha = 0.05;
  StrategyDesc strategy;
  std::vector<std::uint64_t> seeds;
};

// The acceptance-grade default: n in {2,4,8} x {round-robin, uniform-random,
// bounded-delay(8), bounded-delay(32)} plus stale-replay at n=2, 20 seeds.
std::vector<SweepEntry> default_sweep(std::uint64_t base_seed = 1,
                                      int seeds_per_config = 20,
                                      std::uint64_t iterations = 2048);

// Runs every schedule invariant (ordering, incomplete bound, containment,
// monotone reads, indicator bound, contention windows, view staleness,
// average contention) across the entries, and validates the checker itself
// against an injected illegal trace fixture.
ExperimentReport run_invariant_sweep(const std::vector<SweepEntry>& entries,
                                     int jobs = 0);

// Synthetic interval set that violates the contention window lemma; the
// checker must flag it (it cannot arise from a legal schedule).
std::vector<Interval> illegal_contention_fixture(int threads, int k);

// Epoch-halving driver statistics over `trials` real-thread runs: PASS iff
// the sample mean of ||r - x*|| is within epsilon + 3 stderr and the epoch
// count matches ceil(log2(alpha 2 M n / sqrt(eps))) + 1.
ExperimentReport run_fullsgd_experiment(const ProblemSpec& spec,
                                        const EpochConfig& cfg,
                                        std::uint64_t trials);

}  // namespace asgd
