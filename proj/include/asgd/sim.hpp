#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asgd/engine.hpp"
#include "asgd/problems.hpp"
#include "asgd/shared_model.hpp"

namespace asgd {

// One shared-memory step. Time is measured in these; ranks are a permutation
// of 1..total_events and each thread's events appear in program order.
enum class StepKind : std::uint8_t { CounterFaa, Read, Add, LocalCompute };

struct SimEvent {
  std::uint64_t rank = 0;
  int thread = -1;
  StepKind kind = StepKind::CounterFaa;
  int index = -1;      // cell for Read/Add
  double delta = 0.0;  // Add only
};

struct StrategyDesc {
  enum class Kind { Sequential, RoundRobin, UniformRandom, BoundedDelay, StaleReplay };
  Kind kind = Kind::Sequential;
  int tau = 0;             // StaleReplay: fast-thread iterations per round
  int cap = 0;             // BoundedDelay: maximum interval contention
  std::uint64_t seed = 0;  // folded into the scheduler's own stream

  std::string name() const;
};

StrategyDesc parse_strategy(const std::string& text);  // e.g. "bounded-delay:8"

// Complete record of one simulated execution.
struct ScheduleTrace {
  int threads = 0;
  int dim = 0;
  std::uint64_t budget = 0;  // T
  double alpha = 0.0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  StrategyDesc strategy;
  std::vector<double> x0;
  std::vector<double> xstar;

  std::vector<SimEvent> events;             // empty unless collect_events
  std::vector<IterationRecord> iterations;  // sorted by index, if collected
  std::vector<int> tau;        // tau[t]: delay of the view generating g_{t+1}
  std::vector<double> dist_sq;    // ||x_t - x*||^2 for t = 0..T
  std::vector<double> step_norm;  // ||x_{t+1} - x_t|| for t = 0..T-1
  int max_incomplete = 0;         // max simultaneously half-applied iterations
  std::uint64_t completed = 0;
  std::uint64_t hash = 0;  // FNV-1a over the event stream + final state

  // Checked against the symbolic visibility data while it is available.
  bool order_ok = true;        // indices are gapless 1..completed
  bool containment_ok = true;  // every view only holds updates of lower index
  bool monotone_ok = true;     // per-thread per-entry read prefixes never shrink
};

struct SimOptions {
  bool collect_events = true;
  bool collect_records = true;  // needed for delay/visibility invariants
};

struct SimResult {
  RunResult run;
  ScheduleTrace trace;
  ContentionStats stats;
};

// Execution state a scheduler may inspect. The adversary is strong: it sees
// everything, including realized randomness (via the trace so far).
class SimView {
 public:
  enum class Phase : std::uint8_t { Claim, Read, Compute, Add, Done };

  virtual ~SimView() = default;
  virtual int threads() const = 0;
  virtual int dim() const = 0;
  virtual std::uint64_t budget() const = 0;
  virtual std::uint64_t claims() const = 0;
  virtual Phase phase(int thread) const = 0;
  virtual bool mid_iteration(int thread) const = 0;
  // First update applied but not the last: such an iteration leaves a stale
  // partial update visible to every later view until it finishes.
  virtual bool half_applied(int thread) const = 0;
  virtual int open_count() const = 0;
  // Whether claiming a fresh iteration now keeps every open iteration's
  // interval contention (and the new one's) within `cap`.
  virtual bool new_start_within(int cap) const = 0;
  virtual std::uint64_t completed() const = 0;
  virtual std::uint64_t completed_by(int thread) const = 0;
};

// Adversarial scheduler: picks which thread takes the next shared-memory
// step. Returning -1 crashes every remaining thread and ends the execution.
class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual std::string name() const = 0;
  virtual void attach(const SimView&) {}
  virtual int pick(const SimView& sim) = 0;
};

std::unique_ptr<Strategy> make_strategy(const StrategyDesc& desc);

// The schedule from the slowdown argument: both threads read the start
// point; thread 0 runs tau full iterations; thread 1 then applies its stale
// gradient; the pattern repeats from the resulting point. Requires n = 2.
std::unique_ptr<Strategy> stale_replay_adversary(int tau);

// Single-threaded deterministic execution of the lock-free loop under the
// strategy's event ordering. Bit-identical output for identical
// (spec, cfg, strategy, seed); views are tracked symbolically as applied
// update counts so every delay quantity is exact. Throws "illegal schedule"
// if the strategy picks a finished or out-of-range thread.
SimResult simulate(const ProblemSpec& spec, const EpochConfig& cfg,
                   const StrategyDesc& strategy, const SimOptions& opts = {});
SimResult simulate(const ProblemSpec& spec, const EpochConfig& cfg,
                   Strategy& strategy, const SimOptions& opts = {});

// --- Trace analysis -------------------------------------------------------

ContentionStats contention_stats(const ScheduleTrace& trace);

struct Interval {
  std::uint64_t start = 0;
  std::uint64_t end = 0;
};

// Window check behind the average-contention argument: in every window of
// exactly K*n consecutive iteration starts, fewer than n completing
// iterations may span more than K*n starts.
struct ContentionWindowResult {
  bool pass = true;
  int threads = 0;
  int k = 0;
  std::vector<int> window_bad_counts;
  std::optional<std::size_t> first_bad_window;
};

ContentionWindowResult check_contention_lemma(std::span<const Interval> spans,
                                              int threads, int k);
ContentionWindowResult check_contention_lemma(const ScheduleTrace& trace, int k);

// For every t, sum_m 1{tau_{t+m} >= m} must stay within 2 sqrt(delay_max n).
struct IndicatorBoundResult {
  bool pass = true;
  double bound = 0.0;
  int worst_sum = 0;
  std::uint64_t worst_t = 0;
};

IndicatorBoundResult check_indicator_bound(std::span<const int> tau, int threads);

// Exact per-iteration evaluation of
//   ||x_t - v_t|| <= sqrt(d) * sum_{k=1..tau_t} ||x_{t-k+1} - x_{t-k}||.
struct StalenessBoundResult {
  bool pass = true;
  double worst_slack = 0.0;  // min over iterations of rhs - lhs
  std::uint64_t worst_t = 0;
};

StalenessBoundResult check_view_staleness(const ScheduleTrace& trace);

// Full invariant bundle for sweeps.
struct InvariantReport {
  bool order_ok = true;        // total order, gapless indices
  bool incomplete_ok = true;   // <= n half-applied iterations at any event
  bool containment_ok = true;  // views only contain lower-index updates
  bool monotone_ok = true;     // per-entry read prefixes never shrink
  bool indicator_ok = true;
  bool contention_ok = true;
  bool staleness_ok = true;
  bool tau_avg_ok = true;      // average interval contention <= 2n
  bool pass() const {
    return order_ok && incomplete_ok && containment_ok && monotone_ok &&
           indicator_ok && contention_ok && staleness_ok && tau_avg_ok;
  }
};

InvariantReport check_trace_invariants(const ScheduleTrace& trace,
                                       std::span<const int> window_ks);

// --- Trace export ---------------------------------------------------------

// Event CSV: rank,thread,kind,index,delta
void write_event_csv(const ScheduleTrace& trace, const std::string& path);

// Iteration CSV: t,thread,start_event,end_event,tau_t,rho,dist_sq
void write_iteration_csv(const ScheduleTrace& trace, const std::string& path);

// Problem description compact enough to embed in files.
struct ProblemDesc {
  ProblemSpec::Kind kind = ProblemSpec::Kind::Quadratic;
  int dim = 1;
  double sigma = 0.0;
  double box_radius = 10.0;
  double ridge = 0.0;
  std::string data_path;
};

ProblemSpec build_problem(const ProblemDesc& desc);

// Compact binary replay file: problem + config + strategy header plus the
// trace hash; replaying re-runs the simulation and verifies the hash.
void write_replay(const std::string& path, const ProblemDesc& problem,
                  const EpochConfig& cfg, const ScheduleTrace& trace);

SimResult replay(const std::string& path);  // throws on hash mismatch

}  // namespace asgd
