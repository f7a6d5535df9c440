#include "asgd/sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "asgd/rng.hpp"

namespace asgd {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv_mix(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= kFnvPrime;
  }
}

const char* kind_name(StepKind k) {
  switch (k) {
    case StepKind::CounterFaa: return "faa";
    case StepKind::Read: return "read";
    case StepKind::Add: return "add";
    case StepKind::LocalCompute: return "compute";
  }
  return "?";
}

}  // namespace

std::string StrategyDesc::name() const {
  switch (kind) {
    case Kind::Sequential: return "sequential";
    case Kind::RoundRobin: return "round-robin";
    case Kind::UniformRandom: return "uniform-random";
    case Kind::BoundedDelay: return "bounded-delay:" + std::to_string(cap);
    case Kind::StaleReplay: return "stale-replay:" + std::to_string(tau);
  }
  return "?";
}

StrategyDesc parse_strategy(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.empty()) throw std::invalid_argument("empty strategy");
  StrategyDesc desc;
  const std::string& head = parts[0];
  auto int_arg = [&](std::size_t i, const char* what) {
    if (parts.size() <= i)
      throw std::invalid_argument(std::string("strategy needs ") + what);
    return std::stoi(parts[i]);
  };
  if (head == "sequential") {
    desc.kind = StrategyDesc::Kind::Sequential;
  } else if (head == "round-robin") {
    desc.kind = StrategyDesc::Kind::RoundRobin;
  } else if (head == "uniform-random") {
    desc.kind = StrategyDesc::Kind::UniformRandom;
    if (parts.size() > 1) desc.seed = std::stoull(parts[1]);
  } else if (head == "bounded-delay") {
    desc.kind = StrategyDesc::Kind::BoundedDelay;
    desc.cap = int_arg(1, "a contention cap, e.g. bounded-delay:8");
    if (parts.size() > 2) desc.seed = std::stoull(parts[2]);
  } else if (head == "stale-replay") {
    desc.kind = StrategyDesc::Kind::StaleReplay;
    desc.tau = int_arg(1, "a delay, e.g. stale-replay:2");
  } else {
    throw std::invalid_argument("unknown strategy: " + text);
  }
  return desc;
}

// --- Built-in strategies ----------------------------------------------------

namespace {

using Phase = SimView::Phase;

class SequentialStrategy final : public Strategy {
 public:
  std::string name() const override { return "sequential"; }
  // Thread 0 executes alone; the rest are crashed (never scheduled).
  int pick(const SimView& sim) override {
    return sim.phase(0) == Phase::Done ? -1 : 0;
  }
};

class RoundRobinStrategy final : public Strategy {
 public:
  std::string name() const override { return "round-robin"; }
  int pick(const SimView& sim) override {
    const int n = sim.threads();
    for (int i = 1; i <= n; ++i) {
      const int cand = (last_ + i) % n;
      if (sim.phase(cand) != Phase::Done) {
        last_ = cand;
        return cand;
      }
    }
    return -1;
  }

 private:
  int last_ = -1;
};

class UniformRandomStrategy final : public Strategy {
 public:
  explicit UniformRandomStrategy(std::uint64_t seed) : rng_(seed) {}
  std::string name() const override { return "uniform-random"; }
  int pick(const SimView& sim) override {
    cand_.clear();
    for (int i = 0; i < sim.threads(); ++i)
      if (sim.phase(i) != Phase::Done) cand_.push_back(i);
    if (cand_.empty()) return -1;
    return cand_[rng_.uniform_index(cand_.size())];
  }

 private:
  Rng rng_;
  std::vector<int> cand_;
};

// Randomized scheduler with a rotating starved thread; never lets any
// iteration's interval contention exceed the cap. Starving one thread
// mid-iteration pushes contention toward the cap, which is the interesting
// regime for the window/indicator checks.
class BoundedDelayStrategy final : public Strategy {
 public:
  BoundedDelayStrategy(int cap, std::uint64_t seed) : cap_(cap), rng_(seed) {
    if (cap < 0) throw std::invalid_argument("contention cap must be >= 0");
  }
  std::string name() const override {
    return "bounded-delay:" + std::to_string(cap_);
  }
  void attach(const SimView& sim) override {
    window_ = std::max<std::uint64_t>(16, std::uint64_t(cap_ + 2) * (sim.dim() + 4));
  }
  int pick(const SimView& sim) override {
    ++steps_;
    const int n = sim.threads();
    const int victim = int((steps_ / window_) % std::uint64_t(n));
    cand_.clear();
    for (int i = 0; i < n; ++i) {
      if (sim.phase(i) == Phase::Done) continue;
      const bool allowed = sim.mid_iteration(i) || sim.claims() >= sim.budget() ||
                           sim.new_start_within(cap_);
      if (allowed) cand_.push_back(i);
    }
    if (cand_.empty()) return -1;
    // Starve the victim only while it holds no half-applied update: parking
    // a half-applied iteration makes every later view miss an ever-older
    // update, which breaks the delay-window arithmetic the analysis needs.
    if (cand_.size() > 1 && !sim.half_applied(victim))
      std::erase(cand_, victim);
    return cand_[rng_.uniform_index(cand_.size())];
  }

 private:
  int cap_;
  Rng rng_;
  std::uint64_t steps_ = 0;
  std::uint64_t window_ = 64;
  std::vector<int> cand_;
};

class StaleReplayStrategy final : public Strategy {
 public:
  explicit StaleReplayStrategy(int tau) : tau_(tau) {
    if (tau < 1) throw std::invalid_argument("stale replay needs tau >= 1");
  }
  std::string name() const override {
    return "stale-replay:" + std::to_string(tau_);
  }
  void attach(const SimView& sim) override {
    if (sim.threads() != 2)
      throw std::invalid_argument("stale replay is defined for exactly two threads");
  }
  int pick(const SimView& sim) override {
    const bool done0 = sim.phase(0) == Phase::Done;
    const bool done1 = sim.phase(1) == Phase::Done;
    if (done1) return done0 ? -1 : 0;
    if (done0) return 1;  // drain the stale thread, then its final claim
    for (;;) {
      switch (round_) {
        case RoundPhase::Prep:
          // Thread 1 claims and computes its gradient at the round's start
          // point, then holds it while thread 0 advances.
          if (sim.phase(1) == Phase::Add) {
            base_completed_ = sim.completed_by(0);
            round_ = RoundPhase::Advance;
            continue;
          }
          return 1;
        case RoundPhase::Advance:
          if (sim.completed_by(0) >= base_completed_ + std::uint64_t(tau_)) {
            round_ = RoundPhase::Apply;
            continue;
          }
          return 0;
        case RoundPhase::Apply:
          if (sim.phase(1) == Phase::Add) return 1;
          round_ = RoundPhase::Prep;
          continue;
      }
    }
  }

 private:
  enum class RoundPhase { Prep, Advance, Apply };
  int tau_;
  RoundPhase round_ = RoundPhase::Prep;
  std::uint64_t base_completed_ = 0;
};

}  // namespace

std::unique_ptr<Strategy> make_strategy(const StrategyDesc& desc) {
  switch (desc.kind) {
    case StrategyDesc::Kind::Sequential:
      return std::make_unique<SequentialStrategy>();
    case StrategyDesc::Kind::RoundRobin:
      return std::make_unique<RoundRobinStrategy>();
    case StrategyDesc::Kind::UniformRandom:
      return std::make_unique<UniformRandomStrategy>(desc.seed ^ 0x7261646f6dull);
    case StrategyDesc::Kind::BoundedDelay:
      return std::make_unique<BoundedDelayStrategy>(desc.cap,
                                                    desc.seed ^ 0x626f756e64ull);
    case StrategyDesc::Kind::StaleReplay:
      return std::make_unique<StaleReplayStrategy>(desc.tau);
  }
  throw std::invalid_argument("unknown strategy kind");
}

std::unique_ptr<Strategy> stale_replay_adversary(int tau) {
  return std::make_unique<StaleReplayStrategy>(tau);
}

// --- Simulator --------------------------------------------------------------

namespace {

class Simulator final : public SimView {
 public:
  Simulator(const ProblemSpec& spec, const EpochConfig& cfg,
            const SimOptions& opts)
      : spec_(spec), cfg_(cfg), opts_(opts), dim_(spec.dim) {
    cfg.validate(spec.dim);
    x0_ = cfg.x0.empty() ? std::vector<double>(dim_, 0.0) : cfg.x0;
    cells_ = x0_;
    applied_count_.assign(dim_, 0);
    if (opts.collect_records) applied_order_.resize(dim_);
    acc_ = x0_;
    threads_.resize(cfg.threads);
    const Rng base(cfg.seed);
    for (int i = 0; i < cfg.threads; ++i) {
      threads_[i].rng = base.fork(std::uint64_t(i));
      threads_[i].view.resize(dim_);
      threads_[i].grad.resize(dim_);
      threads_[i].prefix.resize(dim_);
    }
    hash_ = kFnvOffset;
    trace_.threads = cfg.threads;
    trace_.dim = dim_;
    trace_.budget = cfg.iterations;
    trace_.alpha = cfg.alpha;
    trace_.epsilon = cfg.epsilon;
    trace_.seed = cfg.seed;
    trace_.x0 = x0_;
    trace_.xstar = spec.minimizer;
    trace_.dist_sq.push_back(dist_to_star(acc_));
    if (trace_.dist_sq.back() <= cfg.epsilon) hit_ = 0;
  }

  // SimView
  int threads() const override { return int(threads_.size()); }
  int dim() const override { return dim_; }
  std::uint64_t budget() const override { return cfg_.iterations; }
  std::uint64_t claims() const override { return counter_; }
  Phase phase(int thread) const override { return threads_[thread].phase; }
  bool mid_iteration(int thread) const override {
    const Phase p = threads_[thread].phase;
    return p == Phase::Read || p == Phase::Compute || p == Phase::Add;
  }
  bool half_applied(int thread) const override {
    return threads_[thread].half_applied;
  }
  int open_count() const override { return open_; }
  bool new_start_within(int cap) const override {
    if (open_ > cap) return false;
    for (const auto& th : threads_)
      if (th.open && th.ov + 1 > cap) return false;
    return true;
  }
  std::uint64_t completed() const override { return completed_; }
  std::uint64_t completed_by(int thread) const override {
    return threads_[thread].completed;
  }

  SimResult run(Strategy& strategy) {
    strategy.attach(*this);
    while (!all_done()) {
      const int id = strategy.pick(*this);
      if (id == -1) break;  // remaining threads crash
      if (id < 0 || id >= threads() || threads_[id].phase == Phase::Done)
        throw std::runtime_error("illegal schedule");
      step(id);
    }
    return finish();
  }

 private:
  struct ThreadCtx {
    Phase phase = Phase::Claim;
    int read_j = 0;
    std::size_t add_pos = 0;
    std::vector<int> plan;
    std::uint64_t claim = 0;
    std::uint64_t start_event = 0;
    std::uint64_t first_update_event = 0;
    std::uint64_t index = 0;
    std::vector<double> view, grad;
    std::vector<std::uint32_t> prefix;
    int ov = 0;
    bool open = false;
    bool half_applied = false;
    std::uint64_t completed = 0;
    Rng rng{0};
  };

  bool all_done() const {
    for (const auto& th : threads_)
      if (th.phase != Phase::Done) return false;
    return true;
  }

  double dist_to_star(std::span<const double> x) const {
    double s = 0.0;
    for (int j = 0; j < dim_; ++j) {
      const double diff = x[j] - spec_.minimizer[j];
      s += diff * diff;
    }
    return s;
  }

  void emit(int thread, StepKind kind, int index, double delta) {
    ++event_rank_;
    fnv_mix(hash_, std::uint64_t(thread));
    fnv_mix(hash_, std::uint64_t(kind));
    fnv_mix(hash_, std::uint64_t(std::uint32_t(index + 1)));
    fnv_mix(hash_, std::bit_cast<std::uint64_t>(delta));
    if (opts_.collect_events)
      trace_.events.push_back({event_rank_, thread, kind, index, delta});
  }

  void step(int id) {
    ThreadCtx& th = threads_[id];
    switch (th.phase) {
      case Phase::Claim: {
        const std::uint64_t c = counter_++;
        emit(id, StepKind::CounterFaa, -1, 0.0);
        if (c >= cfg_.iterations) {
          th.phase = Phase::Done;
          return;
        }
        th.claim = c;
        th.start_event = event_rank_;
        th.ov = open_;
        for (auto& other : threads_)
          if (other.open) ++other.ov;
        th.open = true;
        ++open_;
        th.phase = Phase::Read;
        th.read_j = 0;
        return;
      }
      case Phase::Read: {
        const int j = th.read_j;
        th.view[j] = cells_[j];
        th.prefix[j] = applied_count_[j];
        emit(id, StepKind::Read, j, 0.0);
        if (++th.read_j == dim_) th.phase = Phase::Compute;
        return;
      }
      case Phase::Compute: {
        sample_gradient_into(spec_, th.view, th.rng, th.grad);
        emit(id, StepKind::LocalCompute, -1, 0.0);
        th.plan.clear();
        th.plan.push_back(0);  // entry 0 is always touched: keeps order total
        for (int j = 1; j < dim_; ++j)
          if (th.grad[j] != 0.0) th.plan.push_back(j);
        th.add_pos = 0;
        th.phase = Phase::Add;
        return;
      }
      case Phase::Add: {
        const int j = th.plan[th.add_pos];
        const double delta = -cfg_.alpha * th.grad[j];
        cells_[j] += delta;
        emit(id, StepKind::Add, j, delta);
        if (th.add_pos == 0) {
          th.index = ++update_rank_;
          th.first_update_event = event_rank_;
          if (th.plan.size() > 1) {
            th.half_applied = true;
            ++incomplete_;
            trace_.max_incomplete = std::max(trace_.max_incomplete, incomplete_);
          }
          // Accumulator in first-update order: x_t = x_{t-1} - alpha g_t.
          double step_sq = 0.0;
          for (int k = 0; k < dim_; ++k) {
            const double dk = -cfg_.alpha * th.grad[k];
            acc_[k] += dk;
            step_sq += dk * dk;
          }
          trace_.step_norm.push_back(std::sqrt(step_sq));
          trace_.dist_sq.push_back(dist_to_star(acc_));
          if (!hit_ && trace_.dist_sq.back() <= cfg_.epsilon) hit_ = th.index;
        }
        if (opts_.collect_records) {
          applied_order_[j].push_back(std::uint32_t(th.index));
        }
        ++applied_count_[j];
        if (++th.add_pos == th.plan.size()) {
          if (th.half_applied) {
            th.half_applied = false;
            --incomplete_;
          }
          finish_iteration(id, th);
        }
        return;
      }
      case Phase::Done:
        throw std::runtime_error("illegal schedule");
    }
  }

  void finish_iteration(int id, ThreadCtx& th) {
    ++completed_;
    ++th.completed;
    rho_.resize(std::max<std::size_t>(rho_.size(), th.index), 0);
    rho_[th.index - 1] = th.ov;
    th.open = false;
    --open_;
    if (opts_.collect_records) {
      IterationRecord rec;
      rec.index = th.index;
      rec.thread = id;
      rec.claim = th.claim;
      rec.start_event = th.start_event;
      rec.first_update_event = th.first_update_event;
      rec.end_event = event_rank_;
      rec.view = th.view;
      rec.gradient = th.grad;
      rec.read_prefix = th.prefix;
      trace_.iterations.push_back(std::move(rec));
    }
    th.phase = Phase::Claim;
  }

  SimResult finish() {
    trace_.completed = completed_;
    for (double c : cells_) fnv_mix(hash_, std::bit_cast<std::uint64_t>(c));
    fnv_mix(hash_, counter_);
    trace_.hash = hash_;

    if (opts_.collect_records) {
      std::sort(trace_.iterations.begin(), trace_.iterations.end(),
                [](const IterationRecord& a, const IterationRecord& b) {
                  return a.index < b.index;
                });
      compute_delays_and_visibility();
    }

    SimResult result;
    result.run.final_model = cells_;
    result.run.final_accumulator = acc_;
    result.run.iterations = completed_;
    result.run.hit_time = hit_;
    result.run.dist_sq = trace_.dist_sq;
    result.run.step_norm = trace_.step_norm;
    result.trace = std::move(trace_);
    result.stats = contention_stats_internal(result.trace);
    result.run.stats = result.stats;
    return result;
  }

  // Exact delay of each view plus the containment/monotonicity checks, all
  // from the symbolic visibility data (applied-update counts per cell).
  void compute_delays_and_visibility() {
    constexpr std::uint64_t kNone = std::numeric_limits<std::uint64_t>::max();
    // suffix minima / prefix maxima of iteration ids per cell
    std::vector<std::vector<std::uint32_t>> suffix_min(dim_), prefix_max(dim_);
    for (int j = 0; j < dim_; ++j) {
      const auto& ids = applied_order_[j];
      suffix_min[j].assign(ids.size() + 1,
                           std::numeric_limits<std::uint32_t>::max());
      for (std::size_t p = ids.size(); p-- > 0;)
        suffix_min[j][p] = std::min(suffix_min[j][p + 1], ids[p]);
      prefix_max[j].assign(ids.size() + 1, 0);
      for (std::size_t p = 0; p < ids.size(); ++p)
        prefix_max[j][p + 1] = std::max(prefix_max[j][p], ids[p]);
    }

    trace_.tau.assign(trace_.iterations.size(), 0);
    for (std::size_t i = 0; i < trace_.iterations.size(); ++i) {
      const auto& rec = trace_.iterations[i];
      const std::uint64_t s = rec.index;
      trace_.order_ok = trace_.order_ok && (s == i + 1);
      std::uint64_t min_missing = kNone;
      for (int j = 0; j < dim_; ++j) {
        const std::uint32_t p = rec.read_prefix[j];
        const std::uint64_t candidate = suffix_min[j][p];
        if (candidate < s) min_missing = std::min(min_missing, candidate);
        // Containment: everything visible must come from lower indices.
        if (prefix_max[j][p] >= s) trace_.containment_ok = false;
      }
      trace_.tau[i] = min_missing == kNone ? 0 : int(s - min_missing);
    }

    // Per-thread per-entry monotone reads, in that thread's program order.
    std::vector<std::vector<std::uint32_t>> last_prefix(
        threads_.size(), std::vector<std::uint32_t>(dim_, 0));
    std::vector<const IterationRecord*> by_start;
    by_start.reserve(trace_.iterations.size());
    for (const auto& rec : trace_.iterations) by_start.push_back(&rec);
    std::sort(by_start.begin(), by_start.end(),
              [](auto* a, auto* b) { return a->start_event < b->start_event; });
    for (const auto* rec : by_start) {
      auto& last = last_prefix[rec->thread];
      for (int j = 0; j < dim_; ++j) {
        if (rec->read_prefix[j] < last[j]) trace_.monotone_ok = false;
        last[j] = rec->read_prefix[j];
      }
    }
  }

  ContentionStats contention_stats_internal(const ScheduleTrace& trace) const {
    ContentionStats stats;
    stats.rho = rho_;
    stats.tau = trace.tau;
    long long total = 0;
    for (int r : stats.rho) {
      stats.tau_max = std::max(stats.tau_max, r);
      total += r;
    }
    if (!stats.rho.empty()) stats.tau_avg = double(total) / double(stats.rho.size());
    for (int t : stats.tau) stats.delay_max = std::max(stats.delay_max, t);
    return stats;
  }

  const ProblemSpec& spec_;
  const EpochConfig& cfg_;
  SimOptions opts_;
  int dim_;
  std::vector<double> x0_, cells_, acc_;
  std::vector<std::uint32_t> applied_count_;
  std::vector<std::vector<std::uint32_t>> applied_order_;
  std::vector<ThreadCtx> threads_;
  std::vector<int> rho_;
  std::uint64_t counter_ = 0;
  std::uint64_t event_rank_ = 0;
  std::uint64_t update_rank_ = 0;
  std::uint64_t completed_ = 0;
  int open_ = 0;
  int incomplete_ = 0;
  std::optional<std::uint64_t> hit_;
  std::uint64_t hash_ = 0;
  ScheduleTrace trace_;
};

}  // namespace

SimResult simulate(const ProblemSpec& spec, const EpochConfig& cfg,
                   Strategy& strategy, const SimOptions& opts) {
  Simulator sim(spec, cfg, opts);
  SimResult result = sim.run(strategy);
  return result;
}

SimResult simulate(const ProblemSpec& spec, const EpochConfig& cfg,
                   const StrategyDesc& desc, const SimOptions& opts) {
  auto strategy = make_strategy(desc);
  Simulator sim(spec, cfg, opts);
  SimResult result = sim.run(*strategy);
  result.trace.strategy = desc;
  return result;
}

// --- Trace analysis ---------------------------------------------------------

ContentionStats contention_stats(const ScheduleTrace& trace) {
  return contention_stats(trace.iterations, trace.tau);
}

ContentionWindowResult check_contention_lemma(std::span<const Interval> spans,
                                              int threads, int k) {
  if (threads < 1 || k < 1)
    throw std::invalid_argument("threads and K must be >= 1");
  ContentionWindowResult out;
  out.threads = threads;
  out.k = k;
  const std::size_t window = std::size_t(k) * std::size_t(threads);
  if (spans.size() < window)
    throw std::invalid_argument("trace shorter than K*n iteration starts");

  std::vector<std::uint64_t> starts;
  starts.reserve(spans.size());
  for (const auto& s : spans) starts.push_back(s.start);
  std::sort(starts.begin(), starts.end());

  // An iteration is bad if more than K*n iterations start within its span.
  std::vector<std::uint64_t> bad_ends;
  for (const auto& s : spans) {
    const auto lo = std::lower_bound(starts.begin(), starts.end(), s.start);
    const auto hi = std::upper_bound(starts.begin(), starts.end(), s.end);
    const long long inside = (hi - lo) - 1;  // excluding the iteration itself
    if (inside > (long long)window) bad_ends.push_back(s.end);
  }
  std::sort(bad_ends.begin(), bad_ends.end());

  for (std::size_t i = 0; i + window <= starts.size(); ++i) {
    const std::uint64_t lo = starts[i];
    const std::uint64_t hi = starts[i + window - 1];
    const auto b0 = std::lower_bound(bad_ends.begin(), bad_ends.end(), lo);
    const auto b1 = std::upper_bound(bad_ends.begin(), bad_ends.end(), hi);
    const int count = int(b1 - b0);
    out.window_bad_counts.push_back(count);
    if (count >= threads && !out.first_bad_window) {
      out.first_bad_window = i;
      out.pass = false;
    }
  }
  return out;
}

ContentionWindowResult check_contention_lemma(const ScheduleTrace& trace, int k) {
  std::vector<Interval> spans;
  spans.reserve(trace.iterations.size());
  for (const auto& rec : trace.iterations)
    spans.push_back({rec.start_event, rec.end_event});
  return check_contention_lemma(spans, trace.threads, k);
}

IndicatorBoundResult check_indicator_bound(std::span<const int> tau, int threads) {
  IndicatorBoundResult out;
  int delay_max = 0;
  for (int t : tau) delay_max = std::max(delay_max, t);
  out.bound = 2.0 * std::sqrt(double(delay_max) * double(threads));
  for (std::size_t t = 0; t < tau.size(); ++t) {
    int sum = 0;
    const std::size_t limit = std::min<std::size_t>(delay_max, tau.size() - 1 - t);
    for (std::size_t m = 1; m <= limit; ++m)
      if (tau[t + m] >= int(m)) ++sum;
    if (sum > out.worst_sum) {
      out.worst_sum = sum;
      out.worst_t = t;
    }
  }
  out.pass = double(out.worst_sum) <= out.bound;
  return out;
}

StalenessBoundResult check_view_staleness(const ScheduleTrace& trace) {
  StalenessBoundResult out;
  out.worst_slack = std::numeric_limits<double>::infinity();
  if (trace.iterations.empty()) {
    out.worst_slack = 0.0;
    return out;
  }
  const int d = trace.dim;
  const double sqrt_d = std::sqrt(double(d));
  // prefix sums of ||x_{t+1} - x_t||
  std::vector<double> prefix(trace.step_norm.size() + 1, 0.0);
  for (std::size_t i = 0; i < trace.step_norm.size(); ++i)
    prefix[i + 1] = prefix[i] + trace.step_norm[i];

  std::vector<double> acc = trace.x0;
  std::uint64_t next_index = 1;
  for (const auto& rec : trace.iterations) {
    if (rec.index != next_index)
      throw std::invalid_argument("staleness check needs a gapless trace");
    const std::uint64_t t = rec.index - 1;  // view approximates x_t
    double lhs_sq = 0.0;
    for (int j = 0; j < d; ++j) {
      const double diff = acc[j] - rec.view[j];
      lhs_sq += diff * diff;
    }
    const int tau_t = trace.tau[t];
    const double rhs = sqrt_d * (prefix[t] - prefix[t - std::min<std::uint64_t>(tau_t, t)]);
    const double lhs = std::sqrt(lhs_sq);
    const double slack = rhs - lhs;
    if (slack < out.worst_slack) {
      out.worst_slack = slack;
      out.worst_t = t;
    }
    if (lhs > rhs * (1.0 + 1e-9) + 1e-9) out.pass = false;
    for (int j = 0; j < d; ++j)
      acc[j] += -trace.alpha * rec.gradient[j];
    ++next_index;
  }
  return out;
}

InvariantReport check_trace_invariants(const ScheduleTrace& trace,
                                       std::span<const int> window_ks) {
  InvariantReport report;
  report.order_ok = trace.order_ok;
  report.incomplete_ok = trace.max_incomplete <= trace.threads;
  report.containment_ok = trace.containment_ok;
  report.monotone_ok = trace.monotone_ok;
  report.indicator_ok = check_indicator_bound(trace.tau, trace.threads).pass;
  for (int k : window_ks) {
    const std::size_t window = std::size_t(k) * std::size_t(trace.threads);
    if (trace.iterations.size() < window) continue;
    report.contention_ok =
        report.contention_ok && check_contention_lemma(trace, k).pass;
  }
  report.staleness_ok = check_view_staleness(trace).pass;
  const auto stats = contention_stats(trace);
  report.tau_avg_ok = stats.tau_avg <= 2.0 * double(trace.threads);
  return report;
}

// --- Trace export -----------------------------------------------------------

namespace {

void write_or_throw(std::ofstream& out, const std::string& path) {
  if (!out) throw std::runtime_error("cannot write file: " + path);
}

}  // namespace

void write_event_csv(const ScheduleTrace& trace, const std::string& path) {
  std::ofstream out(path);
  write_or_throw(out, path);
  out << "rank,thread,kind,index,delta\n";
  char buf[64];
  for (const auto& ev : trace.events) {
    std::snprintf(buf, sizeof(buf), "%.17g", ev.delta);
    out << ev.rank << ',' << ev.thread << ',' << kind_name(ev.kind) << ','
        << ev.index << ',' << (ev.kind == StepKind::Add ? buf : "0") << '\n';
  }
}

void write_iteration_csv(const ScheduleTrace& trace, const std::string& path) {
  std::ofstream out(path);
  write_or_throw(out, path);
  out << "t,thread,start_event,end_event,tau_t,rho,dist_sq\n";
  const auto stats = contention_stats(trace);
  char buf[64];
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const auto& rec = trace.iterations[i];
    const int tau_t = i < trace.tau.size() ? trace.tau[i] : -1;
    const int rho = i < stats.rho.size() ? stats.rho[i] : -1;
    std::snprintf(buf, sizeof(buf), "%.17g", trace.dist_sq[rec.index]);
    out << rec.index << ',' << rec.thread << ',' << rec.start_event << ','
        << rec.end_event << ',' << tau_t << ',' << rho << ',' << buf << '\n';
  }
}

ProblemSpec build_problem(const ProblemDesc& desc) {
  if (desc.kind == ProblemSpec::Kind::Quadratic) {
    auto spec = quadratic_problem(desc.dim, desc.sigma, desc.box_radius);
    return spec;
  }
  auto data = load_dataset_csv(desc.data_path);
  auto spec = regression_problem(data, desc.ridge);
  spec.box_radius = desc.box_radius;
  return spec;
}

namespace {

constexpr char kReplayMagic[8] = {'A', 'S', 'G', 'D', 'R', 'P', 'L', '1'};

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ofstream& out, const std::string& s) {
  const std::uint32_t len = std::uint32_t(s.size());
  put(out, len);
  out.write(s.data(), len);
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated replay file");
  return v;
}

std::string get_string(std::ifstream& in) {
  const auto len = get<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw std::runtime_error("truncated replay file");
  return s;
}

}  // namespace

void write_replay(const std::string& path, const ProblemDesc& problem,
                  const EpochConfig& cfg, const ScheduleTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  write_or_throw(out, path);
  out.write(kReplayMagic, sizeof(kReplayMagic));
  put(out, std::uint8_t(problem.kind));
  put(out, std::uint32_t(problem.dim));
  put(out, problem.sigma);
  put(out, problem.box_radius);
  put(out, problem.ridge);
  put_string(out, problem.data_path);
  put(out, cfg.iterations);
  put(out, cfg.alpha);
  put(out, cfg.epsilon);
  put(out, cfg.theta);
  put(out, std::uint32_t(cfg.threads));
  put(out, cfg.seed);
  put(out, std::uint32_t(trace.x0.size()));
  for (double v : trace.x0) put(out, v);
  put(out, std::uint8_t(trace.strategy.kind));
  put(out, std::uint32_t(trace.strategy.tau));
  put(out, std::uint32_t(trace.strategy.cap));
  put(out, trace.strategy.seed);
  put(out, trace.hash);
}

SimResult replay(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open replay file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kReplayMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a replay file: " + path);

  ProblemDesc problem;
  problem.kind = ProblemSpec::Kind(get<std::uint8_t>(in));
  problem.dim = int(get<std::uint32_t>(in));
  problem.sigma = get<double>(in);
  problem.box_radius = get<double>(in);
  problem.ridge = get<double>(in);
  problem.data_path = get_string(in);

  EpochConfig cfg;
  cfg.iterations = get<std::uint64_t>(in);
  cfg.alpha = get<double>(in);
  cfg.epsilon = get<double>(in);
  cfg.theta = get<double>(in);
  cfg.threads = int(get<std::uint32_t>(in));
  cfg.seed = get<std::uint64_t>(in);
  const auto x0_len = get<std::uint32_t>(in);
  cfg.x0.resize(x0_len);
  for (auto& v : cfg.x0) v = get<double>(in);

  StrategyDesc desc;
  desc.kind = StrategyDesc::Kind(get<std::uint8_t>(in));
  desc.tau = int(get<std::uint32_t>(in));
  desc.cap = int(get<std::uint32_t>(in));
  desc.seed = get<std::uint64_t>(in);
  const auto expected_hash = get<std::uint64_t>(in);

  const auto spec = build_problem(problem);
  auto result = simulate(spec, cfg, desc);
  if (result.trace.hash != expected_hash)
    throw std::runtime_error("replay hash mismatch");
  return result;
}

}  // namespace asgd
