#include "asgd/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "asgd/rng.hpp"

namespace asgd {

namespace {

double dist_sq_to(std::span<const double> x, std::span<const double> ref) {
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double diff = x[j] - ref[j];
    s += diff * diff;
  }
  return s;
}

}  // namespace

void EpochConfig::validate(int dim) const {
  if (alpha <= 0) throw std::invalid_argument("alpha must be positive");
  if (threads < 1) throw std::invalid_argument("thread count must be >= 1");
  if (epsilon <= 0) throw std::invalid_argument("epsilon must be positive");
  if (!x0.empty() && static_cast<int>(x0.size()) != dim)
    throw std::invalid_argument("x0 length does not match problem dimension");
}

ContentionStats contention_stats(std::span<const IterationRecord> records,
                                 std::span<const int> delays) {
  ContentionStats stats;
  const std::size_t count = records.size();
  stats.rho.assign(count, 0);
  if (count == 0) return stats;

  // Sweep over start events: an overlap is charged to both iterations when
  // the later one starts inside the earlier one's span.
  struct Entry { std::uint64_t start, end; std::size_t pos; };
  std::vector<Entry> order(count);
  for (std::size_t i = 0; i < count; ++i)
    order[i] = {records[i].start_event, records[i].end_event, i};
  std::sort(order.begin(), order.end(),
            [](const Entry& a, const Entry& b) { return a.start < b.start; });

  std::vector<std::size_t> active;
  for (const auto& cur : order) {
    std::erase_if(active, [&](std::size_t k) { return order[k].end < cur.start; });
    for (std::size_t k : active) {
      ++stats.rho[order[k].pos];
      ++stats.rho[cur.pos];
    }
    active.push_back(&cur - order.data());
  }

  long long total = 0;
  for (int r : stats.rho) {
    stats.tau_max = std::max(stats.tau_max, r);
    total += r;
  }
  stats.tau_avg = double(total) / double(count);
  stats.tau.assign(delays.begin(), delays.end());
  for (int t : stats.tau) stats.delay_max = std::max(stats.delay_max, t);
  return stats;
}

RunResult epoch_sgd(const ProblemSpec& spec, SharedModel& model,
                    const EpochConfig& cfg, std::uint64_t stream_base) {
  cfg.validate(spec.dim);
  if (model.dim() != spec.dim)
    throw std::invalid_argument("model dimension does not match problem");

  const int n = cfg.threads;
  const int d = spec.dim;
  const std::vector<double> initial = model.read_view();

  std::atomic<std::uint64_t> event_clock{0};
  std::atomic<std::uint64_t> order_counter{0};

  std::vector<std::vector<IterationRecord>> thread_records(n);
  std::vector<std::vector<double>> thread_deltas(n,
                                                 std::vector<double>(d, 0.0));
  std::vector<std::string> errors;
  std::mutex errors_mu;
  const Rng base(cfg.seed);

  auto worker = [&](int tid) {
    try {
      Rng rng = base.fork(stream_base + std::uint64_t(tid));
      std::vector<double> view(d), grad(d);
      auto& deltas = thread_deltas[tid];
      for (;;) {
        const std::uint64_t claim = model.next_iteration();
        if (claim >= cfg.iterations) return;
        IterationRecord rec;
        if (cfg.trace) {
          rec.thread = tid;
          rec.claim = claim;
          rec.epoch_tag = model.epoch_tag();
          rec.start_event = event_clock.fetch_add(1) + 1;
        }
        model.read_view_into(view);
        sample_gradient_into(spec, view, rng, grad);

        // Entry 0 is updated unconditionally so the first-update order is a
        // total order even for gradients that vanish there.
        const double delta0 = -cfg.alpha * grad[0];
        model.add(0, delta0);
        if (cfg.trace) {
          rec.index = order_counter.fetch_add(1) + 1;
          rec.first_update_event = event_clock.fetch_add(1) + 1;
        }
        deltas[0] += delta0;
        for (int j = 1; j < d; ++j) {
          if (grad[j] == 0.0) continue;
          const double delta = -cfg.alpha * grad[j];
          model.add(j, delta);
          deltas[j] += delta;
        }
        if (cfg.trace) {
          rec.end_event = event_clock.fetch_add(1) + 1;
          rec.view = view;
          rec.gradient = grad;
          thread_records[tid].push_back(std::move(rec));
        }
      }
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(errors_mu);
      errors.push_back("thread " + std::to_string(tid) + ": " + e.what());
    }
  };

  if (n == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (int tid = 0; tid < n; ++tid) pool.emplace_back(worker, tid);
    for (auto& th : pool) th.join();
  }

  RunResult result;
  result.final_model = model.read_view();
  result.thread_errors = std::move(errors);
  result.thread_deltas = thread_deltas;
  result.final_accumulator = initial;
  for (const auto& deltas : thread_deltas)
    for (int j = 0; j < d; ++j) result.final_accumulator[j] += deltas[j];

  if (cfg.trace) {
    for (auto& recs : thread_records)
      for (auto& rec : recs) result.records.push_back(std::move(rec));
    std::sort(result.records.begin(), result.records.end(),
              [](const IterationRecord& a, const IterationRecord& b) {
                return a.index < b.index;
              });
    result.iterations = result.records.size();

    std::vector<double> acc = initial;
    result.dist_sq.reserve(result.records.size() + 1);
    result.dist_sq.push_back(dist_sq_to(acc, spec.minimizer));
    if (result.dist_sq.back() <= cfg.epsilon) result.hit_time = 0;
    for (const auto& rec : result.records) {
      double step_sq = 0.0;
      for (int j = 0; j < d; ++j) {
        const double delta = -cfg.alpha * rec.gradient[j];
        acc[j] += delta;
        step_sq += delta * delta;
      }
      result.step_norm.push_back(std::sqrt(step_sq));
      result.dist_sq.push_back(dist_sq_to(acc, spec.minimizer));
      if (!result.hit_time && result.dist_sq.back() <= cfg.epsilon)
        result.hit_time = rec.index;
    }
    result.stats = contention_stats(result.records);
  } else {
    const std::uint64_t claims = model.claims();
    result.iterations = std::min<std::uint64_t>(cfg.iterations, claims);
  }
  return result;
}

FullRunResult full_sgd(const ProblemSpec& spec, const EpochConfig& cfg) {
  cfg.validate(spec.dim);
  if (cfg.x0.empty())
    throw std::invalid_argument("full_sgd requires an explicit x0");

  FullRunResult out;
  const double m_bound = spec.grad_bound();
  const double ratio =
      cfg.alpha * 2.0 * m_bound * double(cfg.threads) / std::sqrt(cfg.epsilon);
  int halvings = 0;
  if (ratio <= 1.0) {
    out.single_epoch_warning = true;
  } else {
    halvings = static_cast<int>(std::ceil(std::log2(ratio)));
  }

  std::vector<double> x = cfg.x0;
  double alpha = cfg.alpha;
  EpochConfig epoch_cfg = cfg;
  for (int e = 0; e < halvings; ++e) {
    SharedModel model(x, e);
    epoch_cfg.alpha = alpha;
    auto res = epoch_sgd(spec, model, epoch_cfg,
                         std::uint64_t(e) * std::uint64_t(cfg.threads));
    out.epoch_alphas.push_back(alpha);
    out.total_iterations += res.iterations;
    for (auto& err : res.thread_errors) out.thread_errors.push_back(err);
    x = std::move(res.final_accumulator);
    alpha /= 2.0;
  }

  // Final epoch: threads additionally accumulate their own gradients into
  // Acc[i]; the result is the epoch's starting point plus the entrywise sum.
  SharedModel model(x, halvings);
  epoch_cfg.alpha = alpha;
  auto res = epoch_sgd(spec, model, epoch_cfg,
                       std::uint64_t(halvings) * std::uint64_t(cfg.threads));
  out.epoch_alphas.push_back(alpha);
  out.total_iterations += res.iterations;
  for (auto& err : res.thread_errors) out.thread_errors.push_back(err);
  out.final_epoch_acc = res.thread_deltas;
  out.r = x;
  for (const auto& acc : out.final_epoch_acc)
    for (std::size_t j = 0; j < out.r.size(); ++j) out.r[j] += acc[j];
  out.epochs = halvings + 1;
  return out;
}

SequentialResult run_sequential(const ProblemSpec& spec,
                                std::span<const double> x0, double alpha,
                                std::uint64_t iterations, double epsilon,
                                std::uint64_t seed, std::uint64_t stream_base) {
  SequentialResult out;
  Rng rng = Rng(seed).fork(stream_base);
  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> grad(spec.dim);
  out.dist_sq.reserve(iterations + 1);
  out.dist_sq.push_back(dist_sq_to(x, spec.minimizer));
  if (out.dist_sq.back() <= epsilon) out.hit_time = 0;
  for (std::uint64_t t = 1; t <= iterations; ++t) {
    sample_gradient_into(spec, x, rng, grad);
    for (int j = 0; j < spec.dim; ++j) x[j] -= alpha * grad[j];
    out.dist_sq.push_back(dist_sq_to(x, spec.minimizer));
    if (!out.hit_time && out.dist_sq.back() <= epsilon) out.hit_time = t;
  }
  out.final_x = std::move(x);
  return out;
}

}  // namespace asgd
