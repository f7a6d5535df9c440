#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "asgd/engine.hpp"
#include "asgd/problems.hpp"

using namespace asgd;

namespace {

EpochConfig base_cfg(std::uint64_t iterations, double alpha, int threads,
                     double epsilon, std::vector<double> x0) {
  EpochConfig cfg;
  cfg.iterations = iterations;
  cfg.alpha = alpha;
  cfg.threads = threads;
  cfg.epsilon = epsilon;
  cfg.seed = 1;
  cfg.x0 = std::move(x0);
  return cfg;
}

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("single-thread noise-free run matches hand iteration") {
  const auto spec = quadratic_problem(1, 0.0);
  auto cfg = base_cfg(3, 0.5, 1, 0.3, {1.0});
  cfg.trace = true;
  SharedModel model(cfg.x0);
  const auto result = epoch_sgd(spec, model, cfg);
  REQUIRE(result.records.size() == 3);
  // x_t = (1 - alpha)^t: 0.5, 0.25, 0.125
  REQUIRE(result.dist_sq.size() == 4);
  CHECK(result.dist_sq[0] == doctest::Approx(1.0));
  CHECK(result.dist_sq[1] == doctest::Approx(0.25));
  CHECK(result.dist_sq[2] == doctest::Approx(0.0625));
  CHECK(result.dist_sq[3] == doctest::Approx(0.015625));
  REQUIRE(result.hit_time.has_value());
  CHECK(*result.hit_time == 1);  // 0.25 <= 0.3
  CHECK(result.final_model[0] == doctest::Approx(0.125));
  CHECK(result.final_accumulator[0] == doctest::Approx(0.125));
}

TEST_CASE("zero-iteration epoch leaves the model untouched") {
  const auto spec = quadratic_problem(2, 0.5);
  auto cfg = base_cfg(0, 0.1, 2, 0.01, {1.0, -1.0});
  SharedModel model(cfg.x0);
  const auto result = epoch_sgd(spec, model, cfg);
  CHECK(result.iterations == 0);
  CHECK(result.final_model == cfg.x0);
  CHECK(result.final_accumulator == cfg.x0);
}

TEST_CASE("accumulator identity and conservation under contention") {
  const auto spec = quadratic_problem(2, 0.2, 4.0);
  auto cfg = base_cfg(2000, 0.05, 4, 1e-6, {1.0, 1.0});
  cfg.trace = true;
  SharedModel model(cfg.x0);
  const auto result = epoch_sgd(spec, model, cfg);
  REQUIRE(result.records.size() == 2000);

  // indices are a gapless 1..T
  for (std::size_t i = 0; i < result.records.size(); ++i)
    CHECK(result.records[i].index == i + 1);

  // x_t - x_{t-1} = -alpha * g_t, exactly as reconstructed
  std::vector<double> acc = cfg.x0;
  for (const auto& rec : result.records)
    for (int j = 0; j < 2; ++j) acc[j] -= cfg.alpha * rec.gradient[j];
  for (int j = 0; j < 2; ++j)
    CHECK(result.final_accumulator[j] == doctest::Approx(acc[j]).epsilon(1e-12));

  // no lost updates: the shared cells saw every delta (summation order only)
  std::vector<double> conserved = cfg.x0;
  for (const auto& deltas : result.thread_deltas)
    for (int j = 0; j < 2; ++j) conserved[j] += deltas[j];
  for (int j = 0; j < 2; ++j) {
    const double scale = std::max(1.0, std::abs(conserved[j]));
    CHECK(std::abs(result.final_model[j] - conserved[j]) / scale <= 1e-6);
  }

  REQUIRE(result.stats.has_value());
  CHECK(result.stats->tau_avg <= 2.0 * cfg.threads);
}

TEST_CASE("a crashing thread is reported and partial results returned") {
  const auto spec = quadratic_problem(1, 0.0);

  SUBCASE("dimension mismatch is rejected up front") {
    const auto wide = quadratic_problem(2, 0.0);
    auto cfg = base_cfg(100, 0.5, 2, 1e-9, {1.0, 1.0});
    SharedModel narrow(std::vector<double>{1.0});
    CHECK_THROWS_AS(epoch_sgd(wide, narrow, cfg), std::invalid_argument);
  }

  SUBCASE("oracle failures surface with the thread named") {
    // a NaN start poisons every view, so each worker's oracle call throws
    auto cfg = base_cfg(100, 0.5, 2, 1e-9,
                        {std::numeric_limits<double>::quiet_NaN()});
    SharedModel model(cfg.x0);
    const auto result = epoch_sgd(spec, model, cfg);
    REQUIRE(result.thread_errors.size() == 2);
    CHECK(result.thread_errors[0].find("thread") != std::string::npos);
    CHECK(result.iterations <= cfg.iterations);
    CHECK(result.final_model.size() == 1);  // partial results still returned
  }
}

TEST_CASE("views decompose into ordered prefixes plus pending deltas") {
  // Weaker real-thread form of view containment: each view entry must equal
  // the initial value plus some prefix of the ordered deltas on that entry
  // plus a subset of at most n in-flight deltas (up to summation rounding).
  const auto spec = quadratic_problem(2, 0.2, 4.0);
  auto cfg = base_cfg(500, 0.05, 2, 1e-9, {1.0, -1.0});
  cfg.trace = true;
  SharedModel model(cfg.x0);
  const auto result = epoch_sgd(spec, model, cfg);
  REQUIRE(result.records.size() == 500);

  const int n = cfg.threads;
  const int d = spec.dim;
  const std::size_t total = result.records.size();
  // ordered per-entry deltas (zero for entries the iteration skipped) and
  // their prefix sums in index order
  std::vector<std::vector<double>> deltas(d), prefixes(d);
  for (int j = 0; j < d; ++j) prefixes[j].push_back(cfg.x0[j]);
  for (const auto& rec : result.records)
    for (int j = 0; j < d; ++j) {
      const double delta =
          (j == 0 || rec.gradient[j] != 0.0) ? -cfg.alpha * rec.gradient[j] : 0.0;
      deltas[j].push_back(delta);
      prefixes[j].push_back(prefixes[j].back() + delta);
    }

  int unexplained = 0;
  for (const auto& rec : result.records) {
    for (int j = 0; j < d; ++j) {
      const std::uint64_t t = rec.index;
      bool explained = false;
      const std::uint64_t lo = t > 24 ? t - 24 : 0;
      const std::uint64_t hi = std::min<std::uint64_t>(t + n, total);
      for (std::uint64_t m = lo; m <= hi && !explained; ++m) {
        const double base = prefixes[j][m];
        // subsets of the next n+2 deltas model the in-flight updates
        const int c = int(std::min<std::uint64_t>(n + 2, total - m));
        for (int mask = 0; mask < (1 << c) && !explained; ++mask) {
          double candidate = base;
          for (int b = 0; b < c; ++b)
            if (mask & (1 << b)) candidate += deltas[j][m + b];
          const double scale = std::max(1.0, std::abs(candidate));
          if (std::abs(candidate - rec.view[j]) <= 1e-6 * scale)
            explained = true;
        }
      }
      if (!explained) ++unexplained;
    }
  }
  CHECK(unexplained == 0);
}

TEST_CASE("in-flight updates at the hit time stay within the stale budget") {
  const auto spec = quadratic_problem(2, 0.1, 2.0);
  auto cfg = base_cfg(4096, 0.01, 4, 0.04,
                      {0.707106781186547, 0.707106781186547});
  cfg.trace = true;
  SharedModel model(cfg.x0);
  const auto result = epoch_sgd(spec, model, cfg);
  REQUIRE(result.hit_time.has_value());
  const std::uint64_t u = *result.hit_time;
  REQUIRE(u >= 1);
  const auto& hit_rec = result.records[u - 1];

  int in_flight = 0;
  double stale_mass = 0.0;
  for (const auto& rec : result.records) {
    if (rec.index == u) continue;
    if (rec.start_event < hit_rec.first_update_event &&
        rec.end_event > hit_rec.first_update_event) {
      ++in_flight;
      double norm_sq = 0.0;
      for (double g : rec.gradient) norm_sq += g * g;
      stale_mass += cfg.alpha * std::sqrt(norm_sq);
    }
  }
  CHECK(in_flight <= cfg.threads - 1);
  CHECK(stale_mass <= cfg.alpha * cfg.threads * spec.grad_bound());
}

TEST_CASE("epoch-halving schedule and counts") {
  // alpha 2 M n / sqrt(eps) = 0.5 * 2 * 2 * 4 / 1 = 8 -> 3 halving epochs
  const auto spec = quadratic_problem(1, 0.0, 2.0);
  REQUIRE(spec.grad_bound() == doctest::Approx(2.0));
  auto cfg = base_cfg(50, 0.5, 4, 1.0, {0.5});
  const auto result = full_sgd(spec, cfg);
  CHECK(result.epochs == 4);
  CHECK(!result.single_epoch_warning);
  REQUIRE(result.epoch_alphas.size() == 4);
  CHECK(result.epoch_alphas[0] == doctest::Approx(0.5));
  CHECK(result.epoch_alphas[1] == doctest::Approx(0.25));
  CHECK(result.epoch_alphas[2] == doctest::Approx(0.125));
  CHECK(result.epoch_alphas[3] == doctest::Approx(0.0625));
  CHECK(result.total_iterations == 4 * 50);

  SUBCASE("nonpositive epoch formula runs one epoch and warns") {
    auto small = cfg;
    small.alpha = 0.01;  // 0.01 * 16 / 1 <= 1
    const auto single = full_sgd(spec, small);
    CHECK(single.single_epoch_warning);
    CHECK(single.epochs == 1);
  }
}

TEST_CASE("one-thread noise-free full run replays sequentially") {
  const auto spec = quadratic_problem(1, 0.0, 2.0);
  auto cfg = base_cfg(20, 0.5, 1, 0.01, {1.0});
  const auto result = full_sgd(spec, cfg);

  // sequential replay with the same per-epoch streams and halved steps
  double x = 1.0;
  double alpha = cfg.alpha;
  const double ratio = cfg.alpha * 2.0 * spec.grad_bound() / std::sqrt(cfg.epsilon);
  const int halvings = int(std::ceil(std::log2(ratio)));
  for (int e = 0; e < halvings + 1; ++e) {
    for (std::uint64_t t = 0; t < cfg.iterations; ++t) x -= alpha * x;
    alpha /= 2.0;
  }
  CHECK(result.epochs == halvings + 1);
  CHECK(result.r[0] == doctest::Approx(x).epsilon(1e-9));
  REQUIRE(result.final_epoch_acc.size() == 1);
}

}  // TEST_SUITE
