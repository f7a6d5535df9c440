// asgd: lock-free asynchronous SGD runner, simulator, and bound checker.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "asgd/config.hpp"
#include "asgd/engine.hpp"
#include "asgd/experiments.hpp"
#include "asgd/report.hpp"
#include "asgd/sim.hpp"
#include "asgd/theory.hpp"

namespace {

using namespace asgd;

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;

void emit_all(const ExperimentReport& report, const std::string& out_dir,
              const std::string& format) {
  if (out_dir.empty()) return;
  if (format == "all" || format == "csv")
    std::printf("wrote %s\n",
                emit_report(report, out_dir, ReportFormat::Csv).c_str());
  if (format == "all" || format == "json")
    std::printf("wrote %s\n",
                emit_report(report, out_dir, ReportFormat::Json).c_str());
  if (format == "all" || format == "markdown")
    std::printf("wrote %s\n",
                emit_report(report, out_dir, ReportFormat::Markdown).c_str());
}

void print_verdicts(const ExperimentReport& report) {
  for (const auto& [key, value] : report.aggregates)
    std::printf("  %-28s %.10g\n", key.c_str(), value);
  for (const auto& [key, verdict] : report.verdicts)
    std::printf("  %-28s %s\n", key.c_str(), verdict.c_str());
}

int report_exit(const ExperimentReport& report) {
  return report.all_pass() ? kExitPass : kExitFail;
}

int cmd_bounds(const std::string& config_path) {
  const auto config = load_config(config_path);
  const auto rt = build_runtime(config);
  auto params = make_bound_params(rt.spec, rt.cfg, config.strategy.cap);

  std::printf("problem: d=%d c=%.6g L=%.6g M=%.6g (box radius %.3g)\n",
              rt.spec.dim, rt.spec.strong_convexity, rt.spec.lipschitz,
              rt.spec.grad_bound(), rt.spec.box_radius);
  std::printf("run: n=%d T=%llu eps=%.6g theta=%.3g alpha=%.8g tau_max=%d\n",
              rt.cfg.threads, (unsigned long long)rt.cfg.iterations,
              rt.cfg.epsilon, rt.cfg.theta, rt.cfg.alpha, params.tau_max);
  std::printf("\n%-34s %s\n", "quantity", "value");
  std::printf("%-34s %.10g\n", "alpha (sequential rate)",
              theory::sequential_learning_rate(params));
  std::printf("%-34s %.10g\n", "alpha (linear-delay rate)",
              theory::linear_delay_learning_rate(params));
  std::printf("%-34s %.10g\n", "alpha (contention-aware rate)",
              theory::tuned_learning_rate(params));
  try {
    const auto feas = theory::feasibility_check(params);
    std::printf("%-34s %.10g (margin %.10g, %s)\n", "feasibility value",
                feas.value, feas.margin,
                feas.feasible ? "feasible" : "INFEASIBLE");
  } catch (const std::exception& e) {
    std::printf("%-34s n/a (%s)\n", "feasibility value", e.what());
  }
  for (auto kind :
       {theory::FailureBound::Sequential, theory::FailureBound::LinearDelay,
        theory::FailureBound::SqrtContention,
        theory::FailureBound::Supermartingale}) {
    const std::string label = "failure bound (" + theory::to_string(kind) + ")";
    try {
      const auto bound = theory::failure_prob_bound(params, kind);
      std::printf("%-34s %.10g%s (clamped %.10g)\n", label.c_str(), bound.raw,
                  bound.vacuous() ? " [vacuous]" : "", bound.clamped());
    } catch (const std::exception& e) {
      std::printf("%-34s n/a (%s)\n", label.c_str(), e.what());
    }
  }
  if (rt.cfg.alpha > 0 && rt.cfg.alpha < 1) {
    try {
      std::printf("%-34s %d\n", "minimal slowdown delay",
                  theory::minimal_slowdown_delay(rt.cfg.alpha));
    } catch (const std::exception& e) {
      std::printf("%-34s n/a (%s)\n", "minimal slowdown delay", e.what());
    }
  }
  return kExitPass;
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  const auto config = load_config(config_path);
  const auto rt = build_runtime(config);
  SharedModel model(rt.cfg.x0, 0);
  const auto result = epoch_sgd(rt.spec, model, rt.cfg);
  std::printf("iterations: %llu\n", (unsigned long long)result.iterations);
  if (result.hit_time)
    std::printf("hit_time: %llu\n", (unsigned long long)*result.hit_time);
  else
    std::printf("hit_time: none%s\n",
                rt.cfg.trace ? "" : " (enable run.trace for hit detection)");
  double dist_sq = 0.0;
  for (int j = 0; j < rt.spec.dim; ++j) {
    const double diff = result.final_accumulator[j] - rt.spec.minimizer[j];
    dist_sq += diff * diff;
  }
  std::printf("final_dist_sq: %.10g\n", dist_sq);
  if (result.stats)
    std::printf("tau_max: %d tau_avg: %.4g\n", result.stats->tau_max,
                result.stats->tau_avg);
  for (const auto& err : result.thread_errors)
    std::printf("error: %s\n", err.c_str());
  if (!out_dir.empty() && rt.cfg.trace) {
    std::filesystem::create_directories(out_dir);
    ScheduleTrace trace;
    trace.dim = rt.spec.dim;
    trace.iterations = result.records;
    trace.dist_sq = result.dist_sq;
    trace.tau.assign(result.records.size(), -1);  // unknown for real threads
    const auto path =
        (std::filesystem::path(out_dir) / "run_iterations.csv").string();
    write_iteration_csv(trace, path);
    std::printf("wrote %s\n", path.c_str());
  }
  return result.thread_errors.empty() ? kExitPass : kExitFail;
}

int cmd_simulate(const std::string& config_path, const std::string& strategy,
                 const std::string& out_dir) {
  auto config = load_config(config_path);
  if (!strategy.empty()) config.strategy = parse_strategy(strategy);
  const auto rt = build_runtime(config);
  const auto result = simulate(rt.spec, rt.cfg, config.strategy);
  std::printf("strategy: %s\n", config.strategy.name().c_str());
  std::printf("iterations: %llu events: %zu hash: %016llx\n",
              (unsigned long long)result.trace.completed,
              result.trace.events.size(),
              (unsigned long long)result.trace.hash);
  if (result.run.hit_time)
    std::printf("hit_time: %llu\n", (unsigned long long)*result.run.hit_time);
  else
    std::printf("hit_time: none\n");
  std::printf("tau_max: %d tau_avg: %.4g delay_max: %d\n",
              result.stats.tau_max, result.stats.tau_avg,
              result.stats.delay_max);
  const auto inv = check_trace_invariants(result.trace, std::array<int, 2>{1, 2});
  std::printf("invariants: %s\n", inv.pass() ? "PASS" : "FAIL");
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    const auto base = std::filesystem::path(out_dir);
    write_event_csv(result.trace, (base / "events.csv").string());
    write_iteration_csv(result.trace, (base / "iterations.csv").string());
    write_replay((base / "trace.replay").string(), config.problem, rt.cfg,
                 result.trace);
    std::printf("wrote %s/{events.csv,iterations.csv,trace.replay}\n",
                out_dir.c_str());
  }
  return inv.pass() ? kExitPass : kExitFail;
}

int cmd_slowdown(double alpha, const std::string& tau_list,
                 std::uint64_t trials, double target, std::uint64_t seed,
                 const std::string& out_dir, const std::string& format) {
  std::vector<int> taus;
  std::stringstream ss(tau_list);
  std::string part;
  while (std::getline(ss, part, ',')) taus.push_back(std::stoi(part));
  const auto report = run_slowdown_experiment(alpha, taus, trials, target, seed);
  print_verdicts(report);
  emit_all(report, out_dir, format);
  return report_exit(report);
}

int cmd_mc_fail_prob(const std::string& config_path, std::uint64_t trials,
                     const std::string& out_dir, const std::string& format) {
  const auto config = load_config(config_path);
  const auto rt = build_runtime(config);
  const int tau_assumed = config.strategy.kind == StrategyDesc::Kind::StaleReplay
                              ? config.strategy.tau
                              : config.strategy.cap;
  auto params = make_bound_params(rt.spec, rt.cfg, tau_assumed);
  const auto report = run_failure_prob_experiment(
      rt.spec, params, rt.cfg, config.strategy,
      trials ? trials : config.trials, config.bound, config.backend_sim);
  print_verdicts(report);
  emit_all(report, out_dir, format);
  return report_exit(report);
}

int cmd_invariants(const std::string& sweep, int seeds, std::uint64_t iterations,
                   const std::string& out_dir, const std::string& format) {
  if (sweep != "default")
    throw ConfigError("config error: unknown sweep '" + sweep + "'");
  const auto report =
      run_invariant_sweep(default_sweep(1, seeds, iterations));
  print_verdicts(report);
  emit_all(report, out_dir, format);
  return report_exit(report);
}

int cmd_fullsgd(const std::string& config_path, std::uint64_t trials,
                const std::string& out_dir, const std::string& format) {
  const auto config = load_config(config_path);
  const auto rt = build_runtime(config);
  const auto report = run_fullsgd_experiment(rt.spec, rt.cfg,
                                             trials ? trials : config.trials);
  print_verdicts(report);
  emit_all(report, out_dir, format);
  return report_exit(report);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lock-free asynchronous SGD: runner, simulator, bound checker"};
  app.require_subcommand(1);

  std::string config_path, out_dir, strategy, format = "all";
  std::uint64_t trials = 0;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config)
      cmd->add_option("--config", config_path, "flat key=value config file")
          ->required();
    cmd->add_option("--out", out_dir, "directory for report files");
    cmd->add_option("--format", format, "csv|json|markdown|all");
  };

  auto* bounds = app.add_subcommand("bounds", "print every closed-form bound");
  bounds->add_option("--config", config_path)->required();

  auto* run = app.add_subcommand("run", "real-thread lock-free SGD run");
  add_common(run, true);

  auto* sim = app.add_subcommand("simulate", "deterministic simulator run");
  add_common(sim, true);
  sim->add_option("--strategy", strategy,
                  "sequential|round-robin|uniform-random|bounded-delay:CAP|"
                  "stale-replay:TAU");

  auto* slow = app.add_subcommand("slowdown", "adversarial slowdown experiment");
  double alpha = 0.1;
  std::string tau_list = "29";
  double target = 1e-6;
  std::uint64_t seed = 1;
  std::uint64_t slow_trials = 3;
  slow->add_option("--alpha", alpha)->required();
  slow->add_option("--tau-list", tau_list)->required();
  slow->add_option("--trials", slow_trials);
  slow->add_option("--target", target, "target contraction (deepen for large tau)");
  slow->add_option("--seed", seed);
  slow->add_option("--out", out_dir);
  slow->add_option("--format", format);

  auto* mc = app.add_subcommand("mc-fail-prob",
                                "Monte-Carlo failure probability vs bound");
  add_common(mc, true);
  mc->add_option("--trials", trials);

  auto* inv = app.add_subcommand("invariants", "schedule invariant sweep");
  std::string sweep = "default";
  int sweep_seeds = 20;
  std::uint64_t sweep_iterations = 2048;
  inv->add_option("--sweep", sweep);
  inv->add_option("--seeds", sweep_seeds, "seeds per sweep entry");
  inv->add_option("--iterations", sweep_iterations);
  inv->add_option("--out", out_dir);
  inv->add_option("--format", format);

  auto* full = app.add_subcommand("fullsgd", "epoch-halving driver experiment");
  add_common(full, true);
  full->add_option("--trials", trials);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (bounds->parsed()) return cmd_bounds(config_path);
    if (run->parsed()) return cmd_run(config_path, out_dir);
    if (sim->parsed()) return cmd_simulate(config_path, strategy, out_dir);
    if (slow->parsed())
      return cmd_slowdown(alpha, tau_list, slow_trials, target, seed, out_dir,
                          format);
    if (mc->parsed()) return cmd_mc_fail_prob(config_path, trials, out_dir, format);
    if (inv->parsed())
      return cmd_invariants(sweep, sweep_seeds, sweep_iterations, out_dir, format);
    if (full->parsed()) return cmd_fullsgd(config_path, trials, out_dir, format);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
