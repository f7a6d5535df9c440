#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "asgd/engine.hpp"
#include "asgd/sim.hpp"
#include "asgd/theory.hpp"

namespace asgd {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key=value configuration ('#' comments). Unknown keys are rejected.
//
// problem.kind = quadratic|regression   problem.d, problem.sigma,
// problem.box_radius, problem.data_path, problem.ridge
// run.threads, run.T, run.alpha, run.epsilon, run.theta, run.seed,
// run.trace = on|off, run.x0 = auto|<scalar>|<v1,v2,...>
// sim.strategy, sim.tau, sim.tau_max, sim.seed
// mc.trials, mc.bound = sequential|linear-delay|sqrt-contention|supermartingale
// mc.backend = sim|threads
struct Config {
  ProblemDesc problem;
  EpochConfig run;
  bool trace = false;
  std::string x0_text = "auto";
  StrategyDesc strategy;
  std::uint64_t trials = 1000;
  theory::FailureBound bound = theory::FailureBound::SqrtContention;
  bool backend_sim = true;
  std::map<std::string, std::string> raw;  // snapshot for reports
};

Config load_config(const std::string& path);
Config parse_config(const std::string& text);

// Resolves run.x0: "auto" places the start at unit distance from the
// minimizer (x* + 1/sqrt(d) per coordinate); a scalar is broadcast; a comma
// list is taken verbatim.
std::vector<double> resolve_x0(const ProblemSpec& spec, const std::string& text);

// Builds the problem, fills cfg.x0, and returns both.
struct Runtime {
  ProblemSpec spec;
  EpochConfig cfg;
};

Runtime build_runtime(const Config& config);

// Bound constants for a given run setup. tau_max is the assumed maximum
// contention (for bounded-delay schedules, the cap).
theory::BoundParams make_bound_params(const ProblemSpec& spec,
                                      const EpochConfig& cfg, int tau_max);

}  // namespace asgd
