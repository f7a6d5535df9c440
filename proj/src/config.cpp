#include "asgd/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace asgd {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config error: bad number for " + key + ": '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const std::uint64_t x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config error: bad integer for " + key + ": '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  return static_cast<int>(to_u64(key, v));
}

}  // namespace

Config parse_config(const std::string& text) {
  Config config;
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config error: line " + std::to_string(lineno) +
                        " is not key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config error: empty key or value on line " +
                        std::to_string(lineno));
    if (kv.count(key))
      throw ConfigError("config error: duplicate key " + key);
    kv[key] = value;
  }
  config.raw = kv;

  bool strategy_named = false;
  for (const auto& [key, value] : kv) {
    if (key == "problem.kind") {
      if (value == "quadratic")
        config.problem.kind = ProblemSpec::Kind::Quadratic;
      else if (value == "regression")
        config.problem.kind = ProblemSpec::Kind::Regression;
      else
        throw ConfigError("config error: unknown problem.kind '" + value + "'");
    } else if (key == "problem.d") {
      config.problem.dim = to_int(key, value);
    } else if (key == "problem.sigma") {
      config.problem.sigma = to_double(key, value);
    } else if (key == "problem.box_radius") {
      config.problem.box_radius = to_double(key, value);
    } else if (key == "problem.data_path") {
      config.problem.data_path = value;
    } else if (key == "problem.ridge") {
      config.problem.ridge = to_double(key, value);
    } else if (key == "run.threads") {
      config.run.threads = to_int(key, value);
    } else if (key == "run.T") {
      config.run.iterations = to_u64(key, value);
    } else if (key == "run.alpha") {
      config.run.alpha = to_double(key, value);
    } else if (key == "run.epsilon") {
      config.run.epsilon = to_double(key, value);
    } else if (key == "run.theta") {
      config.run.theta = to_double(key, value);
    } else if (key == "run.seed") {
      config.run.seed = to_u64(key, value);
    } else if (key == "run.trace") {
      if (value == "on")
        config.trace = true;
      else if (value == "off")
        config.trace = false;
      else
        throw ConfigError("config error: run.trace must be on|off");
    } else if (key == "run.x0") {
      config.x0_text = value;
    } else if (key == "sim.strategy") {
      try {
        config.strategy = parse_strategy(value);
      } catch (const std::exception& e) {
        throw ConfigError(std::string("config error: ") + e.what());
      }
      strategy_named = true;
    } else if (key == "sim.tau") {
      config.strategy.tau = to_int(key, value);
    } else if (key == "sim.tau_max") {
      config.strategy.cap = to_int(key, value);
    } else if (key == "sim.seed") {
      config.strategy.seed = to_u64(key, value);
    } else if (key == "mc.trials") {
      config.trials = to_u64(key, value);
    } else if (key == "mc.bound") {
      if (value == "sequential")
        config.bound = theory::FailureBound::Sequential;
      else if (value == "linear-delay")
        config.bound = theory::FailureBound::LinearDelay;
      else if (value == "sqrt-contention")
        config.bound = theory::FailureBound::SqrtContention;
      else if (value == "supermartingale")
        config.bound = theory::FailureBound::Supermartingale;
      else
        throw ConfigError("config error: unknown mc.bound '" + value + "'");
    } else if (key == "mc.backend") {
      if (value == "sim")
        config.backend_sim = true;
      else if (value == "threads")
        config.backend_sim = false;
      else
        throw ConfigError("config error: mc.backend must be sim|threads");
    } else {
      throw ConfigError("config error: unknown key " + key);
    }
  }
  if (!strategy_named && (config.strategy.tau > 0 || config.strategy.cap > 0)) {
    config.strategy.kind = config.strategy.tau > 0
                               ? StrategyDesc::Kind::StaleReplay
                               : StrategyDesc::Kind::BoundedDelay;
  }
  return config;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config error: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<double> resolve_x0(const ProblemSpec& spec, const std::string& text) {
  const int d = spec.dim;
  if (text == "auto") {
    std::vector<double> x0(spec.minimizer);
    const double offset = 1.0 / std::sqrt(double(d));
    for (double& v : x0) v += offset;
    return x0;
  }
  std::vector<double> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) values.push_back(to_double("run.x0", cell));
  if (values.size() == 1) return std::vector<double>(d, values[0]);
  if (static_cast<int>(values.size()) != d)
    throw ConfigError("config error: run.x0 needs 1 or d values");
  return values;
}

Runtime build_runtime(const Config& config) {
  Runtime rt;
  rt.spec = build_problem(config.problem);
  rt.cfg = config.run;
  rt.cfg.trace = config.trace;
  rt.cfg.x0 = resolve_x0(rt.spec, config.x0_text);
  rt.cfg.validate(rt.spec.dim);
  return rt;
}

theory::BoundParams make_bound_params(const ProblemSpec& spec,
                                      const EpochConfig& cfg, int tau_max) {
  theory::BoundParams p;
  p.strong_convexity = spec.strong_convexity;
  p.lipschitz = spec.lipschitz;
  p.grad_bound = spec.grad_bound();
  p.dim = spec.dim;
  p.threads = cfg.threads;
  p.tau_max = tau_max;
  p.epsilon = cfg.epsilon;
  p.theta = cfg.theta;
  p.alpha = cfg.alpha;
  p.horizon = cfg.iterations;
  double dist = 0.0;
  for (int j = 0; j < spec.dim; ++j) {
    const double diff = (cfg.x0.empty() ? 0.0 : cfg.x0[j]) - spec.minimizer[j];
    dist += diff * diff;
  }
  p.x0_dist_sq = dist;
  return p;
}

}  // namespace asgd
