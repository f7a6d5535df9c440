#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "asgd/config.hpp"
#include "asgd/engine.hpp"
#include "asgd/experiments.hpp"
#include "asgd/problems.hpp"
#include "asgd/report.hpp"
#include "asgd/rng.hpp"
#include "asgd/sim.hpp"
#include "asgd/theory.hpp"

namespace py = pybind11;
using namespace asgd;

namespace {

theory::FailureBound bound_from_string(const std::string& name) {
  if (name == "sequential") return theory::FailureBound::Sequential;
  if (name == "linear-delay") return theory::FailureBound::LinearDelay;
  if (name == "sqrt-contention") return theory::FailureBound::SqrtContention;
  if (name == "supermartingale") return theory::FailureBound::Supermartingale;
  throw std::invalid_argument("unknown bound: " + name);
}

RunResult run_epoch(const ProblemSpec& spec, const EpochConfig& cfg) {
  EpochConfig local = cfg;
  if (local.x0.empty()) local.x0.assign(spec.dim, 0.0);
  SharedModel model(local.x0, 0);
  return epoch_sgd(spec, model, local);
}

}  // namespace

PYBIND11_MODULE(_asgd, m) {
  m.doc() = "lock-free asynchronous SGD: engine, simulator, and bounds";

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("fork", &Rng::fork, py::arg("stream_id"))
      .def("uniform", &Rng::uniform)
      .def("normal", py::overload_cast<>(&Rng::normal))
      .def("next_u64", &Rng::next_u64);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("points", &Dataset::points)
      .def_readwrite("labels", &Dataset::labels)
      .def("__len__", &Dataset::size);

  py::class_<ProblemSpec>(m, "ProblemSpec")
      .def_readonly("dim", &ProblemSpec::dim)
      .def_readonly("strong_convexity", &ProblemSpec::strong_convexity)
      .def_readonly("lipschitz", &ProblemSpec::lipschitz)
      .def_readonly("second_moment", &ProblemSpec::second_moment)
      .def_readonly("minimizer", &ProblemSpec::minimizer)
      .def_readonly("noise_sigma", &ProblemSpec::noise_sigma)
      .def_readonly("box_radius", &ProblemSpec::box_radius)
      .def_property_readonly("grad_bound", &ProblemSpec::grad_bound);

  m.def("quadratic_problem", &quadratic_problem, py::arg("dim"),
        py::arg("sigma"), py::arg("box_radius") = 10.0);
  m.def(
      "regression_problem",
      [](const std::vector<std::vector<double>>& points,
         const std::vector<double>& labels, double ridge) {
        Dataset data;
        data.points = points;
        data.labels = labels;
        return regression_problem(data, ridge);
      },
      py::arg("points"), py::arg("labels"), py::arg("ridge") = 0.0);
  m.def("load_dataset_csv", &load_dataset_csv, py::arg("path"));
  m.def(
      "regression_problem_from_csv",
      [](const std::string& path, double ridge) {
        return regression_problem(load_dataset_csv(path), ridge);
      },
      py::arg("path"), py::arg("ridge") = 0.0);

  py::class_<GradientSample>(m, "GradientSample")
      .def_readonly("value", &GradientSample::value)
      .def_readonly("source_view", &GradientSample::source_view)
      .def_property_readonly(
          "dataset_index",
          [](const GradientSample& s) { return s.draw.dataset_index; })
      .def_property_readonly("noise",
                             [](const GradientSample& s) { return s.draw.noise; });

  m.def(
      "sample_gradient",
      [](const ProblemSpec& spec, const std::vector<double>& view,
         std::uint64_t seed) {
        Rng rng(seed);
        return sample_gradient(spec, view, rng);
      },
      py::arg("spec"), py::arg("view"), py::arg("seed"));
  m.def(
      "mean_gradient",
      [](const ProblemSpec& spec, const std::vector<double>& view) {
        return mean_gradient(spec, view);
      },
      py::arg("spec"), py::arg("view"));

  py::class_<EpochConfig>(m, "EpochConfig")
      .def(py::init([](std::uint64_t iterations, double alpha, int threads,
                       double epsilon, double theta, std::uint64_t seed,
                       bool trace, std::vector<double> x0) {
             EpochConfig cfg;
             cfg.iterations = iterations;
             cfg.alpha = alpha;
             cfg.threads = threads;
             cfg.epsilon = epsilon;
             cfg.theta = theta;
             cfg.seed = seed;
             cfg.trace = trace;
             cfg.x0 = std::move(x0);
             return cfg;
           }),
           py::arg("iterations"), py::arg("alpha"), py::arg("threads") = 1,
           py::arg("epsilon") = 1e-2, py::arg("theta") = 1.0,
           py::arg("seed") = 1, py::arg("trace") = false,
           py::arg("x0") = std::vector<double>{})
      .def_readwrite("iterations", &EpochConfig::iterations)
      .def_readwrite("alpha", &EpochConfig::alpha)
      .def_readwrite("threads", &EpochConfig::threads)
      .def_readwrite("epsilon", &EpochConfig::epsilon)
      .def_readwrite("theta", &EpochConfig::theta)
      .def_readwrite("seed", &EpochConfig::seed)
      .def_readwrite("trace", &EpochConfig::trace)
      .def_readwrite("x0", &EpochConfig::x0);

  py::class_<ContentionStats>(m, "ContentionStats")
      .def_readonly("rho", &ContentionStats::rho)
      .def_readonly("tau", &ContentionStats::tau)
      .def_readonly("tau_max", &ContentionStats::tau_max)
      .def_readonly("tau_avg", &ContentionStats::tau_avg)
      .def_readonly("delay_max", &ContentionStats::delay_max);

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("hit_time", &RunResult::hit_time)
      .def_readonly("final_model", &RunResult::final_model)
      .def_readonly("final_accumulator", &RunResult::final_accumulator)
      .def_readonly("iterations", &RunResult::iterations)
      .def_readonly("dist_sq", &RunResult::dist_sq)
      .def_readonly("stats", &RunResult::stats)
      .def_readonly("thread_errors", &RunResult::thread_errors);

  m.def("epoch_sgd", &run_epoch, py::arg("spec"), py::arg("config"),
        "Real-thread lock-free epoch over a fresh shared model");

  py::class_<FullRunResult>(m, "FullRunResult")
      .def_readonly("r", &FullRunResult::r)
      .def_readonly("epochs", &FullRunResult::epochs)
      .def_readonly("total_iterations", &FullRunResult::total_iterations)
      .def_readonly("epoch_alphas", &FullRunResult::epoch_alphas)
      .def_readonly("single_epoch_warning", &FullRunResult::single_epoch_warning)
      .def_readonly("thread_errors", &FullRunResult::thread_errors);

  m.def("full_sgd", &full_sgd, py::arg("spec"), py::arg("config"),
        "Epoch-halving driver; returns the aggregated iterate");

  py::class_<StrategyDesc>(m, "StrategyDesc")
      .def_property_readonly("name", &StrategyDesc::name);
  m.def("parse_strategy", &parse_strategy, py::arg("text"),
        "sequential | round-robin | uniform-random[:seed] | "
        "bounded-delay:CAP[:seed] | stale-replay:TAU");

  py::class_<ScheduleTrace>(m, "ScheduleTrace")
      .def_readonly("threads", &ScheduleTrace::threads)
      .def_readonly("dim", &ScheduleTrace::dim)
      .def_readonly("tau", &ScheduleTrace::tau)
      .def_readonly("dist_sq", &ScheduleTrace::dist_sq)
      .def_readonly("step_norm", &ScheduleTrace::step_norm)
      .def_readonly("completed", &ScheduleTrace::completed)
      .def_readonly("hash", &ScheduleTrace::hash)
      .def_readonly("max_incomplete", &ScheduleTrace::max_incomplete);

  py::class_<SimResult>(m, "SimResult")
      .def_readonly("run", &SimResult::run)
      .def_readonly("trace", &SimResult::trace)
      .def_readonly("stats", &SimResult::stats);

  m.def(
      "simulate",
      [](const ProblemSpec& spec, const EpochConfig& cfg,
         const std::string& strategy, bool collect) {
        SimOptions opts;
        opts.collect_events = collect;
        opts.collect_records = collect;
        return simulate(spec, cfg, parse_strategy(strategy), opts);
      },
      py::arg("spec"), py::arg("config"), py::arg("strategy"),
      py::arg("collect_trace") = true,
      "Deterministic adversarial-schedule simulation");

  py::class_<InvariantReport>(m, "InvariantReport")
      .def_readonly("order_ok", &InvariantReport::order_ok)
      .def_readonly("incomplete_ok", &InvariantReport::incomplete_ok)
      .def_readonly("containment_ok", &InvariantReport::containment_ok)
      .def_readonly("monotone_ok", &InvariantReport::monotone_ok)
      .def_readonly("indicator_ok", &InvariantReport::indicator_ok)
      .def_readonly("contention_ok", &InvariantReport::contention_ok)
      .def_readonly("staleness_ok", &InvariantReport::staleness_ok)
      .def_readonly("tau_avg_ok", &InvariantReport::tau_avg_ok)
      .def("ok", &InvariantReport::pass);

  m.def(
      "check_trace_invariants",
      [](const ScheduleTrace& trace, const std::vector<int>& ks) {
        return check_trace_invariants(trace, ks);
      },
      py::arg("trace"), py::arg("window_ks") = std::vector<int>{1, 2});

  // --- theory -------------------------------------------------------------

  py::class_<theory::BoundParams>(m, "BoundParams")
      .def(py::init([](double c, double lipschitz, double grad_bound, int dim,
                       int threads, int tau_max, double epsilon, double theta,
                       double alpha, double x0_dist_sq, std::uint64_t horizon) {
             theory::BoundParams p;
             p.strong_convexity = c;
             p.lipschitz = lipschitz;
             p.grad_bound = grad_bound;
             p.dim = dim;
             p.threads = threads;
             p.tau_max = tau_max;
             p.epsilon = epsilon;
             p.theta = theta;
             p.alpha = alpha;
             p.x0_dist_sq = x0_dist_sq;
             p.horizon = horizon;
             return p;
           }),
           py::arg("c"), py::arg("lipschitz"), py::arg("grad_bound"),
           py::arg("dim"), py::arg("threads"), py::arg("tau_max"),
           py::arg("epsilon"), py::arg("theta") = 1.0, py::arg("alpha") = 0.0,
           py::arg("x0_dist_sq") = 0.0, py::arg("horizon") = 0)
      .def_readwrite("alpha", &theory::BoundParams::alpha)
      .def_readwrite("horizon", &theory::BoundParams::horizon)
      .def_readwrite("tau_max", &theory::BoundParams::tau_max)
      .def_readwrite("x0_dist_sq", &theory::BoundParams::x0_dist_sq);

  m.def("bound_params_for", &make_bound_params, py::arg("spec"),
        py::arg("config"), py::arg("tau_max"),
        "Bound constants for a problem/run pair");

  m.def("plog", &theory::plog, py::arg("x"));
  m.def("martingale_value", &theory::martingale_value, py::arg("params"),
        py::arg("dist_sq"), py::arg("t"));
  m.def("martingale_lipschitz", &theory::martingale_lipschitz, py::arg("params"));
  m.def("tuned_learning_rate", &theory::tuned_learning_rate, py::arg("params"));
  m.def("sequential_learning_rate", &theory::sequential_learning_rate,
        py::arg("params"));
  m.def("linear_delay_learning_rate", &theory::linear_delay_learning_rate,
        py::arg("params"));

  py::class_<theory::BoundValue>(m, "BoundValue")
      .def_readonly("raw", &theory::BoundValue::raw)
      .def_property_readonly("clamped", &theory::BoundValue::clamped)
      .def_property_readonly("vacuous", &theory::BoundValue::vacuous);

  m.def(
      "failure_prob_bound",
      [](const theory::BoundParams& p, const std::string& kind) {
        return theory::failure_prob_bound(p, bound_from_string(kind));
      },
      py::arg("params"), py::arg("kind"),
      "kind: sequential | linear-delay | sqrt-contention | supermartingale");

  py::class_<theory::Feasibility>(m, "Feasibility")
      .def_readonly("value", &theory::Feasibility::value)
      .def_readonly("feasible", &theory::Feasibility::feasible)
      .def_readonly("margin", &theory::Feasibility::margin);

  m.def("feasibility_check", &theory::feasibility_check, py::arg("params"));
  m.def("slowdown_factor", &theory::slowdown_factor, py::arg("alpha"),
        py::arg("tau"));
  m.def("minimal_slowdown_delay", &theory::minimal_slowdown_delay,
        py::arg("alpha"));
  m.def("stale_noise_variance", &theory::stale_noise_variance, py::arg("alpha"),
        py::arg("sigma"), py::arg("tau"));

  // --- experiments ----------------------------------------------------------

  py::class_<TrialRecord>(m, "TrialRecord")
      .def_readonly("trial", &TrialRecord::trial)
      .def_readonly("seed", &TrialRecord::seed)
      .def_readonly("hit_time", &TrialRecord::hit_time)
      .def_readonly("final_dist_sq", &TrialRecord::final_dist_sq)
      .def_readonly("tau_max", &TrialRecord::tau_max)
      .def_readonly("tau_avg", &TrialRecord::tau_avg)
      .def_readonly("verdict", &TrialRecord::verdict);

  py::class_<ExperimentReport>(m, "ExperimentReport")
      .def_readonly("experiment_id", &ExperimentReport::experiment_id)
      .def_readonly("config", &ExperimentReport::config)
      .def_readonly("trials", &ExperimentReport::trials)
      .def_readonly("aggregates", &ExperimentReport::aggregates)
      .def_readonly("verdicts", &ExperimentReport::verdicts)
      .def_readonly("seeds", &ExperimentReport::seeds)
      .def("all_pass", &ExperimentReport::all_pass)
      .def("to_json", [](const ExperimentReport& r) { return report_to_json(r); })
      .def("to_csv", [](const ExperimentReport& r) { return report_to_csv(r); });

  m.def("wilson_upper95", &wilson_upper95, py::arg("successes"),
        py::arg("trials"));

  m.def(
      "run_failure_prob_experiment",
      [](const ProblemSpec& spec, const theory::BoundParams& params,
         const EpochConfig& cfg, const std::string& strategy,
         std::uint64_t trials, const std::string& bound, bool backend_sim,
         int jobs) {
        return run_failure_prob_experiment(spec, params, cfg,
                                           parse_strategy(strategy), trials,
                                           bound_from_string(bound), backend_sim,
                                           jobs);
      },
      py::arg("spec"), py::arg("params"), py::arg("config"), py::arg("strategy"),
      py::arg("trials"), py::arg("bound"), py::arg("backend_sim") = true,
      py::arg("jobs") = 0);

  m.def("run_slowdown_experiment", &run_slowdown_experiment, py::arg("alpha"),
        py::arg("taus"), py::arg("trials") = 3,
        py::arg("target_contraction") = 1e-6, py::arg("seed") = 1);

  m.def(
      "run_invariant_sweep",
      [](int seeds_per_config, std::uint64_t iterations) {
        return run_invariant_sweep(default_sweep(1, seeds_per_config, iterations));
      },
      py::arg("seeds_per_config") = 5, py::arg("iterations") = 512);

  m.def("run_fullsgd_experiment", &run_fullsgd_experiment, py::arg("spec"),
        py::arg("config"), py::arg("trials"));
}
