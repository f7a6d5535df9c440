#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asgd/problems.hpp"
#include "asgd/shared_model.hpp"

namespace asgd {

// Inputs of one epoch of the lock-free loop.
struct EpochConfig {
  std::uint64_t iterations = 0;   // T, total claims across all threads
  double alpha = 0.1;             // learning rate
  int threads = 1;                // n
  double epsilon = 1e-2;          // success radius squared
  double theta = 1.0;             // bound-tuning constant, carried for reports
  std::uint64_t seed = 1;
  bool trace = false;             // capture per-iteration records
  std::vector<double> x0;         // initial model, length d

  void validate(int dim) const;
};

// Interval-contention statistics measured from iteration records.
struct ContentionStats {
  std::vector<int> rho;    // per iteration (index order): concurrent iterations
  std::vector<int> tau;    // per iteration: view delay; empty when unknown
  int tau_max = 0;         // max interval contention
  double tau_avg = 0.0;    // average interval contention
  int delay_max = 0;       // max view delay (simulator traces only)
};

// rho from [start_event, end_event] overlap; tau copied from `delays` when
// provided (the simulator computes them exactly, real-thread runs cannot).
ContentionStats contention_stats(std::span<const IterationRecord> records,
                                 std::span<const int> delays = {});

struct RunResult {
  std::optional<std::uint64_t> hit_time;  // first t with ||x_t - x*||^2 <= eps
  std::vector<double> final_model;        // shared X at quiescence
  std::vector<double> final_accumulator;  // x_T = x_0 + all generated deltas
  std::uint64_t iterations = 0;           // completed iterations
  std::vector<IterationRecord> records;   // sorted by index; empty unless trace
  std::vector<double> dist_sq;            // ||x_t - x*||^2, t = 0..T (trace only)
  std::vector<double> step_norm;          // ||x_{t+1} - x_t||, trace only
  std::optional<ContentionStats> stats;   // trace only
  std::vector<std::vector<double>> thread_deltas;  // per-thread sum of deltas
  std::vector<std::string> thread_errors;
};

// Runs n worker threads over the shared model: claim an iteration, read the
// view, sample a gradient at it, apply -alpha * g entrywise via atomic adds.
// Entry 0 is always touched (delta 0 if the gradient there vanishes) so the
// first-update order stays total. Success detection is done on the ordered
// accumulator sequence, not on transient shared contents. A throwing thread
// is reported in thread_errors; partial results are still returned.
RunResult epoch_sgd(const ProblemSpec& spec, SharedModel& model,
                    const EpochConfig& cfg, std::uint64_t stream_base = 0);

struct FullRunResult {
  std::vector<double> r;                   // returned iterate
  int epochs = 0;                          // total epochs including the final
  std::uint64_t total_iterations = 0;
  bool single_epoch_warning = false;       // epoch formula was nonpositive
  std::vector<double> epoch_alphas;
  std::vector<std::vector<double>> final_epoch_acc;  // Acc[i] per thread
  std::vector<std::string> thread_errors;
};

// Epoch-halving driver: ceil(log2(alpha 2 M n / sqrt(eps))) epochs with the
// step size halved each time, then one final epoch whose per-thread gradient
// sums Acc[i] are collected; returns the final epoch's starting point plus
// sum_i Acc[i]. Each epoch runs on a fresh model buffer seeded from the
// previous epoch's final accumulator, so an epoch's gradients are only ever
// applied to that epoch's buffer.
FullRunResult full_sgd(const ProblemSpec& spec, const EpochConfig& cfg);

// Plain sequential baseline x_{t+1} = x_t - alpha g(x_t) with the same
// stream convention as a one-thread epoch (fork(stream_base)).
struct SequentialResult {
  std::optional<std::uint64_t> hit_time;
  std::vector<double> final_x;
  std::vector<double> dist_sq;  // t = 0..T
};

SequentialResult run_sequential(const ProblemSpec& spec,
                                std::span<const double> x0, double alpha,
                                std::uint64_t iterations, double epsilon,
                                std::uint64_t seed,
                                std::uint64_t stream_base = 0);

}  // namespace asgd
