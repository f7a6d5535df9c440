#pragma once

#include <atomic>
#include <bit>
#include <cstdint>
#include <span>
#include <vector>

namespace asgd {

// One atomically updatable real-valued cell. Hardware rarely offers a native
// floating-point fetch&add, so the additive update is a compare-exchange
// retry loop on the cell's bit pattern; callers observe lock-free
// read/fetch&add semantics with sequentially consistent ordering.
class AtomicCell {
 public:
  AtomicCell() : bits_(0) {}
  explicit AtomicCell(double v) : bits_(std::bit_cast<std::uint64_t>(v)) {}

  double load() const {
    return std::bit_cast<double>(bits_.load(std::memory_order_seq_cst));
  }

  void store(double v) {
    bits_.store(std::bit_cast<std::uint64_t>(v), std::memory_order_seq_cst);
  }

  // Atomic read-modify-write; returns the pre-update value. Concurrent adds
  // never lose updates.
  double fetch_add(double delta) {
    std::uint64_t observed = bits_.load(std::memory_order_seq_cst);
    for (;;) {
      const double current = std::bit_cast<double>(observed);
      const std::uint64_t desired = std::bit_cast<std::uint64_t>(current + delta);
      if (bits_.compare_exchange_weak(observed, desired,
                                      std::memory_order_seq_cst,
                                      std::memory_order_seq_cst))
        return current;
    }
  }

 private:
  std::atomic<std::uint64_t> bits_;
};

// The shared state of the lock-free SGD loop: parameter array X[d] with
// atomic per-entry additive updates plus the iteration-claim counter C.
// Shareable across threads; all mutation is atomic read-modify-write.
class SharedModel {
 public:
  explicit SharedModel(std::span<const double> initial, int epoch_tag = 0);
  SharedModel(int dim, double fill = 0.0, int epoch_tag = 0);

  int dim() const { return static_cast<int>(cells_.size()); }
  int epoch_tag() const { return epoch_tag_; }

  // Entrywise atomic add on cell j (0-based); returns the pre-update value.
  double add(int j, double delta);

  double read(int j) const { return cells_[j].load(); }

  // Entrywise atomic reads in index order 0..d-1. The composite vector may
  // mix updates inconsistently across entries; that is the intended view
  // semantics, not a bug.
  std::vector<double> read_view() const;
  void read_view_into(std::span<double> out) const;

  // Returns the previous counter value; callers claiming iteration work stop
  // once the returned value reaches their budget.
  std::uint64_t next_iteration() {
    return counter_.fetch_add(1, std::memory_order_seq_cst);
  }

  std::uint64_t claims() const {
    return counter_.load(std::memory_order_seq_cst);
  }

 private:
  std::vector<AtomicCell> cells_;
  std::atomic<std::uint64_t> counter_{0};
  int epoch_tag_ = 0;
};

// Per-iteration instrumentation record. `index` is the iteration's rank in
// the order of first updates on X[0], which totally orders iterations.
struct IterationRecord {
  std::uint64_t index = 0;        // t, 1-based
  int thread = -1;
  std::uint64_t claim = 0;        // counter value returned at claim time
  std::uint64_t start_event = 0;  // global event rank at claim
  std::uint64_t first_update_event = 0;  // rank of the update defining t
  std::uint64_t end_event = 0;    // global event rank at last update
  std::vector<double> view;
  std::vector<double> gradient;
  int epoch_tag = 0;
  // Simulator only: per-cell count of applied updates visible at read time.
  std::vector<std::uint32_t> read_prefix;
};

}  // namespace asgd
