#pragma once

#include <cmath>
#include <cstdint>

namespace asgd {

// Explicitly seeded, fully deterministic generator (xoshiro256++ seeded via
// splitmix64). Simulator replays and multi-threaded trials need bit-identical
// streams, so we do not rely on std::normal_distribution, whose output is
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  // Independent stream derived from the construction seed. Each worker
  // thread owns fork(stream_id) so schedules never perturb the draws.
  Rng fork(std::uint64_t stream_id) const {
    return Rng(seed_ ^ (0x9e3779b97f4a7c15ull * (stream_id + 1)));
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    ++words_;
    return result;
  }

  // Uniform on (0, 1].
  double uniform() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller (cosine branch only, so one draw costs a
  // fixed two words; no cached state to keep replay accounting simple).
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

  double normal(double sigma) { return sigma * normal(); }

  // Uniform index in [0, m). Fixed-point multiply keeps it branch-free and
  // deterministic; the O(m/2^64) bias is irrelevant at our scales.
  std::size_t uniform_index(std::size_t m) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * m) >> 64);
  }

  std::uint64_t words_consumed() const { return words_; }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::uint64_t state_[4] = {};
  std::uint64_t seed_ = 0;
  std::uint64_t words_ = 0;
};

}  // namespace asgd
