#pragma once

#include <cstdint>

namespace qsd {

// Counter-based generator ("sm64ctr"): output i of stream `key` is a pure
// function of (key, i), so parallel consumers and replays agree bit-for-bit.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key = 0, std::uint64_t counter = 0)
      : key_(key), ctr_(counter) {}

  static constexpr const char* name() { return "sm64ctr"; }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return ctr_; }

  std::uint64_t next_u64() { return at(key_, ctr_++); }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double next_double(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Uniform in {0, ..., n-1}; n must be positive.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  // Derive an independent stream, e.g. one per Monte Carlo trajectory.
  CounterRng stream(std::uint64_t id) const {
    return CounterRng(at(key_ ^ 0x5851f42d4c957f2dULL, id), 0);
  }

  static std::uint64_t at(std::uint64_t key, std::uint64_t i) {
    std::uint64_t z = key + 0x9e3779b97f4a7c15ULL * (i + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z = (z ^ (z >> 31)) * 0xd6e8feb86659fd93ULL;
    return z ^ (z >> 32);
  }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_;
};

}  // namespace qsd
