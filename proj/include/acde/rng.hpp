#pragma once

// Counter-based random streams.
//
// Every random quantity is a pure function of (key, counter), where the key is
// derived from the master seed and a path of stream ids (replication index,
// grid index, ...). Work can therefore be split across threads in any way
// without changing results, and extending a run never reshuffles the draws of
// earlier replications.

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace acde::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_key(std::uint64_t seed,
                                   std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t key = mix64(seed + kGolden);
  for (std::uint64_t id : path) key = mix64(key ^ mix64(id + 0x632be59bd9b4e019ULL));
  return key;
}

// Uniform double in [0, 1) from the top 53 bits.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// SplittableRandom-style generator: the n-th output is mix64(key + n * golden).
// Satisfies UniformRandomBitGenerator so it plugs into <random> distributions.
class CounterEngine {
 public:
  using result_type = std::uint64_t;

  constexpr explicit CounterEngine(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept { return at(++counter_); }

  // Random access without advancing.
  constexpr result_type at(std::uint64_t counter) const noexcept {
    return mix64(key_ + counter * kGolden);
  }
  constexpr double uniform_at(std::uint64_t counter) const noexcept {
    return to_unit(at(counter));
  }

  constexpr std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace acde::rng
