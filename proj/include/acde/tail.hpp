#pragma once

// Tail probabilities of sums of independent two-point terms +/- m_p, where
// term p is positive with probability `prob`. Shared by the permutation test
// (prob = 1/2) and the sensitivity bounds (prob = Gamma / (1 + Gamma), ...).

#include <acde/parallel.hpp>
#include <acde/rng.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace acde::tail {

// Enumeration is exponential in the number of pairs.
inline constexpr std::size_t kExactMaxPairs = 25;

// Slack for ">=" / "<=" comparisons between sums accumulated in different
// orders, so the observed value itself always counts.
inline double tolerance(std::span<const double> magnitudes) {
  double s = 0.0;
  for (double m : magnitudes) s += std::abs(m);
  return 1e-12 * s;
}

// Sum over all 2^n sign vectors of P(vector) * hit(statistic).
template <class Hit>
double exact_probability(std::span<const double> magnitudes, double prob, Hit&& hit) {
  const std::size_t n = magnitudes.size();
  double total = 0.0;
  auto visit = [&](auto&& self, std::size_t p, double sum, double weight) -> void {
    if (p == n) {
      if (hit(sum)) total += weight;
      return;
    }
    self(self, p + 1, sum + magnitudes[p], weight * prob);
    self(self, p + 1, sum - magnitudes[p], weight * (1.0 - prob));
  };
  visit(visit, 0, 0.0, 1.0);
  return total;
}

// Number of Monte Carlo draws meeting `hit`. Draw r uses the stream keyed by
// (seed, r); term p is positive when its uniform u_p < prob, or when
// u_p >= 1 - prob if `mirrored` (which negates every draw at prob = 1/2).
template <class Hit>
std::size_t mc_count(std::span<const double> magnitudes, double prob, bool mirrored,
                     std::size_t reps, std::uint64_t seed, unsigned threads, Hit&& hit) {
  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = (reps + kChunk - 1) / kChunk;
  std::vector<std::size_t> counts(chunks, 0);
  const double cut = mirrored ? 1.0 - prob : prob;
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t end = std::min(reps, (c + 1) * kChunk);
    std::size_t local = 0;
    for (std::size_t r = c * kChunk; r < end; ++r) {
      const rng::CounterEngine stream(rng::derive_key(seed, {r}));
      double sum = 0.0;
      for (std::size_t p = 0; p < magnitudes.size(); ++p) {
        const double u = stream.uniform_at(p);
        const bool positive = mirrored ? u >= cut : u < cut;
        sum += positive ? magnitudes[p] : -magnitudes[p];
      }
      if (hit(sum)) ++local;
    }
    counts[c] = local;
  });
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

// Standard normal upper tail 1 - Phi(s), via erfc for full relative accuracy.
inline double normal_upper(double s) { return 0.5 * std::erfc(s / std::sqrt(2.0)); }

}  // namespace acde::tail
