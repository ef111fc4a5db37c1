#pragma once

// Shared fixtures, random generators and brute-force oracles for the tests.
// Oracles deliberately avoid the library's helpers so they can catch errors
// in them.

#include <acde/acde.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace acde::oracle {

// The 3-row fixture: z = {5.0, 4.7, 5.3}, x = {0, 0.1, 0.2}, y = {0, 1, 2}.
inline Dataset toy_dataset() {
  return Dataset({0.0, 1.0, 2.0}, {5.0, 4.7, 5.3}, {0.0, 0.1, 0.2}, 1);
}

struct RandomDataOptions {
  std::size_t n_min = 5;
  std::size_t n_max = 50;
  std::size_t d_max = 3;
  // Snap z and x to coarse grids so distance and window ties are common.
  bool ties = true;
};

inline Dataset random_dataset(std::mt19937_64& gen, const RandomDataOptions& o = {}) {
  std::uniform_int_distribution<std::size_t> n_dist(o.n_min, o.n_max);
  std::uniform_int_distribution<std::size_t> d_dist(1, o.d_max);
  const std::size_t n = n_dist(gen);
  const std::size_t d = d_dist(gen);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> y(n), z(n), x(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = o.ties ? 4.0 + 0.1 * std::floor(unit(gen) * 21.0) : 4.0 + 2.0 * unit(gen);
    y[i] = gauss(gen);
    for (std::size_t j = 0; j < d; ++j)
      x[i * d + j] = o.ties ? std::floor(unit(gen) * 4.0) : gauss(gen);
  }
  // Keep every covariate non-constant so the scale stays the sample SD.
  for (std::size_t j = 0; j < d; ++j) {
    x[j] = 0.0;
    x[d + j] = 1.0;
  }
  return Dataset(std::move(y), std::move(z), std::move(x), d);
}

// O(N^2) matcher straight from the definition: scan every index, keep the
// first one with the strictly smallest squared distance.
struct OracleMatch {
  std::vector<MatchTriplet> triplets;
  std::vector<std::size_t> unmatched;
};

inline double oracle_sd(const Dataset& ds, std::size_t j) {
  const std::size_t n = ds.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += ds.x(i)[j];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += (ds.x(i)[j] - mean) * (ds.x(i)[j] - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return sd > 0.0 ? sd : 1.0;
}

inline OracleMatch oracle_match(const Dataset& ds, double z0, double eta, double kappa,
                                bool scaled = true, bool allow_self = true) {
  const std::size_t n = ds.size(), d = ds.dim();
  std::vector<double> sd(d, 1.0);
  if (scaled)
    for (std::size_t j = 0; j < d; ++j) sd[j] = oracle_sd(ds, j);
  auto dist = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double t = (ds.x(a)[j] - ds.x(b)[j]) / sd[j];
      s += t * t;
    }
    return s;
  };
  const double lo1 = z0 - eta, hi1 = z0 - kappa * eta, lo2 = z0 + kappa * eta, hi2 = z0 + eta;
  OracleMatch out;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t b1 = n, b2 = n;
    double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
    for (std::size_t c = 0; c < n; ++c) {
      if (!allow_self && c == i) continue;
      const double zc = ds.z(c);
      if (zc >= lo1 && zc <= hi1 && (b1 == n || dist(i, c) < d1)) {
        b1 = c;
        d1 = dist(i, c);
      }
      if (zc >= lo2 && zc <= hi2 && (b2 == n || dist(i, c) < d2)) {
        b2 = c;
        d2 = dist(i, c);
      }
    }
    if (b1 == n || b2 == n)
      out.unmatched.push_back(i);
    else
      out.triplets.push_back({i, b1, b2});
  }
  return out;
}

// Sign-flip tail by explicit enumeration of all 2^m sign vectors, each with
// probability prod(prob or 1-prob).
template <class Hit>
double oracle_tail(const std::vector<double>& mags, double prob, Hit hit) {
  const std::size_t m = mags.size();
  double total = 0.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
    double s = 0.0, p = 1.0;
    for (std::size_t k = 0; k < m; ++k) {
      const bool plus = (mask >> k) & 1U;
      s += plus ? mags[k] : -mags[k];
      p *= plus ? prob : 1.0 - prob;
    }
    if (hit(s)) total += p;
  }
  return total;
}

// Three-sigma binomial band for a proportion p estimated from n draws.
inline double binomial_3sigma(double p, std::size_t n) {
  return 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n)) + 1.0 / static_cast<double>(n);
}

inline PairWeightTable random_table(std::mt19937_64& gen, std::size_t m) {
  std::uniform_int_distribution<int> count(1, 4);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> counts(m), deltas(m);
  double total = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    counts[k] = count(gen);
    total += counts[k];
    deltas[k] = gauss(gen);
  }
  for (auto& c : counts) c /= total;
  return make_pair_table(counts, deltas);
}

}  // namespace acde::oracle
