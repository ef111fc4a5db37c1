#pragma once

#include <acde/error.hpp>
#include <acde/matching.hpp>
#include <acde/tail.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace acde {

enum class TestMethod { exact, monte_carlo, normal };
enum class Sidedness { two_sided, greater, less };

// Normal approximation is flagged as unreliable above this ratio.
inline constexpr double kLindebergWarn = 0.1;

struct TestResult {
  double t_obs = 0.0;
  TestMethod method = TestMethod::normal;
  Sidedness sidedness = Sidedness::two_sided;
  double p_value = 1.0;
  std::size_t mc_reps = 0;
  std::uint64_t seed = 0;
  double lindeberg_ratio = std::nan("");
  double std_error = std::nan("");
  bool lindeberg_warning = false;
};

// max w^2 delta^2 / sum w^2 delta^2.
inline double lindeberg_diagnostic(const PairWeightTable& pw) {
  double mx = 0.0, total = 0.0;
  for (const auto& p : pw.pairs) {
    const double v = p.term() * p.term();
    mx = std::max(mx, v);
    total += v;
  }
  if (!(total > 0.0)) throw DegenerateError("degenerate statistic: every slope is zero");
  return mx / total;
}

namespace detail {

inline std::vector<double> abs_terms(const PairWeightTable& pw) {
  std::vector<double> out;
  out.reserve(pw.pairs.size());
  for (const auto& p : pw.pairs) out.push_back(std::abs(p.term()));
  return out;
}

// Lindeberg ratio when defined; an all-zero table has none.
inline void fill_diagnostics(const PairWeightTable& pw, TestResult& r) {
  const double v = pw.variance();
  r.std_error = std::sqrt(v);
  if (v > 0.0) {
    r.lindeberg_ratio = lindeberg_diagnostic(pw);
    r.lindeberg_warning = r.lindeberg_ratio > kLindebergWarn;
  }
}

}  // namespace detail

// Under the null each pair's term w*delta keeps or flips its sign with
// probability 1/2, independently across distinct pairs. Since that law is
// symmetric, the permuted statistic is drawn as sum(+/- |w*delta|).
inline TestResult permutation_test_exact(const PairWeightTable& pw,
                                         Sidedness sided = Sidedness::two_sided) {
  if (pw.pairs.size() > tail::kExactMaxPairs)
    throw BudgetError("exact enumeration supports at most " +
                      std::to_string(tail::kExactMaxPairs) + " pairs (table has " +
                      std::to_string(pw.pairs.size()) + "); use the Monte Carlo method");
  TestResult r;
  r.method = TestMethod::exact;
  r.sidedness = sided;
  r.t_obs = pw.estimate();
  detail::fill_diagnostics(pw, r);
  const auto mags = detail::abs_terms(pw);
  const double tol = tail::tolerance(mags);
  const double t = r.t_obs;
  switch (sided) {
    case Sidedness::greater:
      r.p_value = tail::exact_probability(mags, 0.5, [&](double s) { return s >= t - tol; });
      break;
    case Sidedness::less:
      r.p_value = tail::exact_probability(mags, 0.5, [&](double s) { return s <= t + tol; });
      break;
    case Sidedness::two_sided:
      r.p_value = tail::exact_probability(
          mags, 0.5, [&](double s) { return std::abs(s) >= std::abs(t) - tol; });
      break;
  }
  r.p_value = std::min(1.0, r.p_value);
  return r;
}

// p = (1 + hits) / (1 + reps).
inline TestResult permutation_test_mc(const PairWeightTable& pw, std::size_t reps,
                                      std::uint64_t seed, Sidedness sided = Sidedness::two_sided,
                                      unsigned threads = 1) {
  if (reps < 1000) throw DomainError("Monte Carlo permutation test needs reps >= 1000");
  TestResult r;
  r.method = TestMethod::monte_carlo;
  r.sidedness = sided;
  r.mc_reps = reps;
  r.seed = seed;
  r.t_obs = pw.estimate();
  detail::fill_diagnostics(pw, r);
  const auto mags = detail::abs_terms(pw);
  const double tol = tail::tolerance(mags);
  const double t = r.t_obs;
  std::size_t hits = 0;
  switch (sided) {
    case Sidedness::greater:
      hits = tail::mc_count(mags, 0.5, false, reps, seed, threads,
                            [&](double s) { return s >= t - tol; });
      break;
    case Sidedness::less:
      hits = tail::mc_count(mags, 0.5, false, reps, seed, threads,
                            [&](double s) { return s <= t + tol; });
      break;
    case Sidedness::two_sided:
      hits = tail::mc_count(mags, 0.5, false, reps, seed, threads,
                            [&](double s) { return std::abs(s) >= std::abs(t) - tol; });
      break;
  }
  r.p_value = static_cast<double>(1 + hits) / static_cast<double>(1 + reps);
  return r;
}

// T_N / sqrt(sum w^2 delta^2) referred to the standard normal.
inline TestResult permutation_test_normal(const PairWeightTable& pw,
                                          Sidedness sided = Sidedness::two_sided) {
  const double v = pw.variance();
  if (!(v > 0.0)) throw DegenerateError("degenerate statistic: every slope is zero");
  TestResult r;
  r.method = TestMethod::normal;
  r.sidedness = sided;
  r.t_obs = pw.estimate();
  detail::fill_diagnostics(pw, r);
  const double s = r.t_obs / r.std_error;
  switch (sided) {
    case Sidedness::greater: r.p_value = tail::normal_upper(s); break;
    case Sidedness::less: r.p_value = tail::normal_upper(-s); break;
    case Sidedness::two_sided: r.p_value = std::min(1.0, 2.0 * tail::normal_upper(std::abs(s))); break;
  }
  return r;
}

struct TestOptions {
  TestMethod method = TestMethod::normal;
  Sidedness sidedness = Sidedness::two_sided;
  std::size_t reps = 10000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

inline TestResult permutation_test(const PairWeightTable& pw, const TestOptions& opts) {
  switch (opts.method) {
    case TestMethod::exact: return permutation_test_exact(pw, opts.sidedness);
    case TestMethod::monte_carlo:
      return permutation_test_mc(pw, opts.reps, opts.seed, opts.sidedness, opts.threads);
    case TestMethod::normal: return permutation_test_normal(pw, opts.sidedness);
  }
  return {};
}

}  // namespace acde
