#pragma once

// Gamma-sensitivity bounds for unmeasured confounding. Within each matched
// pair the probability that the observed exposure ordering occurred is only
// known to lie in [1/(1+Gamma), Gamma/(1+Gamma)]. T+ (T-) puts the largest
// (smallest) admissible probability on the sign agreeing with the observed
// effect, which brackets the null tail probability of the estimate.

#include <acde/error.hpp>
#include <acde/inference.hpp>
#include <acde/matching.hpp>
#include <acde/tail.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace acde {

enum class SensitivityMethod { exact, monte_carlo, normal };
enum class Direction { greater, less };

struct SensitivityResult {
  double gamma = 1.0;
  double p_lower = 0.0;
  double p_upper = 0.0;
  SensitivityMethod method = SensitivityMethod::monte_carlo;
  Direction direction = Direction::greater;
};

struct GammaCurve {
  std::vector<SensitivityResult> grid;  // ascending in gamma
  std::optional<double> breakeven_gamma;
  double alpha = 0.05;
};

struct SensitivityOptions {
  SensitivityMethod method = SensitivityMethod::monte_carlo;
  std::size_t reps = 10000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

// (1/(1+Gamma), Gamma/(1+Gamma)).
inline std::pair<double, double> bound_probs(double gamma) {
  if (!(gamma >= 1.0) || std::isinf(gamma)) throw DomainError("gamma must be a finite value >= 1");
  return {1.0 / (1.0 + gamma), gamma / (1.0 + gamma)};
}

// Upper and lower tail bounds at a = |t_obs|. A negative estimate is handled by
// flipping every slope so the bounds always concern the observed direction.
// Monte Carlo uses the same streams for every Gamma (and the same streams as
// permutation_test_mc), so at Gamma = 1 both bounds equal the one-sided
// permutation p-value draw for draw, and the bounds are monotone in Gamma.
inline SensitivityResult sensitivity_pvalues(const PairWeightTable& pw, double gamma,
                                             const SensitivityOptions& opts = {}) {
  const auto [p_minus, p_plus] = bound_probs(gamma);
  const double b2 = pw.variance();
  if (!(b2 > 0.0)) throw DegenerateError("degenerate statistic: every slope is zero");

  SensitivityResult r;
  r.gamma = gamma;
  r.method = opts.method;
  const double t_obs = pw.estimate();
  r.direction = t_obs < 0.0 ? Direction::less : Direction::greater;
  const bool mirrored = r.direction == Direction::less;
  const double a = std::abs(t_obs);

  std::vector<double> mags;
  mags.reserve(pw.pairs.size());
  double b1 = 0.0;
  for (const auto& p : pw.pairs) {
    mags.push_back(p.weight * std::abs(p.delta));
    b1 += mags.back();
  }
  const double tol = tail::tolerance(mags);
  auto hit = [&](double s) { return s >= a - tol; };

  switch (opts.method) {
    case SensitivityMethod::exact:
      if (mags.size() > tail::kExactMaxPairs)
        throw BudgetError("exact sensitivity supports at most " +
                          std::to_string(tail::kExactMaxPairs) + " pairs; use Monte Carlo");
      r.p_upper = std::min(1.0, tail::exact_probability(mags, p_plus, hit));
      r.p_lower = std::min(1.0, tail::exact_probability(mags, p_minus, hit));
      break;
    case SensitivityMethod::monte_carlo: {
      if (opts.reps < 1000) throw DomainError("Monte Carlo sensitivity needs reps >= 1000");
      const double denom = static_cast<double>(1 + opts.reps);
      r.p_upper = static_cast<double>(1 + tail::mc_count(mags, p_plus, mirrored, opts.reps,
                                                         opts.seed, opts.threads, hit)) / denom;
      r.p_lower = static_cast<double>(1 + tail::mc_count(mags, p_minus, mirrored, opts.reps,
                                                         opts.seed, opts.threads, hit)) / denom;
      break;
    }
    case SensitivityMethod::normal: {
      auto upper_tail = [&](double prob) {
        const double mean = (2.0 * prob - 1.0) * b1;
        const double sd = std::sqrt(4.0 * prob * (1.0 - prob) * b2);
        return tail::normal_upper((a - mean) / sd);
      };
      r.p_upper = upper_tail(p_plus);
      r.p_lower = upper_tail(p_minus);
      break;
    }
  }
  return r;
}

// Evaluates the bounds along an ascending Gamma grid. The break-even Gamma is
// the first grid value whose upper bound exceeds alpha.
inline GammaCurve gamma_breakeven(const PairWeightTable& pw, double alpha,
                                  const std::vector<double>& gamma_grid,
                                  const SensitivityOptions& opts = {}) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (gamma_grid.empty()) throw DomainError("gamma grid is empty");
  for (std::size_t g = 0; g < gamma_grid.size(); ++g) {
    if (!(gamma_grid[g] >= 1.0)) throw DomainError("gamma grid values must be >= 1");
    if (g > 0 && !(gamma_grid[g] > gamma_grid[g - 1]))
      throw DomainError("gamma grid must be strictly ascending");
  }
  GammaCurve curve;
  curve.alpha = alpha;
  for (double gamma : gamma_grid) {
    curve.grid.push_back(sensitivity_pvalues(pw, gamma, opts));
    if (!curve.breakeven_gamma && curve.grid.back().p_upper > alpha) curve.breakeven_gamma = gamma;
  }
  return curve;
}

}  // namespace acde
