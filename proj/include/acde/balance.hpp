#pragma once

#include <acde/dataset.hpp>
#include <acde/error.hpp>
#include <acde/matching.hpp>
#include <acde/parallel.hpp>

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace acde {

// Good balance: every per-covariate mean BASMD at or below this value.
inline constexpr double kBalanceThreshold = 0.1;

using CovariateRows = std::vector<std::span<const double>>;

// Absolute standardized mean difference per covariate:
// |mean_a - mean_b| / sqrt((var_a + var_b) / 2), sample variances with an N-1
// denominator (0 for a group of one). 0/0 is reported as 0; a nonzero
// difference over a zero pooled SD is +inf.
inline std::vector<double> asmd(const CovariateRows& a, const CovariateRows& b) {
  if (a.empty() || b.empty()) throw DomainError("asmd: both groups must be nonempty");
  const std::size_t d = a.front().size();
  auto moments = [d](const CovariateRows& g, std::vector<double>& mean, std::vector<double>& var) {
    mean.assign(d, 0.0);
    var.assign(d, 0.0);
    for (const auto& row : g)
      for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
    for (auto& m : mean) m /= static_cast<double>(g.size());
    if (g.size() < 2) return;
    for (const auto& row : g)
      for (std::size_t j = 0; j < d; ++j) {
        const double dev = row[j] - mean[j];
        var[j] += dev * dev;
      }
    for (auto& v : var) v /= static_cast<double>(g.size() - 1);
  };
  std::vector<double> ma, va, mb, vb;
  moments(a, ma, va);
  moments(b, mb, vb);

  std::vector<double> out(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = std::abs(ma[j] - mb[j]);
    const double pooled = std::sqrt((va[j] + vb[j]) / 2.0);
    if (pooled > 0.0)
      out[j] = diff / pooled;
    else
      out[j] = diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return out;
}

struct BlockBalance {
  std::size_t block = 0;
  std::size_t n_triplets = 0;
  std::vector<double> x_vs_x1;
  std::vector<double> x_vs_x2;
  std::vector<double> x1_vs_x2;
  std::vector<double> basmd;  // mean of the three pairwise ASMDs
};

// Triplet BASMD for the triplets whose index individual i falls in `block`.
inline BlockBalance basmd_block(const Dataset& ds, const MatchedSet& ms,
                                std::span<const std::size_t> triplet_ids) {
  if (triplet_ids.empty()) throw DomainError("basmd_block: block has no triplets");
  CovariateRows x, x1, x2;
  for (std::size_t t : triplet_ids) {
    const auto& tr = ms.triplets[t];
    x.push_back(ds.x(tr.i));
    x1.push_back(ds.x(tr.i1));
    x2.push_back(ds.x(tr.i2));
  }
  BlockBalance b;
  b.n_triplets = triplet_ids.size();
  b.x_vs_x1 = asmd(x, x1);
  b.x_vs_x2 = asmd(x, x2);
  b.x1_vs_x2 = asmd(x1, x2);
  b.basmd.resize(ds.dim());
  for (std::size_t j = 0; j < ds.dim(); ++j)
    b.basmd[j] = (b.x_vs_x1[j] + b.x_vs_x2[j] + b.x1_vs_x2[j]) / 3.0;
  return b;
}

struct BalanceReport {
  std::vector<BlockBalance> per_block;     // nonempty blocks only, ascending
  std::vector<std::size_t> empty_blocks;
  std::vector<double> per_covariate_mean;  // (1/K_eff) sum_k |BASMD_k|
  double average_basmd = 0.0;
  bool threshold_pass = false;
  bool infinite = false;  // some ASMD had a zero pooled SD with a nonzero difference
  std::vector<std::string> warnings;

  std::size_t effective_blocks() const noexcept { return per_block.size(); }
};

inline BalanceReport average_basmd(const Dataset& ds, const MatchedSet& ms,
                                   const BlockPartition& bp) {
  std::vector<std::vector<std::size_t>> by_block(bp.K);
  for (std::size_t t = 0; t < ms.triplets.size(); ++t)
    by_block[bp.block_of(ds.z(ms.triplets[t].i))].push_back(t);

  BalanceReport r;
  const std::size_t d = ds.dim();
  r.per_covariate_mean.assign(d, 0.0);
  for (std::size_t k = 0; k < bp.K; ++k) {
    if (by_block[k].empty()) {
      r.empty_blocks.push_back(k);
      continue;
    }
    BlockBalance b = basmd_block(ds, ms, by_block[k]);
    b.block = k;
    for (std::size_t j = 0; j < d; ++j) r.per_covariate_mean[j] += std::abs(b.basmd[j]);
    r.per_block.push_back(std::move(b));
  }
  if (r.per_block.empty()) throw InfeasibleError("every exposure block is empty of matched triplets");
  if (!r.empty_blocks.empty())
    r.warnings.push_back(std::to_string(r.empty_blocks.size()) +
                         " block(s) without matched triplets excluded; effective K = " +
                         std::to_string(r.per_block.size()));

  const double k_eff = static_cast<double>(r.per_block.size());
  double total = 0.0;
  r.threshold_pass = true;
  for (double& m : r.per_covariate_mean) {
    m /= k_eff;
    total += m;
    if (std::isinf(m)) r.infinite = true;
    if (!(m <= kBalanceThreshold)) r.threshold_pass = false;
  }
  r.average_basmd = total / static_cast<double>(d);
  return r;
}

struct GridPoint {
  double eta = 0.0;
  double kappa = 0.0;
  double average_basmd = std::numeric_limits<double>::quiet_NaN();
  bool feasible = false;
  std::string reason;  // empty when feasible
  std::size_t dropped = 0;
};

struct TuneResult {
  std::vector<GridPoint> grid;  // eta-major, in the order supplied
  double eta = 0.0;
  double kappa = 0.0;
  double average_basmd = 0.0;
  MatchedSet matched;
  BalanceReport balance;
};

struct TuneOptions {
  OnUnmatched on_unmatched = OnUnmatched::fail;
  Metric metric = Metric::scaled_euclidean;
  bool allow_self_match = true;
  unsigned threads = 1;
};

// Grid search for the (eta, kappa) minimizing the average BASMD. Candidates
// whose matching fails, drops more than 5% of individuals, or yields an
// infinite ASMD are infeasible. Ties go to the smaller eta, then smaller kappa.
inline TuneResult tune_hyperparams(const Dataset& ds, double z0, const std::vector<double>& eta_grid,
                                   const std::vector<double>& kappa_grid, const BlockPartition& bp,
                                   const TuneOptions& opts = {}) {
  if (eta_grid.empty() || kappa_grid.empty()) throw DomainError("tuning grids must be nonempty");
  for (double e : eta_grid)
    if (!(e > 0.0)) throw DomainError("every eta in the grid must be > 0");
  for (double k : kappa_grid)
    if (!(k > 0.0 && k < 1.0)) throw DomainError("every kappa in the grid must lie in (0, 1)");

  const std::size_t nk = kappa_grid.size();
  const std::size_t total = eta_grid.size() * nk;
  std::vector<GridPoint> grid(total);
  std::vector<std::optional<std::pair<MatchedSet, BalanceReport>>> fits(total);

  parallel_for(total, opts.threads, [&](std::size_t g) {
    GridPoint& pt = grid[g];
    pt.eta = eta_grid[g / nk];
    pt.kappa = kappa_grid[g % nk];
    const MatchConfig cfg{z0, pt.eta, pt.kappa, opts.metric};
    MatchOptions mo;
    mo.on_unmatched = opts.on_unmatched;
    mo.allow_self_match = opts.allow_self_match;
    try {
      MatchedSet ms = find_matches(ds, cfg, mo);
      pt.dropped = ms.dropped.size();
      if (ms.dropped_fraction() > 0.05) {
        pt.reason = "dropped " + std::to_string(ms.dropped.size()) + " of " +
                    std::to_string(ds.size()) + " individuals (> 5%)";
        return;
      }
      BalanceReport br = average_basmd(ds, ms, bp);
      pt.average_basmd = br.average_basmd;
      if (br.infinite) {
        pt.reason = "infinite ASMD (zero pooled SD with nonzero mean difference)";
        return;
      }
      pt.feasible = true;
      fits[g].emplace(std::move(ms), std::move(br));
    } catch (const InfeasibleError& e) {
      if (!e.indices().empty())
        pt.reason = std::to_string(e.indices().size()) + " individual(s) without a feasible match";
      else
        pt.reason = e.what();
    }
  });

  std::optional<std::size_t> best;
  for (std::size_t g = 0; g < total; ++g) {
    if (!grid[g].feasible) continue;
    if (!best) {
      best = g;
      continue;
    }
    const GridPoint& a = grid[g];
    const GridPoint& b = grid[*best];
    if (a.average_basmd < b.average_basmd ||
        (a.average_basmd == b.average_basmd &&
         (a.eta < b.eta || (a.eta == b.eta && a.kappa < b.kappa))))
      best = g;
  }
  if (!best) {
    std::string msg = "no feasible (eta, kappa) candidate:";
    for (const auto& pt : grid)
      msg += "\n  eta=" + csv::format_double(pt.eta) + " kappa=" + csv::format_double(pt.kappa) +
             ": " + pt.reason;
    throw InfeasibleError(msg);
  }

  TuneResult r;
  r.eta = grid[*best].eta;
  r.kappa = grid[*best].kappa;
  r.average_basmd = grid[*best].average_basmd;
  r.matched = std::move(fits[*best]->first);
  r.balance = std::move(fits[*best]->second);
  r.grid = std::move(grid);
  return r;
}

}  // namespace acde
