#pragma once

#include <acde/dataset.hpp>
#include <acde/error.hpp>
#include <acde/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace acde {

enum class Metric { scaled_euclidean, euclidean, custom_precomputed };

struct MatchConfig {
  double z0 = 0.0;
  double eta = 0.0;    // caliper radius
  double kappa = 0.0;  // inner-caliper fraction
  Metric metric = Metric::scaled_euclidean;

  void validate() const {
    if (!std::isfinite(z0)) throw DomainError("z0 must be finite");
    if (!(eta > 0.0) || !std::isfinite(eta)) throw DomainError("eta must be > 0");
    if (!(kappa > 0.0 && kappa < 1.0)) throw DomainError("kappa must lie in (0, 1)");
  }
};

struct Interval {
  double lo;
  double hi;
  bool contains(double v) const noexcept { return lo <= v && v <= hi; }
};

struct Windows {
  Interval lower;
  Interval upper;
};

// lower = [z0 - eta, z0 - kappa*eta], upper = [z0 + kappa*eta, z0 + eta].
inline Windows candidate_windows(const MatchConfig& cfg) {
  cfg.validate();
  const double inner = cfg.kappa * cfg.eta;
  return {{cfg.z0 - cfg.eta, cfg.z0 - inner}, {cfg.z0 + inner, cfg.z0 + cfg.eta}};
}

// Row-major N x N matrix of user supplied covariate distances.
class DistanceMatrix {
 public:
  DistanceMatrix(std::size_t n, std::vector<double> values) : n_(n), values_(std::move(values)) {
    if (values_.size() != n_ * n_) throw DomainError("distance matrix must be N x N");
  }
  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t a, std::size_t b) const { return values_[a * n_ + b]; }

 private:
  std::size_t n_;
  std::vector<double> values_;
};

// Distance functor used by every matcher. Scaled and raw Euclidean distances
// are compared as squared sums, which preserves the argmin.
class CovariateDistance {
 public:
  CovariateDistance(const Dataset& ds, Metric metric, const DistanceMatrix* custom = nullptr)
      : ds_(ds), metric_(metric), custom_(custom) {
    if (metric_ == Metric::custom_precomputed) {
      if (!custom_) throw DomainError("custom-precomputed metric needs a distance matrix");
      if (custom_->size() != ds.size())
        throw DomainError("distance matrix size does not match the dataset");
    }
    if (metric_ == Metric::scaled_euclidean) scale_ = ds.covariate_scale();
  }

  double operator()(std::size_t a, std::size_t b) const {
    if (metric_ == Metric::custom_precomputed) return (*custom_)(a, b);
    const auto xa = ds_.x(a);
    const auto xb = ds_.x(b);
    double s = 0.0;
    for (std::size_t j = 0; j < xa.size(); ++j) {
      double diff = xa[j] - xb[j];
      if (metric_ == Metric::scaled_euclidean) diff /= scale_[j];
      s += diff * diff;
    }
    return s;
  }

  // Same value as operator(), but gives up (returning +inf) once the partial
  // sum exceeds `bound`. Partial sums only grow, so this never changes which
  // candidate wins, including ties.
  double bounded(std::size_t a, std::size_t b, double bound) const {
    if (metric_ == Metric::custom_precomputed) return (*custom_)(a, b);
    const auto xa = ds_.x(a);
    const auto xb = ds_.x(b);
    double s = 0.0;
    for (std::size_t j = 0; j < xa.size(); ++j) {
      double diff = xa[j] - xb[j];
      if (metric_ == Metric::scaled_euclidean) diff /= scale_[j];
      s += diff * diff;
      if (s > bound) return std::numeric_limits<double>::infinity();
    }
    return s;
  }

 private:
  const Dataset& ds_;
  Metric metric_;
  const DistanceMatrix* custom_;
  std::vector<double> scale_;
};

enum class OnUnmatched { fail, drop };

struct MatchOptions {
  OnUnmatched on_unmatched = OnUnmatched::fail;
  // When false, i is never its own i1 or i2.
  bool allow_self_match = true;
  unsigned threads = 1;
  const DistanceMatrix* distances = nullptr;
};

struct MatchTriplet {
  std::size_t i;
  std::size_t i1;  // lower-window match
  std::size_t i2;  // upper-window match

  friend bool operator==(const MatchTriplet&, const MatchTriplet&) = default;
};

struct MatchedSet {
  MatchConfig config;
  std::vector<MatchTriplet> triplets;  // ascending in i
  std::vector<std::size_t> dropped;    // ascending
  std::vector<std::string> warnings;

  std::size_t total() const noexcept { return triplets.size() + dropped.size(); }
  double dropped_fraction() const noexcept {
    return total() == 0 ? 0.0 : static_cast<double>(dropped.size()) / static_cast<double>(total());
  }
};

namespace detail {

inline constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

// Nearest candidate to i, ties to the smallest index.
inline std::size_t nearest(const CovariateDistance& dist, std::size_t i,
                           const std::vector<std::size_t>& candidates, bool allow_self) {
  std::size_t best = kNone;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c : candidates) {
    if (!allow_self && c == i) continue;
    const double dd = best == kNone ? dist(i, c) : dist.bounded(i, c, best_d);
    if (best == kNone || dd < best_d || (dd == best_d && c < best)) {
      best = c;
      best_d = dd;
    }
  }
  return best;
}

// Indices whose exposure lies in the closed interval, ascending.
inline std::vector<std::size_t> window_members(const std::vector<std::size_t>& by_z,
                                               const Dataset& ds, Interval w) {
  auto lo = std::lower_bound(by_z.begin(), by_z.end(), w.lo,
                             [&](std::size_t a, double v) { return ds.z(a) < v; });
  auto hi = std::upper_bound(lo, by_z.end(), w.hi,
                             [&](double v, std::size_t a) { return v < ds.z(a); });
  std::vector<std::size_t> out(lo, hi);
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string join_indices(const std::vector<std::size_t>& v, std::size_t limit = 50) {
  std::string s;
  for (std::size_t k = 0; k < v.size() && k < limit; ++k) {
    if (k) s += ", ";
    s += std::to_string(v[k]);
  }
  if (v.size() > limit) s += ", ... (" + std::to_string(v.size()) + " total)";
  return s;
}

}  // namespace detail

// Nearest-neighbour triplet matching with replacement. The exposure index is
// sorted once so each individual only scans the two caliper windows.
inline MatchedSet find_matches(const Dataset& ds, const MatchConfig& cfg,
                               const MatchOptions& opts = {}) {
  const Windows win = candidate_windows(cfg);
  const CovariateDistance dist(ds, cfg.metric, opts.distances);
  const std::size_t n = ds.size();

  std::vector<std::size_t> by_z(n);
  std::iota(by_z.begin(), by_z.end(), std::size_t{0});
  std::stable_sort(by_z.begin(), by_z.end(),
                   [&](std::size_t a, std::size_t b) { return ds.z(a) < ds.z(b); });
  const auto lower = detail::window_members(by_z, ds, win.lower);
  const auto upper = detail::window_members(by_z, ds, win.upper);

  std::vector<std::size_t> m1(n, detail::kNone), m2(n, detail::kNone);
  parallel_for(n, opts.threads, [&](std::size_t i) {
    m1[i] = detail::nearest(dist, i, lower, opts.allow_self_match);
    m2[i] = detail::nearest(dist, i, upper, opts.allow_self_match);
  });

  MatchedSet ms;
  ms.config = cfg;
  for (std::size_t i = 0; i < n; ++i) {
    if (m1[i] == detail::kNone || m2[i] == detail::kNone)
      ms.dropped.push_back(i);
    else
      ms.triplets.push_back({i, m1[i], m2[i]});
  }

  if (!ms.dropped.empty()) {
    if (opts.on_unmatched == OnUnmatched::fail)
      throw InfeasibleError("no feasible match in the caliper windows for individuals: " +
                                detail::join_indices(ms.dropped),
                            ms.dropped);
    if (ms.dropped_fraction() > 0.05)
      ms.warnings.push_back(std::to_string(ms.dropped.size()) + " of " + std::to_string(n) +
                            " individuals dropped (no feasible match)");
  }
  return ms;
}

struct EstimateResult {
  double acde_hat = 0.0;
  std::vector<double> per_individual;  // aligned with MatchedSet::triplets
  std::size_t n_used = 0;
};

inline double triplet_slope(const Dataset& ds, const MatchTriplet& t) {
  return (ds.y(t.i2) - ds.y(t.i1)) / (ds.z(t.i2) - ds.z(t.i1));
}

// Mean of the per-individual slopes (Y_i2 - Y_i1) / (Z_i2 - Z_i1).
inline EstimateResult estimate_acde(const Dataset& ds, const MatchedSet& ms) {
  if (ms.triplets.empty()) throw InfeasibleError("matched set has no triplets");
  EstimateResult r;
  r.n_used = ms.triplets.size();
  r.per_individual.reserve(r.n_used);
  double sum = 0.0;
  for (const auto& t : ms.triplets) {
    const double s = triplet_slope(ds, t);
    r.per_individual.push_back(s);
    sum += s;
  }
  r.acde_hat = sum / static_cast<double>(r.n_used);
  return r;
}

struct WeightedPair {
  std::size_t k;        // lower-window individual
  std::size_t l;        // upper-window individual
  std::size_t count;    // triplets mapping to (k, l)
  double weight;        // count / n_base
  double delta;         // (Y_k - Y_l) / (Z_k - Z_l)

  double term() const noexcept { return weight * delta; }
};

// Distinct matched pairs with their multiplicities. Sufficient for the point
// estimate, the permutation test and the sensitivity bounds.
struct PairWeightTable {
  std::vector<WeightedPair> pairs;  // sorted by (k, l)
  std::size_t n_base = 0;

  double estimate() const {
    double s = 0.0;
    for (const auto& p : pairs) s += p.term();
    return s;
  }
  std::vector<double> terms() const {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(p.term());
    return out;
  }
  // Sum of w^2 delta^2, the null variance of the sign-flip statistic.
  double variance() const {
    double s = 0.0;
    for (const auto& p : pairs) s += p.term() * p.term();
    return s;
  }
};

// Builds a table directly from (weight, delta) values, e.g. for synthetic
// inference inputs. Pair indices are synthetic.
inline PairWeightTable make_pair_table(const std::vector<double>& weights,
                                       const std::vector<double>& deltas) {
  if (weights.size() != deltas.size()) throw DomainError("weights and deltas differ in length");
  PairWeightTable pw;
  pw.n_base = weights.size();
  for (std::size_t p = 0; p < weights.size(); ++p) {
    if (!(weights[p] > 0.0)) throw DomainError("pair weights must be positive");
    pw.pairs.push_back({p, p, 1, weights[p], deltas[p]});
  }
  return pw;
}

inline PairWeightTable pair_weights(const Dataset& ds, const MatchedSet& ms) {
  if (ms.triplets.empty()) throw InfeasibleError("matched set has no triplets");
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts;
  for (const auto& t : ms.triplets) ++counts[{t.i1, t.i2}];

  PairWeightTable pw;
  pw.n_base = ms.triplets.size();
  pw.pairs.reserve(counts.size());
  const double n = static_cast<double>(pw.n_base);
  for (const auto& [kl, c] : counts) {
    const auto [k, l] = kl;
    pw.pairs.push_back(
        {k, l, c, static_cast<double>(c) / n, (ds.y(k) - ds.y(l)) / (ds.z(k) - ds.z(l))});
  }
  return pw;
}

}  // namespace acde
