#pragma once

#include <acde/dataset.hpp>
#include <acde/error.hpp>
#include <acde/inference.hpp>
#include <acde/matching.hpp>
#include <acde/parallel.hpp>
#include <acde/rng.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace acde::sim {

// Exposure-response curve E[Y(z)] shared by every design.
inline double response(double z) { return z > 5.0 ? (z - 5.0) * (z - 5.0) : 0.0; }

// Derivative of `response`.
inline double true_acde(double z0) { return z0 > 5.0 ? 2.0 * (z0 - 5.0) : 0.0; }

struct DgpOptions {
  // false removes the exposure term from the outcome (null model).
  bool exposure_effect = true;
};

// Draws N rows of the benchmark design of dimension d in {2, 3, 4}:
//   X ~ N(0, I_d), Z = 5 + a'X + e_z, Y = 3 + 15 b'X + response(Z) + e_y,
//   e_z ~ N(0, 4^2), e_y ~ N(0, 1),
// with a = (1,1), (1,1,1), (1,1,1,-0.5) and b = (1,-1), (1,-1,1), (1,-1,2,2).
// `normal` yields standard normal variates; per row the order is X_1..X_d,
// e_z, e_y.
template <class NormalSource>
Dataset generate_dataset(int d, std::size_t n, NormalSource&& normal, DgpOptions opts = {}) {
  static const std::vector<double> a2{1, 1}, b2{1, -1};
  static const std::vector<double> a3{1, 1, 1}, b3{1, -1, 1};
  static const std::vector<double> a4{1, 1, 1, -0.5}, b4{1, -1, 2, 2};
  const std::vector<double>* a = nullptr;
  const std::vector<double>* b = nullptr;
  switch (d) {
    case 2: a = &a2; b = &b2; break;
    case 3: a = &a3; b = &b3; break;
    case 4: a = &a4; b = &b4; break;
    default: throw DomainError("simulation dimension must be 2, 3 or 4 (got " + std::to_string(d) + ")");
  }
  const auto dim = static_cast<std::size_t>(d);
  std::vector<double> y(n), z(n), x(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    double zlin = 5.0, ylin = 3.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double xj = normal();
      x[i * dim + j] = xj;
      zlin += (*a)[j] * xj;
      ylin += 15.0 * (*b)[j] * xj;
    }
    z[i] = zlin + 4.0 * normal();
    y[i] = ylin + (opts.exposure_effect ? response(z[i]) : 0.0) + normal();
  }
  return Dataset(std::move(y), std::move(z), std::move(x), dim);
}

// Dataset for replication `replication` of a run seeded with `seed`.
inline Dataset generate_dataset(int d, std::size_t n, std::uint64_t seed,
                                std::uint64_t replication, DgpOptions opts = {}) {
  rng::CounterEngine engine(rng::derive_key(seed, {replication}));
  std::normal_distribution<double> gauss(0.0, 1.0);
  return generate_dataset(d, n, [&] { return gauss(engine); }, opts);
}

struct SimDesign {
  int d = 3;
  std::size_t n = 3000;
  std::vector<double> z0_list{4.5, 4.75, 5.0, 5.25, 5.5};
  double eta = 0.5;
  double kappa = 0.1;
  std::size_t reps = 500;
  double alpha = 0.05;
  std::uint64_t seed = 20240101;
  Metric metric = Metric::scaled_euclidean;
  TestMethod method = TestMethod::normal;
  Sidedness sidedness = Sidedness::two_sided;
  std::size_t mc_reps = 10000;
  bool null_outcome = false;
  unsigned threads = 1;

  void validate() const {
    if (d < 2 || d > 4) throw DomainError("simulation dimension must be 2, 3 or 4");
    if (n < 2) throw DomainError("simulation sample size must be >= 2");
    if (reps < 1) throw DomainError("simulation needs reps >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
    if (z0_list.empty()) throw DomainError("simulation needs at least one z0");
    MatchConfig{z0_list.front(), eta, kappa, metric}.validate();
  }
};

struct SimCell {
  double z0 = 0.0;
  double true_acde = 0.0;
  double mean_estimate = 0.0;
  double abs_bias = 0.0;
  double rmse = 0.0;
  double rejection_rate = 0.0;
  std::size_t reps_used = 0;
  std::size_t reps_excluded = 0;
};

struct SimReport {
  SimDesign design;
  std::vector<SimCell> cells;  // one per z0, in design order
};

// Outcome of one (replication, z0) pipeline run.
struct PipelineOutcome {
  bool ok = false;
  double estimate = 0.0;
  double p_value = 1.0;
};

inline PipelineOutcome run_pipeline(const Dataset& ds, double z0, const SimDesign& design,
                                    std::uint64_t test_seed) {
  PipelineOutcome out;
  try {
    MatchOptions mo;
    mo.on_unmatched = OnUnmatched::drop;
    const MatchedSet ms = find_matches(ds, {z0, design.eta, design.kappa, design.metric}, mo);
    if (ms.triplets.empty()) return out;
    const PairWeightTable pw = pair_weights(ds, ms);
    out.estimate = estimate_acde(ds, ms).acde_hat;
    TestOptions to;
    to.method = design.method;
    to.sidedness = design.sidedness;
    to.reps = design.mc_reps;
    to.seed = test_seed;
    out.p_value = permutation_test(pw, to).p_value;
    out.ok = true;
  } catch (const InfeasibleError&) {
  } catch (const DegenerateError&) {
  }
  return out;
}

// Replication r draws its data from stream (seed, r) and its Monte Carlo test
// from (seed, r, z0 index, 1), so the report does not depend on the thread
// count and extending `reps` keeps earlier replications intact.
inline SimReport run_experiment(const SimDesign& design) {
  design.validate();
  const std::size_t nz = design.z0_list.size();
  std::vector<PipelineOutcome> outcomes(design.reps * nz);
  parallel_for(design.reps, design.threads, [&](std::size_t r) {
    const Dataset ds = generate_dataset(design.d, design.n, design.seed, r,
                                        DgpOptions{!design.null_outcome});
    for (std::size_t k = 0; k < nz; ++k)
      outcomes[r * nz + k] =
          run_pipeline(ds, design.z0_list[k], design, rng::derive_key(design.seed, {r, k, 1}));
  });

  SimReport report;
  report.design = design;
  for (std::size_t k = 0; k < nz; ++k) {
    SimCell cell;
    cell.z0 = design.z0_list[k];
    cell.true_acde = design.null_outcome ? 0.0 : true_acde(cell.z0);
    double sum = 0.0, sq = 0.0;
    std::size_t rejections = 0;
    for (std::size_t r = 0; r < design.reps; ++r) {
      const auto& o = outcomes[r * nz + k];
      if (!o.ok) {
        ++cell.reps_excluded;
        continue;
      }
      ++cell.reps_used;
      sum += o.estimate;
      const double err = o.estimate - cell.true_acde;
      sq += err * err;
      if (o.p_value <= design.alpha) ++rejections;
    }
    if (static_cast<double>(cell.reps_excluded) > 0.05 * static_cast<double>(design.reps))
      throw InfeasibleError("design infeasible: " + std::to_string(cell.reps_excluded) + " of " +
                            std::to_string(design.reps) + " replications failed at z0=" +
                            csv::format_double(cell.z0));
    const double used = static_cast<double>(cell.reps_used);
    cell.mean_estimate = sum / used;
    cell.abs_bias = std::abs(cell.mean_estimate - cell.true_acde);
    cell.rmse = std::sqrt(sq / used);
    cell.rejection_rate = static_cast<double>(rejections) / used;
    report.cells.push_back(cell);
  }
  return report;
}

// Five exposure levels, N = 3000, d = 3, eta = 0.5, kappa = 0.1, 500 reps.
inline SimDesign table1_design() { return SimDesign{}; }

// z0 = 5 across (N, eta) in {(3000, .5), (6000, .45), (10000, .4)} x d in {2, 3, 4},
// ordered N-major.
inline std::vector<SimDesign> table2_designs() {
  std::vector<SimDesign> out;
  const std::pair<std::size_t, double> sizes[] = {{3000, 0.5}, {6000, 0.45}, {10000, 0.4}};
  for (const auto& [n, eta] : sizes)
    for (int d : {2, 3, 4}) {
      SimDesign s;
      s.d = d;
      s.n = n;
      s.eta = eta;
      s.z0_list = {5.0};
      out.push_back(s);
    }
  return out;
}

// Points (z, response(z)) on a uniform grid, for plotting.
inline std::vector<std::pair<double, double>> response_curve(double lo, double hi, std::size_t points) {
  std::vector<std::pair<double, double>> out;
  if (points < 2) throw DomainError("curve needs at least 2 points");
  for (std::size_t k = 0; k < points; ++k) {
    const double z = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
    out.emplace_back(z, response(z));
  }
  return out;
}

}  // namespace acde::sim
