#include "support.hpp"

#include <gtest/gtest.h>

using namespace acde;

TEST(Dgp, ZeroNoiseSkeleton) {
  for (int d : {2, 3, 4}) {
    const auto ds = sim::generate_dataset(d, 5, [] { return 0.0; });
    for (std::size_t i = 0; i < ds.size(); ++i) {
      EXPECT_EQ(ds.z(i), 5.0);
      EXPECT_EQ(ds.y(i), 3.0);
    }
  }
}

TEST(Dgp, StructuralCoefficients) {
  // Feed X = e_j and no noise to read the coefficient vectors back.
  const std::vector<std::vector<double>> a{{1, 1}, {1, 1, 1}, {1, 1, 1, -0.5}};
  const std::vector<std::vector<double>> b{{1, -1}, {1, -1, 1}, {1, -1, 2, 2}};
  for (int d = 2; d <= 4; ++d) {
    for (int j = 0; j < d; ++j) {
      int calls = 0;
      // Draw order per row: X_1..X_d, then the exposure and outcome noise.
      auto src = [&] { return calls++ == j ? 1.0 : 0.0; };
      const auto ds = sim::generate_dataset(d, 2, src);
      const double z = 5.0 + a[d - 2][j];
      EXPECT_DOUBLE_EQ(ds.z(0), z) << "d=" << d << " j=" << j;
      EXPECT_DOUBLE_EQ(ds.y(0), 3.0 + 15.0 * b[d - 2][j] + sim::response(z)) << "d=" << d << " j=" << j;
    }
  }
}

TEST(Dgp, UnsupportedDimension) {
  EXPECT_THROW(sim::generate_dataset(1, 10, 1, 0), DomainError);
  EXPECT_THROW(sim::generate_dataset(5, 10, 1, 0), DomainError);
}

TEST(Dgp, MomentsAtLargeN) {
  const auto ds = sim::generate_dataset(3, 100000, 20240101, 0);
  double mean = 0.0;
  for (double z : ds.exposures()) mean += z;
  mean /= static_cast<double>(ds.size());
  double ss = 0.0;
  for (double z : ds.exposures()) ss += (z - mean) * (z - mean);
  const double sd = std::sqrt(ss / static_cast<double>(ds.size() - 1));
  EXPECT_NEAR(mean, 5.0, 0.05);
  EXPECT_NEAR(sd, std::sqrt(19.0), 0.02 * std::sqrt(19.0));
}

TEST(Dgp, DeterministicPerSeedAndReplication) {
  const auto a = sim::generate_dataset(4, 500, 9, 3);
  const auto b = sim::generate_dataset(4, 500, 9, 3);
  const auto c = sim::generate_dataset(4, 500, 9, 4);
  EXPECT_EQ(a.outcomes(), b.outcomes());
  EXPECT_EQ(a.exposures(), b.exposures());
  EXPECT_EQ(a.covariates(), b.covariates());
  EXPECT_NE(a.exposures(), c.exposures());
}

TEST(Dgp, NullOutcomeDropsExposureTerm) {
  int calls = 0;
  const auto ds = sim::generate_dataset(3, 2, [&] { return ++calls == 4 ? 1.0 : 0.0; }, {false});
  EXPECT_DOUBLE_EQ(ds.z(0), 9.0);  // eps_z = 4 * 1
  EXPECT_DOUBLE_EQ(ds.y(0), 3.0);
}

TEST(TrueAcde, PaperValues) {
  EXPECT_EQ(sim::true_acde(4.5), 0.0);
  EXPECT_EQ(sim::true_acde(4.75), 0.0);
  EXPECT_EQ(sim::true_acde(5.0), 0.0);
  EXPECT_EQ(sim::true_acde(5.25), 0.5);
  EXPECT_EQ(sim::true_acde(5.5), 1.0);
}

TEST(Designs, Presets) {
  const auto t1 = sim::table1_design();
  EXPECT_EQ(t1.n, 3000u);
  EXPECT_EQ(t1.d, 3);
  EXPECT_EQ(t1.reps, 500u);
  EXPECT_EQ(t1.z0_list, (std::vector<double>{4.5, 4.75, 5.0, 5.25, 5.5}));
  EXPECT_EQ(t1.eta, 0.5);
  EXPECT_EQ(t1.kappa, 0.1);
  const auto t2 = sim::table2_designs();
  ASSERT_EQ(t2.size(), 9u);
  EXPECT_EQ(t2[0].n, 3000u);
  EXPECT_EQ(t2[0].d, 2);
  EXPECT_EQ(t2[8].n, 10000u);
  EXPECT_EQ(t2[8].d, 4);
  EXPECT_EQ(t2[8].eta, 0.4);
  EXPECT_EQ(t2[4].eta, 0.45);
  for (const auto& d : t2) EXPECT_EQ(d.z0_list, (std::vector<double>{5.0}));
}

TEST(RunExperiment, SingleReplicationMatchesDirectPipeline) {
  sim::SimDesign design;
  design.reps = 1;
  design.seed = 31;
  design.method = TestMethod::monte_carlo;
  design.mc_reps = 2000;
  const auto report = sim::run_experiment(design);
  const auto ds = sim::generate_dataset(design.d, design.n, design.seed, 0);
  ASSERT_EQ(report.cells.size(), design.z0_list.size());
  for (std::size_t k = 0; k < design.z0_list.size(); ++k) {
    const double z0 = design.z0_list[k];
    const auto ms = find_matches(ds, {z0, design.eta, design.kappa}, {.on_unmatched = OnUnmatched::drop});
    const auto pw = pair_weights(ds, ms);
    const double est = estimate_acde(ds, ms).acde_hat;
    const double p = permutation_test_mc(pw, 2000, rng::derive_key(31, {0, k, 1})).p_value;
    const auto& cell = report.cells[k];
    EXPECT_EQ(cell.mean_estimate, est);
    EXPECT_EQ(cell.rmse, std::abs(est - sim::true_acde(z0)));
    EXPECT_EQ(cell.rejection_rate, p <= 0.05 ? 1.0 : 0.0);
    EXPECT_EQ(cell.reps_used, 1u);
  }
}

TEST(RunExperiment, ThreadCountInvariantAndRmseDominatesBias) {
  sim::SimDesign design;
  design.n = 600;
  design.eta = 1.0;
  design.reps = 24;
  design.seed = 77;
  const auto a = sim::run_experiment(design);
  design.threads = 4;
  const auto b = sim::run_experiment(design);
  for (std::size_t k = 0; k < a.cells.size(); ++k) {
    EXPECT_EQ(a.cells[k].mean_estimate, b.cells[k].mean_estimate);
    EXPECT_EQ(a.cells[k].rmse, b.cells[k].rmse);
    EXPECT_EQ(a.cells[k].rejection_rate, b.cells[k].rejection_rate);
    EXPECT_GE(a.cells[k].rmse * a.cells[k].rmse, a.cells[k].abs_bias * a.cells[k].abs_bias * (1 - 1e-12));
  }
}

TEST(RunExperiment, ExtendingRepsKeepsEarlierReplications) {
  sim::SimDesign design;
  design.n = 400;
  design.eta = 1.0;
  design.z0_list = {5.5};
  design.seed = 5;
  design.reps = 1;
  const auto one = sim::run_experiment(design);
  design.reps = 2;
  const auto two = sim::run_experiment(design);
  // Replication 1 on its own equals the second half of the 2-rep run.
  const auto ds1 = sim::generate_dataset(3, 400, 5, 1);
  const auto ms = find_matches(ds1, {5.5, 1.0, 0.1}, {.on_unmatched = OnUnmatched::drop});
  const double est1 = estimate_acde(ds1, ms).acde_hat;
  EXPECT_NEAR(two.cells[0].mean_estimate, (one.cells[0].mean_estimate + est1) / 2.0, 1e-12);
}

TEST(RunExperiment, InfeasibleDesign) {
  sim::SimDesign design;
  design.n = 20;
  design.eta = 0.01;
  design.reps = 5;
  EXPECT_THROW(sim::run_experiment(design), InfeasibleError);
  design.d = 7;
  EXPECT_THROW(sim::run_experiment(design), DomainError);
}

TEST(ResponseCurve, Points) {
  const auto c = sim::response_curve(3.0, 7.0, 5);
  ASSERT_EQ(c.size(), 5u);
  EXPECT_EQ(c[0], (std::pair<double, double>{3.0, 0.0}));
  EXPECT_EQ(c[3], (std::pair<double, double>{6.0, 1.0}));
  EXPECT_EQ(c[4], (std::pair<double, double>{7.0, 4.0}));
}
