#pragma once

// CSV exports for every result type. Numbers use the shortest round-trip
// representation so outputs are byte-stable for identical inputs.

#include <acde/balance.hpp>
#include <acde/csv.hpp>
#include <acde/dataset.hpp>
#include <acde/inference.hpp>
#include <acde/matching.hpp>
#include <acde/sensitivity.hpp>
#include <acde/simulation.hpp>

#include <algorithm>
#include <ostream>
#include <string>

namespace acde::report {

using csv::format_double;

inline const char* to_string(TestMethod m) {
  switch (m) {
    case TestMethod::exact: return "exact";
    case TestMethod::monte_carlo: return "mc";
    case TestMethod::normal: return "normal";
  }
  return "?";
}

inline const char* to_string(Sidedness s) {
  switch (s) {
    case Sidedness::two_sided: return "two";
    case Sidedness::greater: return "greater";
    case Sidedness::less: return "less";
  }
  return "?";
}

inline const char* to_string(SensitivityMethod m) {
  switch (m) {
    case SensitivityMethod::exact: return "exact";
    case SensitivityMethod::monte_carlo: return "mc";
    case SensitivityMethod::normal: return "normal";
  }
  return "?";
}

inline const char* to_string(Direction d) { return d == Direction::greater ? "greater" : "less"; }

inline void write_matched_set(const Dataset& ds, const MatchedSet& ms, std::ostream& out) {
  out << "i,i1,i2,z_i1,z_i2,slope\n";
  for (const auto& t : ms.triplets)
    out << ds.id(t.i) << ',' << ds.id(t.i1) << ',' << ds.id(t.i2) << ',' << format_double(ds.z(t.i1))
        << ',' << format_double(ds.z(t.i2)) << ',' << format_double(triplet_slope(ds, t)) << '\n';
}

inline void write_pair_weights(const Dataset& ds, const PairWeightTable& pw, std::ostream& out) {
  out << "k,l,weight,delta\n";
  for (const auto& p : pw.pairs)
    out << ds.id(p.k) << ',' << ds.id(p.l) << ',' << format_double(p.weight) << ','
        << format_double(p.delta) << '\n';
}

// K_eff * d detail rows, then d per-covariate `mean` rows and the `average`
// and `threshold_pass` rows.
inline void write_balance(const BalanceReport& br, std::ostream& out) {
  out << "block,covariate,n_triplets,x_vs_x1,x_vs_x2,x1_vs_x2,basmd\n";
  for (const auto& b : br.per_block)
    for (std::size_t j = 0; j < b.basmd.size(); ++j)
      out << b.block << ",x" << j + 1 << ',' << b.n_triplets << ',' << format_double(b.x_vs_x1[j])
          << ',' << format_double(b.x_vs_x2[j]) << ',' << format_double(b.x1_vs_x2[j]) << ','
          << format_double(b.basmd[j]) << '\n';
  for (std::size_t j = 0; j < br.per_covariate_mean.size(); ++j)
    out << "mean,x" << j + 1 << ",,,,," << format_double(br.per_covariate_mean[j]) << '\n';
  out << "average,all,,,,," << format_double(br.average_basmd) << '\n';
  out << "threshold_pass,all,,,,," << (br.threshold_pass ? "true" : "false") << '\n';
}

inline void write_tune_trace(const TuneResult& tr, std::ostream& out) {
  out << "eta,kappa,average_basmd,feasible,reason\n";
  for (const auto& g : tr.grid) {
    std::string reason = g.reason;
    std::replace(reason.begin(), reason.end(), ',', ';');
    out << format_double(g.eta) << ',' << format_double(g.kappa) << ','
        << (std::isnan(g.average_basmd) ? std::string("NA") : format_double(g.average_basmd)) << ','
        << (g.feasible ? "true" : "false") << ',' << reason << '\n';
  }
}

inline void write_test_header(std::ostream& out) {
  out << "z0,estimate,method,sidedness,p_value,std_error,lindeberg_ratio,mc_reps,seed\n";
}

inline void write_test_row(double z0, const TestResult& r, std::ostream& out) {
  auto num = [](double v) { return std::isnan(v) ? std::string("NA") : format_double(v); };
  out << format_double(z0) << ',' << format_double(r.t_obs) << ',' << to_string(r.method) << ','
      << to_string(r.sidedness) << ',' << format_double(r.p_value) << ',' << num(r.std_error) << ','
      << num(r.lindeberg_ratio) << ',';
  if (r.method == TestMethod::monte_carlo)
    out << r.mc_reps << ',' << r.seed;
  else
    out << "NA,NA";
  out << '\n';
}

inline void write_gamma_curve(const GammaCurve& curve, const SensitivityOptions& opts,
                              std::ostream& out) {
  out << "gamma,p_lower,p_upper,method,reps,seed\n";
  const bool mc = opts.method == SensitivityMethod::monte_carlo;
  for (const auto& r : curve.grid) {
    out << format_double(r.gamma) << ',' << format_double(r.p_lower) << ',' << format_double(r.p_upper)
        << ',' << to_string(r.method) << ',';
    if (mc)
      out << opts.reps << ',' << opts.seed;
    else
      out << "NA,NA";
    out << '\n';
  }
  out << "breakeven," << (curve.breakeven_gamma ? format_double(*curve.breakeven_gamma) : "NA")
      << ",alpha=" << format_double(curve.alpha) << ",,,\n";
}

inline void write_sim_header(std::ostream& out, bool with_design) {
  if (with_design) out << "n,d,eta,kappa,";
  out << "z0,true_acde,mean_estimate,abs_bias,rmse,rejection_rate,reps_used,reps_excluded\n";
}

inline void write_sim_rows(const sim::SimReport& rep, std::ostream& out, bool with_design) {
  for (const auto& c : rep.cells) {
    if (with_design)
      out << rep.design.n << ',' << rep.design.d << ',' << format_double(rep.design.eta) << ','
          << format_double(rep.design.kappa) << ',';
    out << format_double(c.z0) << ',' << format_double(c.true_acde) << ','
        << format_double(c.mean_estimate) << ',' << format_double(c.abs_bias) << ','
        << format_double(c.rmse) << ',' << format_double(c.rejection_rate) << ',' << c.reps_used
        << ',' << c.reps_excluded << '\n';
  }
}

}  // namespace acde::report
