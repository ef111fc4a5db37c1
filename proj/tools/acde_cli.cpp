// acde: command-line front end for matching, balance tuning, permutation
// testing, sensitivity analysis and the benchmark simulations.
//
// Exit codes: 0 success, 1 usage or parse error, 2 infeasible computation.

#include <acde/acde.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using acde::csv::format_double;
using acde::csv::format_fixed;
using nlohmann::json;

struct RunConfig {
  std::string input;
  std::string output;
  std::string summary_json;
  std::string pairs_output;
  std::string matched_output;
  std::optional<double> z0;
  std::string z0_grid;
  std::optional<double> eta;
  std::optional<double> kappa;
  std::string eta_grid;
  std::string kappa_grid;
  std::string metric = "scaled-euclidean";
  std::size_t blocks = 4;
  std::string block_scheme = "equal-count";
  std::string method;
  std::string sided = "two";
  std::size_t reps = 10000;
  std::optional<std::size_t> sim_reps;
  std::size_t mc_reps = 10000;
  double alpha = 0.05;
  std::string gamma_grid = "1:2:0.01";
  std::optional<std::uint64_t> seed;
  std::string on_unmatched = "fail";
  bool no_self_match = false;
  unsigned threads = 1;
  bool table1 = false;
  bool table2 = false;
  int dim = 3;
  std::size_t n = 3000;
  bool null_outcome = false;
  bool curve = false;
};

class UsageError : public acde::DomainError {
 public:
  using acde::DomainError::DomainError;
};

// "a,b,c" or "start:stop:step" (inclusive of stop, up to rounding).
std::vector<double> parse_grid(const std::string& text, const std::string& flag) {
  if (text.find(':') != std::string::npos) {
    const auto parts = acde::csv::split(text, ':');
    if (parts.size() != 3) throw UsageError(flag + " expects start:stop:step");
    const auto start = acde::csv::parse_double(parts[0]);
    const auto stop = acde::csv::parse_double(parts[1]);
    const auto step = acde::csv::parse_double(parts[2]);
    if (!start || !stop || !step) throw UsageError(flag + ": non-numeric range '" + text + "'");
    if (!(*step > 0.0) || *stop < *start) throw UsageError(flag + ": need step > 0 and stop >= start");
    const auto count = static_cast<std::size_t>(std::floor((*stop - *start) / *step + 1e-9)) + 1;
    if (count > 1000000) throw UsageError(flag + ": range has too many points");
    std::vector<double> out;
    for (std::size_t k = 0; k < count; ++k) {
      // Snap to 12 significant digits so 1 + 7*0.01 prints as 1.07.
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.12g", *start + static_cast<double>(k) * *step);
      out.push_back(std::stod(buf));
    }
    return out;
  }
  std::vector<double> out;
  for (auto cell : acde::csv::split(text, ',')) {
    const auto v = acde::csv::parse_double(cell);
    if (!v) throw UsageError(flag + ": non-numeric value '" + std::string(cell) + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw UsageError(flag + " is empty");
  return out;
}

acde::Metric parse_metric(const std::string& s) {
  return s == "euclidean" ? acde::Metric::euclidean : acde::Metric::scaled_euclidean;
}

acde::Sidedness parse_sided(const std::string& s) {
  if (s == "greater") return acde::Sidedness::greater;
  if (s == "less") return acde::Sidedness::less;
  return acde::Sidedness::two_sided;
}

acde::OnUnmatched parse_unmatched(const std::string& s) {
  return s == "drop" ? acde::OnUnmatched::drop : acde::OnUnmatched::fail;
}

acde::BlockScheme parse_scheme(const std::string& s) {
  return s == "equal-width" ? acde::BlockScheme::equal_width : acde::BlockScheme::equal_count;
}

template <class T>
T require(const std::optional<T>& v, const std::string& flag) {
  if (!v) throw UsageError("missing required flag " + flag);
  return *v;
}

std::uint64_t require_seed(const RunConfig& cfg) {
  if (!cfg.seed) throw UsageError("Monte Carlo methods need an explicit --seed");
  return *cfg.seed;
}

// Collects the primary CSV and the human summary, then writes them where the
// flags say: CSV to --output (or stdout), summary to stdout when the CSV went
// to a file and to stderr otherwise.
class Sink {
 public:
  explicit Sink(const RunConfig& cfg) : cfg_(cfg) {}

  std::ostream& csv() { return csv_; }
  void summary(const std::string& line) { summary_ += line + "\n"; }
  void warn(const std::string& line) { std::cerr << "warning: " << line << '\n'; }
  json& fields() { return json_; }

  void flush() {
    if (cfg_.output.empty()) {
      std::cout << csv_.str();
      std::cout.flush();
      std::cerr << summary_;
    } else {
      std::ofstream f(cfg_.output, std::ios::binary);
      if (!f) throw UsageError("cannot write '" + cfg_.output + "'");
      f << csv_.str();
      std::cout << summary_;
    }
    if (!cfg_.summary_json.empty()) {
      std::ofstream f(cfg_.summary_json, std::ios::binary);
      if (!f) throw UsageError("cannot write '" + cfg_.summary_json + "'");
      f << json_.dump(2) << '\n';
    }
  }

 private:
  const RunConfig& cfg_;
  std::ostringstream csv_;
  std::string summary_;
  json json_ = json::object();
};

void write_side_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write '" + path + "'");
  f << content;
}

acde::MatchOptions match_options(const RunConfig& cfg) {
  acde::MatchOptions mo;
  mo.on_unmatched = parse_unmatched(cfg.on_unmatched);
  mo.allow_self_match = !cfg.no_self_match;
  mo.threads = cfg.threads;
  return mo;
}

acde::BlockPartition blocks_for(const RunConfig& cfg, const acde::Dataset& ds) {
  return acde::block_partition(ds, cfg.blocks, parse_scheme(cfg.block_scheme));
}

// Matches at z0 with either fixed (eta, kappa) or, when grids are given, the
// balance-optimal pair.
struct Fit {
  acde::MatchConfig config;
  acde::MatchedSet matched;
  std::optional<acde::TuneResult> tuned;
};

Fit fit_at(const RunConfig& cfg, const acde::Dataset& ds, double z0, Sink& sink) {
  Fit fit;
  if (!cfg.eta_grid.empty() || !cfg.kappa_grid.empty()) {
    const auto etas = cfg.eta_grid.empty() ? std::vector<double>{require(cfg.eta, "--eta")}
                                           : parse_grid(cfg.eta_grid, "--eta-grid");
    const auto kappas = cfg.kappa_grid.empty() ? std::vector<double>{require(cfg.kappa, "--kappa")}
                                               : parse_grid(cfg.kappa_grid, "--kappa-grid");
    acde::TuneOptions to;
    to.on_unmatched = parse_unmatched(cfg.on_unmatched);
    to.metric = parse_metric(cfg.metric);
    to.allow_self_match = !cfg.no_self_match;
    to.threads = cfg.threads;
    fit.tuned = acde::tune_hyperparams(ds, z0, etas, kappas, blocks_for(cfg, ds), to);
    fit.config = fit.tuned->matched.config;
    fit.matched = fit.tuned->matched;
    sink.summary("z0=" + format_double(z0) + " tuned eta=" + format_double(fit.tuned->eta) +
                 " kappa=" + format_double(fit.tuned->kappa) +
                 " average_basmd=" + format_fixed(fit.tuned->average_basmd, 4));
  } else {
    fit.config = {z0, require(cfg.eta, "--eta"), require(cfg.kappa, "--kappa"), parse_metric(cfg.metric)};
    fit.config.validate();
    fit.matched = acde::find_matches(ds, fit.config, match_options(cfg));
  }
  for (const auto& w : fit.matched.warnings) sink.warn(w);
  return fit;
}

std::vector<double> z0_levels(const RunConfig& cfg, bool allow_grid) {
  if (!cfg.z0_grid.empty()) {
    if (!allow_grid) throw UsageError("--z0-grid is not supported by this subcommand; use --z0");
    if (cfg.z0) throw UsageError("give either --z0 or --z0-grid, not both");
    return parse_grid(cfg.z0_grid, "--z0-grid");
  }
  return {require(cfg.z0, "--z0")};
}

acde::Dataset load(const RunConfig& cfg, Sink& sink) {
  if (cfg.input.empty()) throw UsageError("missing required flag --input");
  acde::Dataset ds = acde::load_csv(cfg.input);
  for (const auto& w : ds.warnings()) sink.warn(w);
  return ds;
}

void cmd_match(const RunConfig& cfg, Sink& sink) {
  const double z0 = z0_levels(cfg, false).front();
  const acde::Dataset ds = load(cfg, sink);
  const Fit fit = fit_at(cfg, ds, z0, sink);
  const auto est = acde::estimate_acde(ds, fit.matched);
  acde::report::write_matched_set(ds, fit.matched, sink.csv());
  if (!cfg.pairs_output.empty()) {
    std::ostringstream pairs;
    acde::report::write_pair_weights(ds, acde::pair_weights(ds, fit.matched), pairs);
    write_side_file(cfg.pairs_output, pairs.str());
  }
  std::string line = "acde=" + format_fixed(est.acde_hat, 4) + " n_used=" + std::to_string(est.n_used);
  if (parse_unmatched(cfg.on_unmatched) == acde::OnUnmatched::drop)
    line += " dropped=" + std::to_string(fit.matched.dropped.size());
  sink.summary(line);
  auto& j = sink.fields();
  j["command"] = "match";
  j["z0"] = z0;
  j["eta"] = fit.config.eta;
  j["kappa"] = fit.config.kappa;
  j["acde"] = est.acde_hat;
  j["n_used"] = est.n_used;
  j["dropped"] = fit.matched.dropped.size();
}

void cmd_tune(const RunConfig& cfg, Sink& sink) {
  const double z0 = z0_levels(cfg, false).front();
  if (cfg.eta_grid.empty() || cfg.kappa_grid.empty())
    throw UsageError("tune needs --eta-grid and --kappa-grid");
  const acde::Dataset ds = load(cfg, sink);
  const Fit fit = fit_at(cfg, ds, z0, sink);
  const auto& tr = *fit.tuned;
  acde::report::write_tune_trace(tr, sink.csv());
  if (!cfg.matched_output.empty()) {
    std::ostringstream m;
    acde::report::write_matched_set(ds, tr.matched, m);
    write_side_file(cfg.matched_output, m.str());
  }
  for (const auto& w : tr.balance.warnings) sink.warn(w);
  sink.summary("eta=" + format_double(tr.eta) + " kappa=" + format_double(tr.kappa));
  auto& j = sink.fields();
  j["command"] = "tune";
  j["z0"] = z0;
  j["eta"] = tr.eta;
  j["kappa"] = tr.kappa;
  j["average_basmd"] = tr.average_basmd;
  j["threshold_pass"] = tr.balance.threshold_pass;
  j["candidates"] = tr.grid.size();
}

acde::TestOptions test_options(const RunConfig& cfg) {
  acde::TestOptions to;
  const std::string method = cfg.method.empty() ? "normal" : cfg.method;
  to.method = method == "exact" ? acde::TestMethod::exact
              : method == "mc"  ? acde::TestMethod::monte_carlo
                                : acde::TestMethod::normal;
  to.sidedness = parse_sided(cfg.sided);
  to.reps = cfg.reps;
  to.threads = cfg.threads;
  if (to.method == acde::TestMethod::monte_carlo) to.seed = require_seed(cfg);
  return to;
}

void cmd_test(const RunConfig& cfg, Sink& sink) {
  const auto levels = z0_levels(cfg, true);
  const auto to = test_options(cfg);
  const acde::Dataset ds = load(cfg, sink);
  acde::report::write_test_header(sink.csv());
  json rows = json::array();
  for (double z0 : levels) {
    const Fit fit = fit_at(cfg, ds, z0, sink);
    const auto pw = acde::pair_weights(ds, fit.matched);
    const auto r = acde::permutation_test(pw, to);
    acde::report::write_test_row(z0, r, sink.csv());
    if (r.lindeberg_warning)
      sink.warn("z0=" + format_double(z0) + ": Lindeberg ratio " + format_fixed(r.lindeberg_ratio, 4) +
                " > 0.1; the normal approximation may be unreliable");
    sink.summary("z0=" + format_double(z0) + " acde=" + format_fixed(r.t_obs, 4) +
                 " p_value=" + format_fixed(r.p_value, 4) +
                 " lindeberg_warning=" + (r.lindeberg_warning ? "true" : "false"));
    json row;
    row["z0"] = z0;
    row["eta"] = fit.config.eta;
    row["kappa"] = fit.config.kappa;
    row["estimate"] = r.t_obs;
    row["p_value"] = r.p_value;
    row["lindeberg_ratio"] = std::isnan(r.lindeberg_ratio) ? json(nullptr) : json(r.lindeberg_ratio);
    row["lindeberg_warning"] = r.lindeberg_warning;
    rows.push_back(row);
  }
  sink.fields()["command"] = "test";
  sink.fields()["levels"] = rows;
}

void cmd_sensitivity(const RunConfig& cfg, Sink& sink) {
  const double z0 = z0_levels(cfg, false).front();
  acde::SensitivityOptions so;
  const std::string method = cfg.method.empty() ? "mc" : cfg.method;
  so.method = method == "exact"  ? acde::SensitivityMethod::exact
              : method == "normal" ? acde::SensitivityMethod::normal
                                   : acde::SensitivityMethod::monte_carlo;
  so.reps = cfg.reps;
  so.threads = cfg.threads;
  if (so.method == acde::SensitivityMethod::monte_carlo) so.seed = require_seed(cfg);
  const auto gammas = parse_grid(cfg.gamma_grid, "--gamma-grid");
  const acde::Dataset ds = load(cfg, sink);
  const Fit fit = fit_at(cfg, ds, z0, sink);
  const auto pw = acde::pair_weights(ds, fit.matched);
  const auto curve = acde::gamma_breakeven(pw, cfg.alpha, gammas, so);
  acde::report::write_gamma_curve(curve, so, sink.csv());
  sink.summary("breakeven_gamma=" +
               (curve.breakeven_gamma ? format_double(*curve.breakeven_gamma) : std::string("none")) +
               " direction=" + acde::report::to_string(curve.grid.front().direction));
  auto& j = sink.fields();
  j["command"] = "sensitivity";
  j["z0"] = z0;
  j["alpha"] = cfg.alpha;
  j["breakeven_gamma"] = curve.breakeven_gamma ? json(*curve.breakeven_gamma) : json(nullptr);
}

void cmd_balance(const RunConfig& cfg, Sink& sink) {
  const double z0 = z0_levels(cfg, false).front();
  const acde::Dataset ds = load(cfg, sink);
  const Fit fit = fit_at(cfg, ds, z0, sink);
  const auto br = acde::average_basmd(ds, fit.matched, blocks_for(cfg, ds));
  for (const auto& w : br.warnings) sink.warn(w);
  acde::report::write_balance(br, sink.csv());
  sink.summary("average_basmd=" + format_fixed(br.average_basmd, 4) +
               " threshold_pass=" + (br.threshold_pass ? "true" : "false"));
  auto& j = sink.fields();
  j["command"] = "balance";
  j["z0"] = z0;
  j["average_basmd"] = br.average_basmd;
  j["threshold_pass"] = br.threshold_pass;
  j["effective_blocks"] = br.effective_blocks();
}

void cmd_simulate(const RunConfig& cfg, Sink& sink) {
  if (cfg.curve) {
    sink.csv() << "z,response\n";
    for (const auto& [z, r] : acde::sim::response_curve(3.0, 7.0, 401))
      sink.csv() << format_double(z) << ',' << format_double(r) << '\n';
    return;
  }
  if (cfg.table1 && cfg.table2) throw UsageError("choose at most one of --table1 and --table2");

  std::vector<acde::sim::SimDesign> designs;
  if (cfg.table1) {
    designs.push_back(acde::sim::table1_design());
  } else if (cfg.table2) {
    designs = acde::sim::table2_designs();
  } else {
    acde::sim::SimDesign d;
    d.d = cfg.dim;
    d.n = cfg.n;
    d.z0_list = cfg.z0 || !cfg.z0_grid.empty() ? z0_levels(cfg, true) : d.z0_list;
    if (cfg.eta) d.eta = *cfg.eta;
    if (cfg.kappa) d.kappa = *cfg.kappa;
    designs.push_back(d);
  }
  const std::string method = cfg.method.empty() ? "normal" : cfg.method;
  for (auto& d : designs) {
    if (cfg.sim_reps) d.reps = *cfg.sim_reps;
    if (cfg.seed) d.seed = *cfg.seed;
    d.alpha = cfg.alpha;
    d.metric = parse_metric(cfg.metric);
    d.method = method == "exact" ? acde::TestMethod::exact
               : method == "mc"  ? acde::TestMethod::monte_carlo
                                 : acde::TestMethod::normal;
    d.sidedness = parse_sided(cfg.sided);
    d.mc_reps = cfg.mc_reps;
    d.null_outcome = cfg.null_outcome;
    d.threads = cfg.threads;
    d.validate();
  }

  const bool with_design = cfg.table2;
  acde::report::write_sim_header(sink.csv(), with_design);
  json cells = json::array();
  for (const auto& d : designs) {
    const auto rep = acde::sim::run_experiment(d);
    acde::report::write_sim_rows(rep, sink.csv(), with_design);
    for (const auto& c : rep.cells) {
      if (c.reps_excluded > 0)
        sink.warn(std::to_string(c.reps_excluded) + " replication(s) excluded at z0=" + format_double(c.z0));
      cells.push_back({{"n", d.n}, {"d", d.d}, {"eta", d.eta}, {"kappa", d.kappa}, {"z0", c.z0},
                       {"rmse", c.rmse}, {"abs_bias", c.abs_bias}, {"rejection_rate", c.rejection_rate}});
    }
  }
  sink.summary("designs=" + std::to_string(designs.size()) + " reps=" + std::to_string(designs.front().reps) +
               " seed=" + std::to_string(designs.front().seed));
  sink.fields()["command"] = "simulate";
  sink.fields()["seed"] = designs.front().seed;
  sink.fields()["cells"] = cells;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Average causal derivative effect: matching, testing and sensitivity analysis"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read `key = value` settings (flags override the file)");

  RunConfig cfg;
  app.add_option("--input", cfg.input, "Input CSV with columns y,z,x1..xd[,id]");
  app.add_option("--output", cfg.output, "Primary CSV output (default: standard output)");
  app.add_option("--summary-json", cfg.summary_json, "Also write a JSON summary object");
  app.add_option("--pairs-output", cfg.pairs_output, "match: write the pair-weight table (k,l,weight,delta)");
  app.add_option("--matched-output", cfg.matched_output, "tune: write the chosen matched set");
  app.add_option("--z0", cfg.z0, "Target exposure level");
  app.add_option("--z0-grid", cfg.z0_grid, "Exposure levels start:stop:step (test, simulate)");
  app.add_option("--eta", cfg.eta, "Caliper radius eta > 0");
  app.add_option("--kappa", cfg.kappa, "Inner caliper fraction in (0, 1)");
  app.add_option("--eta-grid", cfg.eta_grid, "Candidate etas: a,b,c or start:stop:step");
  app.add_option("--kappa-grid", cfg.kappa_grid, "Candidate kappas: a,b,c or start:stop:step");
  app.add_option("--metric", cfg.metric, "Covariate distance")
      ->check(CLI::IsMember({"scaled-euclidean", "euclidean"}));
  app.add_option("--blocks", cfg.blocks, "Number of exposure blocks K")->check(CLI::PositiveNumber);
  app.add_option("--block-scheme", cfg.block_scheme, "Exposure blocking")
      ->check(CLI::IsMember({"equal-count", "equal-width"}));
  app.add_option("--method", cfg.method, "Test method")->check(CLI::IsMember({"exact", "mc", "normal"}));
  app.add_option("--sided", cfg.sided, "Alternative")->check(CLI::IsMember({"two", "greater", "less"}));
  app.add_option("--reps", cfg.reps, "Monte Carlo draws (simulate: replications)");
  app.add_option("--mc-reps", cfg.mc_reps, "simulate: Monte Carlo draws per permutation test");
  app.add_option("--alpha", cfg.alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
  app.add_option("--gamma-grid", cfg.gamma_grid, "Sensitivity grid start:stop:step");
  app.add_option("--seed", cfg.seed, "Master seed (mandatory for Monte Carlo methods)");
  app.add_option("--on-unmatched", cfg.on_unmatched, "Individuals without a feasible match")
      ->check(CLI::IsMember({"fail", "drop"}));
  app.add_flag("--no-self-match", cfg.no_self_match, "Exclude i from its own candidate windows");
  app.add_option("--threads", cfg.threads, "Worker threads (0 = all cores)");
  app.add_flag("--table1", cfg.table1, "simulate: five-level benchmark design");
  app.add_flag("--table2", cfg.table2, "simulate: sample-size x dimension sweep at z0 = 5");
  app.add_option("--dim", cfg.dim, "simulate: covariate dimension (2, 3 or 4)");
  app.add_option("--n", cfg.n, "simulate: sample size");
  app.add_flag("--null", cfg.null_outcome, "simulate: drop the exposure term from the outcome");
  app.add_flag("--curve", cfg.curve, "simulate: emit exposure-response curve points instead");

  std::string which;
  for (const char* name : {"match", "tune", "test", "sensitivity", "simulate", "balance"}) {
    auto* sub = app.add_subcommand(name);
    sub->fallthrough();
    sub->callback([&which, name] { which = name; });
  }
  app.get_subcommand("match")->description("Match triplets at z0 and estimate the ACDE");
  app.get_subcommand("tune")->description("Grid-search (eta, kappa) by average BASMD");
  app.get_subcommand("test")->description("Permutation test of no local causal effect");
  app.get_subcommand("sensitivity")->description("Gamma sensitivity curve and break-even");
  app.get_subcommand("simulate")->description("Benchmark simulations (bias, RMSE, rejection)");
  app.get_subcommand("balance")->description("Covariate balance report for one matched set");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  if (!cfg.sim_reps && app.get_subcommand("simulate")->parsed() && app.count("--reps") > 0)
    cfg.sim_reps = cfg.reps;

  Sink sink(cfg);
  try {
    if (which == "match") cmd_match(cfg, sink);
    else if (which == "tune") cmd_tune(cfg, sink);
    else if (which == "test") cmd_test(cfg, sink);
    else if (which == "sensitivity") cmd_sensitivity(cfg, sink);
    else if (which == "simulate") cmd_simulate(cfg, sink);
    else if (which == "balance") cmd_balance(cfg, sink);
    sink.flush();
  } catch (const acde::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.usage() ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
