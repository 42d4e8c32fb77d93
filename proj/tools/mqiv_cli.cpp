// Command-line front end: estimate, simulate, mc-study, probe.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mqiv/dataset.hpp"
#include "mqiv/error.hpp"
#include "mqiv/estimators.hpp"
#include "mqiv/learners.hpp"
#include "mqiv/nuisance.hpp"
#include "mqiv/simulation.hpp"
#include "mqiv/study.hpp"

namespace {

using nlohmann::ordered_json;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kEstimation = 3 };

int report_error(const char* type, const std::string& message, int code) {
  ordered_json err;
  err["error"] = {{"type", type}, {"message", message}, {"exit_code", code}};
  std::cerr << err.dump() << "\n";
  return code;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw mqiv::DataError("cannot open output file '" + path + "'");
  f << text;
  if (!f) throw mqiv::DataError("failed writing output file '" + path + "'");
}

ordered_json optional_json(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json result_json(const mqiv::EstimateResult& r) {
  ordered_json j;
  j["estimator"] = r.estimator;
  j["point"] = r.point;
  j["se"] = optional_json(r.se);
  j["ci"] = r.ci ? ordered_json::array({r.ci->low, r.ci->high}) : ordered_json(nullptr);
  j["level"] = r.level;
  j["fold_estimates"] = r.fold_estimates;
  j["diagnostics"] = {
      {"floored_count", r.diagnostics.floored_count},
      {"clip_counts",
       {{"p0", r.diagnostics.clip_counts.p0},
        {"p1", r.diagnostics.clip_counts.p1},
        {"pi1", r.diagnostics.clip_counts.pi1}}},
      {"learner_flags", r.diagnostics.learner_flags}};
  return j;
}

std::string result_table(const std::vector<mqiv::EstimateResult>& results) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s%12s%12s%12s%12s\n", "estimator", "point", "se", "ci_low",
                "ci_high");
  os << buf;
  auto num = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    char b[32];
    std::snprintf(b, sizeof b, "%.4f", *v);
    return std::string(b);
  };
  for (const auto& r : results) {
    const auto lo = r.ci ? std::optional<double>(r.ci->low) : std::nullopt;
    const auto hi = r.ci ? std::optional<double>(r.ci->high) : std::nullopt;
    std::snprintf(buf, sizeof buf, "%-10s%12s%12s%12s%12s\n", r.estimator.c_str(),
                  num(r.point).c_str(), num(r.se).c_str(), num(lo).c_str(), num(hi).c_str());
    os << buf;
  }
  return os.str();
}

// ---- estimate

struct EstimateArgs {
  std::string input, outcome = "y", treatment = "a", instrument = "z", covariates;
  std::string estimators = "if1", learner = "cv_ensemble", output, format = "json";
  int k_folds = 5;
  std::uint64_t seed = 1;
  double level = 0.95;
};

int cmd_estimate(const EstimateArgs& args) {
  mqiv::ColumnMapping mapping;
  mapping.outcome_column = args.outcome;
  mapping.treatment_column = args.treatment;
  mapping.instrument_column = args.instrument;
  mapping.covariate_columns = split_list(args.covariates);
  mapping.check();
  const auto kinds = mqiv::parse_estimator_list(args.estimators);
  if (args.learner == "oracle")
    throw mqiv::ArgumentError("the oracle learner is only available inside simulations");
  const auto spec = mqiv::LearnerSpec::parse(args.learner, args.seed);
  spec.check();
  if (!(args.level > 0.0 && args.level < 1.0)) throw mqiv::ArgumentError("--level must lie in (0,1)");

  const auto ds = mqiv::load_csv(args.input, mapping);
  const auto report = mqiv::validate(ds);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";

  const auto folds = mqiv::split_folds(ds.n(), args.k_folds, args.seed);
  const auto raw = mqiv::fit_raw_nuisances(ds, folds, spec, mqiv::needs_single_arm(kinds));
  const auto derived = mqiv::derive(raw);
  std::vector<mqiv::EstimateResult> results;
  for (auto k : kinds) results.push_back(mqiv::run_estimator(k, ds, folds, raw, derived, args.level));

  if (args.format == "table") {
    emit(result_table(results), args.output);
  } else {
    ordered_json arr = ordered_json::array();
    for (const auto& r : results) arr.push_back(result_json(r));
    emit(arr.dump(2) + "\n", args.output);
  }
  return kOk;
}

// ---- simulate

struct SimulateArgs {
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::string er = "violated", mechanism = "direct", output, oracle_method = "quadrature";
  bool latents = false;
  bool oracle_att = false;
  std::size_t oracle_size = 1'000'000;
};

int cmd_simulate(const SimulateArgs& args) {
  const auto er = mqiv::parse_er_mode(args.er);
  const auto mech = mqiv::parse_mechanism(args.mechanism);
  if (args.oracle_att) {
    double v = 0.0;
    if (args.oracle_method == "quadrature")
      v = mqiv::oracle_att(mqiv::OracleMethod::quadrature);
    else if (args.oracle_method == "monte-carlo" || args.oracle_method == "monte_carlo")
      v = mqiv::oracle_att(mqiv::OracleMethod::monte_carlo, args.oracle_size, args.seed);
    else
      throw mqiv::ArgumentError("unknown oracle method '" + args.oracle_method + "'");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    if (args.output.empty()) {
      std::cout << buf << "\n";
      return kOk;
    }
    std::cerr << "oracle ATT " << buf << "\n";
  }
  const auto sample = mqiv::generate({args.n, er, mech, args.seed, args.latents});
  std::vector<mqiv::ExtraColumn> extras;
  if (sample.latents) extras = mqiv::latent_columns(*sample.latents);
  if (args.output.empty() || args.output == "-") {
    mqiv::write_csv(std::cout, sample.ds, extras);
  } else {
    mqiv::save_csv(args.output, sample.ds, extras);
  }
  return kOk;
}

// ---- mc-study

struct StudyArgs {
  std::string preset, sizes = "600,2400,7200", estimators = "w1,if1,w2,w3", learner = "cv_ensemble";
  std::string er = "violated", mechanism = "direct", output, table_output, format = "json";
  std::size_t reps = 200;
  int k_folds = 5;
  std::uint64_t seed = 1;
  double level = 0.95;
  unsigned jobs = 1;
  double max_failure_fraction = 0.05;
  bool progress = false;
};

int cmd_mc_study(StudyArgs args, const CLI::App& sub) {
  if (!args.preset.empty()) {
    if (args.preset != "table2-desk")
      throw mqiv::ArgumentError("unknown preset '" + args.preset + "' (expected table2-desk)");
    // Explicit flags win over the preset.
    if (sub.count("--reps") == 0) args.reps = 200;
    if (sub.count("--sizes") == 0) args.sizes = "600,2400,7200";
    if (sub.count("--estimator") == 0) args.estimators = "if1,w1,w2,w3";
    if (sub.count("--learner") == 0) args.learner = "oracle";
  }
  mqiv::McConfig cfg;
  cfg.sample_sizes.clear();
  for (const auto& s : split_list(args.sizes)) {
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size() || v < 1) throw mqiv::ArgumentError("invalid sample size '" + s + "'");
    cfg.sample_sizes.push_back(static_cast<std::size_t>(v));
  }
  cfg.replications = args.reps;
  cfg.estimators = mqiv::parse_estimator_list(args.estimators);
  cfg.learner = args.learner;
  cfg.k_folds = args.k_folds;
  cfg.er_mode = mqiv::parse_er_mode(args.er);
  cfg.mechanism = mqiv::parse_mechanism(args.mechanism);
  cfg.base_seed = args.seed;
  cfg.ci_level = args.level;
  cfg.jobs = args.jobs;
  cfg.max_failure_fraction = args.max_failure_fraction;

  mqiv::ProgressFn progress;
  if (args.progress)
    progress = [](std::size_t done, std::size_t total) {
      std::cerr << "\rreplication " << done << "/" << total << (done == total ? "\n" : "")
                << std::flush;
    };
  const auto report = mqiv::run_study(cfg, progress);
  const auto json = mqiv::report_json(report);
  const auto table = mqiv::report_table(report);
  if (!args.output.empty()) {
    emit(json, args.output);
    if (args.table_output.empty()) std::cout << table;
  } else {
    std::cout << (args.format == "table" ? table : json);
  }
  if (!args.table_output.empty()) emit(table, args.table_output);

  if (!report.failures_within_tolerance())
    return report_error("estimation", "replication failures exceed the tolerated fraction",
                        kEstimation);
  return kOk;
}

// ---- probe

struct ProbeArgs {
  std::string mode = "m1", er = "violated";
  std::size_t n = 200000;
  double shift = 0.3;
  std::uint64_t seed = 1;
};

int cmd_probe(const ProbeArgs& args) {
  const auto which = mqiv::parse_perturbation(args.mode);
  const auto er = mqiv::parse_er_mode(args.er);
  const auto sample = mqiv::generate({args.n, er, mqiv::Mechanism::direct_multiplicative, args.seed, false});
  const auto truth = mqiv::oracle_raw_nuisances(sample.ds, er, nullptr, false);
  const double target = mqiv::oracle_att(mqiv::OracleMethod::quadrature);
  const auto res = mqiv::robustness_probe(sample.ds, truth, {which, args.shift}, target);

  const bool negative_control = which == mqiv::Perturbation::all_wrong;
  const bool pass = negative_control ? !res.within(5.0) : res.within(3.0);
  ordered_json j;
  j["mode"] = std::string(mqiv::to_string(which));
  j["n"] = res.n;
  j["shift"] = args.shift;
  j["mean_eif"] = res.mean;
  j["sd"] = res.sd;
  j["se"] = res.se;
  j["z"] = res.se > 0 ? res.mean / res.se : 0.0;
  j["bound"] = negative_control ? "|mean| > 5 se" : "|mean| <= 3 se";
  j["moment_holds"] = res.within(3.0);
  j["verdict"] = negative_control ? (pass ? "FAIL (expected: negative control)" : "PASS (unexpected)")
                                  : (pass ? "PASS" : "FAIL");
  std::cout << j.dump(2) << "\n";
  return pass ? kOk : kEstimation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiplicative quasi-instrumental variable ATT estimation and simulation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI config file; [estimate], [simulate], [mc-study] or [probe] sections");
  app.set_version_flag("--version", "mqiv 0.1.0");

  EstimateArgs ea;
  auto* est = app.add_subcommand("estimate", "Estimate the ATT from a CSV file");
  est->add_option("--input", ea.input, "CSV file with a header row")->required();
  est->add_option("--outcome", ea.outcome, "outcome column")->capture_default_str();
  est->add_option("--treatment", ea.treatment, "binary treatment column")->capture_default_str();
  est->add_option("--instrument", ea.instrument, "binary instrument column")->capture_default_str();
  est->add_option("--covariates", ea.covariates, "comma-separated covariate columns")->required();
  est->add_option("--estimator", ea.estimators, "comma list from w1,if1,w2,w3,phi")->capture_default_str();
  est->add_option("--learner", ea.learner, "learner, e.g. cv_ensemble or knn:k=25")->capture_default_str();
  est->add_option("--k-folds", ea.k_folds, "cross-fitting folds")->capture_default_str()->check(CLI::Range(2, 1000));
  est->add_option("--seed", ea.seed, "seed for folds and learners")->capture_default_str();
  est->add_option("--level", ea.level, "confidence level")->capture_default_str();
  est->add_option("--output", ea.output, "output path (default stdout)");
  est->add_option("--format", ea.format, "json or table")->capture_default_str()->check(CLI::IsMember({"json", "table"}));

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Draw a sample from the simulation design");
  sim->add_option("--n", sa.n, "rows")->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--seed", sa.seed, "seed")->capture_default_str();
  sim->add_option("--er", sa.er, "violated or satisfied")->capture_default_str()->check(CLI::IsMember({"violated", "satisfied"}));
  sim->add_option("--mechanism", sa.mechanism, "direct or and-gate")->capture_default_str()->check(CLI::IsMember({"direct", "and-gate"}));
  sim->add_flag("--latents", sa.latents, "append latent columns");
  sim->add_flag("--oracle-att", sa.oracle_att, "print the true ATT");
  sim->add_option("--oracle-method", sa.oracle_method, "quadrature or monte-carlo")->capture_default_str();
  sim->add_option("--oracle-size", sa.oracle_size, "Monte Carlo oracle draws")->capture_default_str();
  sim->add_option("--output", sa.output, "CSV path (default stdout)");

  StudyArgs ma;
  auto* mc = app.add_subcommand("mc-study", "Monte Carlo study with bias, ASE, ESE and coverage");
  mc->add_option("--preset", ma.preset, "table2-desk");
  mc->add_option("--sizes", ma.sizes, "comma-separated sample sizes")->capture_default_str();
  mc->add_option("--reps", ma.reps, "replications per size")->capture_default_str();
  mc->add_option("--estimator", ma.estimators, "comma list from w1,if1,w2,w3,phi")->capture_default_str();
  mc->add_option("--learner", ma.learner, "oracle or a learner string")->capture_default_str();
  mc->add_option("--k-folds", ma.k_folds, "cross-fitting folds")->capture_default_str()->check(CLI::Range(2, 1000));
  mc->add_option("--er", ma.er, "violated or satisfied")->capture_default_str()->check(CLI::IsMember({"violated", "satisfied"}));
  mc->add_option("--mechanism", ma.mechanism, "direct or and-gate")->capture_default_str()->check(CLI::IsMember({"direct", "and-gate"}));
  mc->add_option("--seed", ma.seed, "base seed; replication r uses seed + r")->capture_default_str();
  mc->add_option("--level", ma.level, "confidence level")->capture_default_str();
  mc->add_option("--jobs", ma.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  mc->add_option("--max-failure-fraction", ma.max_failure_fraction, "tolerated failed fraction per cell")->capture_default_str();
  mc->add_option("--output", ma.output, "JSON report path");
  mc->add_option("--table-output", ma.table_output, "text table path");
  mc->add_option("--format", ma.format, "stdout format without --output")->capture_default_str()->check(CLI::IsMember({"json", "table"}));
  mc->add_flag("--progress", ma.progress, "replication progress on stderr");

  ProbeArgs pa;
  auto* probe = app.add_subcommand("probe", "Multiple-robustness probe of the EIF moment");
  probe->add_option("--mode", pa.mode, "m1, m2, m3 or all-wrong")->capture_default_str();
  probe->add_option("--n", pa.n, "rows")->capture_default_str()->check(CLI::PositiveNumber);
  probe->add_option("--shift", pa.shift, "perturbation size")->capture_default_str();
  probe->add_option("--seed", pa.seed, "seed")->capture_default_str();
  probe->add_option("--er", pa.er, "violated or satisfied")->capture_default_str()->check(CLI::IsMember({"violated", "satisfied"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), kUsage);
  }

  try {
    if (est->parsed()) return cmd_estimate(ea);
    if (sim->parsed()) return cmd_simulate(sa);
    if (mc->parsed()) return cmd_mc_study(ma, *mc);
    if (probe->parsed()) return cmd_probe(pa);
  } catch (const mqiv::ArgumentError& e) {
    return report_error("usage", e.what(), kUsage);
  } catch (const mqiv::DataError& e) {
    return report_error("data", e.what(), kData);
  } catch (const mqiv::EstimationError& e) {
    return report_error("estimation", e.what(), kEstimation);
  } catch (const std::exception& e) {
    return report_error("estimation", e.what(), kEstimation);
  }
  return kUsage;
}
