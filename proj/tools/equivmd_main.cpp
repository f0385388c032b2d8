// equivmd command-line driver: single tests on user data, scenario
// simulations, and summaries of simulation results.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "equivmd/equivtests.hpp"
#include "equivmd/errors.hpp"
#include "equivmd/simharness.hpp"
#include "equivmd/table_io.hpp"
#include "json.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr std::uint64_t kDefaultSeed = 987654321;

using nlohmann::json;

std::vector<double> parse_margin(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      values.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw equivmd::DomainError("--margin-d: not a number: '" + tok + "'");
    }
  }
  if (values.empty()) throw equivmd::DomainError("--margin-d must list at least one component");
  return values;
}

unsigned default_workers() {
  if (const char* env = std::getenv("EQUIVMD_WORKERS")) {
    const long v = std::atol(env);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

std::vector<equivmd::ScenarioId> parse_scenarios(const std::string& text) {
  std::vector<equivmd::ScenarioId> ids;
  if (text == "all") {
    const auto all = equivmd::all_scenarios();
    return {all.begin(), all.end()};
  }
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto id = equivmd::scenario_from_name(tok);
    if (!id) throw equivmd::UnknownScenario("unknown scenario: '" + tok + "'");
    ids.push_back(*id);
  }
  if (ids.empty()) throw equivmd::UnknownScenario("no scenario given");
  return ids;
}

std::vector<equivmd::Method> parse_methods(const std::string& text) {
  std::vector<equivmd::Method> methods;
  if (text == "all") {
    const auto all = equivmd::all_methods();
    return {all.begin(), all.end()};
  }
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto m = equivmd::method_from_name(tok);
    if (!m) throw equivmd::DomainError("unknown method: '" + tok + "'");
    methods.push_back(*m);
  }
  if (methods.empty()) throw equivmd::DomainError("no method given");
  return methods;
}

struct TestCommand {
  std::string test_file, ref_file;
  double alpha = 0.05;
  std::string margin;
  std::string method = "PctBootstrapOnDifBC";
  std::size_t bootstrap_b = 1000;
  std::uint64_t seed = kDefaultSeed;
  double fixed_margin_sq = -1.0;
  bool fixed_margin_given = false;
  std::string delimiter;
  bool header = false;
  bool emit_json = false;
};

int run_test(const TestCommand& cmd) {
  const auto method = equivmd::method_from_name(cmd.method);
  if (!method) throw equivmd::DomainError("unknown method: '" + cmd.method + "'");
  if (*method == equivmd::Method::T2EQTM)
    throw equivmd::DomainError("T2EQTM needs the true covariance; it is simulation-only");

  std::optional<char> delim;
  if (!cmd.delimiter.empty()) {
    if (cmd.delimiter == "\\t" || cmd.delimiter == "tab")
      delim = '\t';
    else if (cmd.delimiter.size() == 1)
      delim = cmd.delimiter[0];
    else
      throw equivmd::DomainError("--delimiter must be a single character or 'tab'");
  }

  auto load = [&](const std::string& path) {
    equivmd::Matrix m = equivmd::io::read_delimited_matrix(path, delim, cmd.header);
    if (m.rows() < 2) throw equivmd::DomainError("need at least 2 observations per group");
    return m;
  };
  equivmd::Matrix test_obs = load(cmd.test_file);
  equivmd::Matrix ref_obs = load(cmd.ref_file);
  if (test_obs.cols() != ref_obs.cols()) {
    std::ostringstream msg;
    msg << "column counts differ: " << cmd.test_file << " has " << test_obs.cols() << ", "
        << cmd.ref_file << " has " << ref_obs.cols();
    throw equivmd::DimensionMismatch(msg.str());
  }

  equivmd::TestConfig cfg;
  cfg.alpha = cmd.alpha;
  cfg.d = parse_margin(cmd.margin);
  cfg.method = *method;
  cfg.bootstrap.replicates = cmd.bootstrap_b;
  cfg.bootstrap.alpha = cmd.alpha;
  cfg.bootstrap.seed.master = cmd.seed;
  if (cmd.fixed_margin_given) {
    if (*method != equivmd::Method::ExactFixedMargin)
      throw equivmd::DomainError("--fixed-margin-sq is only valid with ExactFixedMargin");
    cfg.fixed_margin_sq = cmd.fixed_margin_sq;
  } else if (*method == equivmd::Method::ExactFixedMargin) {
    throw equivmd::DomainError("ExactFixedMargin requires --fixed-margin-sq");
  }

  const equivmd::GroupSample test_sample(std::move(test_obs), equivmd::SampleLabel::Test);
  const equivmd::GroupSample ref_sample(std::move(ref_obs), equivmd::SampleLabel::Reference);
  const equivmd::DiffStatistic stats = equivmd::diff_statistic(test_sample, ref_sample, cfg.d);
  const equivmd::TestOutcome outcome = equivmd::run_equivalence_test(test_sample, ref_sample, cfg);

  json report;
  report["method"] = std::string(equivmd::method_name(outcome.method));
  report["alpha"] = cfg.alpha;
  report["n_test"] = test_sample.n();
  report["n_ref"] = ref_sample.n();
  report["p"] = test_sample.p();
  report["seed"] = cmd.seed;
  report["bootstrap_b"] = cmd.bootstrap_b;
  report["statistics"] = {{"d_m_sq", stats.d_m_sq},
                          {"margin_sq", stats.margin_sq},
                          {"a_hat", stats.a_hat},
                          {"a_hat_bc", stats.a_hat_bc},
                          {"j_sq", stats.j_sq}};
  report["method_statistic"] = outcome.statistic;
  report["threshold_or_percentile"] = outcome.threshold_or_percentile;
  report["reject"] = outcome.reject;
  report["decision"] = outcome.reject ? "REJECT" : "FAIL-TO-REJECT";
  json diag;
  diag["degenerate_correction"] = outcome.degenerate_correction;
  if (outcome.bca) {
    diag["z0"] = outcome.bca->z0;
    diag["accel"] = outcome.bca->accel;
    diag["adjusted_level"] = outcome.bca->adjusted_level;
    diag["bca_percentile_fallback"] = outcome.bca_percentile_fallback;
  }
  if (outcome.calibrated_level) diag["calibrated_level"] = *outcome.calibrated_level;
  if (outcome.failed) diag["failure_reason"] = outcome.failure_reason;
  report["failed"] = outcome.failed;
  report["diagnostics"] = diag;

  if (cmd.emit_json) {
    std::cout << report.dump(2) << '\n';
  } else {
    std::cout << "method:    " << equivmd::method_name(outcome.method) << "\n"
              << "samples:   n_test=" << test_sample.n() << " n_ref=" << ref_sample.n()
              << " p=" << test_sample.p() << "\n"
              << "alpha:     " << cfg.alpha << "\n"
              << "statistics:\n"
              << "  d_m_sq    = " << stats.d_m_sq << "\n"
              << "  margin_sq = " << stats.margin_sq << "\n"
              << "  a_hat     = " << stats.a_hat << "\n"
              << "  a_hat_bc  = " << stats.a_hat_bc << "\n"
              << "  j_sq      = " << stats.j_sq << "\n"
              << "method statistic:        " << outcome.statistic << "\n"
              << "threshold/percentile:    " << outcome.threshold_or_percentile << "\n";
    if (outcome.bca)
      std::cout << "bca: z0=" << outcome.bca->z0 << " accel=" << outcome.bca->accel
                << " adjusted_level=" << outcome.bca->adjusted_level
                << (outcome.bca_percentile_fallback ? " (percentile fallback)" : "") << "\n";
    if (outcome.calibrated_level)
      std::cout << "calibrated level:        " << *outcome.calibrated_level << "\n";
    if (outcome.degenerate_correction)
      std::cout << "note: bias correction degenerate (n - p - 3 <= 0)\n";
    if (outcome.failed) std::cout << "numerical failure: " << outcome.failure_reason << "\n";
    std::cout << "decision:  " << (outcome.reject ? "REJECT" : "FAIL-TO-REJECT")
              << " (reject = equivalence concluded)\n";
  }
  if (outcome.failed) {
    std::cerr << "numerical failure: " << outcome.failure_reason << '\n';
    return 3;
  }
  return 0;
}

struct SimulateCommand {
  std::string scenario;
  std::string methods = "all";
  std::size_t reps = 10000;
  std::size_t bootstrap_b = 1000;
  std::uint64_t seed = kDefaultSeed;
  unsigned workers = 0;  // 0: resolve from env / hardware
  double alpha = 0.05;
  std::string out_dir = ".";
};

int run_simulate(const SimulateCommand& cmd) {
  const auto ids = parse_scenarios(cmd.scenario);
  const auto methods = parse_methods(cmd.methods);

  equivmd::RunOptions options;
  options.replications = cmd.reps;
  options.bootstrap.replicates = cmd.bootstrap_b;
  options.bootstrap.alpha = cmd.alpha;
  options.seed.master = cmd.seed;
  options.workers = cmd.workers ? cmd.workers : default_workers();
  options.alpha = cmd.alpha;

  std::vector<equivmd::SimResult> all_results;
  for (const auto id : ids) {
    const auto spec = equivmd::build_scenario(id);
    const auto results = equivmd::run_scenario(spec, methods, options);
    all_results.insert(all_results.end(), results.begin(), results.end());
  }

  const std::filesystem::path out_dir(cmd.out_dir);
  std::filesystem::create_directories(out_dir);
  const auto results_path = out_dir / "results.tsv";
  {
    std::ofstream out(results_path);
    if (!out) throw equivmd::ParseError("cannot write " + results_path.string());
    equivmd::io::write_results(out, all_results);
  }

  json manifest;
  manifest["command"] = "simulate";
  manifest["version"] = kVersion;
  json scen = json::array();
  for (const auto id : ids) scen.push_back(std::string(equivmd::scenario_name(id)));
  manifest["scenarios"] = scen;
  json meth = json::array();
  for (const auto m : methods) meth.push_back(std::string(equivmd::method_name(m)));
  manifest["methods"] = meth;
  manifest["replications"] = cmd.reps;
  manifest["bootstrap_b"] = cmd.bootstrap_b;
  manifest["seed"] = cmd.seed;
  manifest["workers"] = options.workers;
  manifest["alpha"] = cmd.alpha;
  manifest["results_file"] = results_path.string();
  manifest["timestamp"] = static_cast<std::uint64_t>(std::time(nullptr));
  {
    const auto manifest_path = out_dir / "manifest.json";
    std::ofstream out(manifest_path);
    if (!out) throw equivmd::ParseError("cannot write " + manifest_path.string());
    out << manifest.dump(2) << '\n';
  }

  std::cout << "wrote " << all_results.size() << " result rows to " << results_path.string()
            << '\n';
  return 0;
}

struct SummarizeCommand {
  std::vector<std::string> files;
  double nominal = 0.05;
  std::string out_file;
};

int run_summarize(const SummarizeCommand& cmd) {
  std::vector<equivmd::SimResult> results;
  for (const auto& f : cmd.files) {
    const auto rows = equivmd::io::read_results_file(f);
    results.insert(results.end(), rows.begin(), rows.end());
  }
  const auto summary = equivmd::summarize_mad(results, cmd.nominal);
  equivmd::io::write_summary_pretty(std::cout, summary);
  if (!cmd.out_file.empty()) {
    std::ofstream out(cmd.out_file);
    if (!out) throw equivmd::ParseError("cannot write " + cmd.out_file);
    equivmd::io::write_summary_tsv(out, summary);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multivariate equivalence tests with a data-driven margin"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  TestCommand test_cmd;
  auto* test = app.add_subcommand("test", "Run one equivalence test on two data files");
  test->add_option("test_file", test_cmd.test_file, "Test product data (rows = observations)")
      ->required();
  test->add_option("ref_file", test_cmd.ref_file, "Reference product data")->required();
  test->add_option("--alpha", test_cmd.alpha, "Significance level")->capture_default_str();
  test->add_option("--margin-d", test_cmd.margin, "Margin direction, comma-separated (e.g. 10,10,10)")
      ->required();
  test->add_option("--method", test_cmd.method, "Decision procedure")->capture_default_str();
  test->add_option("--bootstrap-b", test_cmd.bootstrap_b, "Bootstrap replicates")
      ->capture_default_str();
  test->add_option("--seed", test_cmd.seed, "Master seed")->capture_default_str();
  auto* fm = test->add_option("--fixed-margin-sq", test_cmd.fixed_margin_sq,
                              "Fixed squared margin (ExactFixedMargin only)");
  test->add_option("--delimiter", test_cmd.delimiter, "Field delimiter (default: auto-detect)");
  test->add_flag("--header", test_cmd.header, "First row is a header; skip it");
  test->add_flag("--json", test_cmd.emit_json, "Machine-readable report");

  SimulateCommand sim_cmd;
  auto* sim = app.add_subcommand("simulate", "Run simulation scenarios");
  sim->add_option("--scenario", sim_cmd.scenario, "S1..S8, comma list, or 'all'")->required();
  sim->add_option("--methods", sim_cmd.methods, "Comma list of methods or 'all'")
      ->capture_default_str();
  sim->add_option("--reps", sim_cmd.reps, "Replications per (scenario, n)")
      ->capture_default_str();
  sim->add_option("--bootstrap-b", sim_cmd.bootstrap_b, "Bootstrap replicates")
      ->capture_default_str();
  sim->add_option("--seed", sim_cmd.seed, "Master seed")->capture_default_str();
  sim->add_option("--workers", sim_cmd.workers,
                  "Worker threads (default: EQUIVMD_WORKERS or machine parallelism)");
  sim->add_option("--alpha", sim_cmd.alpha, "Significance level")->capture_default_str();
  sim->add_option("--out", sim_cmd.out_dir, "Output directory")->capture_default_str();

  SummarizeCommand sum_cmd;
  auto* sum = app.add_subcommand("summarize", "Summarize simulation results");
  sum->add_option("files", sum_cmd.files, "results.tsv files from 'simulate'")
      ->required()
      ->expected(-1);
  sum->add_option("--nominal", sum_cmd.nominal, "Nominal size")->capture_default_str();
  sum->add_option("--out", sum_cmd.out_file, "Also write the summary as TSV to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (test->parsed()) {
      test_cmd.fixed_margin_given = fm->count() > 0;
      return run_test(test_cmd);
    }
    if (sim->parsed()) return run_simulate(sim_cmd);
    return run_summarize(sum_cmd);
  } catch (const equivmd::NotSpd& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const equivmd::ConvergenceFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const equivmd::AbcNumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const equivmd::BcaSingularity& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const equivmd::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
