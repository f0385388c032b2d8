#include "equivmd/simharness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "equivmd/distributions.hpp"
#include "equivmd/errors.hpp"

namespace equivmd {

namespace {

constexpr std::array<ScenarioId, 8> kAllScenarios = {
    ScenarioId::S1, ScenarioId::S2, ScenarioId::S3, ScenarioId::S4,
    ScenarioId::S5, ScenarioId::S6, ScenarioId::S7, ScenarioId::S8,
};

constexpr std::array<std::string_view, 8> kScenarioNames = {"S1", "S2", "S3", "S4",
                                                            "S5", "S6", "S7", "S8"};

// Stream-label tags below the (scenario, n, rep) tuple.
constexpr std::uint64_t kTagTest = 1;
constexpr std::uint64_t kTagReference = 2;
constexpr std::uint64_t kTagBootstrap = 3;
constexpr std::uint64_t kTagAbc = 4;

std::uint64_t label_tag(SampleLabel label) {
  return label == SampleLabel::Test ? kTagTest : kTagReference;
}

RngSeed derive_stream(const RngSeed& master, ScenarioId scenario, std::size_t n,
                      std::uint64_t rep, std::uint64_t tag) {
  RngSeed seed;
  seed.master = master.master;
  seed.scenario = static_cast<std::uint64_t>(scenario) + 1;
  seed.sample_size = n;
  seed.replication = rep;
  seed.group = tag;
  return seed;
}

struct GroupParams {
  std::vector<double> mu1;
  std::vector<double> margin;  // D
  std::vector<double> inside;  // E
  Matrix sigma;
};

GroupParams group1() {
  GroupParams g;
  g.mu1 = {20.0, 70.0, 88.0};
  g.margin = {10.0, 10.0, 10.0};
  g.inside = {8.0, 8.0, 8.0};
  g.sigma = Matrix(3, 3,
                   {120.0, 39.0, -9.0,   //
                    39.0, 146.0, 111.0,  //
                    -9.0, 111.0, 113.0});
  return g;
}

GroupParams group2() {
  GroupParams g;
  g.mu1 = {31.0, 61.0, 83.0, 94.0};
  g.margin = {10.0, 10.0, 10.0, 10.0};
  g.inside = {8.0, 8.0, 8.0, 8.0};
  g.sigma = Matrix(4, 4,
                   {32.0, 52.0, 38.0, 26.0,  //
                    52.0, 87.0, 66.0, 44.0,  //
                    38.0, 66.0, 65.0, 35.0,  //
                    26.0, 44.0, 35.0, 30.0});
  return g;
}

struct Counts {
  std::uint64_t rejections = 0;
  std::uint64_t failures = 0;
};

}  // namespace

std::string_view scenario_name(ScenarioId id) {
  return kScenarioNames[static_cast<std::size_t>(id)];
}

std::optional<ScenarioId> scenario_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kScenarioNames.size(); ++i)
    if (kScenarioNames[i] == name) return kAllScenarios[i];
  return std::nullopt;
}

std::span<const ScenarioId> all_scenarios() { return kAllScenarios; }

ScenarioSpec build_scenario(ScenarioId id) {
  const auto index = static_cast<std::size_t>(id);
  if (index >= kAllScenarios.size()) throw UnknownScenario("scenario id out of range");

  // S1-S4 normal, S5-S8 lognormal; odd scenarios use the 3-dim group, even
  // the 4-dim group; S1/S2/S5/S6 sit on the size boundary (shift = D),
  // S3/S4/S7/S8 are power studies (shift = E).
  const bool dim4 = (index % 2) == 1;
  const bool lognormal = index >= 4;
  const bool power = (index % 4) == 2 || (index % 4) == 3;

  const GroupParams g = dim4 ? group2() : group1();
  ScenarioSpec spec;
  spec.id = id;
  spec.mu1 = g.mu1;
  spec.d_margin = g.margin;
  spec.shift = power ? g.inside : g.margin;
  spec.sigma = g.sigma;
  spec.family = lognormal ? Family::LogNormal : Family::Normal;
  spec.sizes = {12, 24, 36, 48, 96, 120};
  spec.power_study = power;
  return spec;
}

RngSeed derive_seed(const RngSeed& master, ScenarioId scenario, std::size_t n, std::uint64_t rep,
                    SampleLabel group) {
  return derive_stream(master, scenario, n, rep, label_tag(group));
}

std::vector<SimResult> run_scenario(const ScenarioSpec& spec, std::span<const Method> methods,
                                    const RunOptions& options) {
  if (methods.empty()) throw DomainError("run_scenario requires at least one method");
  if (options.replications < 1) throw DomainError("run_scenario requires replications >= 1");
  if (options.workers < 1) throw DomainError("run_scenario requires workers >= 1");
  if (spec.sizes.empty()) throw DomainError("scenario has no sample sizes");
  if (!(options.alpha > 0.0 && options.alpha < 0.5))
    throw DomainError("alpha must be in (0, 0.5)");

  const std::size_t p = spec.mu1.size();
  if (spec.shift.size() != p || spec.d_margin.size() != p || spec.sigma.rows() != p)
    throw DimensionMismatch("scenario parameter dimensions disagree");

  bool any_bootstrap = false, any_bca = false, any_abc = false;
  for (Method m : methods) {
    any_bootstrap = any_bootstrap || is_bootstrap_method(m);
    any_bca = any_bca || is_bca_method(m);
    any_abc = any_abc || is_abc_method(m);
  }
  if (any_bootstrap || any_abc) validate(options.bootstrap);

  // boundary margin under the true covariance, shared by ExactFixedMargin
  // and T2EQTM
  const SpdFactor true_factor = cholesky_spd(spec.sigma);
  const double true_margin_sq = quadratic_form_inv(true_factor, spec.d_margin);
  const MvnParams true_params{spec.mu1, spec.sigma};

  std::vector<double> mu2(p);
  for (std::size_t j = 0; j < p; ++j) mu2[j] = spec.mu1[j] + spec.shift[j];
  const MvnParams test_params{mu2, spec.sigma};
  const MvnParams ref_params{spec.mu1, spec.sigma};

  const std::size_t n_sizes = spec.sizes.size();
  const std::size_t n_methods = methods.size();
  std::vector<std::vector<Counts>> totals(n_sizes, std::vector<Counts>(n_methods));
  std::mutex totals_mutex;

  constexpr std::uint64_t kRepBlock = 32;
  const std::uint64_t blocks_per_size =
      (options.replications + kRepBlock - 1) / kRepBlock;
  const std::uint64_t total_jobs = blocks_per_size * n_sizes;
  std::atomic<std::uint64_t> next_job{0};

  const auto sample_group = [&](const MvnParams& params, std::size_t n, const RngSeed& seed,
                                SampleLabel label) {
    return spec.family == Family::Normal ? sample_mvn(params, n, seed, label)
                                         : sample_mvln(params, n, seed, label);
  };

  const auto worker = [&] {
    std::vector<std::vector<Counts>> local(n_sizes, std::vector<Counts>(n_methods));
    for (;;) {
      const std::uint64_t job = next_job.fetch_add(1, std::memory_order_relaxed);
      if (job >= total_jobs) break;
      const std::size_t size_idx = static_cast<std::size_t>(job / blocks_per_size);
      const std::uint64_t rep_begin = (job % blocks_per_size) * kRepBlock;
      const std::uint64_t rep_end =
          std::min<std::uint64_t>(rep_begin + kRepBlock, options.replications);
      const std::size_t n = spec.sizes[size_idx];

      for (std::uint64_t rep = rep_begin; rep < rep_end; ++rep) {
        bool sample_ok = true;
        GroupSample test_sample, ref_sample;
        try {
          test_sample = sample_group(
              test_params, n, derive_seed(options.seed, spec.id, n, rep, SampleLabel::Test),
              SampleLabel::Test);
          ref_sample = sample_group(
              ref_params, n, derive_seed(options.seed, spec.id, n, rep, SampleLabel::Reference),
              SampleLabel::Reference);
        } catch (const Error&) {
          sample_ok = false;
        }
        if (!sample_ok) {
          for (std::size_t mi = 0; mi < n_methods; ++mi) ++local[size_idx][mi].failures;
          continue;
        }

        // Every method sees this same pair; the bootstrap variants also share
        // one replicate table and one jackknife pass.
        std::optional<ReplicateTable> table;
        std::optional<AccelTriple> accels;
        bool table_failed = false, accels_failed = false;
        if (any_bootstrap) {
          try {
            table = bootstrap_replicates(test_sample, ref_sample, spec.d_margin,
                                         options.bootstrap.replicates,
                                         derive_stream(options.seed, spec.id, n, rep,
                                                       kTagBootstrap));
          } catch (const Error&) {
            table_failed = true;
          }
          if (any_bca && !table_failed) {
            try {
              accels = jackknife_accels(test_sample, ref_sample, spec.d_margin);
            } catch (const Error&) {
              accels_failed = true;
            }
          }
        }

        for (std::size_t mi = 0; mi < n_methods; ++mi) {
          const Method m = methods[mi];
          Counts& c = local[size_idx][mi];
          try {
            TestOutcome outcome;
            if (is_bootstrap_method(m)) {
              if (table_failed || (is_bca_method(m) && accels_failed)) {
                ++c.failures;
                continue;
              }
              outcome =
                  decide_bootstrap(m, *table, accels ? &*accels : nullptr, options.alpha);
            } else {
              TestConfig cfg;
              cfg.alpha = options.alpha;
              cfg.d = spec.d_margin;
              cfg.method = m;
              cfg.bootstrap = options.bootstrap;
              if (m == Method::ExactFixedMargin) cfg.fixed_margin_sq = true_margin_sq;
              if (m == Method::T2EQTM) cfg.true_params = true_params;
              if (is_abc_method(m))
                cfg.bootstrap.seed = derive_stream(options.seed, spec.id, n, rep, kTagAbc);
              outcome = run_equivalence_test(test_sample, ref_sample, cfg);
            }
            if (outcome.failed)
              ++c.failures;
            else if (outcome.reject)
              ++c.rejections;
          } catch (const Error&) {
            ++c.failures;
          }
        }
      }
    }
    const std::lock_guard<std::mutex> lock(totals_mutex);
    for (std::size_t si = 0; si < n_sizes; ++si)
      for (std::size_t mi = 0; mi < n_methods; ++mi) {
        totals[si][mi].rejections += local[si][mi].rejections;
        totals[si][mi].failures += local[si][mi].failures;
      }
  };

  if (options.workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(options.workers);
    for (unsigned w = 0; w < options.workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<SimResult> results;
  results.reserve(n_sizes * n_methods);
  for (std::size_t si = 0; si < n_sizes; ++si) {
    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      SimResult r;
      r.scenario = spec.id;
      r.method = methods[mi];
      r.n = spec.sizes[si];
      r.replications = options.replications;
      r.rejections = totals[si][mi].rejections;
      r.failures = totals[si][mi].failures;
      r.rate = static_cast<double>(r.rejections) / static_cast<double>(r.replications);
      r.mc_se = std::sqrt(r.rate * (1.0 - r.rate) / static_cast<double>(r.replications));
      results.push_back(r);
    }
  }
  return results;
}

MadSummary summarize_mad(std::span<const SimResult> results, double nominal) {
  if (results.empty()) throw EmptyInput("summarize_mad needs at least one result row");
  if (!(nominal > 0.0 && nominal < 1.0)) throw DomainError("nominal must be in (0, 1)");

  std::set<ScenarioId> scenario_set;
  std::set<Method> method_set;
  std::map<ScenarioId, std::set<std::size_t>> scenario_sizes;
  std::map<std::tuple<ScenarioId, Method, std::size_t>, double> rates;
  for (const SimResult& r : results) {
    scenario_set.insert(r.scenario);
    method_set.insert(r.method);
    scenario_sizes[r.scenario].insert(r.n);
    const auto key = std::make_tuple(r.scenario, r.method, r.n);
    if (rates.count(key)) throw IncompleteGrid("duplicate (scenario, method, n) row");
    rates[key] = r.rate;
  }
  for (ScenarioId s : scenario_set)
    for (Method m : method_set)
      for (std::size_t n : scenario_sizes[s])
        if (!rates.count(std::make_tuple(s, m, n)))
          throw IncompleteGrid("missing (scenario, method, n) row");

  MadSummary summary;
  summary.scenarios.assign(scenario_set.begin(), scenario_set.end());
  for (Method m : method_set) {
    MadSummary::Row row;
    row.method = m;
    double total = 0.0;
    for (ScenarioId s : summary.scenarios) {
      double mad = 0.0;
      for (std::size_t n : scenario_sizes[s])
        mad += std::fabs(rates[std::make_tuple(s, m, n)] - nominal);
      mad = 100.0 * mad / static_cast<double>(scenario_sizes[s].size());
      row.mad_pp.push_back(mad);
      total += mad;
    }
    row.average_pp = total / static_cast<double>(summary.scenarios.size());
    summary.rows.push_back(std::move(row));
  }
  std::stable_sort(summary.rows.begin(), summary.rows.end(),
                   [](const auto& a, const auto& b) { return a.average_pp < b.average_pp; });
  return summary;
}

}  // namespace equivmd
