#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "equivmd/equivtests.hpp"

namespace equivmd {

enum class ScenarioId { S1, S2, S3, S4, S5, S6, S7, S8 };
enum class Family { Normal, LogNormal };

std::string_view scenario_name(ScenarioId id);
std::optional<ScenarioId> scenario_from_name(std::string_view name);
std::span<const ScenarioId> all_scenarios();

/// One simulation scenario: reference mean mu1, test mean mu1 + shift, a
/// common covariance, the sampling family, the sample-size grid, and the
/// margin direction. Size studies shift by the margin direction itself;
/// power studies shift by the smaller inside-margin vector.
struct ScenarioSpec {
  ScenarioId id = ScenarioId::S1;
  std::vector<double> mu1;
  std::vector<double> shift;
  std::vector<double> d_margin;
  Matrix sigma;
  Family family = Family::Normal;
  std::vector<std::size_t> sizes;
  bool power_study = false;
};

ScenarioSpec build_scenario(ScenarioId id);

struct SimResult {
  ScenarioId scenario = ScenarioId::S1;
  Method method = Method::T2EQ;
  std::size_t n = 0;
  std::size_t replications = 0;
  std::size_t rejections = 0;
  std::size_t failures = 0;
  double rate = 0.0;
  double mc_se = 0.0;
};

/// Stream seed for one (scenario, n, replication, group) cell. Stable across
/// program versions: the label hashing constants live in rng.hpp and are
/// fixed.
RngSeed derive_seed(const RngSeed& master, ScenarioId scenario, std::size_t n, std::uint64_t rep,
                    SampleLabel group);

struct RunOptions {
  std::size_t replications = 10000;
  BootstrapConfig bootstrap{};  // B and alpha; the seed field is ignored
                                // (per-replication seeds are derived)
  RngSeed seed{};               // master seed
  unsigned workers = 1;
  double alpha = 0.05;
};

/// Runs every requested method on the same generated sample pair for each
/// (n in spec.sizes) x (replication). Method failures are counted and scored
/// as non-rejections; the output is a pure function of (spec, methods,
/// options) and bit-identical for any worker count.
std::vector<SimResult> run_scenario(const ScenarioSpec& spec, std::span<const Method> methods,
                                    const RunOptions& options);

/// Mean absolute deviation from the nominal size in percentage points,
/// averaged over the sample-size grid, one row per method with one column per
/// scenario plus the cross-scenario average; rows sorted ascending by average.
struct MadSummary {
  std::vector<ScenarioId> scenarios;
  struct Row {
    Method method = Method::T2EQ;
    std::vector<double> mad_pp;  // one per scenario, percentage points
    double average_pp = 0.0;
  };
  std::vector<Row> rows;
};

MadSummary summarize_mad(std::span<const SimResult> results, double nominal);

}  // namespace equivmd
