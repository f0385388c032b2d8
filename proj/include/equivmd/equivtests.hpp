#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "equivmd/bootstrap.hpp"
#include "equivmd/distributions.hpp"
#include "equivmd/estimators.hpp"

namespace equivmd {

enum class Method {
  ExactFixedMargin,
  T2EQ,
  T2EQTM,
  PctBootstrapOnMD,
  PctBootstrapOnDif,
  PctBootstrapOnDifBC,
  BCaBootstrapOnMD,
  BCaBootstrapOnDif,
  BCaBootstrapOnDifBC,
  ABCOnPairedDif,
  CalibABCOnPairedDif,
};

std::string_view method_name(Method m);
std::optional<Method> method_from_name(std::string_view name);
std::span<const Method> all_methods();

inline bool is_bootstrap_method(Method m) {
  return m >= Method::PctBootstrapOnMD && m <= Method::BCaBootstrapOnDifBC;
}
inline bool is_bca_method(Method m) {
  return m >= Method::BCaBootstrapOnMD && m <= Method::BCaBootstrapOnDifBC;
}
inline bool is_abc_method(Method m) {
  return m == Method::ABCOnPairedDif || m == Method::CalibABCOnPairedDif;
}

struct TestConfig {
  double alpha = 0.05;
  std::vector<double> d;  // margin direction vector
  Method method = Method::PctBootstrapOnDifBC;
  BootstrapConfig bootstrap{};
  std::optional<double> fixed_margin_sq{};  // ExactFixedMargin only
  std::optional<MvnParams> true_params{};   // T2EQTM only (simulation use)
};

struct TestOutcome {
  Method method = Method::T2EQ;
  bool reject = false;
  double statistic = 0.0;                // the method's point statistic
  double threshold_or_percentile = 0.0;  // F quantile, percentile value, or ABC bound
  std::optional<BcaDiagnostics> bca{};
  std::optional<double> calibrated_level{};
  bool degenerate_correction = false;
  bool bca_percentile_fallback = false;
  bool failed = false;  // numerical failure; reject is false (conservative)
  std::string failure_reason{};
};

/// Fixed-margin exact test: reject when J^2 falls below the lower
/// alpha-quantile of the noncentral F with ncp (n_t n_r / (n_t+n_r)) margin^2.
TestOutcome exact_fixed_margin_test(const GroupSample& test, const GroupSample& ref,
                                    const TestConfig& cfg);

/// Same rule with the data-driven margin d' pooled_cov^-1 d as noncentrality.
TestOutcome t2eq_test(const GroupSample& test, const GroupSample& ref, const TestConfig& cfg);

/// T2EQ with the noncentrality computed from the true covariance in
/// cfg.true_params; the threshold never depends on the observed sample.
TestOutcome t2eqtm_test(const GroupSample& test, const GroupSample& ref, const TestConfig& cfg);

/// The six percentile/BCa resampling tests (dispatch on cfg.method).
TestOutcome bootstrap_test(const GroupSample& test, const GroupSample& ref,
                           const TestConfig& cfg);

/// ABC / calibrated-ABC tests on the paired differences.
TestOutcome abc_test(const GroupSample& test, const GroupSample& ref, const TestConfig& cfg);

/// Dispatches on cfg.method after validating the config.
TestOutcome run_equivalence_test(const GroupSample& test, const GroupSample& ref,
                                 const TestConfig& cfg);

// ---------------------------------------------------------------------------
// Shared replicate machinery. bootstrap_test and the simulation harness use
// the same tables so a replication that runs several bootstrap variants pays
// for the resampling pass once; the per-(seed, b) resample indices make the
// shared plan deterministic.

/// Per-replicate statistics from B two-sample resamples of the same pair.
struct ReplicateTable {
  std::vector<double> md;     // resampled squared Mahalanobis distances
  std::vector<double> dif;    // resampled a_hat
  std::vector<double> difbc;  // resampled a_hat_bc
  DiffStatistic original;     // the point statistics of the source pair
};

ReplicateTable bootstrap_replicates(const GroupSample& test, const GroupSample& ref,
                                    std::span<const double> d, std::size_t replicates,
                                    const RngSeed& seed);

struct AccelTriple {
  JackknifeAccel md;
  JackknifeAccel dif;
  JackknifeAccel difbc;
};

/// Combined delete-one jackknife accelerations for the three resampled
/// statistics, sharing one pass of leave-one-out evaluations.
AccelTriple jackknife_accels(const GroupSample& test, const GroupSample& ref,
                             std::span<const double> d);

/// Decision rule for one percentile/BCa variant given precomputed tables.
/// `accels` may be null for the percentile variants.
TestOutcome decide_bootstrap(Method method, const ReplicateTable& table,
                             const AccelTriple* accels, double alpha);

}  // namespace equivmd
