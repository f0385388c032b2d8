#include "equivmd/equivtests.hpp"

#include <array>
#include <cmath>

#include "equivmd/errors.hpp"

namespace equivmd {

namespace {

constexpr std::array<Method, 11> kAllMethods = {
    Method::ExactFixedMargin,    Method::T2EQ,
    Method::T2EQTM,              Method::PctBootstrapOnMD,
    Method::PctBootstrapOnDif,   Method::PctBootstrapOnDifBC,
    Method::BCaBootstrapOnMD,    Method::BCaBootstrapOnDif,
    Method::BCaBootstrapOnDifBC, Method::ABCOnPairedDif,
    Method::CalibABCOnPairedDif,
};

constexpr std::array<std::string_view, 11> kMethodNames = {
    "ExactFixedMargin",    "T2EQ",
    "T2EQTM",              "PctBootstrapOnMD",
    "PctBootstrapOnDif",   "PctBootstrapOnDifBC",
    "BCaBootstrapOnMD",    "BCaBootstrapOnDif",
    "BCaBootstrapOnDifBC", "ABCOnPairedDif",
    "CalibABCOnPairedDif",
};

// The exact/T2EQTM thresholds are constant across replications, so a small
// per-thread memo of recent quantiles saves recomputing the same F quantile
// thousands of times inside a scenario sweep.
double cached_f_quantile(double alpha, const NoncentralFParams& params) {
  struct Entry {
    double alpha, d1, d2, ncp, value;
    bool used = false;
  };
  thread_local std::array<Entry, 8> cache{};
  thread_local std::size_t next = 0;
  for (const Entry& e : cache)
    if (e.used && e.alpha == alpha && e.d1 == params.d1 && e.d2 == params.d2 &&
        e.ncp == params.ncp)
      return e.value;
  const double value = noncentral_f_quantile(alpha, params);
  cache[next] = {alpha, params.d1, params.d2, params.ncp, value, true};
  next = (next + 1) % cache.size();
  return value;
}

void validate_common(const GroupSample& test, const GroupSample& ref, const TestConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 0.5)) throw DomainError("alpha must be in (0, 0.5)");
  if (cfg.d.size() != test.p())
    throw DimensionMismatch("margin direction length does not match data dimension");
  if (ref.p() != test.p()) throw DimensionMismatch("group column counts differ");
}

double scaled_ncp(std::size_t n_t, std::size_t n_r, double margin_sq) {
  return static_cast<double>(n_t) * static_cast<double>(n_r) /
         static_cast<double>(n_t + n_r) * margin_sq;
}

TestOutcome f_test_outcome(Method method, const PooledStats& s, double jsq, double ncp,
                           double alpha) {
  const NoncentralFParams params{static_cast<double>(s.p),
                                 static_cast<double>(s.n_t + s.n_r) - static_cast<double>(s.p) - 1.0,
                                 ncp};
  TestOutcome out;
  out.method = method;
  out.statistic = jsq;
  out.threshold_or_percentile = cached_f_quantile(alpha, params);
  out.reject = jsq < out.threshold_or_percentile;
  return out;
}

// One resampled pooled-statistics evaluation, row indices into the source
// groups. Arithmetic matches pooled_stats on the materialized resample so the
// fast path and resample_two_sample agree bit for bit.
struct ReplicateScratch {
  std::vector<double> mean_t, mean_r, centered, diffvec;
  Matrix scatter;

  explicit ReplicateScratch(std::size_t p)
      : mean_t(p), mean_r(p), centered(p), diffvec(p), scatter(p, p) {}

  void indexed_mean(const Matrix& obs, std::span<const std::size_t> idx,
                    std::vector<double>& out) {
    const std::size_t p = obs.cols();
    for (std::size_t j = 0; j < p; ++j) out[j] = 0.0;
    for (std::size_t i : idx) {
      const double* r = obs.entries().data() + i * p;
      for (std::size_t j = 0; j < p; ++j) out[j] += r[j];
    }
    for (std::size_t j = 0; j < p; ++j) out[j] /= static_cast<double>(idx.size());
  }

  void indexed_scatter(const Matrix& obs, std::span<const std::size_t> idx,
                       std::span<const double> mean) {
    const std::size_t p = obs.cols();
    for (std::size_t i : idx) {
      const double* r = obs.entries().data() + i * p;
      for (std::size_t j = 0; j < p; ++j) centered[j] = r[j] - mean[j];
      for (std::size_t j = 0; j < p; ++j)
        for (std::size_t k = j; k < p; ++k) scatter(j, k) += centered[j] * centered[k];
    }
  }

  // returns (d_m_sq, margin_sq)
  std::pair<double, double> pooled_forms(const Matrix& test_obs, const Matrix& ref_obs,
                                         std::span<const std::size_t> idx_t,
                                         std::span<const std::size_t> idx_r,
                                         std::span<const double> d) {
    const std::size_t p = test_obs.cols();
    indexed_mean(test_obs, idx_t, mean_t);
    indexed_mean(ref_obs, idx_r, mean_r);
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t k = 0; k < p; ++k) scatter(j, k) = 0.0;
    indexed_scatter(test_obs, idx_t, mean_t);
    indexed_scatter(ref_obs, idx_r, mean_r);
    const double div = static_cast<double>(idx_t.size() + idx_r.size() - 2);
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t k = j; k < p; ++k) {
        scatter(j, k) /= div;
        scatter(k, j) = scatter(j, k);
      }
    const SpdFactor f = cholesky_spd(scatter);
    for (std::size_t j = 0; j < p; ++j) diffvec[j] = mean_t[j] - mean_r[j];
    return {quadratic_form_inv(f, diffvec), quadratic_form_inv(f, d)};
  }
};

}  // namespace

std::string_view method_name(Method m) { return kMethodNames[static_cast<std::size_t>(m)]; }

std::optional<Method> method_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kMethodNames.size(); ++i)
    if (kMethodNames[i] == name) return kAllMethods[i];
  return std::nullopt;
}

std::span<const Method> all_methods() { return kAllMethods; }

TestOutcome exact_fixed_margin_test(const GroupSample& test, const GroupSample& ref,
                                    const TestConfig& cfg) {
  validate_common(test, ref, cfg);
  if (!cfg.fixed_margin_sq) throw DomainError("ExactFixedMargin requires fixed_margin_sq");
  if (!(*cfg.fixed_margin_sq >= 0.0)) throw DomainError("fixed_margin_sq must be nonnegative");
  const PooledStats s = pooled_stats(test, ref);
  const double jsq = j_squared(s, mahalanobis_sq(s));
  return f_test_outcome(Method::ExactFixedMargin, s, jsq,
                        scaled_ncp(s.n_t, s.n_r, *cfg.fixed_margin_sq), cfg.alpha);
}

TestOutcome t2eq_test(const GroupSample& test, const GroupSample& ref, const TestConfig& cfg) {
  validate_common(test, ref, cfg);
  const PooledStats s = pooled_stats(test, ref);
  const double jsq = j_squared(s, mahalanobis_sq(s));
  const double margin = margin_hat(s, cfg.d);
  return f_test_outcome(Method::T2EQ, s, jsq, scaled_ncp(s.n_t, s.n_r, margin), cfg.alpha);
}

TestOutcome t2eqtm_test(const GroupSample& test, const GroupSample& ref, const TestConfig& cfg) {
  validate_common(test, ref, cfg);
  if (!cfg.true_params) throw DomainError("T2EQTM requires true_params");
  if (cfg.true_params->cov.rows() != test.p())
    throw DimensionMismatch("true covariance dimension does not match data");
  const SpdFactor true_factor = cholesky_spd(cfg.true_params->cov);
  const double margin = quadratic_form_inv(true_factor, cfg.d);
  const PooledStats s = pooled_stats(test, ref);
  const double jsq = j_squared(s, mahalanobis_sq(s));
  return f_test_outcome(Method::T2EQTM, s, jsq, scaled_ncp(s.n_t, s.n_r, margin), cfg.alpha);
}

ReplicateTable bootstrap_replicates(const GroupSample& test, const GroupSample& ref,
                                    std::span<const double> d, std::size_t replicates,
                                    const RngSeed& seed) {
  const std::size_t p = test.p();
  ReplicateTable table;
  table.original = diff_statistic(test, ref, d);
  table.md.reserve(replicates);
  table.dif.reserve(replicates);
  table.difbc.reserve(replicates);

  const std::size_t n_t = test.n(), n_r = ref.n();
  const double n = static_cast<double>(n_t + n_r);
  const double corr_scale = (n - static_cast<double>(p) - 3.0) / (n - 2.0);
  const double corr_shift = static_cast<double>(p) * (1.0 / static_cast<double>(n_t) +
                                                      1.0 / static_cast<double>(n_r));
  const bool degenerate = table.original.degenerate_correction;

  ReplicateScratch scratch(p);
  for (std::uint64_t b = 0; b < replicates; ++b) {
    const auto idx_t = resample_indices(n_t, seed, 1, b);
    const auto idx_r = resample_indices(n_r, seed, 2, b);
    const auto [md, margin] =
        scratch.pooled_forms(test.observations, ref.observations, idx_t, idx_r, d);
    const double dif = md - margin;
    table.md.push_back(md);
    table.dif.push_back(dif);
    table.difbc.push_back(degenerate ? dif : corr_scale * dif - corr_shift);
  }
  return table;
}

AccelTriple jackknife_accels(const GroupSample& test, const GroupSample& ref,
                             std::span<const double> d) {
  if (test.n() < 3 || ref.n() < 3)
    throw DomainError("jackknife needs at least 3 observations per group");
  const std::size_t n_t = test.n(), n_r = ref.n(), p = test.p();
  std::vector<double> th_md, th_dif, th_difbc;
  th_md.reserve(n_t + n_r);
  th_dif.reserve(n_t + n_r);
  th_difbc.reserve(n_t + n_r);

  const auto drop_row = [&](const GroupSample& g, std::size_t skip) {
    Matrix obs(g.n() - 1, p);
    std::size_t out = 0;
    for (std::size_t i = 0; i < g.n(); ++i) {
      if (i == skip) continue;
      const auto src = g.row(i);
      std::copy(src.begin(), src.end(), obs.row(out++).begin());
    }
    return GroupSample(std::move(obs), g.label);
  };

  const auto push = [&](const DiffStatistic& stat) {
    th_md.push_back(stat.d_m_sq);
    th_dif.push_back(stat.a_hat);
    th_difbc.push_back(stat.a_hat_bc);
  };
  for (std::size_t i = 0; i < n_t; ++i) push(diff_statistic(drop_row(test, i), ref, d));
  for (std::size_t i = 0; i < n_r; ++i) push(diff_statistic(test, drop_row(ref, i), d));

  const auto accel_of = [](std::span<const double> theta) {
    double tbar = 0.0;
    for (double t : theta) tbar += t;
    tbar /= static_cast<double>(theta.size());
    double sum2 = 0.0, sum3 = 0.0, max_dev = 0.0;
    for (double t : theta) {
      const double dev = tbar - t;
      max_dev = std::max(max_dev, std::fabs(dev));
      sum2 += dev * dev;
      sum3 += dev * dev * dev;
    }
    if (max_dev <= 1e-14 * std::max(1.0, std::fabs(tbar))) return JackknifeAccel{0.0, true};
    return JackknifeAccel{sum3 / (6.0 * std::pow(sum2, 1.5)), false};
  };
  return {accel_of(th_md), accel_of(th_dif), accel_of(th_difbc)};
}

TestOutcome decide_bootstrap(Method method, const ReplicateTable& table,
                             const AccelTriple* accels, double alpha) {
  if (!is_bootstrap_method(method)) throw DomainError("not a percentile/BCa bootstrap method");

  std::span<const double> reps;
  double point = 0.0;
  double reference = 0.0;
  const JackknifeAccel* accel = nullptr;
  switch (method) {
    case Method::PctBootstrapOnMD:
    case Method::BCaBootstrapOnMD:
      // the data-driven margin stays fixed at its original-sample value;
      // only the distance is resampled
      reps = table.md;
      point = table.original.d_m_sq;
      reference = table.original.margin_sq;
      if (accels) accel = &accels->md;
      break;
    case Method::PctBootstrapOnDif:
    case Method::BCaBootstrapOnDif:
      reps = table.dif;
      point = table.original.a_hat;
      if (accels) accel = &accels->dif;
      break;
    default:
      if (table.original.degenerate_correction)
        throw DomainError("bias-corrected variants unavailable: n - p - 3 <= 0");
      reps = table.difbc;
      point = table.original.a_hat_bc;
      if (accels) accel = &accels->difbc;
      break;
  }

  TestOutcome out;
  out.method = method;
  out.statistic = point;
  out.degenerate_correction = table.original.degenerate_correction;

  double level = 1.0 - alpha;
  if (is_bca_method(method)) {
    if (!accel) throw DomainError("BCa method requires jackknife accelerations");
    const double z0 = bca_z0(reps, point);
    BcaDiagnostics diag;
    diag.z0 = z0;
    diag.accel = accel->value;
    try {
      level = bca_adjusted_level(z0, accel->value, alpha);
    } catch (const BcaSingularity&) {
      level = 1.0 - alpha;
      out.bca_percentile_fallback = true;
    }
    diag.adjusted_level = level;
    out.bca = diag;
  }

  out.threshold_or_percentile = percentile(reps, level);
  out.reject = out.threshold_or_percentile < reference;
  return out;
}

TestOutcome bootstrap_test(const GroupSample& test, const GroupSample& ref,
                           const TestConfig& cfg) {
  validate_common(test, ref, cfg);
  if (!is_bootstrap_method(cfg.method))
    throw DomainError("bootstrap_test requires a percentile/BCa method");
  validate(cfg.bootstrap);
  const ReplicateTable table =
      bootstrap_replicates(test, ref, cfg.d, cfg.bootstrap.replicates, cfg.bootstrap.seed);
  if (is_bca_method(cfg.method)) {
    const AccelTriple accels = jackknife_accels(test, ref, cfg.d);
    return decide_bootstrap(cfg.method, table, &accels, cfg.alpha);
  }
  return decide_bootstrap(cfg.method, table, nullptr, cfg.alpha);
}

TestOutcome abc_test(const GroupSample& test, const GroupSample& ref, const TestConfig& cfg) {
  validate_common(test, ref, cfg);
  if (!is_abc_method(cfg.method)) throw DomainError("abc_test requires an ABC method");
  const Matrix diffs = paired_differences(test, ref);

  TestOutcome out;
  out.method = cfg.method;
  try {
    const AbcAnalysis analysis = abc_analyze(diffs, cfg.d);
    out.statistic = analysis.point_estimate;
    double level = 1.0 - cfg.alpha;
    if (cfg.method == Method::CalibABCOnPairedDif) {
      BootstrapConfig boot = cfg.bootstrap;
      boot.alpha = cfg.alpha;
      const CalibrationResult cal = calibrate_level(diffs, cfg.d, cfg.alpha, boot);
      level = cal.level;
      out.calibrated_level = cal.level;
    }
    out.threshold_or_percentile = abc_endpoint(diffs, cfg.d, analysis, level);
    out.reject = out.threshold_or_percentile < 0.0;
  } catch (const AbcNumericalFailure& e) {
    // numerical failure never helps declare equivalence
    out.failed = true;
    out.reject = false;
    out.failure_reason = e.what();
  }
  return out;
}

TestOutcome run_equivalence_test(const GroupSample& test, const GroupSample& ref,
                                 const TestConfig& cfg) {
  if (cfg.fixed_margin_sq && cfg.method != Method::ExactFixedMargin)
    throw DomainError("fixed_margin_sq is only valid for ExactFixedMargin");
  if (cfg.true_params && cfg.method != Method::T2EQTM)
    throw DomainError("true_params is only valid for T2EQTM");
  switch (cfg.method) {
    case Method::ExactFixedMargin:
      return exact_fixed_margin_test(test, ref, cfg);
    case Method::T2EQ:
      return t2eq_test(test, ref, cfg);
    case Method::T2EQTM:
      return t2eqtm_test(test, ref, cfg);
    case Method::ABCOnPairedDif:
    case Method::CalibABCOnPairedDif:
      return abc_test(test, ref, cfg);
    default:
      return bootstrap_test(test, ref, cfg);
  }
}

}  // namespace equivmd
