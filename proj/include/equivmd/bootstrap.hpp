#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "equivmd/estimators.hpp"
#include "equivmd/rng.hpp"

namespace equivmd {

struct BootstrapConfig {
  std::size_t replicates = 1000;  // B
  RngSeed seed{};
  double alpha = 0.05;
};

void validate(const BootstrapConfig& config);  // B >= 100, 0 < alpha < 0.5

struct BcaDiagnostics {
  double z0 = 0.0;
  double accel = 0.0;
  double adjusted_level = 0.0;
};

// Substream tags for engines derived below a seed's label tuple.
inline constexpr std::uint64_t kStreamResample = 101;
inline constexpr std::uint64_t kStreamAbcOuter = 102;

/// Row indices of the b-th resample of a group of size n: n draws with
/// replacement, deterministic in (seed, group_tag, b).
std::vector<std::size_t> resample_indices(std::size_t n, const RngSeed& seed,
                                          std::uint64_t group_tag, std::uint64_t b);

/// Independent row resamples of both groups, sizes preserved.
std::pair<GroupSample, GroupSample> resample_two_sample(const GroupSample& test,
                                                        const GroupSample& ref,
                                                        const RngSeed& seed, std::uint64_t b);

/// Empirical quantile as an exact order statistic: element ceil(q*B) (1-based)
/// of the ascending sort. No interpolation, so decision rules are
/// reproducible across platforms.
double percentile(std::span<const double> values, double q);

/// Bias-correction term: Phi^-1 of the strict-inequality proportion
/// #{replicates < point_estimate} / B, clamped to [1/(B+1), B/(B+1)].
double bca_z0(std::span<const double> replicates, double point_estimate);

struct JackknifeAccel {
  double value = 0.0;
  bool degenerate = false;  // all leave-one-out values equal
};

/// Acceleration via combined delete-one jackknife over the n_t + n_r
/// observations (each deletion from the group that owns the observation):
///   a = sum (tbar - t_i)^3 / (6 [sum (tbar - t_i)^2]^{3/2}).
JackknifeAccel jackknife_acceleration(
    const GroupSample& test, const GroupSample& ref,
    const std::function<double(const GroupSample&, const GroupSample&)>& statistic);

/// BCa-adjusted probability Phi(z0 + (z0 + z_{1-alpha}) / (1 - accel (z0 + z_{1-alpha}))).
/// Exactly 1 - alpha when z0 = accel = 0. Throws BcaSingularity when the
/// denominator vanishes.
double bca_adjusted_level(double z0, double accel, double alpha);

/// The weight-space analysis behind the nonparametric ABC interval for the
/// paired-difference statistic: influence components and second derivatives
/// by central finite differences at the uniform weight vector, giving the
/// standard-error, acceleration, and bias-correction ingredients.
struct AbcAnalysis {
  double point_estimate = 0.0;  // statistic at uniform weights
  double sigma_hat = 0.0;
  double accel = 0.0;
  double z0 = 0.0;
  std::vector<double> delta;  // least-favorable direction
};

AbcAnalysis abc_analyze(const Matrix& diffs, std::span<const double> d, double step = 0.001);

/// ABC endpoint at a confidence level: the statistic evaluated at the tilted
/// weight vector along the least-favorable direction.
double abc_endpoint(const Matrix& diffs, std::span<const double> d, const AbcAnalysis& analysis,
                    double level);

/// Nonparametric ABC upper confidence endpoint for the paired-difference
/// statistic. Throws AbcNumericalFailure when a perturbed evaluation
/// degenerates.
double abc_upper_bound(const Matrix& diffs, std::span<const double> d, double level,
                       double step = 0.001);

struct CalibrationResult {
  double level = 0.0;         // calibrated confidence level
  std::size_t failures = 0;   // outer resamples excluded for numerical failure
  std::size_t replicates = 0;
};

/// Bootstrap calibration of the ABC confidence point: for each outer resample
/// of the paired differences, inverse-search the level at which the resample's
/// ABC upper bound equals the original point estimate; the calibrated level is
/// the (1 - alpha) empirical quantile of those levels. Fails (throws
/// AbcNumericalFailure) when more than 10% of resamples fail.
CalibrationResult calibrate_level(const Matrix& diffs, std::span<const double> d, double alpha,
                                  const BootstrapConfig& config, double step = 0.001);

}  // namespace equivmd
