#pragma once

#include <cstddef>
#include <span>

#include "equivmd/linalg.hpp"

namespace equivmd {

enum class SampleLabel { Test, Reference };

/// One product's sample: an n x p matrix, rows are observations.
struct GroupSample {
  Matrix observations;
  SampleLabel label = SampleLabel::Test;

  GroupSample() = default;
  GroupSample(Matrix obs, SampleLabel lab);  // validates n >= 2, finite entries

  std::size_t n() const noexcept { return observations.rows(); }
  std::size_t p() const noexcept { return observations.cols(); }
  std::span<const double> row(std::size_t i) const { return observations.row(i); }
};

/// Group means and the pooled covariance
///   pooled_cov = ((n_t-1) cov_t + (n_r-1) cov_r) / (n_t + n_r - 2),
/// with its Cholesky factor.
struct PooledStats {
  std::vector<double> mean_t;
  std::vector<double> mean_r;
  Matrix pooled_cov;
  SpdFactor pooled_factor;
  std::size_t n_t = 0;
  std::size_t n_r = 0;
  std::size_t p = 0;
};

/// The point statistics of one two-sample comparison. Identities:
///   a_hat = d_m_sq - margin_sq
///   a_hat_bc = ((n-p-3)/(n-2)) a_hat - p (1/n_t + 1/n_r),  n = n_t + n_r.
/// When n - p - 3 <= 0 the correction is undefined; a_hat_bc then carries the
/// uncorrected value and degenerate_correction is set.
struct DiffStatistic {
  double d_m_sq = 0.0;
  double margin_sq = 0.0;
  double a_hat = 0.0;
  double a_hat_bc = 0.0;
  double j_sq = 0.0;
  bool degenerate_correction = false;
};

PooledStats pooled_stats(const GroupSample& test, const GroupSample& ref);

/// Plug-in squared Mahalanobis distance of the group means under the pooled
/// covariance.
double mahalanobis_sq(const PooledStats& s);

/// Scales a squared Mahalanobis distance to the F-distributed statistic:
///   ((n_t+n_r-p-1) / ((n_t+n_r-2) p)) * (n_t n_r / (n_t+n_r)) * d_m_sq.
double j_squared(const PooledStats& s, double d_m_sq);

/// Data-driven squared margin d' pooled_cov^-1 d.
double margin_hat(const PooledStats& s, std::span<const double> d);

DiffStatistic diff_statistic(const GroupSample& test, const GroupSample& ref,
                             std::span<const double> d);

/// Rows of test minus rows of ref, paired by observation index.
/// Throws UnequalSampleSizes when the groups differ in n.
Matrix paired_differences(const GroupSample& test, const GroupSample& ref);

/// One-sample statistic of the paired differences x_i:
///   xbar' S_c^-1 xbar - d' S_c^-1 d,
/// with S_c = (1/2) (1/(n_c-1)) sum (x_i - xbar)(x_i - xbar)'.
double paired_diff_statistic(const GroupSample& test, const GroupSample& ref,
                             std::span<const double> d);

/// Weighted analog of paired_diff_statistic used by the ABC bootstrap:
/// means and covariance are plain weighted sums (weights sum to 1, no n/(n-1)
/// correction), S_c(w) = (1/2) sum w_i (x_i - xbar(w))(x_i - xbar(w))'.
/// `diffs` rows are the paired difference vectors.
double resampling_form_statistic(const Matrix& diffs, std::span<const double> weights,
                                 std::span<const double> d);

}  // namespace equivmd
