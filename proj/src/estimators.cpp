#include "equivmd/estimators.hpp"

#include <cmath>
#include <cstdio>

#include "equivmd/errors.hpp"

namespace equivmd {

namespace {

void mean_of_rows(const Matrix& obs, std::span<double> out) {
  const std::size_t n = obs.rows(), p = obs.cols();
  for (std::size_t j = 0; j < p; ++j) out[j] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = obs.entries().data() + i * p;
    for (std::size_t j = 0; j < p; ++j) out[j] += r[j];
  }
  for (std::size_t j = 0; j < p; ++j) out[j] /= static_cast<double>(n);
}

// Accumulates sum (x_i - mean)(x_i - mean)' into acc (not scaled).
void accumulate_scatter(const Matrix& obs, std::span<const double> mean, Matrix& acc) {
  const std::size_t n = obs.rows(), p = obs.cols();
  double centered[16];
  std::vector<double> heap;
  double* c = centered;
  if (p > 16) {
    heap.resize(p);
    c = heap.data();
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = obs.entries().data() + i * p;
    for (std::size_t j = 0; j < p; ++j) c[j] = r[j] - mean[j];
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t k = j; k < p; ++k) acc(j, k) += c[j] * c[k];
  }
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < j; ++k) acc(j, k) = acc(k, j);
}

}  // namespace

GroupSample::GroupSample(Matrix obs, SampleLabel lab) : observations(std::move(obs)), label(lab) {
  if (observations.rows() < 2) throw DomainError("a group sample needs at least 2 observations");
  for (double e : observations.entries())
    if (!std::isfinite(e)) throw DomainError("sample entries must be finite");
}

PooledStats pooled_stats(const GroupSample& test, const GroupSample& ref) {
  const std::size_t p = test.p();
  if (ref.p() != p) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "group column counts differ: %zu vs %zu", p, ref.p());
    throw DimensionMismatch(buf);
  }
  const std::size_t n_t = test.n(), n_r = ref.n();

  PooledStats s;
  s.n_t = n_t;
  s.n_r = n_r;
  s.p = p;
  s.mean_t.resize(p);
  s.mean_r.resize(p);
  mean_of_rows(test.observations, s.mean_t);
  mean_of_rows(ref.observations, s.mean_r);

  Matrix scatter(p, p);
  accumulate_scatter(test.observations, s.mean_t, scatter);
  accumulate_scatter(ref.observations, s.mean_r, scatter);
  const double div = static_cast<double>(n_t + n_r - 2);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < p; ++k) scatter(j, k) /= div;
  s.pooled_cov = scatter;
  s.pooled_factor = cholesky_spd(s.pooled_cov);
  return s;
}

double mahalanobis_sq(const PooledStats& s) {
  std::vector<double> diff(s.p);
  for (std::size_t j = 0; j < s.p; ++j) diff[j] = s.mean_t[j] - s.mean_r[j];
  return quadratic_form_inv(s.pooled_factor, diff);
}

double j_squared(const PooledStats& s, double d_m_sq) {
  const double n_t = static_cast<double>(s.n_t), n_r = static_cast<double>(s.n_r);
  const double p = static_cast<double>(s.p);
  const double dfd = n_t + n_r - p - 1.0;
  if (!(dfd > 0.0)) throw DomainError("j_squared needs n_t + n_r - p - 1 > 0");
  return dfd / ((n_t + n_r - 2.0) * p) * (n_t * n_r / (n_t + n_r)) * d_m_sq;
}

double margin_hat(const PooledStats& s, std::span<const double> d) {
  return quadratic_form_inv(s.pooled_factor, d);
}

DiffStatistic diff_statistic(const GroupSample& test, const GroupSample& ref,
                             std::span<const double> d) {
  const PooledStats s = pooled_stats(test, ref);
  if (d.size() != s.p) throw DimensionMismatch("margin direction length does not match p");
  DiffStatistic out;
  out.d_m_sq = mahalanobis_sq(s);
  out.margin_sq = margin_hat(s, d);
  out.a_hat = out.d_m_sq - out.margin_sq;
  out.j_sq = j_squared(s, out.d_m_sq);
  const double n = static_cast<double>(s.n_t + s.n_r);
  const double p = static_cast<double>(s.p);
  if (n - p - 3.0 > 0.0) {
    out.a_hat_bc = (n - p - 3.0) / (n - 2.0) * out.a_hat -
                   p * (1.0 / static_cast<double>(s.n_t) + 1.0 / static_cast<double>(s.n_r));
  } else {
    out.a_hat_bc = out.a_hat;
    out.degenerate_correction = true;
  }
  return out;
}

Matrix paired_differences(const GroupSample& test, const GroupSample& ref) {
  if (test.n() != ref.n())
    throw UnequalSampleSizes("paired differences require n_t = n_r");
  if (test.p() != ref.p()) throw DimensionMismatch("group column counts differ");
  const std::size_t n = test.n(), p = test.p();
  Matrix diffs(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      diffs(i, j) = test.observations(i, j) - ref.observations(i, j);
  return diffs;
}

double paired_diff_statistic(const GroupSample& test, const GroupSample& ref,
                             std::span<const double> d) {
  const Matrix diffs = paired_differences(test, ref);
  const std::size_t n = diffs.rows(), p = diffs.cols();
  if (d.size() != p) throw DimensionMismatch("margin direction length does not match p");

  std::vector<double> xbar(p);
  mean_of_rows(diffs, xbar);
  Matrix scatter(p, p);
  accumulate_scatter(diffs, xbar, scatter);
  const double div = 2.0 * static_cast<double>(n - 1);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < p; ++k) scatter(j, k) /= div;
  const SpdFactor f = cholesky_spd(scatter);
  return quadratic_form_inv(f, xbar) - quadratic_form_inv(f, d);
}

double resampling_form_statistic(const Matrix& diffs, std::span<const double> weights,
                                 std::span<const double> d) {
  const std::size_t n = diffs.rows(), p = diffs.cols();
  if (weights.size() != n) throw DimensionMismatch("one weight per difference row required");
  if (d.size() != p) throw DimensionMismatch("margin direction length does not match p");

  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw WeightError("resampling weights must be nonnegative");
    wsum += w;
  }
  if (std::fabs(wsum - 1.0) > 1e-12) throw WeightError("resampling weights must sum to 1");

  std::vector<double> xbar(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights[i] / wsum;
    const double* r = diffs.entries().data() + i * p;
    for (std::size_t j = 0; j < p; ++j) xbar[j] += w * r[j];
  }
  Matrix sc(p, p);
  std::vector<double> c(p);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights[i] / wsum;
    const double* r = diffs.entries().data() + i * p;
    for (std::size_t j = 0; j < p; ++j) c[j] = r[j] - xbar[j];
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t k = j; k < p; ++k) sc(j, k) += 0.5 * w * c[j] * c[k];
  }
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < j; ++k) sc(j, k) = sc(k, j);
  const SpdFactor f = cholesky_spd(sc);
  return quadratic_form_inv(f, xbar) - quadratic_form_inv(f, d);
}

}  // namespace equivmd
