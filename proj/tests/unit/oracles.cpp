#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "equivmd/bootstrap.hpp"
#include "equivmd/estimators.hpp"

namespace oracle {

using equivmd::GaussianStream;
using equivmd::Matrix;
using equivmd::SplitMix64;

double gauss_quadratic_form(const Matrix& m, std::span<const double> v) {
  const std::size_t n = m.rows();
  if (m.cols() != n || v.size() != n) throw std::invalid_argument("shape mismatch");
  // augmented system [M | v], row-reduce with partial pivoting
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i][j] = m(i, j);
    a[i][n] = v[i];
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    if (a[c][c] == 0.0) throw std::invalid_argument("singular matrix");
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) q += v[i] * (a[i][n] / a[i][i]);
  return q;
}

double erf_series_normal_cdf(double x) {
  const double phi = std::exp(-0.5 * x * x) / 2.5066282746310005024;
  double term = x, sum = x;
  for (int k = 1; k < 300; ++k) {
    term *= x * x / (2.0 * k + 1.0);
    sum += term;
    if (std::fabs(term) < 1e-18 * std::max(1.0, std::fabs(sum))) break;
  }
  return 0.5 + phi * sum;
}

double bisect_normal_quantile(double q) {
  double lo = -12.0, hi = 12.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (erf_series_normal_cdf(mid) < q)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

// Marsaglia-Tsang gamma(shape, 1) for shape >= 1.
double gamma_ge1(double shape, SplitMix64& eng, GaussianStream& gauss) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = gauss.next();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = equivmd::uniform_open(eng);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double gamma_draw(double shape, SplitMix64& eng, GaussianStream& gauss) {
  if (shape >= 1.0) return gamma_ge1(shape, eng, gauss);
  const double g = gamma_ge1(shape + 1.0, eng, gauss);
  return g * std::pow(equivmd::uniform_open(eng), 1.0 / shape);
}

}  // namespace

double chi_square_draw(double dof, SplitMix64& eng, GaussianStream& gauss) {
  return 2.0 * gamma_draw(0.5 * dof, eng, gauss);
}

McEstimate mc_noncentral_f_cdf(double x, const equivmd::NoncentralFParams& params,
                               std::size_t draws, std::uint64_t seed) {
  SplitMix64 eng(equivmd::mix64(seed));
  GaussianStream gauss(SplitMix64(equivmd::mix64(seed ^ 0x1234567887654321ull)));
  const double sqrt_ncp = std::sqrt(params.ncp);
  std::size_t below = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double z = gauss.next() + sqrt_ncp;
    double num = z * z;
    if (params.d1 > 1.0) num += chi_square_draw(params.d1 - 1.0, eng, gauss);
    const double den = chi_square_draw(params.d2, eng, gauss);
    const double f = (num / params.d1) / (den / params.d2);
    if (f <= x) ++below;
  }
  McEstimate est;
  est.value = static_cast<double>(below) / static_cast<double>(draws);
  est.se = std::sqrt(est.value * (1.0 - est.value) / static_cast<double>(draws));
  return est;
}

double bca_upper_bound_paired(const Matrix& diffs, std::span<const double> d, double level,
                              std::size_t replicates, std::uint64_t seed) {
  const std::size_t n = diffs.rows(), p = diffs.cols();
  const std::vector<double> uniform(n, 1.0 / static_cast<double>(n));
  const double t0 = equivmd::resampling_form_statistic(diffs, uniform, d);

  SplitMix64 eng(equivmd::mix64(seed));
  std::vector<double> stats;
  stats.reserve(replicates);
  Matrix resampled(n, p);
  for (std::size_t b = 0; b < replicates; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto src = diffs.row(equivmd::uniform_index(eng, n));
      std::copy(src.begin(), src.end(), resampled.row(i).begin());
    }
    stats.push_back(equivmd::resampling_form_statistic(resampled, uniform, d));
  }

  std::size_t below = 0;
  for (double s : stats)
    if (s < t0) ++below;
  const double bd = static_cast<double>(replicates);
  const double prop = std::clamp(static_cast<double>(below) / bd, 1.0 / (bd + 1.0), bd / (bd + 1.0));
  const double z0 = equivmd::std_normal_quantile(prop);

  // one-sample delete-one jackknife of the plug-in statistic
  std::vector<double> theta(n);
  Matrix reduced(n - 1, p);
  const std::vector<double> w_reduced(n - 1, 1.0 / static_cast<double>(n - 1));
  for (std::size_t skip = 0; skip < n; ++skip) {
    std::size_t out = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == skip) continue;
      const auto src = diffs.row(i);
      std::copy(src.begin(), src.end(), reduced.row(out++).begin());
    }
    theta[skip] = equivmd::resampling_form_statistic(reduced, w_reduced, d);
  }
  double tbar = 0.0;
  for (double t : theta) tbar += t;
  tbar /= static_cast<double>(n);
  double sum2 = 0.0, sum3 = 0.0;
  for (double t : theta) {
    const double dev = tbar - t;
    sum2 += dev * dev;
    sum3 += dev * dev * dev;
  }
  const double accel = sum2 > 0.0 ? sum3 / (6.0 * std::pow(sum2, 1.5)) : 0.0;

  const double w = z0 + equivmd::std_normal_quantile(level);
  const double adjusted = equivmd::std_normal_cdf(z0 + w / (1.0 - accel * w));
  return equivmd::percentile(stats, adjusted);
}

Matrix random_spd(std::size_t dim, SplitMix64& eng, double ridge) {
  Matrix a(dim, dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) a(i, j) = 2.0 * equivmd::uniform01(eng) - 1.0;
  Matrix m(dim, dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) s += a(i, k) * a(j, k);
      m(i, j) = s + (i == j ? ridge : 0.0);
    }
  return m;
}

Matrix random_near_identity(std::size_t dim, SplitMix64& eng, double scale) {
  Matrix m = Matrix::identity(dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j)
      m(i, j) += scale * (2.0 * equivmd::uniform01(eng) - 1.0);
  return m;
}

std::vector<double> random_vector(std::size_t dim, SplitMix64& eng, double lo, double hi) {
  std::vector<double> v(dim);
  for (auto& x : v) x = lo + (hi - lo) * equivmd::uniform01(eng);
  return v;
}

}  // namespace oracle
