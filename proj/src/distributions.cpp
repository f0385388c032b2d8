#include "equivmd/distributions.hpp"

#include <cmath>
#include <cstdio>

#include "equivmd/errors.hpp"

namespace equivmd {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440084436210485;

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

// Continued fraction for the regularized incomplete beta (modified Lentz).
double inc_beta_cf(double x, double a, double b) {
  constexpr double tiny = 1e-300;
  constexpr int max_terms = 2000;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_terms; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 3e-16) return h;
  }
  throw ConvergenceFailure("incomplete beta continued fraction did not converge");
}

// Regularized incomplete beta I_x(a, b).
double inc_beta_reg(double x, double a, double b) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
  if (x < (a + 1.0) / (a + b + 2.0))
    return std::exp(log_front) * inc_beta_cf(x, a, b) / a;
  return 1.0 - std::exp(log_front) * inc_beta_cf(1.0 - x, b, a) / b;
}

// Peter Acklam's rational approximation to the inverse normal CDF.
double norm_quantile_estimate(double q) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (q < p_low) {
    const double r = std::sqrt(-2.0 * std::log(q));
    return (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
           ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
  }
  if (q > 1.0 - p_low) {
    const double r = std::sqrt(-2.0 * std::log(1.0 - q));
    return -(((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
           ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
  }
  const double r = q - 0.5;
  const double s = r * r;
  return (((((a[0] * s + a[1]) * s + a[2]) * s + a[3]) * s + a[4]) * s + a[5]) * r /
         (((((b[0] * s + b[1]) * s + b[2]) * s + b[3]) * s + b[4]) * s + 1.0);
}

void check_mvn_params(const MvnParams& params) {
  if (params.cov.rows() != params.cov.cols())
    throw DimensionMismatch("covariance matrix must be square");
  if (params.mean.size() != params.cov.rows())
    throw DimensionMismatch("mean length does not match covariance dimension");
  for (double m : params.mean)
    if (!std::isfinite(m)) throw DomainError("mean entries must be finite");
}

Matrix sample_normal_rows(std::span<const double> mean, const SpdFactor& factor, std::size_t n,
                          const RngSeed& seed) {
  const std::size_t p = mean.size();
  GaussianStream gauss(make_engine(seed));
  Matrix obs(n, p);
  std::vector<double> z(p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) z[j] = gauss.next();
    for (std::size_t k = 0; k < p; ++k) {
      double x = mean[k];
      for (std::size_t j = 0; j <= k; ++j) x += factor.lower()(k, j) * z[j];
      obs(i, k) = x;
    }
  }
  return obs;
}

}  // namespace

double std_normal_cdf(double x) {
  if (!std::isfinite(x)) throw DomainError("std_normal_cdf requires a finite argument");
  return 0.5 * std::erfc(-x * kInvSqrt2);
}

double std_normal_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("std_normal_quantile requires q in (0, 1)");
  double x = norm_quantile_estimate(q);
  // One Halley step against erfc pushes the estimate to machine accuracy.
  // Skipped in the far tails where exp(x^2/2) would overflow and the
  // rational estimate is already accurate to ~1e-9.
  if (std::fabs(x) < 8.0) {
    const double err = std_normal_cdf(x) - q;
    const double u = err * 2.5066282746310005024 * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double noncentral_f_cdf(double x, const NoncentralFParams& params) {
  if (!(params.d1 > 0.0) || !(params.d2 > 0.0))
    throw DomainError("degrees of freedom must be positive");
  if (!(params.ncp >= 0.0)) throw DomainError("noncentrality must be nonnegative");
  if (x < 0.0) throw DomainError("noncentral_f_cdf requires x >= 0");
  if (x == 0.0) return 0.0;

  const double ha = 0.5 * params.d1, hb = 0.5 * params.d2;
  const double u = params.d1 * x / (params.d1 * x + params.d2);
  if (params.ncp == 0.0) return inc_beta_reg(u, ha, hb);
  if (u >= 1.0) return 1.0;

  const double hl = 0.5 * params.ncp;
  const long mode = static_cast<long>(hl);

  // Weight, beta term and term-ratio seed values at the modal Poisson index,
  // then one-step recurrences outward in both directions. The neglected
  // Poisson mass bounds the truncation error because every beta term is <= 1.
  const double wm = std::exp(mode * std::log(hl) - hl - std::lgamma(mode + 1.0));
  const double am = ha + static_cast<double>(mode);
  const double im = inc_beta_reg(u, am, hb);
  const double log_u = std::log(u), log_1mu = std::log1p(-u);
  const double tm = std::exp(am * log_u + hb * log_1mu - std::log(am) - log_beta(am, hb));

  constexpr double kMassTolerance = 1e-13;
  double sum = wm * im;
  double wsum = wm;

  // upward sweep: j = mode+1, mode+2, ...
  {
    double w = wm, i_term = im, t = tm;
    for (long j = mode; wsum < 1.0 - kMassTolerance; ++j) {
      const double a = ha + static_cast<double>(j);
      i_term = std::max(i_term - t, 0.0);
      t *= u * (a + hb) / (a + 1.0);
      w *= hl / static_cast<double>(j + 1);
      sum += w * i_term;
      wsum += w;
      // beta terms are <= 1, so weights below 1e-17 cannot move the result
      if (w < 1e-17 || j > mode + 1000000) break;
    }
  }
  // downward sweep: j = mode-1, ..., 0
  {
    double w = wm, i_term = im, t = tm;
    for (long j = mode; j >= 1 && wsum < 1.0 - kMassTolerance; --j) {
      const double a = ha + static_cast<double>(j);
      t *= a / (u * (a - 1.0 + hb));
      i_term = std::min(i_term + t, 1.0);
      w *= static_cast<double>(j) / hl;
      sum += w * i_term;
      wsum += w;
      if (w < 1e-17) break;
    }
  }
  return std::min(std::max(sum, 0.0), 1.0);
}

double noncentral_f_quantile(double alpha, const NoncentralFParams& params) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw DomainError("noncentral_f_quantile requires alpha in (0, 1)");

  double lo = 0.0, hi = 1.0;
  double f_hi = noncentral_f_cdf(hi, params);
  while (f_hi < alpha) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw ConvergenceFailure("noncentral_f_quantile bracket grew unbounded");
    f_hi = noncentral_f_cdf(hi, params);
  }

  constexpr int max_iterations = 200;
  double f_lo = (lo == 0.0) ? 0.0 : noncentral_f_cdf(lo, params);
  double x = 0.5 * (lo + hi), f_x = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    // secant proposal from the bracket endpoints, bisection as safeguard
    double cand = lo + (alpha - f_lo) * (hi - lo) / (f_hi - f_lo);
    if (!(cand > lo && cand < hi)) cand = 0.5 * (lo + hi);
    x = cand;
    f_x = noncentral_f_cdf(x, params);
    if (std::fabs(f_x - alpha) <= 1e-12) return x;
    if (f_x < alpha) {
      lo = x;
      f_lo = f_x;
    } else {
      hi = x;
      f_hi = f_x;
    }
    if (hi - lo <= 1e-15 * (1.0 + hi)) break;
  }
  if (std::fabs(f_x - alpha) <= 1e-9) return x;
  throw ConvergenceFailure("noncentral_f_quantile did not reach tolerance");
}

GroupSample sample_mvn(const MvnParams& params, std::size_t n, const RngSeed& seed,
                       SampleLabel label) {
  check_mvn_params(params);
  if (n < 2) throw DomainError("sample size must be at least 2");
  const SpdFactor factor = cholesky_spd(params.cov);
  return GroupSample(sample_normal_rows(params.mean, factor, n, seed), label);
}

MvnParams lognormal_underlying_params(const MvnParams& target) {
  check_mvn_params(target);
  const std::size_t p = target.mean.size();
  for (double m : target.mean)
    if (!(m > 0.0)) throw DomainError("lognormal target means must be strictly positive");

  MvnParams underlying;
  underlying.cov = Matrix(p, p);
  underlying.mean.resize(p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const double ratio = target.cov(i, j) / (target.mean[i] * target.mean[j]);
      if (!(1.0 + ratio > 0.0))
        throw DomainError("lognormal moment matching undefined: 1 + cov_ij/(mean_i mean_j) <= 0");
      underlying.cov(i, j) = std::log1p(ratio);
    }
  }
  for (std::size_t i = 0; i < p; ++i)
    underlying.mean[i] = std::log(target.mean[i]) - 0.5 * underlying.cov(i, i);
  return underlying;
}

GroupSample sample_mvln(const MvnParams& params, std::size_t n, const RngSeed& seed,
                        SampleLabel label) {
  if (n < 2) throw DomainError("sample size must be at least 2");
  const MvnParams underlying = lognormal_underlying_params(params);
  const SpdFactor factor = cholesky_spd(underlying.cov);
  Matrix obs = sample_normal_rows(underlying.mean, factor, n, seed);
  for (std::size_t i = 0; i < obs.rows(); ++i)
    for (std::size_t j = 0; j < obs.cols(); ++j) obs(i, j) = std::exp(obs(i, j));
  return GroupSample(std::move(obs), label);
}

}  // namespace equivmd
