#include "equivmd/bootstrap.hpp"

#include <algorithm>
#include <cmath>

#include "equivmd/distributions.hpp"
#include "equivmd/errors.hpp"

namespace equivmd {

void validate(const BootstrapConfig& config) {
  if (config.replicates < 100) throw DomainError("bootstrap replicate count must be >= 100");
  if (!(config.alpha > 0.0 && config.alpha < 0.5))
    throw DomainError("bootstrap alpha must be in (0, 0.5)");
}

std::vector<std::size_t> resample_indices(std::size_t n, const RngSeed& seed,
                                          std::uint64_t group_tag, std::uint64_t b) {
  SplitMix64 eng = make_engine(seed, kStreamResample + group_tag, b);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = uniform_index(eng, n);
  return idx;
}

std::pair<GroupSample, GroupSample> resample_two_sample(const GroupSample& test,
                                                        const GroupSample& ref,
                                                        const RngSeed& seed, std::uint64_t b) {
  const auto build = [&](const GroupSample& g, std::uint64_t tag) {
    const auto idx = resample_indices(g.n(), seed, tag, b);
    Matrix obs(g.n(), g.p());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto src = g.row(idx[i]);
      std::copy(src.begin(), src.end(), obs.row(i).begin());
    }
    return GroupSample(std::move(obs), g.label);
  };
  return {build(test, 1), build(ref, 2)};
}

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw EmptyInput("percentile of an empty sequence");
  if (!(q > 0.0 && q < 1.0)) throw DomainError("percentile requires q in (0, 1)");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  // rank ceil(q*B), 1-based; the 1e-9 slack keeps exact multiples like
  // 0.05 * 1000 from rounding up a rank
  const double raw = q * static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

double bca_z0(std::span<const double> replicates, double point_estimate) {
  const std::size_t b = replicates.size();
  if (b < 100) throw DomainError("bca_z0 requires at least 100 replicates");
  std::size_t below = 0;
  for (double r : replicates)
    if (r < point_estimate) ++below;
  const double lo = 1.0 / static_cast<double>(b + 1);
  const double hi = static_cast<double>(b) / static_cast<double>(b + 1);
  const double prop = std::clamp(static_cast<double>(below) / static_cast<double>(b), lo, hi);
  return std_normal_quantile(prop);
}

JackknifeAccel jackknife_acceleration(
    const GroupSample& test, const GroupSample& ref,
    const std::function<double(const GroupSample&, const GroupSample&)>& statistic) {
  if (test.n() < 3 || ref.n() < 3)
    throw DomainError("jackknife needs at least 3 observations per group");

  const std::size_t n_t = test.n(), n_r = ref.n(), p = test.p();
  std::vector<double> theta;
  theta.reserve(n_t + n_r);

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

  for (std::size_t i = 0; i < n_t; ++i) theta.push_back(statistic(drop_row(test, i), ref));
  for (std::size_t i = 0; i < n_r; ++i) theta.push_back(statistic(test, drop_row(ref, i)));

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
  if (max_dev <= 1e-14 * std::max(1.0, std::fabs(tbar))) return {0.0, true};
  return {sum3 / (6.0 * std::pow(sum2, 1.5)), false};
}

double bca_adjusted_level(double z0, double accel, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must be in (0, 1)");
  if (z0 == 0.0 && accel == 0.0) return 1.0 - alpha;  // identity reduction
  const double w = z0 + std_normal_quantile(1.0 - alpha);
  const double den = 1.0 - accel * w;
  if (std::fabs(den) < 1e-8)
    throw BcaSingularity("BCa level adjustment denominator vanished");
  return std_normal_cdf(z0 + w / den);
}

namespace {

// Evaluates the weighted paired-difference statistic from first and second
// weighted moments. For the ABC derivative sweep the perturbed moments are
// exact rank-one updates of the uniform-weight moments, which brings one
// evaluation down from O(n p^2) to O(p^2); values agree with
// resampling_form_statistic to roundoff (covered by a unit test).
class PairedStatEvaluator {
 public:
  PairedStatEvaluator(const Matrix& diffs, std::span<const double> d)
      : n_(diffs.rows()), p_(diffs.cols()), diffs_(diffs), d_(d.begin(), d.end()) {
    m0_.assign(p_, 0.0);
    t0_.assign(p_ * p_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      const double* r = diffs_.entries().data() + i * p_;
      for (std::size_t j = 0; j < p_; ++j) {
        m0_[j] += r[j];
        for (std::size_t k = j; k < p_; ++k) t0_[j * p_ + k] += r[j] * r[k];
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n_);
    for (auto& v : m0_) v *= inv_n;
    for (auto& v : t0_) v *= inv_n;
    mirror(t0_);
    mw_.resize(p_);
    m2w_.resize(p_ * p_);
    chol_.resize(p_ * p_);
    y_.resize(p_);
  }

  double at_uniform() const { return eval(m0_.data(), t0_.data()); }

  // w = P0 + ep (e_i - P0); sums to one by construction.
  double at_index_perturbation(std::size_t i, double ep) const {
    const double* r = diffs_.entries().data() + i * p_;
    for (std::size_t j = 0; j < p_; ++j) mw_[j] = (1.0 - ep) * m0_[j] + ep * r[j];
    for (std::size_t j = 0; j < p_; ++j)
      for (std::size_t k = j; k < p_; ++k)
        m2w_[j * p_ + k] = (1.0 - ep) * t0_[j * p_ + k] + ep * r[j] * r[k];
    mirror(m2w_);
    return eval(mw_.data(), m2w_.data());
  }

  void set_direction(std::span<const double> dir) {
    dm_.assign(p_, 0.0);
    dt_.assign(p_ * p_, 0.0);
    dsum_ = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double* r = diffs_.entries().data() + i * p_;
      const double w = dir[i];
      dsum_ += w;
      for (std::size_t j = 0; j < p_; ++j) {
        dm_[j] += w * r[j];
        for (std::size_t k = j; k < p_; ++k) dt_[j * p_ + k] += w * r[j] * r[k];
      }
    }
    mirror(dt_);
  }

  // w = (P0 + coef * dir) / (1 + coef * sum(dir)): weights renormalized to one.
  double at_direction(double coef) const {
    const double s = 1.0 + coef * dsum_;
    if (!(s > 0.0) || !std::isfinite(s))
      throw NotSpd("tilted resampling weights have nonpositive total mass");
    const double inv_s = 1.0 / s;
    for (std::size_t j = 0; j < p_; ++j) mw_[j] = (m0_[j] + coef * dm_[j]) * inv_s;
    for (std::size_t j = 0; j < p_ * p_; ++j) m2w_[j] = (t0_[j] + coef * dt_[j]) * inv_s;
    return eval(mw_.data(), m2w_.data());
  }

 private:
  void mirror(std::vector<double>& m) const {
    for (std::size_t j = 0; j < p_; ++j)
      for (std::size_t k = 0; k < j; ++k) m[j * p_ + k] = m[k * p_ + j];
  }

  // statistic = 2 (m' S^-1 m - d' S^-1 d) with S = M2 - m m' (so S_c = S/2)
  double eval(const double* m, const double* m2) const {
    double max_diag = 0.0;
    for (std::size_t j = 0; j < p_; ++j)
      for (std::size_t k = 0; k < p_; ++k) {
        chol_[j * p_ + k] = m2[j * p_ + k] - m[j] * m[k];
        if (j == k) max_diag = std::max(max_diag, chol_[j * p_ + k]);
      }
    // in-place lower Cholesky with the library's relative pivot tolerance
    const double tol = 1e-12 * std::max(max_diag, 0.0);
    for (std::size_t j = 0; j < p_; ++j) {
      double s = chol_[j * p_ + j];
      for (std::size_t k = 0; k < j; ++k) s -= chol_[j * p_ + k] * chol_[j * p_ + k];
      if (!(s > tol)) throw NotSpd("weighted covariance not positive definite");
      const double ljj = std::sqrt(s);
      chol_[j * p_ + j] = ljj;
      for (std::size_t i = j + 1; i < p_; ++i) {
        double t = chol_[i * p_ + j];
        for (std::size_t k = 0; k < j; ++k) t -= chol_[i * p_ + k] * chol_[j * p_ + k];
        chol_[i * p_ + j] = t / ljj;
      }
    }
    const auto qform = [&](const double* v) {
      double q = 0.0;
      for (std::size_t i = 0; i < p_; ++i) {
        double s = v[i];
        for (std::size_t k = 0; k < i; ++k) s -= chol_[i * p_ + k] * y_[k];
        y_[i] = s / chol_[i * p_ + i];
        q += y_[i] * y_[i];
      }
      return q;
    };
    return 2.0 * (qform(m) - qform(d_.data()));
  }

  std::size_t n_, p_;
  const Matrix& diffs_;
  std::vector<double> d_;
  std::vector<double> m0_, t0_;
  std::vector<double> dm_, dt_;
  double dsum_ = 0.0;
  mutable std::vector<double> mw_, m2w_, chol_, y_;
};

AbcAnalysis analyze_with(PairedStatEvaluator& ev, std::size_t n, double step) {
  const double ep = step / static_cast<double>(n);
  AbcAnalysis out;
  out.point_estimate = ev.at_uniform();

  std::vector<double> tdot(n), tddot(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double tp = ev.at_index_perturbation(i, ep);
    const double tm = ev.at_index_perturbation(i, -ep);
    tdot[i] = (tp - tm) / (2.0 * ep);
    tddot[i] = (tp - 2.0 * out.point_estimate + tm) / (ep * ep);
  }

  double sum2 = 0.0, sum3 = 0.0, sum_dd = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum2 += tdot[i] * tdot[i];
    sum3 += tdot[i] * tdot[i] * tdot[i];
    sum_dd += tddot[i];
  }
  const double nn = static_cast<double>(n);
  out.sigma_hat = std::sqrt(sum2) / nn;
  if (!(out.sigma_hat > 0.0) || !std::isfinite(out.sigma_hat))
    throw AbcNumericalFailure("ABC influence components degenerate");
  out.accel = sum3 / (6.0 * nn * nn * nn * out.sigma_hat * out.sigma_hat * out.sigma_hat);

  out.delta.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.delta[i] = tdot[i] / (nn * nn * out.sigma_hat);
  ev.set_direction(out.delta);

  const double cq = (ev.at_direction(ep) - 2.0 * out.point_estimate + ev.at_direction(-ep)) /
                    (2.0 * out.sigma_hat * ep * ep);
  const double bhat = sum_dd / (2.0 * nn * nn);
  const double curv = bhat / out.sigma_hat - cq;
  const double arg =
      std::clamp(2.0 * std_normal_cdf(out.accel) * std_normal_cdf(-curv), 1e-15, 1.0 - 1e-15);
  out.z0 = std_normal_quantile(arg);
  if (!std::isfinite(out.z0) || !std::isfinite(out.accel))
    throw AbcNumericalFailure("ABC bias-correction terms not finite");
  return out;
}

double endpoint_with(PairedStatEvaluator& ev, const AbcAnalysis& analysis, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("ABC level must be in (0, 1)");
  const double w = analysis.z0 + std_normal_quantile(level);
  const double den = 1.0 - analysis.accel * w;
  if (std::fabs(den) < 1e-8)
    throw AbcNumericalFailure("ABC endpoint tilt coefficient singular");
  const double coef = w / (den * den);
  const double value = ev.at_direction(coef);
  if (!std::isfinite(value)) throw AbcNumericalFailure("ABC endpoint not finite");
  return value;
}

void check_abc_input(const Matrix& diffs, std::span<const double> d) {
  if (d.size() != diffs.cols())
    throw DimensionMismatch("margin direction length does not match p");
  if (diffs.rows() <= diffs.cols() + 1)
    throw DomainError("ABC requires more than p + 1 paired differences");
}

}  // namespace

AbcAnalysis abc_analyze(const Matrix& diffs, std::span<const double> d, double step) {
  check_abc_input(diffs, d);
  try {
    PairedStatEvaluator ev(diffs, d);
    return analyze_with(ev, diffs.rows(), step);
  } catch (const NotSpd& e) {
    throw AbcNumericalFailure(std::string("ABC analysis failed: ") + e.what());
  }
}

double abc_endpoint(const Matrix& diffs, std::span<const double> d, const AbcAnalysis& analysis,
                    double level) {
  check_abc_input(diffs, d);
  try {
    PairedStatEvaluator ev(diffs, d);
    ev.set_direction(analysis.delta);
    return endpoint_with(ev, analysis, level);
  } catch (const NotSpd& e) {
    throw AbcNumericalFailure(std::string("ABC endpoint failed: ") + e.what());
  }
}

double abc_upper_bound(const Matrix& diffs, std::span<const double> d, double level,
                       double step) {
  check_abc_input(diffs, d);
  try {
    PairedStatEvaluator ev(diffs, d);
    const AbcAnalysis analysis = analyze_with(ev, diffs.rows(), step);
    return endpoint_with(ev, analysis, level);
  } catch (const NotSpd& e) {
    throw AbcNumericalFailure(std::string("ABC upper bound failed: ") + e.what());
  }
}

CalibrationResult calibrate_level(const Matrix& diffs, std::span<const double> d, double alpha,
                                  const BootstrapConfig& config, double step) {
  check_abc_input(diffs, d);
  validate(config);
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must be in (0, 1)");

  const std::size_t n = diffs.rows(), p = diffs.cols();
  const double target = abc_analyze(diffs, d, step).point_estimate;

  std::vector<double> lambdas;
  lambdas.reserve(config.replicates);
  std::size_t failures = 0;
  Matrix resampled(n, p);

  for (std::uint64_t b = 0; b < config.replicates; ++b) {
    SplitMix64 eng = make_engine(config.seed, kStreamAbcOuter, b);
    for (std::size_t i = 0; i < n; ++i) {
      const auto src = diffs.row(uniform_index(eng, n));
      std::copy(src.begin(), src.end(), resampled.row(i).begin());
    }
    try {
      PairedStatEvaluator ev(resampled, d);
      const AbcAnalysis analysis = analyze_with(ev, n, step);
      // The endpoint is nondecreasing in the level, so bisection finds the
      // level at which this resample's upper bound crosses the original
      // point estimate.
      double lo = 0.001, hi = 0.999;
      for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (endpoint_with(ev, analysis, mid) < target)
          lo = mid;
        else
          hi = mid;
      }
      lambdas.push_back(0.5 * (lo + hi));
    } catch (const NotSpd&) {
      ++failures;
    } catch (const AbcNumericalFailure&) {
      ++failures;
    }
  }

  if (failures * 10 > config.replicates)
    throw AbcNumericalFailure("ABC calibration failed: more than 10% of resamples degenerate");
  CalibrationResult out;
  out.level = percentile(lambdas, 1.0 - alpha);
  out.failures = failures;
  out.replicates = config.replicates;
  return out;
}

}  // namespace equivmd
