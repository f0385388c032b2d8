#pragma once

#include <cstddef>
#include <vector>

#include "equivmd/estimators.hpp"
#include "equivmd/linalg.hpp"
#include "equivmd/rng.hpp"

namespace equivmd {

/// Standard normal CDF, absolute error well below 1e-12.
double std_normal_cdf(double x);

/// Inverse standard normal CDF on (0, 1); throws DomainError outside.
double std_normal_quantile(double q);

struct MvnParams {
  std::vector<double> mean;
  Matrix cov;
};

struct NoncentralFParams {
  double d1 = 1.0;   // numerator degrees of freedom
  double d2 = 1.0;   // denominator degrees of freedom
  double ncp = 0.0;  // noncentrality
};

/// P(F <= x) for the noncentral F distribution, computed as a
/// Poisson(ncp/2)-weighted series of regularized incomplete beta terms summed
/// outward from the modal Poisson index. Absolute error <= 1e-10 over the
/// parameter ranges used here (ncp up to a few thousand).
double noncentral_f_cdf(double x, const NoncentralFParams& params);

/// Lower alpha-quantile: bracketing plus a safeguarded secant/bisection
/// hybrid on noncentral_f_cdf. Throws ConvergenceFailure after the iteration
/// budget.
double noncentral_f_quantile(double alpha, const NoncentralFParams& params);

/// n draws from N(mean, cov); row i = mean + L z_i with L the Cholesky factor
/// of cov. Bit-identical output for identical (params, n, seed).
GroupSample sample_mvn(const MvnParams& params, std::size_t n, const RngSeed& seed,
                       SampleLabel label);

/// Underlying normal parameters for the moment-matched lognormal: the
/// componentwise exponential of N(m, S) has exactly the requested mean and
/// covariance, with
///   S_ij = ln(1 + cov_ij / (mean_i mean_j)),  m_i = ln(mean_i) - S_ii / 2.
MvnParams lognormal_underlying_params(const MvnParams& target);

/// n moment-matched lognormal draws: exp() applied componentwise to the
/// underlying normal sample. Requires strictly positive target means.
GroupSample sample_mvln(const MvnParams& params, std::size_t n, const RngSeed& seed,
                        SampleLabel label);

}  // namespace equivmd
