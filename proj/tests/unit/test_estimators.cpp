#include <cmath>
#include <numeric>

#include "doctest.h"
#include "equivmd/distributions.hpp"
#include "equivmd/errors.hpp"
#include "equivmd/estimators.hpp"
#include "equivmd/simharness.hpp"
#include "oracles.hpp"

using equivmd::diff_statistic;
using equivmd::GroupSample;
using equivmd::Matrix;
using equivmd::MvnParams;
using equivmd::pooled_stats;
using equivmd::RngSeed;
using equivmd::SampleLabel;

namespace {

GroupSample make_group(std::size_t n, std::size_t p, const std::vector<double>& entries,
                       SampleLabel label = SampleLabel::Test) {
  return GroupSample(Matrix(n, p, entries), label);
}

GroupSample gaussian_group(const MvnParams& params, std::size_t n, std::uint64_t seed,
                           SampleLabel label) {
  return sample_mvn(params, n, RngSeed{seed}, label);
}

// rows of g mapped by x -> A x + b
GroupSample affine_map(const GroupSample& g, const Matrix& a, const std::vector<double>& b) {
  const std::size_t p = g.p();
  Matrix out(g.n(), p);
  for (std::size_t i = 0; i < g.n(); ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double s = b[j];
      for (std::size_t k = 0; k < p; ++k) s += a(j, k) * g.observations(i, k);
      out(i, j) = s;
    }
  return GroupSample(std::move(out), g.label);
}

}  // namespace

TEST_SUITE("estimators") {

TEST_CASE("group sample validation") {
  CHECK_THROWS_AS(make_group(1, 2, {1.0, 2.0}), equivmd::DomainError);
  CHECK_THROWS_AS(make_group(2, 1, {1.0, std::nan("")}), equivmd::DomainError);
}

TEST_CASE("pooled covariance is consistent under identity noise") {
  MvnParams params{{0.0, 0.0}, Matrix::identity(2)};
  const std::size_t n = 100000;
  const auto test = gaussian_group(params, n, 11, SampleLabel::Test);
  const auto ref = gaussian_group(params, n, 12, SampleLabel::Reference);
  const auto s = pooled_stats(test, ref);
  const double bound = 5.0 / std::sqrt(double(n));
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b)
      CHECK(std::fabs(s.pooled_cov(a, b) - (a == b ? 1.0 : 0.0)) < bound);
}

TEST_CASE("translation moves the mean difference exactly") {
  // integer data, n a power of two, so the means are exact dyadic rationals
  const auto ref = make_group(4, 2, {1, 2, 3, 5, 2, 7, 6, 2}, SampleLabel::Reference);
  Matrix shifted = ref.observations;
  for (std::size_t i = 0; i < 4; ++i) {
    shifted(i, 0) += 3.0;
    shifted(i, 1) += 7.0;
  }
  const GroupSample test(std::move(shifted), SampleLabel::Test);
  const auto s = pooled_stats(test, ref);
  CHECK(s.mean_t[0] - s.mean_r[0] == 3.0);
  CHECK(s.mean_t[1] - s.mean_r[1] == 7.0);
}

TEST_CASE("equal group sizes pool to the average of the group covariances") {
  equivmd::SplitMix64 eng(21);
  MvnParams params{{1.0, -1.0, 0.5}, oracle::random_spd(3, eng)};
  const auto test = gaussian_group(params, 40, 31, SampleLabel::Test);
  const auto ref = gaussian_group(params, 40, 32, SampleLabel::Reference);
  const auto s = pooled_stats(test, ref);
  const auto st = pooled_stats(test, test);  // cov of test with itself
  const auto sr = pooled_stats(ref, ref);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      CHECK(s.pooled_cov(a, b) ==
            doctest::Approx(0.5 * (st.pooled_cov(a, b) + sr.pooled_cov(a, b))).epsilon(1e-12));
}

TEST_CASE("column count mismatch raises") {
  const auto a = make_group(3, 2, {1, 2, 3, 4, 5, 6});
  const auto b = make_group(2, 3, {1, 2, 3, 4, 5, 7});
  CHECK_THROWS_AS(pooled_stats(a, b), equivmd::DimensionMismatch);
}

TEST_CASE("mahalanobis distance basics") {
  MvnParams params{{2.0, 3.0}, Matrix::identity(2)};
  const auto test = gaussian_group(params, 50, 41, SampleLabel::Test);
  const auto same = pooled_stats(test, test);
  CHECK(equivmd::mahalanobis_sq(same) == 0.0);

  // identity pooled covariance: squared Euclidean distance of the means
  const auto ref = gaussian_group(params, 50, 42, SampleLabel::Reference);
  auto s = pooled_stats(test, ref);
  s.pooled_cov = Matrix::identity(2);
  s.pooled_factor = equivmd::cholesky_spd(s.pooled_cov);
  double euclid = 0.0;
  for (std::size_t j = 0; j < 2; ++j) {
    const double d = s.mean_t[j] - s.mean_r[j];
    euclid += d * d;
  }
  CHECK(equivmd::mahalanobis_sq(s) == doctest::Approx(euclid).epsilon(1e-12));
}

TEST_CASE("mahalanobis and margin are invariant under common affine maps") {
  equivmd::SplitMix64 eng(77);
  MvnParams params{{5.0, 1.0, -2.0}, oracle::random_spd(3, eng, 1.0)};
  const auto test = gaussian_group(params, 30, 51, SampleLabel::Test);
  MvnParams params2{{5.5, 1.2, -2.2}, params.cov};
  const auto ref = gaussian_group(params2, 25, 52, SampleLabel::Reference);
  const std::vector<double> d{1.0, 2.0, 0.5};

  const Matrix a = oracle::random_near_identity(3, eng);
  const std::vector<double> b{3.0, -1.0, 0.25};
  const auto test_m = affine_map(test, a, b);
  const auto ref_m = affine_map(ref, a, b);
  std::vector<double> ad(3, 0.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 3; ++k) ad[i] += a(i, k) * d[k];

  const auto s0 = pooled_stats(test, ref);
  const auto s1 = pooled_stats(test_m, ref_m);
  CHECK(equivmd::mahalanobis_sq(s1) ==
        doctest::Approx(equivmd::mahalanobis_sq(s0)).epsilon(1e-8));
  CHECK(equivmd::margin_hat(s1, ad) == doctest::Approx(equivmd::margin_hat(s0, d)).epsilon(1e-8));
}

TEST_CASE("j_squared scaling") {
  MvnParams params{{0.0, 0.0, 0.0}, Matrix::identity(3)};
  const auto test = gaussian_group(params, 12, 61, SampleLabel::Test);
  const auto ref = gaussian_group(params, 12, 62, SampleLabel::Reference);
  const auto s = pooled_stats(test, ref);
  CHECK(equivmd::j_squared(s, 0.0) == 0.0);
  const double one = equivmd::j_squared(s, 1.0);
  CHECK(equivmd::j_squared(s, 2.0) == doctest::Approx(2.0 * one).epsilon(1e-14));
  // constant from the definition at n_t = n_r = 12, p = 3
  CHECK(one == doctest::Approx(20.0 / (22.0 * 3.0) * 6.0).epsilon(1e-14));
}

TEST_CASE("j_squared follows the central F distribution under equal means") {
  // p = 3, n_t = n_r = 12: J^2 ~ F(3, 20) when the true means coincide
  const auto spec = equivmd::build_scenario(equivmd::ScenarioId::S1);
  MvnParams params{spec.mu1, spec.sigma};
  const int sims = 100000;
  std::vector<double> jsq(sims);
  for (int r = 0; r < sims; ++r) {
    const auto test = sample_mvn(params, 12, RngSeed{1000, 0, 0, std::uint64_t(r), 1},
                                 SampleLabel::Test);
    const auto ref = sample_mvn(params, 12, RngSeed{1000, 0, 0, std::uint64_t(r), 2},
                                SampleLabel::Reference);
    const auto s = pooled_stats(test, ref);
    jsq[r] = equivmd::j_squared(s, equivmd::mahalanobis_sq(s));
  }
  const double ks = oracle::ks_distance(jsq, [](double x) {
    return noncentral_f_cdf(x, equivmd::NoncentralFParams{3.0, 20.0, 0.0});
  });
  CHECK(ks < 0.01);
}

TEST_CASE("margin_hat basics and large-sample consistency") {
  MvnParams params{{0.0, 0.0, 0.0}, Matrix::identity(3)};
  const auto test = gaussian_group(params, 20, 71, SampleLabel::Test);
  const auto ref = gaussian_group(params, 20, 72, SampleLabel::Reference);
  auto s = pooled_stats(test, ref);
  const std::vector<double> zero{0.0, 0.0, 0.0};
  CHECK(equivmd::margin_hat(s, zero) == 0.0);
  s.pooled_cov = Matrix::identity(3);
  s.pooled_factor = equivmd::cholesky_spd(s.pooled_cov);
  const std::vector<double> ten{10.0, 10.0, 10.0};
  CHECK(equivmd::margin_hat(s, ten) == doctest::Approx(300.0).epsilon(1e-12));

  // group-1 covariance at n = 1e5 per group: margin within 2% of the
  // population value from the elimination oracle
  const auto spec = equivmd::build_scenario(equivmd::ScenarioId::S1);
  MvnParams g1{spec.mu1, spec.sigma};
  const auto big_t = gaussian_group(g1, 100000, 81, SampleLabel::Test);
  const auto big_r = gaussian_group(g1, 100000, 82, SampleLabel::Reference);
  const double margin = equivmd::margin_hat(pooled_stats(big_t, big_r), spec.d_margin);
  const double truth = oracle::gauss_quadratic_form(spec.sigma, spec.d_margin);
  CHECK(margin == doctest::Approx(truth).epsilon(0.02));
}

TEST_CASE("diff statistic identities and the boundary case") {
  const auto spec = equivmd::build_scenario(equivmd::ScenarioId::S1);
  MvnParams params{spec.mu1, spec.sigma};
  const auto ref = gaussian_group(params, 16, 91, SampleLabel::Reference);
  // shift the test group by exactly d: the two quadratic forms coincide
  Matrix shifted = ref.observations;
  const std::vector<double> d{10.0, 10.0, 10.0};
  for (std::size_t i = 0; i < shifted.rows(); ++i)
    for (std::size_t j = 0; j < 3; ++j) shifted(i, j) += d[j];
  const GroupSample test(std::move(shifted), SampleLabel::Test);

  const auto stat = diff_statistic(test, ref, d);
  CHECK(stat.a_hat == 0.0);
  CHECK(stat.d_m_sq == stat.margin_sq);
  CHECK_FALSE(stat.degenerate_correction);
  // internal identities hold exactly
  const double n = 32.0, p = 3.0;
  CHECK(stat.a_hat_bc == (n - p - 3.0) / (n - 2.0) * stat.a_hat - p * (2.0 / 16.0));
}

TEST_CASE("bias of the plug-in distance matches the expectation formula") {
  // mu_t = mu_r, group-1 covariance, n_t = n_r = 12: the mean of d_m_sq over
  // many replications approaches ((n-2)/(n-p-3)) p (1/n_t + 1/n_r) and the
  // corrected combination is centered at zero
  const auto spec = equivmd::build_scenario(equivmd::ScenarioId::S1);
  MvnParams params{spec.mu1, spec.sigma};
  const int reps = 100000;
  double sum_md = 0.0, sum_bc = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto test = sample_mvn(params, 12, RngSeed{4242, 0, 0, std::uint64_t(r), 1},
                                 SampleLabel::Test);
    const auto ref = sample_mvn(params, 12, RngSeed{4242, 0, 0, std::uint64_t(r), 2},
                                SampleLabel::Reference);
    const auto s = pooled_stats(test, ref);
    const double md = equivmd::mahalanobis_sq(s);
    sum_md += md;
    sum_bc += (24.0 - 3.0 - 3.0) / (24.0 - 2.0) * md - 3.0 * (2.0 / 12.0);
  }
  const double mean_md = sum_md / reps;
  const double expected = (24.0 - 2.0) / (24.0 - 3.0 - 3.0) * 3.0 * (2.0 / 12.0);
  CHECK(mean_md == doctest::Approx(expected).epsilon(0.02));
  CHECK(std::fabs(sum_bc / reps) < 0.02);
}

TEST_CASE("the corrected difference shrinks below the raw difference") {
  equivmd::SplitMix64 eng(17);
  const auto spec = equivmd::build_scenario(equivmd::ScenarioId::S2);
  MvnParams far{{51.0, 81.0, 103.0, 114.0}, spec.sigma};
  MvnParams base{spec.mu1, spec.sigma};
  int seen = 0;
  for (int r = 0; r < 50; ++r) {
    const auto test = gaussian_group(far, 12, 300 + r, SampleLabel::Test);
    const auto ref = gaussian_group(base, 12, 400 + r, SampleLabel::Reference);
    const auto stat = diff_statistic(test, ref, spec.d_margin);
    if (stat.a_hat >= 0.0) {
      ++seen;
      CHECK(stat.a_hat_bc < stat.a_hat);
    }
  }
  CHECK(seen > 10);
}

TEST_CASE("degenerate correction flag when n - p - 3 <= 0") {
  MvnParams params{{0.0, 0.0, 0.0}, Matrix::identity(3)};
  const auto test = gaussian_group(params, 3, 501, SampleLabel::Test);
  const auto ref = gaussian_group(params, 3, 502, SampleLabel::Reference);
  const std::vector<double> d{1.0, 1.0, 1.0};
  const auto stat = diff_statistic(test, ref, d);  // n = 6, p = 3: factor 0
  CHECK(stat.degenerate_correction);
  CHECK(stat.a_hat_bc == stat.a_hat);
}

TEST_CASE("paired difference statistic boundary and degenerate cases") {
  const auto spec = equivmd::build_scenario(equivmd::ScenarioId::S1);
  MvnParams params{spec.mu1, spec.sigma};
  const auto ref = gaussian_group(params, 20, 601, SampleLabel::Reference);
  const std::vector<double> d{10.0, 10.0, 10.0};
  Matrix shifted = ref.observations;
  for (std::size_t i = 0; i < shifted.rows(); ++i)
    for (std::size_t j = 0; j < 3; ++j) shifted(i, j) += d[j];
  // all paired differences identical: S_c collapses
  CHECK_THROWS_AS(
      equivmd::paired_diff_statistic(GroupSample(shifted, SampleLabel::Test), ref, d),
      equivmd::NotSpd);

  // jitter one coordinate pattern so xbar stays exactly d but S_c is regular
  Matrix jittered = shifted;
  for (std::size_t i = 0; i < jittered.rows(); ++i) {
    const double eps = (i % 2 == 0) ? 0.5 : -0.5;
    jittered(i, 0) += eps;
    jittered(i, 1) += (i % 4 < 2) ? 0.25 : -0.25;
    jittered(i, 2) += (i % 8 < 4) ? 0.125 : -0.125;
  }
  const double stat =
      equivmd::paired_diff_statistic(GroupSample(jittered, SampleLabel::Test), ref, d);
  CHECK(stat == 0.0);

  const auto short_ref = gaussian_group(params, 19, 602, SampleLabel::Reference);
  CHECK_THROWS_AS(equivmd::paired_diff_statistic(GroupSample(jittered, SampleLabel::Test),
                                                 short_ref, d),
                  equivmd::UnequalSampleSizes);
}

TEST_CASE("paired difference statistic is consistent at scale") {
  const auto spec = equivmd::build_scenario(equivmd::ScenarioId::S3);  // shift = E
  std::vector<double> mu2(3);
  for (int j = 0; j < 3; ++j) mu2[j] = spec.mu1[j] + spec.shift[j];
  const std::size_t n = 100000;
  const auto test = sample_mvn(MvnParams{mu2, spec.sigma}, n, RngSeed{660}, SampleLabel::Test);
  const auto ref =
      sample_mvn(MvnParams{spec.mu1, spec.sigma}, n, RngSeed{661}, SampleLabel::Reference);
  const double stat = equivmd::paired_diff_statistic(test, ref, spec.d_margin);
  const double truth = oracle::gauss_quadratic_form(spec.sigma, spec.shift) -
                       oracle::gauss_quadratic_form(spec.sigma, spec.d_margin);
  CHECK(stat == doctest::Approx(truth).epsilon(0.02));
}

TEST_CASE("pairing depends on the joint row order") {
  const auto spec = equivmd::build_scenario(equivmd::ScenarioId::S1);
  MvnParams params{spec.mu1, spec.sigma};
  const auto test = gaussian_group(params, 10, 701, SampleLabel::Test);
  const auto ref = gaussian_group(params, 10, 702, SampleLabel::Reference);
  const std::vector<double> d{10.0, 10.0, 10.0};
  const double base = equivmd::paired_diff_statistic(test, ref, d);

  // the same permutation applied to both groups preserves the pairs
  std::vector<std::size_t> perm{7, 2, 9, 0, 4, 1, 8, 3, 6, 5};
  const auto permute = [&](const GroupSample& g) {
    Matrix m(g.n(), g.p());
    for (std::size_t i = 0; i < g.n(); ++i) {
      const auto src = g.row(perm[i]);
      std::copy(src.begin(), src.end(), m.row(i).begin());
    }
    return GroupSample(std::move(m), g.label);
  };
  CHECK(equivmd::paired_diff_statistic(permute(test), permute(ref), d) ==
        doctest::Approx(base).epsilon(1e-12));

  // permuting only one side changes the pairing and the value
  CHECK(equivmd::paired_diff_statistic(permute(test), ref, d) != doctest::Approx(base));
}

TEST_CASE("resampling form at uniform weights is the plug-in paired statistic") {
  const auto spec = equivmd::build_scenario(equivmd::ScenarioId::S1);
  MvnParams params{spec.mu1, spec.sigma};
  const auto test = gaussian_group(params, 15, 801, SampleLabel::Test);
  const auto ref = gaussian_group(params, 15, 802, SampleLabel::Reference);
  const std::vector<double> d{10.0, 10.0, 10.0};
  const Matrix diffs = equivmd::paired_differences(test, ref);
  const std::vector<double> uniform(15, 1.0 / 15.0);
  // plug-in covariance divisor n versus n-1 scales the inverse forms by n/(n-1)
  const double w_stat = equivmd::resampling_form_statistic(diffs, uniform, d);
  const double paired = equivmd::paired_diff_statistic(test, ref, d);
  CHECK(w_stat == doctest::Approx(15.0 / 14.0 * paired).epsilon(1e-12));
}

TEST_CASE("resampling form respects exchangeability and weight validation") {
  const auto spec = equivmd::build_scenario(equivmd::ScenarioId::S1);
  MvnParams params{spec.mu1, spec.sigma};
  const auto test = gaussian_group(params, 8, 811, SampleLabel::Test);
  const auto ref = gaussian_group(params, 8, 812, SampleLabel::Reference);
  const std::vector<double> d{10.0, 10.0, 10.0};
  const Matrix diffs = equivmd::paired_differences(test, ref);

  std::vector<double> w{0.05, 0.1, 0.2, 0.05, 0.15, 0.15, 0.05, 0.25};
  const double base = equivmd::resampling_form_statistic(diffs, w, d);

  const std::vector<std::size_t> perm{3, 1, 7, 2, 0, 6, 4, 5};
  Matrix pd(8, 3);
  std::vector<double> pw(8);
  for (std::size_t i = 0; i < 8; ++i) {
    const auto src = diffs.row(perm[i]);
    std::copy(src.begin(), src.end(), pd.row(i).begin());
    pw[i] = w[perm[i]];
  }
  CHECK(equivmd::resampling_form_statistic(pd, pw, d) == doctest::Approx(base).epsilon(1e-12));

  std::vector<double> negative = w;
  negative[0] = -0.05;
  negative[1] = 0.2;
  CHECK_THROWS_AS(equivmd::resampling_form_statistic(diffs, negative, d), equivmd::WeightError);
  std::vector<double> off_sum(8, 0.2);
  CHECK_THROWS_AS(equivmd::resampling_form_statistic(diffs, off_sum, d), equivmd::WeightError);

  // nearly all mass on one point collapses the weighted covariance
  std::vector<double> spike(8, 1e-13);
  spike[3] = 1.0 - 7e-13;
  CHECK_THROWS_AS(equivmd::resampling_form_statistic(diffs, spike, d), equivmd::NotSpd);
}

}  // TEST_SUITE
