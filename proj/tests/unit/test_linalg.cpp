#include <cmath>

#include "doctest.h"
#include "equivmd/errors.hpp"
#include "equivmd/linalg.hpp"
#include "oracles.hpp"

using equivmd::cholesky_spd;
using equivmd::Matrix;
using equivmd::quadratic_form_inv;

namespace {

// 3x3 covariance from the simulation study's first parameter group; its
// margin quadratic form is pinned below as a regression constant.
Matrix group1_cov() {
  return Matrix(3, 3,
                {120.0, 39.0, -9.0,   //
                 39.0, 146.0, 111.0,  //
                 -9.0, 111.0, 113.0});
}

double max_abs(const Matrix& m) {
  double v = 0.0;
  for (double e : m.entries()) v = std::max(v, std::fabs(e));
  return v;
}

}  // namespace

TEST_SUITE("linalg") {

TEST_CASE("cholesky of the identity is the identity") {
  const auto f = cholesky_spd(Matrix::identity(3));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(f.lower()(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(0.0));
}

TEST_CASE("cholesky of a diagonal matrix takes square roots") {
  const double diag[] = {4.0, 9.0};
  const auto f = cholesky_spd(Matrix::diagonal(diag));
  CHECK(f.lower()(0, 0) == doctest::Approx(2.0));
  CHECK(f.lower()(1, 1) == doctest::Approx(3.0));
  CHECK(f.lower()(1, 0) == 0.0);
}

TEST_CASE("group-1 covariance factors without error") {
  CHECK_NOTHROW(cholesky_spd(group1_cov()));
}

TEST_CASE("degenerate and indefinite inputs raise NotSpd") {
  CHECK_THROWS_AS(cholesky_spd(Matrix(2, 2, {1.0, 1.0, 1.0, 1.0})), equivmd::NotSpd);
  CHECK_THROWS_AS(cholesky_spd(Matrix(2, 2, {1.0, 2.0, 2.0, 1.0})), equivmd::NotSpd);
  CHECK_THROWS_AS(cholesky_spd(Matrix(2, 2, {-1.0, 0.0, 0.0, -1.0})), equivmd::NotSpd);
}

TEST_CASE("asymmetric input is rejected up front") {
  CHECK_THROWS_AS(cholesky_spd(Matrix(2, 2, {1.0, 0.5, 0.1, 1.0})), equivmd::DomainError);
  CHECK_THROWS_AS(cholesky_spd(Matrix(2, 3)), equivmd::DimensionMismatch);
}

TEST_CASE("quadratic form under the identity is the squared norm") {
  const auto f = cholesky_spd(Matrix::identity(3));
  const double v[] = {1.0, 2.0, 2.0};
  CHECK(quadratic_form_inv(f, v) == doctest::Approx(9.0));
  const double zero[] = {0.0, 0.0, 0.0};
  CHECK(quadratic_form_inv(f, zero) == 0.0);
  const double wrong[] = {1.0, 2.0};
  CHECK_THROWS_AS(quadratic_form_inv(f, wrong), equivmd::DimensionMismatch);
}

TEST_CASE("group-1 margin quadratic form matches the elimination oracle") {
  const Matrix cov = group1_cov();
  const double d[] = {10.0, 10.0, 10.0};
  const double expected = oracle::gauss_quadratic_form(cov, d);
  const double got = quadratic_form_inv(cholesky_spd(cov), d);
  CHECK(got == doctest::Approx(expected).epsilon(1e-10));
  // regression pin of the oracle value (exact value 678700/239619)
  CHECK(got == doctest::Approx(2.8324131224986333).epsilon(1e-9));
}

TEST_CASE("quadratic form agrees with the elimination oracle on random SPD input") {
  equivmd::SplitMix64 eng(41);
  for (std::size_t dim = 2; dim <= 6; ++dim) {
    for (int rep = 0; rep < 50; ++rep) {
      const Matrix m = oracle::random_spd(dim, eng);
      const auto v = oracle::random_vector(dim, eng);
      const double expected = oracle::gauss_quadratic_form(m, v);
      const double got = quadratic_form_inv(cholesky_spd(m), v);
      CHECK(got == doctest::Approx(expected).epsilon(1e-10));
      CHECK(got > 0.0);
    }
  }
}

TEST_CASE("factor reconstructs the input") {
  equivmd::SplitMix64 eng(99);
  for (int rep = 0; rep < 40; ++rep) {
    const Matrix m = oracle::random_spd(4, eng);
    const auto f = cholesky_spd(m);
    Matrix rec(4, 4);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < 4; ++k) s += f.lower()(i, k) * f.lower()(j, k);
        rec(i, j) = s;
      }
    double err = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) err = std::max(err, std::fabs(rec(i, j) - m(i, j)));
    CHECK(err <= 1e-10 * max_abs(m));
  }
}

TEST_CASE("quadratic form is invariant under congruence transforms") {
  // v' (A M A')^-1 (A v) ... with the vector mapped by A as well
  equivmd::SplitMix64 eng(7);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t dim = 2 + rep % 4;
    const Matrix m = oracle::random_spd(dim, eng);
    const Matrix a = oracle::random_near_identity(dim, eng);
    const auto v = oracle::random_vector(dim, eng);

    Matrix amat(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k)
          for (std::size_t l = 0; l < dim; ++l) s += a(i, k) * m(k, l) * a(j, l);
        amat(i, j) = s;
      }
    // symmetrize roundoff
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < i; ++j) {
        const double avg = 0.5 * (amat(i, j) + amat(j, i));
        amat(i, j) = amat(j, i) = avg;
      }
    std::vector<double> av(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t k = 0; k < dim; ++k) av[i] += a(i, k) * v[k];

    const double base = quadratic_form_inv(cholesky_spd(m), v);
    const double mapped = quadratic_form_inv(cholesky_spd(amat), av);
    CHECK(mapped == doctest::Approx(base).epsilon(1e-8));
  }
}

TEST_CASE("bilinear form basics") {
  const auto id2 = cholesky_spd(Matrix::identity(2));
  const double e1[] = {1.0, 0.0}, e2[] = {0.0, 1.0}, ones[] = {1.0, 1.0};
  CHECK(equivmd::bilinear_form_inv(id2, e1, e2) == doctest::Approx(0.0));
  CHECK(equivmd::bilinear_form_inv(id2, ones, ones) == doctest::Approx(2.0));

  const double diag[] = {2.0, 4.0};
  const auto fd = cholesky_spd(Matrix::diagonal(diag));
  const double u[] = {2.0, 0.0}, v[] = {2.0, 4.0};
  CHECK(equivmd::bilinear_form_inv(fd, u, v) == doctest::Approx(2.0));
}

TEST_CASE("bilinear form is symmetric in its arguments") {
  equivmd::SplitMix64 eng(13);
  for (int rep = 0; rep < 30; ++rep) {
    const Matrix m = oracle::random_spd(3, eng);
    const auto f = cholesky_spd(m);
    const auto u = oracle::random_vector(3, eng);
    const auto v = oracle::random_vector(3, eng);
    CHECK(equivmd::bilinear_form_inv(f, u, v) ==
          doctest::Approx(equivmd::bilinear_form_inv(f, v, u)).epsilon(1e-12));
  }
}

TEST_CASE("solve returns M^-1 b") {
  equivmd::SplitMix64 eng(3);
  const Matrix m = oracle::random_spd(4, eng);
  const auto b = oracle::random_vector(4, eng);
  const auto x = cholesky_spd(m).solve(b);
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j) s += m(i, j) * x[j];
    CHECK(s == doctest::Approx(b[i]).epsilon(1e-9));
  }
}

}  // TEST_SUITE
