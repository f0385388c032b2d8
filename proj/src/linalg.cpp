#include "equivmd/linalg.hpp"

#include <cmath>
#include <cstdio>
#include <utility>

#include "equivmd/errors.hpp"

namespace equivmd {

namespace {

constexpr double kSpdPivotTolerance = 1e-12;  // relative to largest diagonal entry
constexpr double kSymmetryTolerance = 1e-8;   // relative to largest |entry|

[[noreturn]] void throw_dim(const char* what, std::size_t a, std::size_t b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s: %zu vs %zu", what, a, b);
  throw DimensionMismatch(buf);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), entries_(rows * cols, 0.0) {
  if (rows == 0 || cols == 0) throw DomainError("matrix dimensions must be >= 1");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (rows == 0 || cols == 0) throw DomainError("matrix dimensions must be >= 1");
  if (entries_.size() != rows * cols)
    throw_dim("matrix entry count", entries_.size(), rows * cols);
  for (double e : entries_)
    if (!std::isfinite(e)) throw DomainError("matrix entries must be finite");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

std::vector<double> SpdFactor::solve(std::span<const double> b) const {
  const std::size_t n = dim();
  if (b.size() != n) throw_dim("solve rhs length", b.size(), n);
  std::vector<double> x(b.begin(), b.end());
  solve_lower_inplace(x);
  // back substitution with L'
  const Matrix& l = lower_;
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

void SpdFactor::solve_lower_inplace(std::span<double> x) const {
  const std::size_t n = dim();
  if (x.size() != n) throw_dim("solve rhs length", x.size(), n);
  const Matrix& l = lower_;
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    const double* lrow = l.entries().data() + i * n;
    for (std::size_t k = 0; k < i; ++k) s -= lrow[k] * x[k];
    x[i] = s / lrow[i];
  }
}

SpdFactor cholesky_spd(const Matrix& m) {
  const std::size_t n = m.rows();
  if (n != m.cols()) throw_dim("cholesky of non-square matrix", n, m.cols());

  double max_abs = 0.0;
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) max_abs = std::max(max_abs, std::fabs(m(i, j)));
    max_diag = std::max(max_diag, m(i, i));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::fabs(m(i, j) - m(j, i)) > kSymmetryTolerance * std::max(max_abs, 1.0))
        throw DomainError("cholesky_spd requires a symmetric matrix");

  const double tol = kSpdPivotTolerance * std::max(max_diag, 0.0);
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = m(j, j);
    for (std::size_t k = 0; k < j; ++k) s -= l(j, k) * l(j, k);
    if (!(s > tol))  // also catches NaN
      throw NotSpd("matrix not positive definite (pivot below tolerance)");
    const double ljj = std::sqrt(s);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double t = m(i, j);
      for (std::size_t k = 0; k < j; ++k) t -= l(i, k) * l(j, k);
      l(i, j) = t / ljj;
    }
  }
  return SpdFactor(std::move(l));
}

namespace {

// Forward substitution into a small stack buffer when possible.
template <typename F>
double with_forward_solve(const SpdFactor& factor, std::span<const double> v, F&& f) {
  const std::size_t n = factor.dim();
  if (v.size() != n) throw_dim("quadratic form vector length", v.size(), n);
  double stack[16];
  std::vector<double> heap;
  double* y = stack;
  if (n > 16) {
    heap.resize(n);
    y = heap.data();
  }
  const Matrix& l = factor.lower();
  const double* ld = l.entries().data();
  for (std::size_t i = 0; i < n; ++i) {
    double s = v[i];
    const double* lrow = ld + i * n;
    for (std::size_t k = 0; k < i; ++k) s -= lrow[k] * y[k];
    y[i] = s / lrow[i];
  }
  return f(y, n);
}

}  // namespace

double quadratic_form_inv(const SpdFactor& factor, std::span<const double> v) {
  return with_forward_solve(factor, v, [](const double* y, std::size_t n) {
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) q += y[i] * y[i];
    return q;
  });
}

double bilinear_form_inv(const SpdFactor& factor, std::span<const double> u,
                         std::span<const double> v) {
  const std::size_t n = factor.dim();
  if (u.size() != n) throw_dim("bilinear form vector length", u.size(), n);
  double stack[16];
  std::vector<double> heap;
  double* yu = stack;
  if (n > 16) {
    heap.resize(n);
    yu = heap.data();
  }
  const Matrix& l = factor.lower();
  const double* ld = l.entries().data();
  for (std::size_t i = 0; i < n; ++i) {
    double s = u[i];
    const double* lrow = ld + i * n;
    for (std::size_t k = 0; k < i; ++k) s -= lrow[k] * yu[k];
    yu[i] = s / lrow[i];
  }
  return with_forward_solve(factor, v, [&](const double* yv, std::size_t m) {
    double q = 0.0;
    for (std::size_t i = 0; i < m; ++i) q += yu[i] * yv[i];
    return q;
  });
}

}  // namespace equivmd
