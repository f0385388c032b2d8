#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace equivmd {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);  // zero-filled
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return entries_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const {
    return {entries_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) { return {entries_.data() + i * cols_, cols_}; }

  const std::vector<double>& entries() const noexcept { return entries_; }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> entries_;
};

/// Lower-triangular Cholesky factor L of an SPD matrix M = L L'.
class SpdFactor {
 public:
  SpdFactor() = default;

  std::size_t dim() const noexcept { return lower_.rows(); }
  const Matrix& lower() const noexcept { return lower_; }

  /// Solves M x = b (forward then back substitution).
  std::vector<double> solve(std::span<const double> b) const;

  /// Forward substitution only: overwrites x with L^-1 x.
  void solve_lower_inplace(std::span<double> x) const;

 private:
  explicit SpdFactor(Matrix lower) : lower_(std::move(lower)) {}
  Matrix lower_;

  friend SpdFactor cholesky_spd(const Matrix& m);
};

/// Cholesky factorization without pivoting. A pivot is rejected (NotSpd) when
/// it is <= 1e-12 times the largest diagonal entry of the input, so poorly
/// scaled covariance matrices do not trip a false negative.
/// Throws DomainError if the input is not square-symmetric, NotSpd if a pivot
/// fails.
SpdFactor cholesky_spd(const Matrix& m);

/// v' M^-1 v via one triangular solve; >= 0, zero iff v = 0.
double quadratic_form_inv(const SpdFactor& factor, std::span<const double> v);

/// u' M^-1 v; symmetric in (u, v).
double bilinear_form_inv(const SpdFactor& factor, std::span<const double> u,
                         std::span<const double> v);

}  // namespace equivmd
