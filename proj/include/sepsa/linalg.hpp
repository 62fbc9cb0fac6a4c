#pragma once

// Small dense linear algebra: vectors, row-major matrices and a symmetric
// positive definite wrapper that supports the rank-one gain downdate used
// by recursive least squares.

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sepsa::linalg {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces a non-finite value or a factorization
/// breaks down.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Vec {
 public:
  Vec() = default;
  explicit Vec(std::size_t n, double fill = 0.0);
  explicit Vec(std::vector<double> values);
  Vec(std::initializer_list<double> values);

  static Vec from(std::span<const double> values);

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  operator std::span<const double>() const { return data_; }  // NOLINT
  operator std::span<double>() { return data_; }              // NOLINT

  const std::vector<double>& values() const { return data_; }

  friend bool operator==(const Vec&, const Vec&) = default;

 private:
  std::vector<double> data_;
};

/// Row-major dense matrix.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0);
  Mat(std::size_t rows, std::size_t cols, std::vector<double> row_major);
  Mat(std::initializer_list<std::initializer_list<double>> rows);

  static Mat identity(std::size_t n, double scale = 1.0);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Symmetric positive definite matrix. Construction validates the
/// invariant; the only mutation is the rank-one downdate, which preserves it.
class SpdMat {
 public:
  /// Throws DimensionError for non-square input and NumericalError when
  /// `m` is not symmetric within `tol` or not positive definite.
  explicit SpdMat(Mat m, double tol = 1e-12);

  static SpdMat identity(std::size_t n, double scale = 1.0);

  std::size_t size() const { return m_.rows(); }
  const Mat& mat() const { return m_; }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }

  /// B <- B - (B h)(B h)^T / (1 + h^T B h), followed by re-symmetrization.
  /// Returns h^T B h evaluated before the update. When `updated_gain` is
  /// given it receives the downdated B times h.
  double rank_one_downdate(std::span<const double> h, Vec* updated_gain = nullptr);

  friend bool operator==(const SpdMat&, const SpdMat&) = default;

 private:
  struct Unchecked {};
  SpdMat(Mat m, Unchecked) : m_(std::move(m)) {}
  friend SpdMat blend_toward(const SpdMat&, std::span<const double>, double);

  Mat m_;
};

Vec matvec(const Mat& m, std::span<const double> v);
/// Row-major m^T v without forming the transpose.
Vec matvec_transposed(const Mat& m, std::span<const double> v);
Mat outer(std::span<const double> u, std::span<const double> v);
Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& m);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
double max_abs(std::span<const double> v);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
double max_abs_diff(const Mat& a, const Mat& b);
bool all_finite(std::span<const double> v);

/// Returns a new matrix equal to the rank-one downdate of `b` by `h`.
SpdMat sherman_morrison_downdate(const SpdMat& b, std::span<const double> h);

/// H <- (1 - gamma) H + gamma h h^T, the Robbins-Monro Hessian recursion.
/// Throws NumericalError if the result is no longer positive definite.
SpdMat blend_toward(const SpdMat& h_hat, std::span<const double> h, double gamma);

/// Lower-triangular Cholesky factor, or nullopt if a pivot is not positive.
/// Only the lower triangle of `a` is read.
std::optional<Mat> cholesky(const Mat& a);

Vec solve_spd(const SpdMat& a, std::span<const double> rhs);

/// Symmetric within `tol` (relative to the largest entry) and every
/// Cholesky pivot strictly positive.
bool assert_spd(const Mat& m, double tol);

/// In-place (A + A^T) / 2.
void symmetrize(Mat& m);

}  // namespace sepsa::linalg
