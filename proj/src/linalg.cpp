#include "sepsa/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sepsa::linalg {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw DimensionError(what);
}

std::string entry_name(const char* name, std::size_t i) {
  std::ostringstream os;
  os << name << '[' << i << ']';
  return os.str();
}

std::string entry_name(const char* name, std::size_t i, std::size_t j) {
  std::ostringstream os;
  os << name << '(' << i << ',' << j << ')';
  return os.str();
}

}  // namespace

Vec::Vec(std::size_t n, double fill) : data_(n, fill) {}

Vec::Vec(std::vector<double> values) : data_(std::move(values)) {}

Vec::Vec(std::initializer_list<double> values) : data_(values) {}

Vec Vec::from(std::span<const double> values) {
  return Vec(std::vector<double>(values.begin(), values.end()));
}

Mat::Mat(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
  require(data_.size() == rows_ * cols_, "Mat: data length does not match rows*cols");
}

Mat::Mat(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    require(r.size() == cols_, "Mat: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Mat Mat::identity(std::size_t n, double scale) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
  return m;
}

SpdMat::SpdMat(Mat m, double tol) : m_(std::move(m)) {
  require(m_.rows() == m_.cols(), "SpdMat: matrix is not square");
  if (!assert_spd(m_, tol)) {
    throw NumericalError("SpdMat: matrix is not symmetric positive definite");
  }
}

SpdMat SpdMat::identity(std::size_t n, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw NumericalError("SpdMat::identity: scale must be positive and finite");
  }
  return SpdMat(Mat::identity(n, scale), Unchecked{});
}

double SpdMat::rank_one_downdate(std::span<const double> h, Vec* updated_gain) {
  const std::size_t p = m_.rows();
  require(h.size() == p, "rank_one_downdate: h length does not match B");
  for (std::size_t i = 0; i < p; ++i) {
    if (!std::isfinite(h[i])) {
      throw NumericalError("rank_one_downdate: non-finite " + entry_name("h", i));
    }
  }
  Vec u = matvec(m_, h);
  for (std::size_t i = 0; i < p; ++i) {
    if (!std::isfinite(u[i])) {
      throw NumericalError("rank_one_downdate: non-finite " + entry_name("Bh", i));
    }
  }
  const double quad = dot(h, u);
  const double denom = 1.0 + quad;
  if (!std::isfinite(denom) || denom < 1.0) {
    throw NumericalError("rank_one_downdate: denominator 1 + h'Bh is not >= 1");
  }
  // Upper triangle, mirrored: the result is symmetric by construction, which
  // is what re-symmetrizing (B + B^T) / 2 would give.
  for (std::size_t i = 0; i < p; ++i) {
    const double ui = u[i] / denom;
    for (std::size_t j = i; j < p; ++j) {
      const double v = 0.5 * ((m_(i, j) - ui * u[j]) + (m_(j, i) - u[j] / denom * u[i]));
      if (!std::isfinite(v)) {
        throw NumericalError("rank_one_downdate: non-finite " + entry_name("B", i, j));
      }
      m_(i, j) = v;
      m_(j, i) = v;
    }
  }
  if (updated_gain != nullptr) {
    // B_new h = B h - B h (h^T B h) / (1 + h^T B h) = B h / (1 + h^T B h).
    for (double& v : u) v /= denom;
    *updated_gain = std::move(u);
  }
  return quad;
}

Vec matvec(const Mat& m, std::span<const double> v) {
  require(m.cols() == v.size(), "matvec: m.cols != v.len");
  Vec out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = dot(m.row(i), v);
  return out;
}

Vec matvec_transposed(const Mat& m, std::span<const double> v) {
  require(m.rows() == v.size(), "matvec_transposed: m.rows != v.len");
  Vec out(m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    const double vi = v[i];
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += row[j] * vi;
  }
  return out;
}

Mat outer(std::span<const double> u, std::span<const double> v) {
  Mat out(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < v.size(); ++j) row[j] = u[i] * v[j];
  }
  return out;
}

Mat matmul(const Mat& a, const Mat& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Mat out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Mat transpose(const Mat& m) {
  Mat out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "max_abs_diff: length mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs_diff(const Mat& a, const Mat& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "max_abs_diff: shape mismatch");
  return max_abs_diff(a.flat(), b.flat());
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

SpdMat sherman_morrison_downdate(const SpdMat& b, std::span<const double> h) {
  SpdMat out = b;
  out.rank_one_downdate(h);
  return out;
}

SpdMat blend_toward(const SpdMat& h_hat, std::span<const double> h, double gamma) {
  const std::size_t p = h_hat.size();
  require(h.size() == p, "blend_toward: h length does not match H");
  Mat next = h_hat.mat();
  for (std::size_t i = 0; i < p; ++i) {
    auto row = next.row(i);
    for (std::size_t j = 0; j < p; ++j) row[j] += gamma * (h[i] * h[j] - row[j]);
  }
  symmetrize(next);
  if (!all_finite(next.flat())) {
    throw NumericalError("blend_toward: non-finite Hessian estimate");
  }
  if (!cholesky(next)) {
    throw NumericalError(
        "blend_toward: Hessian estimate lost positive definiteness; use a larger initial H");
  }
  return SpdMat(std::move(next), SpdMat::Unchecked{});
}

std::optional<Mat> cholesky(const Mat& a) {
  require(a.rows() == a.cols(), "cholesky: matrix is not square");
  const std::size_t n = a.rows();
  Mat l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag)) return std::nullopt;
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

Vec solve_spd(const SpdMat& a, std::span<const double> rhs) {
  const std::size_t n = a.size();
  require(rhs.size() == n, "solve_spd: rhs length does not match matrix");
  const auto l = cholesky(a.mat());
  if (!l) throw NumericalError("solve_spd: Cholesky breakdown, matrix is ill-conditioned");
  Vec x = Vec::from(rhs);
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= (*l)(i, k) * x[k];
    x[i] = s / (*l)(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= (*l)(k, ii) * x[k];
    x[ii] = s / (*l)(ii, ii);
  }
  if (!all_finite(x)) throw NumericalError("solve_spd: non-finite solution");
  return x;
}

bool assert_spd(const Mat& m, double tol) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if (!all_finite(m.flat())) return false;
  const double scale = std::max(max_abs(m.flat()), 1e-300);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > tol * scale) return false;
  Mat sym = m;
  symmetrize(sym);
  return cholesky(sym).has_value();
}

void symmetrize(Mat& m) {
  require(m.rows() == m.cols(), "symmetrize: matrix is not square");
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) {
      const double avg = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = avg;
      m(j, i) = avg;
    }
}

}  // namespace sepsa::linalg
