#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "mgn/error.hpp"

namespace mgn::linalg {

/// Dense float64 vector. Entries are checked finite on construction from data.
class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  DenseVector(std::initializer_list<double> values);
  explicit DenseVector(std::vector<double> values);
  explicit DenseVector(std::span<const double> values)
      : DenseVector(std::vector<double>(values.begin(), values.end())) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool operator==(const DenseVector&) const = default;

  DenseVector& operator+=(const DenseVector& o);
  DenseVector& operator-=(const DenseVector& o);
  DenseVector& operator*=(double s);

 private:
  std::vector<double> data_;
};

DenseVector operator+(DenseVector a, const DenseVector& b);
DenseVector operator-(DenseVector a, const DenseVector& b);
DenseVector operator*(double s, DenseVector a);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);

/// Row-major dense float64 matrix. Also used as a point set (one sample per row).
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(std::span<const double> d);
  static DenseMatrix diagonal(std::initializer_list<double> d) {
    return diagonal(std::span<const double>(d.begin(), d.size()));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  DenseMatrix transpose() const;
  double trace() const;
  double frobenius() const;
  /// max |A - Aᵀ| entry; requires square.
  double asymmetry() const;

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b);
DenseVector operator*(const DenseMatrix& a, std::span<const double> x);
inline DenseVector operator*(const DenseMatrix& a, const DenseVector& x) { return a * x.span(); }
DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator*(double s, const DenseMatrix& a);

/// Aᵀ·x without forming the transpose.
DenseVector transpose_times(const DenseMatrix& a, std::span<const double> x);
/// AᵀA, the Gram matrix of the columns.
DenseMatrix gram(const DenseMatrix& a);

inline constexpr double kSymmetryTolerance = 1e-10;

/// Lower Cholesky factor. Throws NotPositiveDefinite when a pivot drops to
/// 1e-12 of the largest diagonal entry, NonSymmetric when |A - Aᵀ| > 1e-10.
DenseMatrix cholesky(const DenseMatrix& a);

struct SymEigen {
  DenseVector values;   // ascending
  DenseMatrix vectors;  // column i pairs with values[i]
};

/// Cyclic Jacobi eigensolver for small symmetric matrices.
SymEigen sym_eigen(const DenseMatrix& a);

/// Principal square root of a PSD matrix; eigenvalues in [-1e-10·‖A‖, 0) clamp to 0.
DenseMatrix sqrt_psd(const DenseMatrix& a);

double logdet_pd(const DenseMatrix& a);

/// Solves L·y = b for lower-triangular L.
DenseVector forward_substitute(const DenseMatrix& lower, std::span<const double> b);

inline double value_of(double x) { return x; }

/// In-place lower Cholesky on an n×n row-major buffer of any scalar type that
/// supports +, -, *, / and sqrt (found by ADL). The strict upper triangle is
/// zeroed. Returns false when a pivot is non-positive.
template <class T>
bool cholesky_in_place(std::span<T> a, std::size_t n) {
  using std::sqrt;
  for (std::size_t j = 0; j < n; ++j) {
    T pivot = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) pivot = pivot - a[j * n + k] * a[j * n + k];
    if (!(value_of(pivot) > 0.0)) return false;
    const T d = sqrt(pivot);
    a[j * n + j] = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      T s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s = s - a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / d;
    }
    for (std::size_t k = j + 1; k < n; ++k) a[j * n + k] = T(0.0);
  }
  return true;
}

/// 2·Σ log L_ii of a factor produced by cholesky_in_place.
template <class T>
T logdet_from_cholesky(std::span<const T> lower, std::size_t n) {
  using std::log;
  T acc(0.0);
  for (std::size_t i = 0; i < n; ++i) acc = acc + log(lower[i * n + i]);
  return T(2.0) * acc;
}

}  // namespace mgn::linalg
