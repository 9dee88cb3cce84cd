#include "mgn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mgn::linalg {

namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values)
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidSpec, std::string(what) + " has a non-finite entry");
}

void require_same_size(std::size_t a, std::size_t b, const char* op) {
  if (a != b)
    throw Error(ErrorKind::DimensionMismatch,
                std::string(op) + ": " + std::to_string(a) + " vs " + std::to_string(b));
}

void require_symmetric(const DenseMatrix& a, const char* op) {
  if (!a.square()) throw Error(ErrorKind::DimensionMismatch, std::string(op) + ": matrix not square");
  if (a.asymmetry() > kSymmetryTolerance)
    throw Error(ErrorKind::NonSymmetric, std::string(op) + ": asymmetry " + std::to_string(a.asymmetry()));
}

}  // namespace

DenseVector::DenseVector(std::initializer_list<double> values) : data_(values) {
  require_finite(data_, "vector");
}

DenseVector::DenseVector(std::vector<double> values) : data_(std::move(values)) {
  require_finite(data_, "vector");
}

DenseVector& DenseVector::operator+=(const DenseVector& o) {
  require_same_size(size(), o.size(), "vector +");
  for (std::size_t i = 0; i < size(); ++i) data_[i] += o.data_[i];
  return *this;
}

DenseVector& DenseVector::operator-=(const DenseVector& o) {
  require_same_size(size(), o.size(), "vector -");
  for (std::size_t i = 0; i < size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

DenseVector& DenseVector::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

DenseVector operator+(DenseVector a, const DenseVector& b) { return a += b; }
DenseVector operator-(DenseVector a, const DenseVector& b) { return a -= b; }
DenseVector operator*(double s, DenseVector a) { return a *= s; }

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require_same_size(rows * cols, data_.size(), "matrix data");
  require_finite(data_, "matrix");
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    require_same_size(r.size(), cols_, "matrix row");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  require_finite(data_, "matrix");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> d) {
  DenseMatrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double DenseMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
  return t;
}

double DenseMatrix::frobenius() const { return std::sqrt(std::inner_product(data_.begin(), data_.end(), data_.begin(), 0.0)); }

double DenseMatrix::asymmetry() const {
  if (!square()) throw Error(ErrorKind::DimensionMismatch, "asymmetry of a non-square matrix");
  double m = 0.0;
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = i + 1; j < cols_; ++j) m = std::max(m, std::abs((*this)(i, j) - (*this)(j, i)));
  return m;
}

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_size(a.cols(), b.rows(), "matrix *");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

DenseVector operator*(const DenseMatrix& a, std::span<const double> x) {
  require_same_size(a.cols(), x.size(), "matrix-vector *");
  DenseVector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
    y[i] = acc;
  }
  return y;
}

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_size(a.rows(), b.rows(), "matrix + rows");
  require_same_size(a.cols(), b.cols(), "matrix + cols");
  DenseMatrix c = a;
  for (std::size_t i = 0; i < c.span().size(); ++i) c.span()[i] += b.span()[i];
  return c;
}

DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) { return a + (-1.0) * b; }

DenseMatrix operator*(double s, const DenseMatrix& a) {
  DenseMatrix c = a;
  for (double& v : c.span()) v *= s;
  return c;
}

DenseVector transpose_times(const DenseMatrix& a, std::span<const double> x) {
  require_same_size(a.rows(), x.size(), "transpose_times");
  DenseVector y(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += a(i, j) * x[i];
  return y;
}

DenseMatrix gram(const DenseMatrix& a) {
  const std::size_t n = a.cols();
  DenseMatrix g(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.rows(); ++k) acc += a(k, i) * a(k, j);
      g(i, j) = acc;
      g(j, i) = acc;
    }
  return g;
}

DenseMatrix cholesky(const DenseMatrix& a) {
  require_symmetric(a, "cholesky");
  const std::size_t n = a.rows();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a(i, i)));
  const double floor = 1e-12 * max_diag;

  DenseMatrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = a(j, j);
    for (std::size_t k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > floor) || pivot <= 0.0)
      throw Error(ErrorKind::NotPositiveDefinite, "pivot " + std::to_string(j) + " = " + std::to_string(pivot));
    const double d = std::sqrt(pivot);
    l(j, j) = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / d;
    }
  }
  return l;
}

SymEigen sym_eigen(const DenseMatrix& a_in) {
  require_symmetric(a_in, "sym_eigen");
  const std::size_t n = a_in.rows();
  DenseMatrix a = a_in;
  // Symmetrise exactly so rotations act on a truly symmetric matrix.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (a(i, j) + a(j, i));
  DenseMatrix v = DenseMatrix::identity(n);

  const double scale = std::max(a.frobenius(), 1e-300);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= 1e-15 * scale) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

  SymEigen out{DenseVector(n), DenseMatrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  return out;
}

DenseMatrix sqrt_psd(const DenseMatrix& a) {
  const SymEigen eig = sym_eigen(a);
  const double norm = a.frobenius();
  const std::size_t n = a.rows();
  if (n > 0 && eig.values[0] < -1e-10 * std::max(norm, 1.0))
    throw Error(ErrorKind::NotPSD, "min eigenvalue " + std::to_string(eig.values[0]));
  DenseMatrix r(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = std::sqrt(std::max(eig.values[k], 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) r(i, j) += s * eig.vectors(i, k) * eig.vectors(j, k);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) r(i, j) = r(j, i) = 0.5 * (r(i, j) + r(j, i));
  return r;
}

double logdet_pd(const DenseMatrix& a) {
  const DenseMatrix l = cholesky(a);
  double acc = 0.0;
  for (std::size_t i = 0; i < l.rows(); ++i) acc += std::log(l(i, i));
  return 2.0 * acc;
}

DenseVector forward_substitute(const DenseMatrix& lower, std::span<const double> b) {
  require_same_size(lower.rows(), b.size(), "forward_substitute");
  const std::size_t n = lower.rows();
  DenseVector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= lower(i, k) * y[k];
    y[i] = s / lower(i, i);
  }
  return y;
}

}  // namespace mgn::linalg
