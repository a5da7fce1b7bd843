#pragma once

// Dense real linear algebra on finite-dimensional Hilbert spaces: vectors,
// matrices, LU with partial pivoting, Jacobi singular values and Jacobi
// symmetric eigen-decomposition. Sized for desk-scale problems (n <= ~500).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dsm/errors.hpp"

namespace dsm {

/// Default tolerances of the linear algebra kernel. Every routine that uses
/// one takes it as a defaulted argument so callers can tighten or loosen it.
namespace tolerances {
inline constexpr double singular_pivot = 1e-14;   // relative to the matrix scale
inline constexpr double symmetry = 1e-12;         // relative to operator_norm
inline constexpr double psd = 1e-10;              // relative to operator_norm
inline constexpr double jacobi_convergence = 1e-15;
inline constexpr int jacobi_max_sweeps = 80;
} // namespace tolerances

// ---------------------------------------------------------------------------
// Vector
// ---------------------------------------------------------------------------

/// Element of R^n with the Euclidean inner product.
class Vector {
public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  static Vector zeros(std::size_t n) { return Vector(n); }
  static Vector unit(std::size_t n, std::size_t i) {
    Vector e(n);
    e[i] = 1.0;
    return e;
  }

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
  }

  Vector& operator+=(const Vector& other) {
    check_same_size(other);
    for (std::size_t i = 0; i < size(); ++i) data_[i] += other.data_[i];
    return *this;
  }
  Vector& operator-=(const Vector& other) {
    check_same_size(other);
    for (std::size_t i = 0; i < size(); ++i) data_[i] -= other.data_[i];
    return *this;
  }
  Vector& operator*=(double s) noexcept {
    for (auto& x : data_) x *= s;
    return *this;
  }
  /// this += s * x
  Vector& axpy(double s, const Vector& x) {
    check_same_size(x);
    for (std::size_t i = 0; i < size(); ++i) data_[i] += s * x.data_[i];
    return *this;
  }

  friend bool operator==(const Vector&, const Vector&) = default;

private:
  void check_same_size(const Vector& other) const {
    if (other.size() != size())
      throw DimensionMismatch("vector sizes differ: " + std::to_string(size()) + " vs " +
                              std::to_string(other.size()));
  }

  std::vector<double> data_;
};

inline Vector operator+(Vector a, const Vector& b) { return a += b; }
inline Vector operator-(Vector a, const Vector& b) { return a -= b; }
inline Vector operator-(Vector a) { return a *= -1.0; }
inline Vector operator*(double s, Vector a) { return a *= s; }
inline Vector operator*(Vector a, double s) { return a *= s; }

inline double inner(const Vector& u, const Vector& v) {
  if (u.size() != v.size())
    throw DimensionMismatch("inner: sizes " + std::to_string(u.size()) + " and " +
                            std::to_string(v.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

/// Euclidean norm, computed with scaling so that it neither overflows nor
/// underflows for extreme entries.
inline double norm(const Vector& u) {
  double scale = 0.0;
  for (double x : u) scale = std::max(scale, std::abs(x));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double s = 0.0;
  for (double x : u) {
    const double y = x / scale;
    s += y * y;
  }
  return scale * std::sqrt(s);
}

inline double distance(const Vector& u, const Vector& v) { return norm(u - v); }

// ---------------------------------------------------------------------------
// Matrix
// ---------------------------------------------------------------------------

/// Row-major dense matrix.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionMismatch("ragged matrix initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Matrix diagonal(const Vector& d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }
  static Matrix from_columns(std::span<const Vector> columns) {
    if (columns.empty()) return {};
    Matrix m(columns.front().size(), columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) m.set_column(j, columns[j]);
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  const std::vector<double>& values() const noexcept { return data_; }

  Vector column(std::size_t j) const {
    Vector c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }
  void set_column(std::size_t j, const Vector& c) {
    if (c.size() != rows_) throw DimensionMismatch("set_column: wrong length");
    for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = c[i];
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
  }

  double frobenius_norm() const {
    double scale = 0.0;
    for (double x : data_) scale = std::max(scale, std::abs(x));
    if (scale == 0.0) return 0.0;
    double s = 0.0;
    for (double x : data_) s += (x / scale) * (x / scale);
    return scale * std::sqrt(s);
  }

  /// max |A_ij - A_ji|
  double max_asymmetry() const {
    if (!square()) throw DimensionMismatch("max_asymmetry: matrix not square");
    double m = 0.0;
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = i + 1; j < cols_; ++j)
        m = std::max(m, std::abs((*this)(i, j) - (*this)(j, i)));
    return m;
  }

  Matrix symmetric_part() const {
    Matrix s = *this;
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) s(i, j) = 0.5 * ((*this)(i, j) + (*this)(j, i));
    return s;
  }

  /// this + s * I
  Matrix shifted(double s) const {
    if (!square()) throw DimensionMismatch("shifted: matrix not square");
    Matrix m = *this;
    for (std::size_t i = 0; i < rows_; ++i) m(i, i) += s;
    return m;
  }

  Matrix& operator+=(const Matrix& o) {
    check_same_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    check_same_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Matrix& operator*=(double s) noexcept {
    for (auto& x : data_) x *= s;
    return *this;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

private:
  void check_same_shape(const Matrix& o) const {
    if (o.rows_ != rows_ || o.cols_ != cols_) throw DimensionMismatch("matrix shapes differ");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
inline Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
inline Matrix operator*(double s, Matrix a) { return a *= s; }

inline Vector operator*(const Matrix& a, const Vector& x) {
  if (a.cols() != x.size())
    throw DimensionMismatch("matrix-vector product: " + std::to_string(a.cols()) + " columns, vector of " +
                            std::to_string(x.size()));
  Vector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    const auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) s += r[j] * x[j];
    y[i] = s;
  }
  return y;
}

inline Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matrix product: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

// ---------------------------------------------------------------------------
// Singular values (one-sided Jacobi) and symmetric eigenproblem (cyclic Jacobi)
// ---------------------------------------------------------------------------

/// Singular values in descending order, by one-sided (Hestenes) Jacobi on the
/// columns of a. Relative accuracy is governed by the column-scaled condition
/// number, which keeps small singular values accurate.
inline std::vector<double> singular_values(const Matrix& a,
                                           double tol = tolerances::jacobi_convergence) {
  Matrix u = a.rows() >= a.cols() ? a : a.transpose();
  const std::size_t m = u.rows();
  const std::size_t n = u.cols();
  for (int sweep = 0; sweep < tolerances::jacobi_max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += u(i, p) * u(i, p);
          beta += u(i, q) * u(i, q);
          gamma += u(i, p) * u(i, q);
        }
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double up = u(i, p);
          const double uq = u(i, q);
          u(i, p) = c * up - s * uq;
          u(i, q) = s * up + c * uq;
        }
      }
    }
    if (!rotated) break;
  }
  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = norm(u.column(j));
  std::sort(sigma.begin(), sigma.end(), std::greater<>());
  return sigma;
}

/// Largest singular value (the spectral norm).
inline double operator_norm(const Matrix& a) {
  if (!a.square()) throw DimensionMismatch("operator_norm: matrix not square");
  if (a.rows() == 0) return 0.0;
  return singular_values(a).front();
}

/// Smallest singular value; zero signals singularity.
inline double smallest_singular_value(const Matrix& a) {
  if (!a.square()) throw DimensionMismatch("smallest_singular_value: matrix not square");
  if (a.rows() == 0) return 0.0;
  return singular_values(a).back();
}

/// sigma_max / sigma_min, infinity for singular matrices.
inline double condition_number(const Matrix& a) {
  const auto s = singular_values(a);
  if (s.empty()) return 1.0;
  if (s.back() == 0.0) return std::numeric_limits<double>::infinity();
  return s.front() / s.back();
}

/// A = Q diag(values) Q^T with values ascending and Q's columns orthonormal.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;

  double min() const { return values[0]; }
  double max() const { return values[values.size() - 1]; }
};

/// Cyclic Jacobi on a matrix that is symmetric by construction. Only the
/// symmetric part of `a` is used; callers that need the symmetry verified go
/// through the DenseOperator overload.
inline SymmetricEigen symmetric_eigen_unchecked(const Matrix& a) {
  if (!a.square()) throw DimensionMismatch("symmetric_eigen: matrix not square");
  const std::size_t n = a.rows();
  Matrix m = a.symmetric_part();
  Matrix v = Matrix::identity(n);
  const double fro = m.frobenius_norm();
  for (int sweep = 0; sweep < tolerances::jacobi_max_sweeps && fro > 0.0; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
    if (std::sqrt(2.0 * off) <= tolerances::jacobi_convergence * fro) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        if (apq == 0.0) continue;
        const double tau = (m(q, q) - m(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, tau) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double mkp = m(k, p);
          const double mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double mpk = m(p, k);
          const double mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
        m(p, q) = 0.0;
        m(q, p) = 0.0;
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
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return m(i, i) < m(j, j); });
  SymmetricEigen out{Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = m(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// LU factorization
// ---------------------------------------------------------------------------

/// PA = LU with partial pivoting, packed in a single matrix.
class LuFactorization {
public:
  /// Throws SingularOperator when a pivot falls below
  /// `relative_pivot_tol * ||A||_F`.
  explicit LuFactorization(const Matrix& a, double relative_pivot_tol = tolerances::singular_pivot)
    : lu_(a), perm_(a.rows()) {
    if (!a.square()) throw DimensionMismatch("LU: matrix not square");
    const std::size_t n = a.rows();
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    const double scale = a.frobenius_norm();
    const double threshold = relative_pivot_tol * scale;
    min_pivot_ = std::numeric_limits<double>::infinity();
    max_pivot_ = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      double best = std::abs(lu_(k, k));
      for (std::size_t i = k + 1; i < n; ++i) {
        if (std::abs(lu_(i, k)) > best) {
          best = std::abs(lu_(i, k));
          piv = i;
        }
      }
      if (!(best > threshold) || scale == 0.0) {
        std::ostringstream msg;
        const double cond = condition_number(a);
        msg << "singular operator: pivot " << best << " below " << threshold << " at column " << k
            << " (condition estimate " << cond << ")";
        throw SingularOperator(msg.str(), cond);
      }
      if (piv != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
        std::swap(perm_[k], perm_[piv]);
      }
      const double pivot = lu_(k, k);
      min_pivot_ = std::min(min_pivot_, std::abs(pivot));
      max_pivot_ = std::max(max_pivot_, std::abs(pivot));
      for (std::size_t i = k + 1; i < n; ++i) {
        const double l = lu_(i, k) / pivot;
        lu_(i, k) = l;
        if (l == 0.0) continue;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= l * lu_(k, j);
      }
    }
  }

  std::size_t size() const noexcept { return lu_.rows(); }
  double min_abs_pivot() const noexcept { return min_pivot_; }
  double max_abs_pivot() const noexcept { return max_pivot_; }

  Vector solve(const Vector& b) const {
    const std::size_t n = size();
    if (b.size() != n) throw DimensionMismatch("LU solve: right-hand side has wrong length");
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = b[perm_[i]];
      for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
      x[i] = s;
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = x[ii];
      for (std::size_t j = ii + 1; j < n; ++j) s -= lu_(ii, j) * x[j];
      x[ii] = s / lu_(ii, ii);
    }
    return x;
  }

  /// Solves A X = B column by column.
  Matrix solve(const Matrix& b) const {
    if (b.rows() != size()) throw DimensionMismatch("LU solve: right-hand side has wrong row count");
    Matrix x(b.rows(), b.cols());
    for (std::size_t j = 0; j < b.cols(); ++j) x.set_column(j, solve(b.column(j)));
    return x;
  }

private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
  double min_pivot_ = 0.0;
  double max_pivot_ = 0.0;
};

// ---------------------------------------------------------------------------
// DenseOperator
// ---------------------------------------------------------------------------

struct OperatorFlags {
  bool self_adjoint = false;
  bool psd_claimed = false;
};

/// Which structural claims of an operator fail verification.
struct FlagReport {
  bool symmetric_ok = true;
  bool psd_ok = true;
  double asymmetry = 0.0;
  double min_eigenvalue = 0.0;
  double norm = 0.0;

  bool ok() const noexcept { return symmetric_ok && psd_ok; }
};

/// Square matrix together with structural flags and an optional LU cache.
/// The cache is only ever filled by `factorized()`, which returns a new value,
/// so a shared DenseOperator is never mutated.
class DenseOperator {
public:
  DenseOperator() = default;
  explicit DenseOperator(Matrix entries, OperatorFlags flags = {})
    : entries_(std::move(entries)), flags_(flags) {
    if (!entries_.square()) throw DimensionMismatch("DenseOperator: matrix not square");
    if (!entries_.all_finite()) throw InvalidArgument("DenseOperator: non-finite entry");
  }

  const Matrix& matrix() const noexcept { return entries_; }
  std::size_t dim() const noexcept { return entries_.rows(); }
  const OperatorFlags& flags() const noexcept { return flags_; }

  double operator()(std::size_t i, std::size_t j) const { return entries_(i, j); }
  Vector apply(const Vector& x) const { return entries_ * x; }

  DenseOperator factorized(double relative_pivot_tol = tolerances::singular_pivot) const {
    DenseOperator copy = *this;
    copy.lu_ = std::make_shared<const LuFactorization>(entries_, relative_pivot_tol);
    return copy;
  }
  const LuFactorization* factorization() const noexcept { return lu_.get(); }

  FlagReport verify_flags() const {
    FlagReport r;
    r.norm = operator_norm(entries_);
    r.asymmetry = entries_.max_asymmetry();
    if (flags_.self_adjoint) r.symmetric_ok = r.asymmetry <= tolerances::symmetry * r.norm;
    if (flags_.psd_claimed) {
      if (!r.symmetric_ok || !flags_.self_adjoint) {
        r.psd_ok = false;
      } else {
        r.min_eigenvalue = symmetric_eigen_unchecked(entries_).min();
        r.psd_ok = r.min_eigenvalue >= -tolerances::psd * r.norm;
      }
    }
    return r;
  }

private:
  Matrix entries_;
  OperatorFlags flags_;
  std::shared_ptr<const LuFactorization> lu_;
};

inline Vector solve_linear(const Matrix& a, const Vector& b,
                           double relative_pivot_tol = tolerances::singular_pivot) {
  if (!a.square()) throw DimensionMismatch("solve_linear: matrix not square");
  if (a.rows() != b.size()) throw DimensionMismatch("solve_linear: right-hand side has wrong length");
  return LuFactorization(a, relative_pivot_tol).solve(b);
}

/// Uses the operator's cached factorization when present.
inline Vector solve_linear(const DenseOperator& a, const Vector& b,
                           double relative_pivot_tol = tolerances::singular_pivot) {
  if (a.dim() != b.size()) throw DimensionMismatch("solve_linear: right-hand side has wrong length");
  if (const auto* lu = a.factorization()) return lu->solve(b);
  return solve_linear(a.matrix(), b, relative_pivot_tol);
}

inline double operator_norm(const DenseOperator& a) { return operator_norm(a.matrix()); }
inline double smallest_singular_value(const DenseOperator& a) { return smallest_singular_value(a.matrix()); }

/// Eigen-decomposition of a self-adjoint operator. Throws NotSymmetric unless
/// max |A_ij - A_ji| <= tol * ||A||.
inline SymmetricEigen symmetric_eigen(const DenseOperator& a, double tol = tolerances::symmetry) {
  const double asym = a.matrix().max_asymmetry();
  if (asym > 0.0) {
    const double bound = tol * operator_norm(a.matrix());
    if (asym > bound) {
      std::ostringstream msg;
      msg << "operator is not symmetric: max |A_ij - A_ji| = " << asym << " > " << bound;
      throw NotSymmetric(msg.str());
    }
  }
  return symmetric_eigen_unchecked(a.matrix());
}

inline SymmetricEigen symmetric_eigen(const Matrix& a, double tol = tolerances::symmetry) {
  return symmetric_eigen(DenseOperator(a), tol);
}

} // namespace dsm
