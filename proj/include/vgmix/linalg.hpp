// Dense row-major matrices and the SPD toolkit the densities need:
// Cholesky, log-determinant, Mahalanobis distance, quadratic forms.

#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "vgmix/errors.hpp"

namespace vgmix {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      if (row.size() != cols_) throw DimensionMismatch("ragged matrix initializer");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static Matrix identity(std::size_t p) {
    Matrix m(p, p);
    for (std::size_t i = 0; i < p; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  const std::vector<double>& values() const noexcept { return data_; }

  bool is_symmetric() const {
    if (rows_ != cols_) return false;
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < i; ++j)
        if ((*this)(i, j) != (*this)(j, i)) return false;
    return true;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Lower Cholesky factor of an SPD matrix together with log |A|.
class CholFactor {
 public:
  CholFactor() = default;
  CholFactor(Matrix lower, double log_det) : lower_(std::move(lower)), log_det_(log_det) {}

  const Matrix& lower() const noexcept { return lower_; }
  double log_det() const noexcept { return log_det_; }
  std::size_t dim() const noexcept { return lower_.rows(); }

  /// Solves L z = v in place.
  void solve_lower_inplace(std::span<double> v) const {
    const std::size_t p = dim();
    for (std::size_t i = 0; i < p; ++i) {
      double s = v[i];
      for (std::size_t k = 0; k < i; ++k) s -= lower_(i, k) * v[k];
      v[i] = s / lower_(i, i);
    }
  }

  /// Solves A z = v, A = L L'.
  Vector solve(std::span<const double> v) const {
    check_dim(v.size());
    Vector z(v.begin(), v.end());
    solve_lower_inplace(z);
    const std::size_t p = dim();
    for (std::size_t ii = p; ii-- > 0;) {
      double s = z[ii];
      for (std::size_t k = ii + 1; k < p; ++k) s -= lower_(k, ii) * z[k];
      z[ii] = s / lower_(ii, ii);
    }
    return z;
  }

  Matrix reconstruct() const {
    const std::size_t p = dim();
    Matrix a(p, p);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k <= j; ++k) s += lower_(i, k) * lower_(j, k);
        a(i, j) = s;
        a(j, i) = s;
      }
    return a;
  }

  void check_dim(std::size_t n) const {
    if (n != dim())
      throw DimensionMismatch("vector of length " + std::to_string(n) +
                              " against matrix of dimension " + std::to_string(dim()));
  }

 private:
  Matrix lower_;
  double log_det_ = 0.0;
};

/// Pivots below this fraction of the largest diagonal entry are rejected.
inline constexpr double pivot_tolerance = 1e-12;

inline CholFactor cholesky(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionMismatch("cholesky: matrix is not square");
  if (!m.is_symmetric()) throw InvalidArgument("cholesky: matrix is not symmetric");
  const std::size_t p = m.rows();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < p; ++i) max_diag = std::max(max_diag, std::abs(m(i, i)));
  const double floor = pivot_tolerance * max_diag;

  Matrix l(p, p);
  double log_det = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > floor) || !std::isfinite(d)) throw NotPositiveDefinite(j);
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    log_det += 2.0 * std::log(ljj);
    for (std::size_t i = j + 1; i < p; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return {std::move(l), log_det};
}

/// v' A^{-1} v.
inline double quad_form(std::span<const double> v, const CholFactor& chol) {
  chol.check_dim(v.size());
  Vector z(v.begin(), v.end());
  chol.solve_lower_inplace(z);
  double s = 0.0;
  for (double zi : z) s += zi * zi;
  return s;
}

/// Squared Mahalanobis distance (x - mu)' A^{-1} (x - mu).
inline double mahalanobis(std::span<const double> x, std::span<const double> mu,
                          const CholFactor& chol) {
  if (x.size() != mu.size()) throw DimensionMismatch("mahalanobis: x and mu differ in length");
  Vector d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - mu[i];
  return quad_form(d, chol);
}

/// (x - mu)' A^{-1} v.
inline double cross_form(std::span<const double> x, std::span<const double> mu,
                         std::span<const double> v, const CholFactor& chol) {
  if (x.size() != mu.size() || v.size() != x.size())
    throw DimensionMismatch("cross_form: vector lengths differ");
  const Vector w = chol.solve(v);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mu[i]) * w[i];
  return s;
}

}  // namespace vgmix
