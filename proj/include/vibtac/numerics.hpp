#pragma once

// Dense kernels for scatter matrices, Cholesky whitening and symmetric
// eigendecomposition. Sizes here are a few hundred at most, so everything is
// plain row-major storage and O(n^3) loops.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vibtac/errors.hpp"

namespace vibtac {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionMismatch("Matrix: data length does not match shape");
    }
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionMismatch("Matrix: ragged rows");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix diagonal(std::span<const double> d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  double trace() const {
    double s = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) s += (*this)(i, i);
    return s;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

inline Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto bk = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

inline Matrix operator+(Matrix a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionMismatch("add: shapes differ");
  for (std::size_t i = 0; i < a.data().size(); ++i) a.data()[i] += b.data()[i];
  return a;
}

inline Matrix operator-(Matrix a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionMismatch("sub: shapes differ");
  for (std::size_t i = 0; i < a.data().size(); ++i) a.data()[i] -= b.data()[i];
  return a;
}

inline Matrix operator*(double s, Matrix a) {
  for (double& v : a.data()) v *= s;
  return a;
}

inline bool is_symmetric(const Matrix& a, double rel_tol = 1e-10) {
  if (!a.square()) return false;
  const double scale = std::max(frobenius_norm(a), 1e-300);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      if (std::abs(a(i, j) - a(j, i)) > rel_tol * scale) return false;
  return true;
}

inline void require_symmetric(const Matrix& a, const char* who) {
  if (!a.square()) throw DimensionMismatch(std::string(who) + ": matrix is not square");
  if (!is_symmetric(a)) throw InvalidArgument(std::string(who) + ": matrix is not symmetric");
}

struct EigenDecomposition {
  std::vector<double> eigenvalues;  // descending
  Matrix eigenvectors;              // column j pairs with eigenvalues[j]
};

// Pivots below this fraction of the largest diagonal entry count as zero:
// rank-deficient inputs otherwise leave round-off sized positive pivots.
inline constexpr double kCholeskyPivotTolerance = 1e-10;

// Lower-triangular L with L * L^T == a.
inline Matrix cholesky(const Matrix& a) {
  require_symmetric(a, "cholesky");
  const std::size_t n = a.rows();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a(i, i)));
  const double floor = kCholeskyPivotTolerance * max_diag;

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = a(j, j);
    auto lj = l.row(j);
    for (std::size_t k = 0; k < j; ++k) pivot -= lj[k] * lj[k];
    if (!(pivot > floor)) {
      throw NotPositiveDefinite("cholesky: pivot " + std::to_string(j) +
                                " is not positive (" + std::to_string(pivot) + ")");
    }
    const double d = std::sqrt(pivot);
    lj[j] = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      auto li = l.row(i);
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
      li[j] = s / d;
    }
  }
  return l;
}

// Solves L * X = B in place (B overwritten by X), L lower triangular.
inline void solve_lower_in_place(const Matrix& l, Matrix& b) {
  const std::size_t n = l.rows();
  if (b.rows() != n) throw DimensionMismatch("solve_lower: row count differs");
  for (std::size_t i = 0; i < n; ++i) {
    auto bi = b.row(i);
    for (std::size_t k = 0; k < i; ++k) {
      const double lik = l(i, k);
      if (lik == 0.0) continue;
      auto bk = b.row(k);
      for (std::size_t c = 0; c < b.cols(); ++c) bi[c] -= lik * bk[c];
    }
    const double inv = 1.0 / l(i, i);
    for (double& v : bi) v *= inv;
  }
}

// Solves L^T * X = B in place, L lower triangular.
inline void solve_upper_transposed_in_place(const Matrix& l, Matrix& b) {
  const std::size_t n = l.rows();
  if (b.rows() != n) throw DimensionMismatch("solve_upper: row count differs");
  for (std::size_t ii = n; ii-- > 0;) {
    auto bi = b.row(ii);
    for (std::size_t k = ii + 1; k < n; ++k) {
      const double lki = l(k, ii);
      if (lki == 0.0) continue;
      auto bk = b.row(k);
      for (std::size_t c = 0; c < b.cols(); ++c) bi[c] -= lki * bk[c];
    }
    const double inv = 1.0 / l(ii, ii);
    for (double& v : bi) v *= inv;
  }
}

namespace detail {

// Sort eigenpairs descending; equal eigenvalues keep their original order.
// Each eigenvector is normalised and its largest-magnitude entry made positive.
inline EigenDecomposition sorted_eigenpairs(std::vector<double> values, const Matrix& vecs) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return values[x] > values[y]; });
  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(vecs.rows(), n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.eigenvalues[j] = values[src];
    double norm = 0.0, big = 0.0;
    for (std::size_t r = 0; r < vecs.rows(); ++r) {
      const double v = vecs(r, src);
      norm += v * v;
      if (std::abs(v) > std::abs(big)) big = v;
    }
    norm = std::sqrt(norm);
    const double scale = (big < 0.0 ? -1.0 : 1.0) / (norm > 0.0 ? norm : 1.0);
    for (std::size_t r = 0; r < vecs.rows(); ++r) out.eigenvectors(r, j) = vecs(r, src) * scale;
  }
  return out;
}

}  // namespace detail

inline constexpr int kJacobiMaxSweeps = 100;
inline constexpr double kJacobiRelTolerance = 1e-12;

// Cyclic Jacobi rotations. Stops once the off-diagonal Frobenius norm drops
// below 1e-12 * ||a||_F.
inline EigenDecomposition sym_eig(const Matrix& input) {
  require_symmetric(input, "sym_eig");
  const std::size_t n = input.rows();
  Matrix a = input;
  // exact symmetry so rotations only need the upper triangle semantics
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (a(i, j) + a(j, i));
  Matrix v = Matrix::identity(n);

  const double norm = frobenius_norm(a);
  const double target = kJacobiRelTolerance * norm;
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  bool converged = norm == 0.0 || off_norm() <= target;
  for (int sweep = 0; !converged && sweep < kJacobiMaxSweeps; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p), aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    converged = off_norm() <= target;
  }
  if (!converged) throw NoConvergence("sym_eig: Jacobi sweep limit reached");

  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = a(i, i);
  return detail::sorted_eigenpairs(std::move(values), v);
}

// Eigenpairs of S_W^{-1} S_B through whitening: with L = chol(s_w), the
// symmetric problem L^{-1} S_B L^{-T} u = lambda u has the same eigenvalues
// and v = L^{-T} u.
inline EigenDecomposition generalized_eig(const Matrix& s_b, const Matrix& s_w) {
  if (s_b.rows() != s_w.rows() || s_b.cols() != s_w.cols())
    throw DimensionMismatch("generalized_eig: s_b and s_w differ in shape");
  require_symmetric(s_b, "generalized_eig");
  const Matrix l = cholesky(s_w);

  Matrix x = s_b;  // x = L^{-1} S_B
  solve_lower_in_place(l, x);
  Matrix m = x.transpose();  // (L^{-1} S_B)^T = S_B L^{-T}
  solve_lower_in_place(l, m);  // L^{-1} S_B L^{-T}
  const std::size_t n = m.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m(i, j) = m(j, i) = 0.5 * (m(i, j) + m(j, i));

  EigenDecomposition whitened = sym_eig(m);
  Matrix vecs = whitened.eigenvectors;
  solve_upper_transposed_in_place(l, vecs);

  // unit-norm columns, sign and order already fixed by the whitened solve
  for (std::size_t c = 0; c < n; ++c) {
    double norm = 0.0;
    for (std::size_t r = 0; r < n; ++r) norm += vecs(r, c) * vecs(r, c);
    norm = std::sqrt(norm);
    double big = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      if (std::abs(vecs(r, c)) > std::abs(big)) big = vecs(r, c);
    const double scale = (big < 0.0 ? -1.0 : 1.0) / norm;
    for (std::size_t r = 0; r < n; ++r) vecs(r, c) *= scale;
  }
  return {std::move(whitened.eigenvalues), std::move(vecs)};
}

}  // namespace vibtac
