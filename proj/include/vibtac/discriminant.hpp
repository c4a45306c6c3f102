#pragma once

// Multiclass Fisher discriminant: scatter matrices, the maximal trace-ratio
// criterion J(W*) and the D'-dimensional projection used for plotting.

#include <cmath>
#include <string>
#include <vector>

#include "vibtac/dataset.hpp"
#include "vibtac/errors.hpp"
#include "vibtac/numerics.hpp"

namespace vibtac {

struct ScatterPair {
  Matrix s_w;  // sum_k sum_{n in k} (x_n - m_k)(x_n - m_k)^T
  Matrix s_b;  // sum_k N_k (m_k - m)(m_k - m)^T
  std::vector<std::size_t> n_per_class;
  std::vector<int> class_ids;
  std::vector<double> global_mean;
  // D x K with columns sqrt(N_k) (m_k - m), so s_b = F F^T. Empty when the
  // pair was assembled by hand.
  Matrix between_factor;
};

struct FisherProjection {
  Matrix w;  // d_prime x D, rows ordered by eigenvalue
  double j_value = 0.0;
  std::vector<double> eigenvalues;  // top d_prime, descending
  std::size_t d_prime = 3;
  std::vector<double> mean;  // centring used by project()
  double ridge = 0.0;
};

inline constexpr std::size_t kDefaultProjectionDim = 3;
inline constexpr double kDefaultRidgeScale = 1e-3;

inline ScatterPair scatter_matrices(const LabeledFeatures& data) {
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  if (data.x.rows() != n) throw DimensionMismatch("scatter_matrices: label count differs from rows");
  ScatterPair out;
  out.class_ids = class_ids(data.labels);
  const std::size_t k = out.class_ids.size();
  if (k < 2) throw EmptyClass("scatter_matrices: need at least two classes");

  auto class_index = [&](int label) {
    return static_cast<std::size_t>(std::lower_bound(out.class_ids.begin(), out.class_ids.end(), label) -
                                    out.class_ids.begin());
  };
  Matrix means(k, d);
  out.n_per_class.assign(k, 0);
  out.global_mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = class_index(data.labels[i]);
    ++out.n_per_class[c];
    const auto xi = data.x.row(i);
    auto mc = means.row(c);
    for (std::size_t j = 0; j < d; ++j) {
      mc[j] += xi[j];
      out.global_mean[j] += xi[j];
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (out.n_per_class[c] == 0) throw EmptyClass("scatter_matrices: class without samples");
    for (double& v : means.row(c)) v /= static_cast<double>(out.n_per_class[c]);
  }
  for (double& v : out.global_mean) v /= static_cast<double>(n);

  out.s_w = Matrix(d, d);
  std::vector<double> centred(d);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = class_index(data.labels[i]);
    const auto xi = data.x.row(i);
    const auto mc = means.row(c);
    for (std::size_t j = 0; j < d; ++j) centred[j] = xi[j] - mc[j];
    for (std::size_t r = 0; r < d; ++r) {
      const double cr = centred[r];
      auto srow = out.s_w.row(r);
      for (std::size_t s = r; s < d; ++s) srow[s] += cr * centred[s];
    }
  }
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t s = 0; s < r; ++s) out.s_w(r, s) = out.s_w(s, r);

  out.between_factor = Matrix(d, k);
  for (std::size_t c = 0; c < k; ++c) {
    const double w = std::sqrt(static_cast<double>(out.n_per_class[c]));
    for (std::size_t j = 0; j < d; ++j) out.between_factor(j, c) = w * (means(c, j) - out.global_mean[j]);
  }
  out.s_b = out.between_factor * out.between_factor.transpose();
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t s = 0; s < r; ++s) out.s_b(r, s) = out.s_b(s, r);
  return out;
}

// 1e-3 * trace(S_W) / D
inline double default_ridge(const ScatterPair& scatter, double scale = kDefaultRidgeScale) {
  const std::size_t d = scatter.s_w.rows();
  return d == 0 ? 0.0 : scale * scatter.s_w.trace() / static_cast<double>(d);
}

// Tr{(W S_W W^T)^{-1} (W S_B W^T)} for a d' x D matrix W.
inline double separation_criterion(const Matrix& w, const Matrix& s_w, const Matrix& s_b) {
  const Matrix wt = w.transpose();
  Matrix within = w * s_w * wt;
  Matrix between = w * s_b * wt;
  for (std::size_t i = 0; i < within.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      within(i, j) = within(j, i) = 0.5 * (within(i, j) + within(j, i));
      between(i, j) = between(j, i) = 0.5 * (between(i, j) + between(j, i));
    }
  const Matrix l = cholesky(within);
  solve_lower_in_place(l, between);
  solve_upper_transposed_in_place(l, between);  // within^{-1} * between
  return between.trace();
}

namespace detail {

inline Matrix regularized_within(const Matrix& s_w, double ridge) {
  Matrix a = s_w;
  for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += ridge;
  return a;
}

inline Matrix cholesky_or_ridge_error(const Matrix& a, double ridge) {
  try {
    return cholesky(a);
  } catch (const NotPositiveDefinite& e) {
    throw RidgeTooSmall("fisher_projection: S_W + " + std::to_string(ridge) +
                        " I is not positive definite (" + e.what() + ")");
  }
}

inline void normalize_rows(Matrix& w) {
  for (std::size_t r = 0; r < w.rows(); ++r) {
    auto row = w.row(r);
    double norm = 0.0, big = 0.0;
    for (double v : row) {
      norm += v * v;
      if (std::abs(v) > std::abs(big)) big = v;
    }
    const double scale = (big < 0.0 ? -1.0 : 1.0) / std::sqrt(norm);
    for (double& v : row) v *= scale;
  }
}

// Uses S_B = F F^T with F of width K: the nonzero eigenvalues of the whitened
// problem are those of (L^{-1} F)^T (L^{-1} F), a K x K matrix.
inline FisherProjection fisher_low_rank(const ScatterPair& scatter, double ridge, std::size_t d_prime) {
  const std::size_t d = scatter.s_w.rows();
  const std::size_t k = scatter.between_factor.cols();
  const Matrix l = cholesky_or_ridge_error(regularized_within(scatter.s_w, ridge), ridge);
  Matrix c = scatter.between_factor;  // D x K
  solve_lower_in_place(l, c);
  Matrix gram = c.transpose() * c;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < i; ++j) gram(i, j) = gram(j, i) = 0.5 * (gram(i, j) + gram(j, i));
  const EigenDecomposition small = sym_eig(gram);
  const double lambda_max = std::max(small.eigenvalues.empty() ? 0.0 : small.eigenvalues.front(), 0.0);

  // whitened directions z_j, one per column
  Matrix z(d, d_prime);
  std::vector<double> values(d_prime, 0.0);
  std::size_t filled = 0;
  for (std::size_t j = 0; j < std::min(k, d_prime); ++j) {
    const double lam = small.eigenvalues[j];
    if (!(lam > 1e-12 * lambda_max) || lam <= 0.0) break;
    const double inv = 1.0 / std::sqrt(lam);
    for (std::size_t r = 0; r < d; ++r) {
      double s = 0.0;
      for (std::size_t q = 0; q < k; ++q) s += c(r, q) * small.eigenvectors(q, j);
      z(r, j) = s * inv;
    }
    values[j] = lam;
    ++filled;
  }
  // complete with whitened directions orthogonal to the ones found (eigenvalue 0)
  for (std::size_t basis = 0; filled < d_prime && basis < d; ++basis) {
    std::vector<double> v(d, 0.0);
    v[basis] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < filled; ++j) {
        double dot = 0.0;
        for (std::size_t r = 0; r < d; ++r) dot += z(r, j) * v[r];
        for (std::size_t r = 0; r < d; ++r) v[r] -= dot * z(r, j);
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (std::size_t r = 0; r < d; ++r) z(r, filled) = v[r] / norm;
    values[filled] = filled < k ? std::max(small.eigenvalues[filled], 0.0) : 0.0;
    ++filled;
  }
  solve_upper_transposed_in_place(l, z);  // back to feature space

  FisherProjection out;
  out.w = z.transpose();
  normalize_rows(out.w);
  out.eigenvalues = std::move(values);
  return out;
}

inline FisherProjection fisher_full(const ScatterPair& scatter, double ridge, std::size_t d_prime) {
  const Matrix a = regularized_within(scatter.s_w, ridge);
  cholesky_or_ridge_error(a, ridge);
  const EigenDecomposition eig = generalized_eig(scatter.s_b, a);
  const std::size_t d = scatter.s_w.rows();
  FisherProjection out;
  out.w = Matrix(d_prime, d);
  for (std::size_t j = 0; j < d_prime; ++j) {
    for (std::size_t r = 0; r < d; ++r) out.w(j, r) = eig.eigenvectors(r, j);
    out.eigenvalues.push_back(eig.eigenvalues[j]);
  }
  return out;
}

}  // namespace detail

// Maximises J(W) by the top d_prime eigenpairs of (S_W + ridge I)^{-1} S_B.
inline FisherProjection fisher_projection(const ScatterPair& scatter, double ridge,
                                          std::size_t d_prime = kDefaultProjectionDim) {
  const std::size_t d = scatter.s_w.rows();
  if (!scatter.s_w.square() || scatter.s_b.rows() != d || scatter.s_b.cols() != d)
    throw DimensionMismatch("fisher_projection: scatter matrices have inconsistent shapes");
  if (d_prime == 0 || d_prime > d) throw InvalidArgument("fisher_projection: d_prime must be in [1, D]");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw InvalidArgument("fisher_projection: ridge must be >= 0");

  const bool low_rank = scatter.between_factor.rows() == d && scatter.between_factor.cols() > 0 &&
                        scatter.between_factor.cols() < d;
  FisherProjection out = low_rank ? detail::fisher_low_rank(scatter, ridge, d_prime)
                                  : detail::fisher_full(scatter, ridge, d_prime);
  out.d_prime = d_prime;
  out.ridge = ridge;
  out.j_value = 0.0;
  for (double v : out.eigenvalues) out.j_value += v;
  out.mean = scatter.global_mean.size() == d ? scatter.global_mean : std::vector<double>(d, 0.0);
  return out;
}

// y = W (x - m), one output row per input row.
inline Matrix project(const Matrix& x, const FisherProjection& proj) {
  const std::size_t d = proj.w.cols();
  if (x.cols() != d) throw DimensionMismatch("project: feature dimension differs from projection");
  Matrix y(x.rows(), proj.w.rows());
  std::vector<double> centred(d);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto xi = x.row(i);
    for (std::size_t j = 0; j < d; ++j) centred[j] = xi[j] - proj.mean[j];
    for (std::size_t r = 0; r < proj.w.rows(); ++r) {
      const auto wr = proj.w.row(r);
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += wr[j] * centred[j];
      y(i, r) = s;
    }
  }
  return y;
}

}  // namespace vibtac
