#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "vibtac/fft.hpp"
#include "vibtac/numerics.hpp"
#include "vibtac/rng.hpp"

using namespace vibtac;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, SplitMix64& rng) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.gaussian();
  return m;
}

Matrix random_spd(std::size_t n, SplitMix64& rng) {
  const Matrix a = random_matrix(n, n, rng);
  Matrix s = a * a.transpose();
  for (std::size_t i = 0; i < n; ++i) s(i, i) += 0.5 * static_cast<double>(n);
  return s;
}

Matrix random_psd(std::size_t n, std::size_t rank, SplitMix64& rng) {
  const Matrix a = random_matrix(n, rank, rng);
  Matrix s = a * a.transpose();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) s(i, j) = s(j, i);
  return s;
}

// Dense solve by Gaussian elimination with partial pivoting, independent of Cholesky.
Matrix solve_dense(Matrix a, Matrix b) {
  const std::size_t n = a.rows();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    for (std::size_t c = 0; c < n; ++c) std::swap(a(col, c), a(piv, c));
    for (std::size_t c = 0; c < b.cols(); ++c) std::swap(b(col, c), b(piv, c));
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col) / a(col, col);
      for (std::size_t c = 0; c < n; ++c) a(r, c) -= f * a(col, c);
      for (std::size_t c = 0; c < b.cols(); ++c) b(r, c) -= f * b(col, c);
    }
  }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < b.cols(); ++c) b(r, c) /= a(r, r);
  return b;
}

// Power iteration with Hotelling-style deflation on the nonsymmetric M = S_W^-1 S_B,
// using left eigenvectors obtained from M^T.
std::vector<double> power_oracle(const Matrix& s_b, const Matrix& s_w, std::size_t count) {
  const std::size_t n = s_b.rows();
  Matrix m = solve_dense(s_w, s_b);
  std::vector<double> values;
  SplitMix64 rng(99);
  for (std::size_t k = 0; k < count; ++k) {
    auto iterate = [&](const Matrix& op) {
      std::vector<double> v(n);
      for (double& x : v) x = rng.uniform() + 0.1;
      double lambda = 0.0;
      for (int it = 0; it < 20000; ++it) {
        std::vector<double> w(n, 0.0);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < n; ++c) w[r] += op(r, c) * v[c];
        double norm = 0.0;
        for (double x : w) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) return std::pair{0.0, v};
        double next = 0.0;
        for (std::size_t r = 0; r < n; ++r) next += v[r] * w[r];
        for (std::size_t r = 0; r < n; ++r) v[r] = w[r] / norm;
        if (it > 50 && std::abs(next - lambda) <= 1e-15 * std::abs(next)) {
          lambda = next;
          break;
        }
        lambda = next;
      }
      return std::pair{lambda, v};
    };
    auto [lambda, right] = iterate(m);
    auto [lambda_t, left] = iterate(m.transpose());
    (void)lambda_t;
    values.push_back(lambda);
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += left[i] * right[i];
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) m(r, c) -= lambda * right[r] * left[c] / dot;
  }
  return values;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(Cholesky, IdentityIsItsOwnFactor) {
  EXPECT_EQ(cholesky(Matrix::identity(3)), Matrix::identity(3));
}

TEST(Cholesky, TwoByTwoExample) {
  const Matrix l = cholesky(Matrix{{4, 2}, {2, 3}});
  EXPECT_DOUBLE_EQ(l(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(l(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(l(1, 0), 1.0);
  EXPECT_NEAR(l(1, 1), std::sqrt(2.0), 1e-15);
  const Matrix back = l * l.transpose();
  EXPECT_NEAR(back(0, 0), 4.0, 1e-14);
  EXPECT_NEAR(back(0, 1), 2.0, 1e-14);
  EXPECT_NEAR(back(1, 1), 3.0, 1e-14);
}

TEST(Cholesky, RejectsIndefinite) {
  EXPECT_THROW(cholesky(Matrix{{1, 2}, {2, 1}}), NotPositiveDefinite);
}

TEST(Cholesky, RejectsAsymmetricAndSingular) {
  EXPECT_THROW(cholesky(Matrix{{1, 0.5}, {0, 1}}), InvalidArgument);
  EXPECT_THROW(cholesky(Matrix{{1, 1}, {1, 1}}), NotPositiveDefinite);
}

TEST(Cholesky, ReconstructsRandomSpd) {
  SplitMix64 rng(11);
  for (std::size_t n = 1; n <= 20; ++n) {
    const Matrix a = random_spd(n, rng);
    const Matrix l = cholesky(a);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) EXPECT_EQ(l(i, j), 0.0);
    EXPECT_LT(frobenius_norm(l * l.transpose() - a) / frobenius_norm(a), 1e-10) << "n=" << n;
  }
}

TEST(TriangularSolve, InvertsFactor) {
  SplitMix64 rng(12);
  const Matrix a = random_spd(6, rng);
  const Matrix l = cholesky(a);
  Matrix b = random_matrix(6, 3, rng);
  const Matrix original = b;
  solve_lower_in_place(l, b);
  solve_upper_transposed_in_place(l, b);
  EXPECT_LT(frobenius_norm(a * b - original), 1e-10);
}

TEST(SymEig, DiagonalSortedDescending) {
  const std::vector<double> d = {3, 1, 2};
  const auto e = sym_eig(Matrix::diagonal(d));
  ASSERT_EQ(e.eigenvalues.size(), 3u);
  EXPECT_DOUBLE_EQ(e.eigenvalues[0], 3.0);
  EXPECT_DOUBLE_EQ(e.eigenvalues[1], 2.0);
  EXPECT_DOUBLE_EQ(e.eigenvalues[2], 1.0);
  EXPECT_DOUBLE_EQ(e.eigenvectors(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(e.eigenvectors(2, 1), 1.0);
  EXPECT_DOUBLE_EQ(e.eigenvectors(1, 2), 1.0);
}

TEST(SymEig, TwoByTwoExample) {
  const auto e = sym_eig(Matrix{{2, 1}, {1, 2}});
  EXPECT_NEAR(e.eigenvalues[0], 3.0, 1e-14);
  EXPECT_NEAR(e.eigenvalues[1], 1.0, 1e-14);
  const double h = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(e.eigenvectors(0, 0), h, 1e-14);
  EXPECT_NEAR(e.eigenvectors(1, 0), h, 1e-14);
  // second vector is (1, -1)/sqrt2 up to sign; the sign rule makes the larger-magnitude entry positive
  EXPECT_NEAR(std::abs(e.eigenvectors(0, 1)), h, 1e-14);
  EXPECT_NEAR(e.eigenvectors(0, 1) + e.eigenvectors(1, 1), 0.0, 1e-14);
}

TEST(SymEig, ZeroMatrix) {
  const auto e = sym_eig(Matrix(4, 4));
  for (double v : e.eigenvalues) EXPECT_EQ(v, 0.0);
  EXPECT_LT(frobenius_norm(e.eigenvectors.transpose() * e.eigenvectors - Matrix::identity(4)), 1e-12);
}

TEST(SymEig, TiesKeepOriginalOrder) {
  const std::vector<double> d = {2, 5, 2, 5};
  const auto e = sym_eig(Matrix::diagonal(d));
  EXPECT_DOUBLE_EQ(e.eigenvectors(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(e.eigenvectors(3, 1), 1.0);
  EXPECT_DOUBLE_EQ(e.eigenvectors(0, 2), 1.0);
  EXPECT_DOUBLE_EQ(e.eigenvectors(2, 3), 1.0);
}

TEST(SymEig, RandomReconstructionOrthonormalityTrace) {
  SplitMix64 rng(13);
  for (std::size_t n : {1u, 2u, 5u, 12u, 30u}) {
    Matrix a = random_matrix(n, n, rng);
    a = a + a.transpose();
    const auto e = sym_eig(a);
    const double norm = frobenius_norm(a);
    for (std::size_t i = 1; i < n; ++i) EXPECT_GE(e.eigenvalues[i - 1], e.eigenvalues[i]);
    const Matrix recon = e.eigenvectors * Matrix::diagonal(e.eigenvalues) * e.eigenvectors.transpose();
    EXPECT_LE(frobenius_norm(recon - a), 1e-8 * norm);
    EXPECT_LE(frobenius_norm(e.eigenvectors.transpose() * e.eigenvectors - Matrix::identity(n)), 1e-8);
    double sum = 0.0;
    for (double v : e.eigenvalues) sum += v;
    EXPECT_LE(std::abs(sum - a.trace()), 1e-9 * std::max(1.0, std::abs(a.trace())) + 1e-12 * norm);
    for (std::size_t j = 0; j < n; ++j) {
      const Matrix v(n, 1, e.eigenvectors.column(j));
      EXPECT_LE(frobenius_norm(a * v - e.eigenvalues[j] * v), 1e-8 * norm);
    }
  }
}

TEST(SymEig, RejectsAsymmetric) {
  EXPECT_THROW(sym_eig(Matrix{{1, 2}, {0, 1}}), InvalidArgument);
}

TEST(GeneralizedEig, ZeroBetweenGivesZeros) {
  const auto e = generalized_eig(Matrix(3, 3), Matrix::identity(3));
  for (double v : e.eigenvalues) EXPECT_EQ(v, 0.0);
}

TEST(GeneralizedEig, IdentityWithinMatchesSymEig) {
  SplitMix64 rng(14);
  const Matrix b = random_psd(5, 3, rng);
  const auto g = generalized_eig(b, Matrix::identity(5));
  const auto s = sym_eig(b);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(g.eigenvalues[i], s.eigenvalues[i], 1e-12);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t r = 0; r < 5; ++r) EXPECT_NEAR(g.eigenvectors(r, i), s.eigenvectors(r, i), 1e-10);
}

TEST(GeneralizedEig, MatchesPowerIterationOracle) {
  SplitMix64 rng(15);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix w = random_spd(6, rng);
    const Matrix b = random_psd(6, 4, rng);
    const auto e = generalized_eig(b, w);
    const auto oracle = power_oracle(b, w, 3);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_LT(rel(e.eigenvalues[i], oracle[i]), 1e-6) << trial << "/" << i;
    for (double v : e.eigenvalues) EXPECT_GE(v, -1e-10);
    // S_B v = lambda S_W v
    for (std::size_t j = 0; j < 6; ++j) {
      const Matrix v(6, 1, e.eigenvectors.column(j));
      EXPECT_LE(frobenius_norm(b * v - e.eigenvalues[j] * (w * v)), 1e-8 * frobenius_norm(b) * frobenius_norm(v));
    }
  }
}

TEST(GeneralizedEig, CongruenceInvariance) {
  SplitMix64 rng(16);
  for (std::size_t n = 2; n <= 10; ++n) {
    const Matrix w = random_spd(n, rng);
    const Matrix b = random_psd(n, n / 2 + 1, rng);
    Matrix m = random_matrix(n, n, rng);
    for (std::size_t i = 0; i < n; ++i) m(i, i) += 3.0;
    auto congruent = [&](const Matrix& s) {
      Matrix t = m.transpose() * s * m;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) t(i, j) = t(j, i) = 0.5 * (t(i, j) + t(j, i));
      return t;
    };
    const auto e1 = generalized_eig(b, w);
    const auto e2 = generalized_eig(congruent(b), congruent(w));
    const double top = e1.eigenvalues.front();
    for (std::size_t i = 0; i < n; ++i)
      EXPECT_LE(std::abs(e1.eigenvalues[i] - e2.eigenvalues[i]), 1e-8 * top) << "n=" << n << " i=" << i;
  }
}

TEST(GeneralizedEig, PropagatesNotPositiveDefinite) {
  EXPECT_THROW(generalized_eig(Matrix::identity(2), Matrix{{1, 2}, {2, 1}}), NotPositiveDefinite);
  EXPECT_THROW(generalized_eig(Matrix::identity(2), Matrix::identity(3)), DimensionMismatch);
}

TEST(Fft, MatchesDirectDft) {
  for (std::size_t n : {1u, 2u, 7u, 12u, 100u, 1100u}) {
    SplitMix64 rng(n);
    std::vector<double> x(n);
    for (double& v : x) v = rng.gaussian();
    const auto fast = FftPlan(n).forward_real(x);
    double err = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      std::complex<double> s = 0.0;
      for (std::size_t t = 0; t < n; ++t)
        s += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / n);
      err = std::max(err, std::abs(s - fast[k]));
      scale = std::max(scale, std::abs(s));
    }
    EXPECT_LT(err, 1e-11 * std::max(1.0, scale)) << "n=" << n;
  }
}

TEST(Rng, FixedSeedReproducesStream) {
  SplitMix64 a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  SplitMix64 c(0);
  EXPECT_EQ(c.next(), 0xE220A8397B1DCDAFULL);  // published SplitMix64 first output for seed 0
}

TEST(Rng, GaussianMoments) {
  SplitMix64 rng(5);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    s += g;
    s2 += g * g;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(Rng, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(1, {1, 2}), derive_seed(1, {2, 1}));
  EXPECT_NE(derive_seed(1, {0}), derive_seed(2, {0}));
  EXPECT_EQ(derive_seed(9, {3, 4}), derive_seed(9, {3, 4}));
}
