#include <gtest/gtest.h>

#include <random>

#include "msplit/linalg.hpp"
#include "oracles.hpp"

using namespace msplit;

namespace {

DenseMatrix to_dense(const oracle::Mat& m) { return DenseMatrix::from_rows(m); }

SparseSym tridiag(std::size_t n) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) {
    t.push_back({i, i, 2.0});
    if (i + 1 < n) {
      t.push_back({i, i + 1, -1.0});
      t.push_back({i + 1, i, -1.0});
    }
  }
  return SparseSym::from_triplets(n, t);
}

SparseSym sparse_from(const oracle::Mat& m) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j)
      if (m[i][j] != 0.0) t.push_back({i, j, m[i][j]});
  return SparseSym::from_triplets(m.size(), t);
}

}  // namespace

TEST(SolveSpd, Identity) {
  const SparseSym id = SparseSym::from_triplets(3, {{0, 0, 1}, {1, 1, 1}, {2, 2, 1}});
  const Vector b{1.5, -2.0, 3.25};
  const Vector x = solve_spd(id, b);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(x[i], b[i]);
}

TEST(SolveSpd, Tridiagonal) {
  const Vector x = solve_spd(tridiag(3), Vector{1, 0, 0});
  EXPECT_NEAR(x[0], 0.75, 1e-14);
  EXPECT_NEAR(x[1], 0.5, 1e-14);
  EXPECT_NEAR(x[2], 0.25, 1e-14);
}

TEST(SolveSpd, RandomAgainstGaussianElimination) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 3 + static_cast<std::size_t>(trial) * 3;
    const oracle::Mat a = oracle::random_spd(n, rng);
    oracle::Vec b(n);
    for (double& v : b) v = nd(rng);
    const oracle::Vec ref = oracle::solve(a, b);
    const Vector x = solve_spd(sparse_from(a), b, 1e-13);
    EXPECT_LE(norm2(subtract(x, ref)), 1e-10 * norm2(ref));
  }
}

TEST(SolveSpd, Linearity) {
  std::mt19937_64 rng(3);
  const oracle::Mat a = oracle::random_spd(12, rng);
  const SparseSym s = sparse_from(a);
  Vector b1(12), b2(12), b3(12);
  std::normal_distribution<double> nd;
  for (std::size_t i = 0; i < 12; ++i) {
    b1[i] = nd(rng);
    b2[i] = nd(rng);
    b3[i] = 2.0 * b1[i] - 3.0 * b2[i];
  }
  const Vector x1 = solve_spd(s, b1, 1e-13), x2 = solve_spd(s, b2, 1e-13), x3 = solve_spd(s, b3, 1e-13);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(x3[i], 2.0 * x1[i] - 3.0 * x2[i], 1e-10 * (1 + std::abs(x3[i])));
}

TEST(SolveSpd, PcgAgreesWithDirect) {
  const SparseSym a = tridiag(200);
  Vector b(200);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::sin(0.1 * static_cast<double>(i));
  const Vector direct = solve_spd(a, b, 1e-12);
  const IterativeResult it = pcg(a, b, 1e-12);
  EXPECT_LE(it.relative_residual, 1e-12);
  EXPECT_LE(norm2(subtract(direct, it.x)), 1e-8 * norm2(direct));
}

TEST(SolveSpd, RejectsIndefinite) {
  const SparseSym a = SparseSym::from_triplets(2, {{0, 0, 1.0}, {0, 1, 2.0}, {1, 0, 2.0}, {1, 1, 1.0}});
  EXPECT_THROW(solve_spd(a, Vector{1.0, 1.0}), NumericalError);
  EXPECT_THROW(pcg(a, Vector{1.0, -1.0}, 1e-10), NumericalError);
}

TEST(SolveSpd, DimensionMismatch) { EXPECT_THROW(solve_spd(tridiag(3), Vector{1.0, 2.0}), ConfigError); }

TEST(Csr, DuplicatesAreSummed) {
  const CsrMatrix m = CsrMatrix::from_triplets(2, 3, {{0, 1, 1.0}, {0, 1, 2.5}, {1, 2, -1.0}, {1, 0, 4.0}});
  EXPECT_EQ(m.nonzeros(), 3u);
  EXPECT_DOUBLE_EQ(m(0, 1), 3.5);
  EXPECT_DOUBLE_EQ(m(1, 0), 4.0);
  EXPECT_DOUBLE_EQ(m(1, 2), -1.0);
  EXPECT_DOUBLE_EQ(m(0, 0), 0.0);
  const Vector y = m * Vector{1.0, 2.0, 3.0};
  EXPECT_DOUBLE_EQ(y[0], 7.0);
  EXPECT_DOUBLE_EQ(y[1], 1.0);
  EXPECT_THROW(CsrMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), ConfigError);
}

TEST(Csr, AsymmetricRejectedAsSparseSym) {
  EXPECT_THROW(SparseSym::from_triplets(2, {{0, 1, 1.0}, {1, 0, 2.0}, {0, 0, 3.0}, {1, 1, 3.0}}), NumericalError);
}

TEST(Cholesky, CheckExamples) {
  EXPECT_TRUE(cholesky_check(DenseMatrix::from_rows({{2, 1}, {1, 2}})));
  EXPECT_FALSE(cholesky_check(DenseMatrix::from_rows({{1, 2}, {2, 1}})));
  EXPECT_FALSE(cholesky_check(DenseMatrix::from_rows({{1, 1}, {1, 1}})));
  EXPECT_FALSE(cholesky_check(DenseMatrix::from_rows({{0, 0}, {0, 0}})));
  const CholeskyProbe p = probe_cholesky(DenseMatrix::from_rows({{4, 0, 0}, {0, 1, 0}, {0, 0, -2}}));
  EXPECT_FALSE(p.ok);
  EXPECT_EQ(p.failed_at, 2u);
  EXPECT_DOUBLE_EQ(p.min_pivot, -2.0);
}

TEST(Cholesky, DenseAndEnvelopeAgree) {
  std::mt19937_64 rng(5);
  const oracle::Mat a = oracle::random_spd(9, rng);
  const Vector b{1, -2, 3, 0.5, 0, 1, 2, -1, 4};
  const Vector xd = DenseCholesky(to_dense(a)).solve(b);
  const Vector xe = EnvelopeCholesky(sparse_from(a)).solve(b);
  const oracle::Vec ref = oracle::solve(a, b);
  EXPECT_LE(norm2(subtract(xd, ref)), 1e-11 * norm2(ref));
  EXPECT_LE(norm2(subtract(xe, ref)), 1e-11 * norm2(ref));
  EXPECT_THROW(DenseCholesky(DenseMatrix::from_rows({{1, 2}, {2, 1}})), NumericalError);
}

TEST(Eigen, DiagonalPencil) {
  const EigResult r = eig_gsym(DenseMatrix::diagonal(Vector{3, 1, 2}), DenseMatrix::identity(3));
  EXPECT_NEAR(r.values[0], 1.0, 1e-14);
  EXPECT_NEAR(r.values[1], 2.0, 1e-14);
  EXPECT_NEAR(r.values[2], 3.0, 1e-14);
  EXPECT_NEAR(std::abs(r.vectors(1, 0)), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(r.vectors(2, 1)), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(r.vectors(0, 2)), 1.0, 1e-14);
}

TEST(Eigen, TwoByTwo) {
  const EigResult r = eig_gsym(DenseMatrix::from_rows({{2, -1}, {-1, 2}}), DenseMatrix::identity(2));
  EXPECT_NEAR(r.values[0], 1.0, 1e-14);
  EXPECT_NEAR(r.values[1], 3.0, 1e-14);
}

TEST(Eigen, EqualMatricesGiveUnitEigenvalues) {
  std::mt19937_64 rng(8);
  const DenseMatrix a = to_dense(oracle::random_spd(6, rng));
  const EigResult r = eig_gsym(a, a);
  for (double v : r.values) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(Eigen, RandomPencilProperties) {
  std::mt19937_64 rng(21);
  for (std::size_t n : {2u, 5u, 10u, 25u}) {
    const oracle::Mat ao = oracle::random_spd(n, rng, 0.1), so = oracle::random_spd(n, rng, 1.0);
    const DenseMatrix a = to_dense(ao), s = to_dense(so);
    const EigResult r = eig_gsym(a, s);
    double scale = 0.0;
    for (double v : r.values) scale = std::max(scale, std::abs(v));
    for (std::size_t k = 0; k + 1 < n; ++k) EXPECT_LE(r.values[k], r.values[k + 1]);
    // S-orthonormality and residual.
    const DenseMatrix sv = multiply(s, r.vectors);
    const DenseMatrix av = multiply(a, r.vectors);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double g = dot(r.vectors.column(i), sv.column(j));
        EXPECT_NEAR(g, i == j ? 1.0 : 0.0, 1e-10);
      }
      for (std::size_t k = 0; k < n; ++k)
        EXPECT_NEAR(av(k, i), r.values[i] * sv(k, i), 1e-10 * scale);
    }
    // Sum of eigenvalues equals trace(S^{-1} A).
    const oracle::Mat sia = oracle::matmul(oracle::inverse(so), ao);
    double tr = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) tr += sia[i][i];
    for (double v : r.values) sum += v;
    EXPECT_NEAR(sum, tr, 1e-10 * std::abs(tr));
  }
}

TEST(Eigen, CharacteristicPolynomialOracle) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 3);
    const oracle::Mat ao = oracle::random_spd(n, rng, 0.2), so = oracle::random_spd(n, rng, 0.7);
    const EigResult r = eig_gsym(to_dense(ao), to_dense(so));
    const oracle::Vec ref = oracle::pencil_eigenvalues(ao, so);
    for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(r.values[k], ref[k], 1e-10 * std::max(1.0, ref[n - 1]));
  }
}

TEST(Eigen, RejectsIndefiniteMass) {
  EXPECT_THROW(eig_gsym(DenseMatrix::identity(2), DenseMatrix::from_rows({{1, 2}, {2, 1}})), NumericalError);
}
