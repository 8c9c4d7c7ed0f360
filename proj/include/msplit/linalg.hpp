#pragma once

/// @file linalg.hpp
/// Numerical kernels: dense and compressed-row matrices, dense and envelope
/// Cholesky, preconditioned conjugate gradients, and a symmetric generalized
/// eigensolver (Cholesky reduction followed by cyclic Jacobi).

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "msplit/error.hpp"

namespace msplit {

using Vector = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline Vector subtract(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

// ---------------------------------------------------------------------------
// DenseMatrix
// ---------------------------------------------------------------------------

/// Column-major dense matrix. Symmetric matrices (local spectral matrices,
/// coarse C and B) use the same type; symmetry is checked where it matters.
class DenseMatrix {
public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static DenseMatrix diagonal(std::span<const double> d) {
    DenseMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  /// Row-major initializer, convenient in tests: from_rows({{2, 1}, {1, 2}}).
  static DenseMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.front().size();
    DenseMatrix m(r, c);
    for (std::size_t i = 0; i < r; ++i) {
      if (rows[i].size() != c) throw ConfigError("from_rows: ragged initializer");
      for (std::size_t j = 0; j < c; ++j) m(i, j) = rows[i][j];
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }

  std::span<double> column(std::size_t j) { return {data_.data() + j * rows_, rows_}; }
  std::span<const double> column(std::size_t j) const { return {data_.data() + j * rows_, rows_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const {
    assert(x.size() == cols_ && y.size() == rows_);
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t j = 0; j < cols_; ++j) {
      const double xj = x[j];
      if (xj == 0.0) continue;
      const double* col = data_.data() + j * rows_;
      for (std::size_t i = 0; i < rows_; ++i) y[i] += col[i] * xj;
    }
  }

  Vector operator*(std::span<const double> x) const {
    Vector y(rows_);
    multiply(x, y);
    return y;
  }

  /// y = A^T x
  void multiply_transpose(std::span<const double> x, std::span<double> y) const {
    assert(x.size() == rows_ && y.size() == cols_);
    for (std::size_t j = 0; j < cols_; ++j) y[j] = dot(column(j), x);
  }

  DenseMatrix transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t j = 0; j < cols_; ++j)
      for (std::size_t i = 0; i < rows_; ++i) t(j, i) = (*this)(i, j);
    return t;
  }

  double max_abs() const { return msplit::max_abs(data_); }

  double max_asymmetry() const {
    assert(square());
    double m = 0.0;
    for (std::size_t j = 0; j < cols_; ++j)
      for (std::size_t i = j + 1; i < rows_; ++i) m = std::max(m, std::abs((*this)(i, j) - (*this)(j, i)));
    return m;
  }

  double frobenius() const { return norm2(data_); }

  /// Copy of the sub-block rows [r0, r0+nr) x cols [c0, c0+nc).
  DenseMatrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    DenseMatrix b(nr, nc);
    for (std::size_t j = 0; j < nc; ++j)
      for (std::size_t i = 0; i < nr; ++i) b(i, j) = (*this)(r0 + i, c0 + j);
    return b;
  }

  void set_block(std::size_t r0, std::size_t c0, const DenseMatrix& b) {
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t i = 0; i < b.rows(); ++i) (*this)(r0 + i, c0 + j) = b(i, j);
  }

  void symmetrize() {
    assert(square());
    for (std::size_t j = 0; j < cols_; ++j)
      for (std::size_t i = j + 1; i < rows_; ++i) {
        const double avg = 0.5 * ((*this)(i, j) + (*this)(j, i));
        (*this)(i, j) = avg;
        (*this)(j, i) = avg;
      }
  }

  DenseMatrix& operator+=(const DenseMatrix& o) {
    assert(rows_ == o.rows_ && cols_ == o.cols_);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  DenseMatrix& operator-=(const DenseMatrix& o) {
    assert(rows_ == o.rows_ && cols_ == o.cols_);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  DenseMatrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
  friend DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
  friend DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

/// Plain triple-loop product; used for small local matrices and test oracles.
inline DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  assert(a.cols() == b.rows());
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    auto cj = c.column(j);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double bkj = b(k, j);
      if (bkj == 0.0) continue;
      auto ak = a.column(k);
      for (std::size_t i = 0; i < a.rows(); ++i) cj[i] += ak[i] * bkj;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Compressed-row matrices
// ---------------------------------------------------------------------------

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// General compressed-row matrix.
class CsrMatrix {
public:
  CsrMatrix() = default;

  /// Duplicates are summed. Entries are kept even if they sum to zero so the
  /// pattern only depends on the triplet positions.
  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> t) {
    std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    CsrMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.row_ptr_.assign(rows + 1, 0);
    for (std::size_t k = 0; k < t.size();) {
      if (t[k].row >= rows || t[k].col >= cols) throw ConfigError("CsrMatrix: triplet index out of range");
      std::size_t e = k;
      double sum = 0.0;
      while (e < t.size() && t[e].row == t[k].row && t[e].col == t[k].col) sum += t[e++].value;
      m.col_.push_back(t[k].col);
      m.val_.push_back(sum);
      ++m.row_ptr_[t[k].row + 1];
      k = e;
    }
    std::partial_sum(m.row_ptr_.begin(), m.row_ptr_.end(), m.row_ptr_.begin());
    return m;
  }

  /// Keeps entries with |a_ij| > drop (exact zeros dropped by default).
  static CsrMatrix from_dense(const DenseMatrix& d, double drop = 0.0) {
    CsrMatrix m;
    m.rows_ = d.rows();
    m.cols_ = d.cols();
    m.row_ptr_.assign(d.rows() + 1, 0);
    for (std::size_t i = 0; i < d.rows(); ++i) {
      for (std::size_t j = 0; j < d.cols(); ++j) {
        const double v = d(i, j);
        if (std::abs(v) > drop) {
          m.col_.push_back(j);
          m.val_.push_back(v);
        }
      }
      m.row_ptr_[i + 1] = m.col_.size();
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nonzeros() const noexcept { return val_.size(); }

  std::span<const std::size_t> row_ptr() const { return row_ptr_; }
  std::span<const std::size_t> col_index() const { return col_; }
  std::span<const double> values() const { return val_; }
  std::span<double> values() { return val_; }

  double operator()(std::size_t i, std::size_t j) const {
    const auto b = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
    const auto e = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
    const auto it = std::lower_bound(b, e, j);
    if (it == e || *it != j) return 0.0;
    return val_[static_cast<std::size_t>(it - col_.begin())];
  }

  void multiply(std::span<const double> x, std::span<double> y) const {
    assert(x.size() == cols_ && y.size() == rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += val_[k] * x[col_[k]];
      y[i] = s;
    }
  }

  Vector operator*(std::span<const double> x) const {
    Vector y(rows_);
    multiply(x, y);
    return y;
  }

  DenseMatrix to_dense() const {
    DenseMatrix d(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) d(i, col_[k]) += val_[k];
    return d;
  }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_;
  Vector val_;
};

/// Square symmetric compressed-row matrix (both triangles stored).
/// Symmetry is verified at construction.
class SparseSym {
public:
  SparseSym() = default;

  explicit SparseSym(CsrMatrix m, double sym_tol = 1e-13) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw ConfigError("SparseSym: matrix is not square");
    double scale = 0.0;
    for (double v : m_.values()) scale = std::max(scale, std::abs(v));
    const auto rp = m_.row_ptr();
    const auto ci = m_.col_index();
    const auto va = m_.values();
    for (std::size_t i = 0; i < m_.rows(); ++i)
      for (std::size_t k = rp[i]; k < rp[i + 1]; ++k)
        if (std::abs(va[k] - m_(ci[k], i)) > sym_tol * scale)
          throw NumericalError("SparseSym: matrix is not symmetric at (" + std::to_string(i) + ", " +
                               std::to_string(ci[k]) + ")");
  }

  static SparseSym from_triplets(std::size_t n, std::vector<Triplet> t) {
    return SparseSym(CsrMatrix::from_triplets(n, n, std::move(t)));
  }

  std::size_t size() const noexcept { return m_.rows(); }
  const CsrMatrix& csr() const noexcept { return m_; }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  void multiply(std::span<const double> x, std::span<double> y) const { m_.multiply(x, y); }
  Vector operator*(std::span<const double> x) const { return m_ * x; }

  /// x^T A x
  double quadratic(std::span<const double> x) const {
    const auto rp = m_.row_ptr();
    const auto ci = m_.col_index();
    const auto va = m_.values();
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      double r = 0.0;
      for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) r += va[k] * x[ci[k]];
      s += x[i] * r;
    }
    return s;
  }

  Vector diagonal() const {
    Vector d(size());
    for (std::size_t i = 0; i < size(); ++i) d[i] = m_(i, i);
    return d;
  }

  DenseMatrix to_dense() const { return m_.to_dense(); }

private:
  CsrMatrix m_;
};

// ---------------------------------------------------------------------------
// Dense Cholesky
// ---------------------------------------------------------------------------

struct CholeskyProbe {
  bool ok = false;
  /// Smallest pivot d_j = a_jj - sum_k l_jk^2 encountered (the failing one on failure).
  double min_pivot = 0.0;
  std::size_t failed_at = 0;
};

namespace detail {

/// In-place lower Cholesky on the column-major square matrix `a`; the strict
/// upper triangle is left untouched. Stops at the first pivot <= floor.
inline CholeskyProbe cholesky_in_place(DenseMatrix& a, double pivot_floor) {
  const std::size_t n = a.rows();
  CholeskyProbe probe{true, std::numeric_limits<double>::infinity(), n};
  for (std::size_t j = 0; j < n; ++j) {
    // Left-looking: update column j with columns 0..j-1.
    auto cj = a.column(j);
    for (std::size_t k = 0; k < j; ++k) {
      const double ljk = a(j, k);
      if (ljk == 0.0) continue;
      auto ck = a.column(k);
      for (std::size_t i = j; i < n; ++i) cj[i] -= ljk * ck[i];
    }
    const double d = cj[j];
    probe.min_pivot = std::min(probe.min_pivot, d);
    if (!(d > pivot_floor)) {
      probe.ok = false;
      probe.min_pivot = d;
      probe.failed_at = j;
      return probe;
    }
    const double l = std::sqrt(d);
    cj[j] = l;
    for (std::size_t i = j + 1; i < n; ++i) cj[i] /= l;
  }
  if (n == 0) probe.min_pivot = 0.0;
  return probe;
}

inline double default_pivot_floor(const DenseMatrix& a) { return 1e-14 * a.max_abs(); }

}  // namespace detail

/// Positive-definiteness test: Cholesky completes with every pivot above
/// 1e-14 * max|A|.
inline CholeskyProbe probe_cholesky(DenseMatrix a) {
  const double floor = detail::default_pivot_floor(a);
  return detail::cholesky_in_place(a, floor);
}

inline bool cholesky_check(const DenseMatrix& a) { return probe_cholesky(a).ok; }

/// Immutable dense Cholesky factorization A = L L^T.
class DenseCholesky {
public:
  DenseCholesky() = default;

  explicit DenseCholesky(DenseMatrix a, const std::string& what = "matrix") : l_(std::move(a)) {
    if (!l_.square()) throw ConfigError("DenseCholesky: " + what + " is not square");
    const auto probe = detail::cholesky_in_place(l_, detail::default_pivot_floor(l_));
    if (!probe.ok)
      throw NumericalError("Cholesky failed for " + what + ": pivot " + std::to_string(probe.min_pivot) +
                           " at row " + std::to_string(probe.failed_at) + " (not positive definite)");
    min_pivot_ = probe.min_pivot;
  }

  std::size_t size() const noexcept { return l_.rows(); }
  double min_pivot() const noexcept { return min_pivot_; }
  double l(std::size_t i, std::size_t j) const { return l_(i, j); }

  /// x <- L^{-1} x
  void forward_in_place(std::span<double> x) const {
    const std::size_t n = size();
    for (std::size_t j = 0; j < n; ++j) {
      x[j] /= l_(j, j);
      const double xj = x[j];
      if (xj == 0.0) continue;
      auto cj = l_.column(j);
      for (std::size_t i = j + 1; i < n; ++i) x[i] -= cj[i] * xj;
    }
  }

  /// x <- L^{-T} x
  void backward_in_place(std::span<double> x) const {
    const std::size_t n = size();
    for (std::size_t jj = n; jj-- > 0;) {
      auto cj = l_.column(jj);
      double s = x[jj];
      for (std::size_t i = jj + 1; i < n; ++i) s -= cj[i] * x[i];
      x[jj] = s / cj[jj];
    }
  }

  void solve_in_place(std::span<double> x) const {
    assert(x.size() == size());
    forward_in_place(x);
    backward_in_place(x);
  }

  Vector solve(std::span<const double> b) const {
    Vector x(b.begin(), b.end());
    solve_in_place(x);
    return x;
  }

private:
  DenseMatrix l_;
  double min_pivot_ = 0.0;
};

// ---------------------------------------------------------------------------
// Sparse SPD solves
// ---------------------------------------------------------------------------

/// Envelope (profile) Cholesky for SparseSym. Row i stores L(i, first_i..i).
/// Structured-grid matrices in row-major node order have a narrow envelope.
class EnvelopeCholesky {
public:
  explicit EnvelopeCholesky(const SparseSym& a) : n_(a.size()) {
    const auto& m = a.csr();
    const auto rp = m.row_ptr();
    const auto ci = m.col_index();
    const auto va = m.values();
    first_.resize(n_);
    offset_.resize(n_ + 1, 0);
    for (std::size_t i = 0; i < n_; ++i) {
      std::size_t f = i;
      for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) f = std::min(f, ci[k]);
      first_[i] = f;
      offset_[i + 1] = offset_[i] + (i - f + 1);
    }
    env_.assign(offset_[n_], 0.0);
    double scale = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t k = rp[i]; k < rp[i + 1]; ++k)
        if (ci[k] <= i) {
          at(i, ci[k]) += va[k];
          scale = std::max(scale, std::abs(va[k]));
        }
    if (!std::isfinite(scale)) throw NumericalError("sparse Cholesky: non-finite matrix entry");
    const double floor = 1e-14 * scale;
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t fi = first_[i];
      double* li = &env_[offset_[i]] - fi;  // li[j] = L(i, j) for j in [fi, i]
      for (std::size_t j = fi; j < i; ++j) {
        const std::size_t fj = first_[j];
        const double* lj = &env_[offset_[j]] - fj;
        double s = li[j];
        for (std::size_t k = std::max(fi, fj); k < j; ++k) s -= li[k] * lj[k];
        li[j] = s / lj[j];
      }
      double d = li[i];
      for (std::size_t k = fi; k < i; ++k) d -= li[k] * li[k];
      if (!(d > floor))
        throw NumericalError("sparse Cholesky: non-positive pivot " + std::to_string(d) + " at row " +
                             std::to_string(i) + " (matrix not positive definite)");
      li[i] = std::sqrt(d);
    }
  }

  /// Number of stored factor entries for a matrix, without factoring it.
  static std::size_t envelope_size(const SparseSym& a) {
    const auto rp = a.csr().row_ptr();
    const auto ci = a.csr().col_index();
    std::size_t total = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::size_t f = i;
      for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) f = std::min(f, ci[k]);
      total += i - f + 1;
    }
    return total;
  }

  std::size_t size() const noexcept { return n_; }

  void solve_in_place(std::span<double> x) const {
    assert(x.size() == n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t fi = first_[i];
      const double* li = &env_[offset_[i]] - fi;
      double s = x[i];
      for (std::size_t k = fi; k < i; ++k) s -= li[k] * x[k];
      x[i] = s / li[i];
    }
    for (std::size_t i = n_; i-- > 0;) {
      const std::size_t fi = first_[i];
      const double* li = &env_[offset_[i]] - fi;
      x[i] /= li[i];
      const double xi = x[i];
      for (std::size_t k = fi; k < i; ++k) x[k] -= li[k] * xi;
    }
  }

  Vector solve(std::span<const double> b) const {
    Vector x(b.begin(), b.end());
    solve_in_place(x);
    return x;
  }

private:
  double& at(std::size_t i, std::size_t j) { return env_[offset_[i] + (j - first_[i])]; }

  std::size_t n_ = 0;
  std::vector<std::size_t> first_;
  std::vector<std::size_t> offset_;
  Vector env_;
};

struct IterativeResult {
  Vector x;
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients. Throws NumericalError if the
/// relative residual is still above tol after max_iter iterations.
inline IterativeResult pcg(const SparseSym& a, std::span<const double> b, double tol, std::size_t max_iter = 0) {
  const std::size_t n = a.size();
  if (b.size() != n) throw ConfigError("pcg: dimension mismatch");
  if (max_iter == 0) max_iter = std::max<std::size_t>(100, 10 * n);
  IterativeResult res;
  res.x.assign(n, 0.0);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) return res;
  Vector dinv = a.diagonal();
  for (double& d : dinv) {
    if (!(d > 0.0)) throw NumericalError("pcg: non-positive diagonal entry (matrix not positive definite)");
    d = 1.0 / d;
  }
  Vector r(b.begin(), b.end()), z(n), p(n), q(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
  p = z;
  double rz = dot(r, z);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    a.multiply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) throw NumericalError("pcg: non-positive curvature (matrix not positive definite)");
    const double alpha = rz / pq;
    axpy(alpha, p, res.x);
    axpy(-alpha, q, r);
    res.iterations = it;
    res.relative_residual = norm2(r) / bnorm;
    if (res.relative_residual <= tol) return res;
    for (std::size_t i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw NumericalError("pcg: no convergence after " + std::to_string(max_iter) +
                       " iterations, relative residual " + std::to_string(res.relative_residual));
}

/// Envelope sizes above this go to PCG instead of the direct factorization.
inline constexpr std::size_t kEnvelopeLimit = std::size_t{1} << 23;

/// Solves A x = b for SPD A with ||A x - b|| <= tol ||b||. Direct envelope
/// Cholesky (plus refinement) when the profile is small, PCG otherwise.
inline Vector solve_spd(const SparseSym& a, std::span<const double> b, double tol = 1e-10) {
  if (b.size() != a.size()) throw ConfigError("solve_spd: dimension mismatch");
  if (!(tol > 0.0)) throw ConfigError("solve_spd: tolerance must be positive");
  if (EnvelopeCholesky::envelope_size(a) > kEnvelopeLimit) return pcg(a, b, tol).x;

  const EnvelopeCholesky chol(a);
  Vector x = chol.solve(b);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) return x;
  Vector r(a.size());
  for (int refine = 0; refine < 3; ++refine) {
    a.multiply(x, r);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    const double rel = norm2(r) / bnorm;
    if (rel <= tol) return x;
    chol.solve_in_place(r);
    axpy(1.0, r, x);
  }
  a.multiply(x, r);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
  const double rel = norm2(r) / bnorm;
  if (rel > tol)
    throw NumericalError("solve_spd: residual " + std::to_string(rel) + " above tolerance after refinement");
  return x;
}

// ---------------------------------------------------------------------------
// Symmetric eigenproblems
// ---------------------------------------------------------------------------

struct EigResult {
  Vector values;        ///< ascending
  DenseMatrix vectors;  ///< eigenvectors as columns
  bool s_orthonormal = false;
};

/// Cyclic Jacobi for a dense symmetric matrix. Returns ascending eigenvalues
/// with orthonormal eigenvectors.
inline EigResult eig_sym(DenseMatrix a, int max_sweeps = 60) {
  if (!a.square()) throw ConfigError("eig_sym: matrix is not square");
  const std::size_t n = a.rows();
  DenseMatrix v = DenseMatrix::identity(n);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0, diag = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      diag += a(j, j) * a(j, j);
      for (std::size_t i = 0; i < j; ++i) off += a(i, j) * a(i, j);
    }
    if (off == 0.0 || off <= 1e-32 * diag) break;
    // Skip negligible entries during the first sweeps.
    const double thresh = sweep < 3 ? 0.2 * std::sqrt(off) / static_cast<double>(n * n) : 0.0;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= thresh || apq == 0.0) continue;
        const double app = a(p, p), aqq = a(q, q);
        const double g = 100.0 * std::abs(apq);
        if (sweep > 3 && std::abs(app) + g == std::abs(app) && std::abs(aqq) + g == std::abs(aqq)) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        // Only the upper triangle is kept current.
        auto rot = [c, s](double& x, double& y) {
          const double x0 = x, y0 = y;
          x = c * x0 - s * y0;
          y = s * x0 + c * y0;
        };
        for (std::size_t k = 0; k < p; ++k) rot(a(k, p), a(k, q));
        for (std::size_t k = p + 1; k < q; ++k) rot(a(p, k), a(k, q));
        for (std::size_t k = q + 1; k < n; ++k) rot(a(p, k), a(q, k));
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;

        auto vp = v.column(p);
        auto vq = v.column(q);
        for (std::size_t k = 0; k < n; ++k) {
          const double x = vp[k], y = vq[k];
          vp[k] = c * x - s * y;
          vq[k] = s * x + c * y;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
  EigResult res;
  res.values.resize(n);
  res.vectors = DenseMatrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    res.values[k] = a(order[k], order[k]);
    auto src = v.column(order[k]);
    std::copy(src.begin(), src.end(), res.vectors.column(k).begin());
  }
  res.s_orthonormal = true;
  return res;
}

/// Generalized symmetric-definite problem A x = lambda S x. S = L L^T is
/// factored, L^{-1} A L^{-T} diagonalized by Jacobi, and the eigenvectors
/// mapped back so that x^T S x = 1.
inline EigResult eig_gsym(const DenseMatrix& a, const DenseMatrix& s) {
  if (!a.square() || !s.square() || a.rows() != s.rows())
    throw ConfigError("eig_gsym: matrices must be square and of equal size");
  const std::size_t n = a.rows();
  const DenseCholesky chol(s, "generalized eigenproblem mass matrix");

  // W = L^{-1} A L^{-T}: first X = L^{-1} A column by column, then
  // W^T = L^{-1} X^T, using symmetry of A.
  DenseMatrix x = a;
  for (std::size_t j = 0; j < n; ++j) chol.forward_in_place(x.column(j));
  DenseMatrix w = x.transpose();
  for (std::size_t j = 0; j < n; ++j) chol.forward_in_place(w.column(j));
  w.symmetrize();

  EigResult res = eig_sym(std::move(w));
  for (std::size_t j = 0; j < n; ++j) chol.backward_in_place(res.vectors.column(j));
  res.s_orthonormal = true;
  return res;
}

}  // namespace msplit
