#pragma once

/// @file coarse_system.hpp
/// The coarse evolution system C dZ/dt + B Z = f(t) in block form.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msplit/error.hpp"
#include "msplit/linalg.hpp"

namespace msplit {

/// Writes f(t) into `out` (already sized to the system dimension).
using Forcing = std::function<void(double t, std::span<double> out)>;

/// C and B are stored dense in stacked block order Z = (Z_1, ..., Z_p);
/// block q occupies [offsets[q], offsets[q+1]). Compressed copies (exact
/// zeros dropped) are kept for matrix-vector products.
class CoarseSystem {
public:
  CoarseSystem() = default;

  CoarseSystem(DenseMatrix c, DenseMatrix b, std::vector<std::size_t> offsets, Forcing forcing, Vector z0)
      : c_(std::move(c)), b_(std::move(b)), offsets_(std::move(offsets)), forcing_(std::move(forcing)),
        z0_(std::move(z0)) {
    const std::size_t n = c_.rows();
    if (!c_.square() || !b_.square() || b_.rows() != n) throw ConfigError("coarse system: C and B must be square and equal-sized");
    if (offsets_.empty()) offsets_ = {0, n};
    if (offsets_.front() != 0 || offsets_.back() != n)
      throw ConfigError("coarse system: block offsets must start at 0 and end at the dimension");
    for (std::size_t q = 0; q + 1 < offsets_.size(); ++q)
      if (offsets_[q + 1] <= offsets_[q]) throw ConfigError("coarse system: empty or decreasing block");
    if (z0_.empty()) z0_.assign(n, 0.0);
    if (z0_.size() != n) throw ConfigError("coarse system: initial vector has wrong dimension");
    const double tol_c = 1e-12 * std::max(1.0, c_.max_abs());
    const double tol_b = 1e-12 * std::max(1.0, b_.max_abs());
    if (c_.max_asymmetry() > tol_c) throw NumericalError("coarse system: C is not symmetric");
    if (b_.max_asymmetry() > tol_b) throw NumericalError("coarse system: B is not symmetric");
    c_sparse_ = CsrMatrix::from_dense(c_);
    b_sparse_ = CsrMatrix::from_dense(b_);
    block_of_.resize(n);
    for (std::size_t q = 0; q + 1 < offsets_.size(); ++q)
      for (std::size_t i = offsets_[q]; i < offsets_[q + 1]; ++i) block_of_[i] = q;
  }

  std::size_t size() const noexcept { return c_.rows(); }
  std::size_t block_count() const noexcept { return offsets_.size() - 1; }
  std::span<const std::size_t> offsets() const noexcept { return offsets_; }
  std::size_t block_of(std::size_t i) const { return block_of_[i]; }

  const DenseMatrix& mass() const noexcept { return c_; }
  const DenseMatrix& stiffness() const noexcept { return b_; }
  const CsrMatrix& mass_csr() const noexcept { return c_sparse_; }
  const CsrMatrix& stiffness_csr() const noexcept { return b_sparse_; }
  const Vector& initial() const noexcept { return z0_; }
  bool has_forcing() const noexcept { return static_cast<bool>(forcing_); }

  void rhs(double t, std::span<double> out) const {
    if (forcing_)
      forcing_(t, out);
    else
      std::fill(out.begin(), out.end(), 0.0);
  }
  Vector rhs(double t) const {
    Vector f(size());
    rhs(t, f);
    return f;
  }

private:
  DenseMatrix c_, b_;
  std::vector<std::size_t> offsets_;
  Forcing forcing_;
  Vector z0_;
  CsrMatrix c_sparse_, b_sparse_;
  std::vector<std::size_t> block_of_;
};

}  // namespace msplit
