#pragma once

/// @file gmsfem.hpp
/// Offline multiscale stage: harmonic-extension snapshots per coarse
/// neighbourhood, local spectral problems, partition-of-unity basis with
/// energy orthonormalization, the prolongation R_off split into eigen-rank
/// blocks, and projection of the fine system onto the coarse space.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "msplit/coarse_system.hpp"
#include "msplit/error.hpp"
#include "msplit/fine_assembly.hpp"
#include "msplit/grid.hpp"
#include "msplit/linalg.hpp"
#include "msplit/parallel.hpp"

namespace msplit {

// ---------------------------------------------------------------------------
// Local matrices on a neighbourhood box
// ---------------------------------------------------------------------------

namespace detail {

/// Q1 assembly over the fine cells of the box, unconstrained, local box
/// numbering. `cell_coeff` is indexed by global fine-cell id.
inline SparseSym assemble_box(const GridPair& g, const Neighborhood& nb, std::span<const double> cell_coeff,
                              bool stiffness) {
  const Q1Element el(g.hx(), g.hy());
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(nb.box_nx() * nb.box_ny()) * 16);
  for (int fy = nb.iy0; fy < nb.iy1; ++fy)
    for (int fx = nb.ix0; fx < nb.ix1; ++fx) {
      const double k = cell_coeff[static_cast<std::size_t>(g.fine_cell(fx, fy))];
      const int loc[4] = {nb.local(fx, fy), nb.local(fx + 1, fy), nb.local(fx, fy + 1), nb.local(fx + 1, fy + 1)};
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          t.push_back({static_cast<std::size_t>(loc[a]), static_cast<std::size_t>(loc[b]),
                       k * (stiffness ? el.stiffness[a][b] : el.mass[a][b])});
    }
  return SparseSym::from_triplets(nb.box_node_count(), std::move(t));
}

/// Y = A * X for sparse A and dense X.
inline DenseMatrix multiply(const SparseSym& a, const DenseMatrix& x) {
  DenseMatrix y(a.size(), x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) a.multiply(x.column(j), y.column(j));
  return y;
}

/// X^T Y
inline DenseMatrix gram(const DenseMatrix& x, const DenseMatrix& y) {
  DenseMatrix r(x.cols(), y.cols());
  for (std::size_t j = 0; j < y.cols(); ++j)
    for (std::size_t i = 0; i < x.cols(); ++i) r(i, j) = dot(x.column(i), y.column(j));
  return r;
}

/// X^T A X for symmetric A given Y = A X; upper triangle computed, then mirrored.
inline DenseMatrix gram_sym(const DenseMatrix& x, const DenseMatrix& y) {
  DenseMatrix r(x.cols(), y.cols());
  for (std::size_t j = 0; j < y.cols(); ++j)
    for (std::size_t i = 0; i <= j; ++i) {
      const double v = dot(x.column(i), y.column(j));
      r(i, j) = v;
      r(j, i) = v;
    }
  return r;
}

}  // namespace detail

inline SparseSym local_stiffness(const GridPair& g, std::span<const double> kappa, const Neighborhood& nb) {
  return detail::assemble_box(g, nb, kappa, true);
}

inline SparseSym local_weighted_mass(const GridPair& g, std::span<const double> weight, const Neighborhood& nb) {
  return detail::assemble_box(g, nb, weight, false);
}

/// kappa_tilde = H^2 sum_j kappa |grad chi_j|^2 at every fine-cell centre,
/// H the coarse cell side.
inline Vector kappa_tilde(const GridPair& g, std::span<const double> kappa) {
  const double H = std::max(g.coarse_hx(), g.coarse_hy());
  const int r = g.refinement();
  Vector kt(g.fine_cell_count());
  for (int fy = 0; fy < g.fine_ny(); ++fy)
    for (int fx = 0; fx < g.fine_nx(); ++fx) {
      const double x = (fx + 0.5) * g.hx(), y = (fy + 0.5) * g.hy();
      const int cx = fx / r, cy = fy / r;
      double s = 0.0;
      for (int dj = 0; dj <= 1; ++dj)
        for (int di = 0; di <= 1; ++di) {
          const auto [gx, gy] = coarse_hat_gradient(g, g.coarse_node(cx + di, cy + dj), x, y);
          s += gx * gx + gy * gy;
        }
      const auto c = static_cast<std::size_t>(g.fine_cell(fx, fy));
      kt[c] = H * H * kappa[c] * s;
    }
  return kt;
}

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

/// Column l is the snapshot for the l-th boundary node of the neighbourhood,
/// stored over the closed box in local row-major order.
struct SnapshotSpace {
  Neighborhood nb;
  DenseMatrix values;
};

namespace detail {

/// Dirichlet solver for the interior fine nodes of one coarse cell, with the
/// coupling to the cell-boundary nodes kept for right-hand sides.
class CellDirichletSolver {
public:
  CellDirichletSolver(const GridPair& g, std::span<const double> kappa, int cx, int cy)
      : r_(g.refinement()), x0_(cx * g.refinement()), y0_(cy * g.refinement()) {
    if (r_ < 2) return;
    const Q1Element el(g.hx(), g.hy());
    const int m = r_ - 1;
    std::vector<Triplet> t;
    for (int fy = y0_; fy < y0_ + r_; ++fy)
      for (int fx = x0_; fx < x0_ + r_; ++fx) {
        const double k = kappa[static_cast<std::size_t>(g.fine_cell(fx, fy))];
        const int xs[4] = {fx, fx + 1, fx, fx + 1};
        const int ys[4] = {fy, fy, fy + 1, fy + 1};
        for (int a = 0; a < 4; ++a) {
          const int ia = interior_local(xs[a], ys[a]);
          if (ia < 0) continue;
          for (int b = 0; b < 4; ++b) {
            const double v = k * el.stiffness[a][b];
            const int ib = interior_local(xs[b], ys[b]);
            if (ib >= 0)
              t.push_back({static_cast<std::size_t>(ia), static_cast<std::size_t>(ib), v});
            else
              coupling_.push_back({ia, cell_local(xs[b], ys[b]), v});
          }
        }
      }
    try {
      chol_.emplace(SparseSym::from_triplets(static_cast<std::size_t>(m * m), std::move(t)));
    } catch (const NumericalError& e) {
      throw NumericalError("local Dirichlet system singular in coarse cell (" + std::to_string(cx) + ", " +
                           std::to_string(cy) + "): " + e.what());
    }
  }

  int x0() const noexcept { return x0_; }
  int y0() const noexcept { return y0_; }
  int r() const noexcept { return r_; }
  /// Index within the closed (r+1)^2 cell box.
  int cell_local(int ix, int iy) const noexcept { return (iy - y0_) * (r_ + 1) + (ix - x0_); }
  int interior_local(int ix, int iy) const noexcept {
    if (ix <= x0_ || ix >= x0_ + r_ || iy <= y0_ || iy >= y0_ + r_) return -1;
    return (iy - y0_ - 1) * (r_ - 1) + (ix - x0_ - 1);
  }

  /// Given values on the closed cell box (only boundary entries read), returns
  /// the discrete harmonic interior values in interior_local order.
  Vector solve(std::span<const double> cell_values) const {
    if (r_ < 2) return {};
    Vector rhs(static_cast<std::size_t>((r_ - 1) * (r_ - 1)), 0.0);
    for (const auto& c : coupling_) rhs[static_cast<std::size_t>(c.i)] -= c.v * cell_values[static_cast<std::size_t>(c.b)];
    chol_->solve_in_place(rhs);
    return rhs;
  }

private:
  struct Coupling {
    int i;
    int b;
    double v;
  };
  int r_, x0_, y0_;
  std::vector<Coupling> coupling_;
  std::optional<EnvelopeCholesky> chol_;
};

}  // namespace detail

inline SnapshotSpace build_snapshots(const GridPair& g, std::span<const double> kappa, const Neighborhood& nb) {
  const int r = g.refinement();
  const int L = static_cast<int>(nb.boundary_count());
  const int xi = g.coarse_I(nb.node) * r, yi = g.coarse_J(nb.node) * r;

  SnapshotSpace snap{nb, DenseMatrix(nb.box_node_count(), static_cast<std::size_t>(L))};

  std::vector<detail::CellDirichletSolver> solvers;
  solvers.reserve(nb.cells.size());
  for (int c : nb.cells) solvers.emplace_back(g, kappa, c % g.coarse_nx(), c / g.coarse_nx());

  // Coarse nodes joined to x_i by an interior coarse edge.
  std::vector<std::pair<int, int>> adjacent;
  const bool center_inside = !nb.on_boundary(xi, yi);
  if (center_inside)
    for (auto [dx, dy] : {std::pair{-r, 0}, {r, 0}, {0, -r}, {0, r}})
      if (nb.on_boundary(xi + dx, yi + dy)) adjacent.emplace_back(xi + dx, yi + dy);

  std::vector<double> cell_values;
  for (int l = 0; l < L; ++l) {
    const int bnode = nb.boundary_nodes[static_cast<std::size_t>(l)];
    const int bx = g.fine_ix(bnode), by = g.fine_iy(bnode);
    auto delta = [&](int ix, int iy) { return (ix == bx && iy == by) ? 1.0 : 0.0; };

    double center = 0.0;
    if (center_inside) {
      for (auto [ax, ay] : adjacent) center += delta(ax, ay);
      center /= static_cast<double>(adjacent.size());
    } else {
      center = delta(xi, yi);
    }

    // Boundary data: delta on the neighbourhood boundary, linear along the
    // interior coarse edges (which all emanate from x_i).
    auto boundary_value = [&](int ix, int iy) {
      if (nb.on_boundary(ix, iy)) return delta(ix, iy);
      if (ix == xi && iy == yi) return center;
      if (ix == xi) {
        const int ey = iy > yi ? yi + r : yi - r;
        const double t = static_cast<double>(std::abs(iy - yi)) / r;
        return (1.0 - t) * center + t * delta(xi, ey);
      }
      const int ex = ix > xi ? xi + r : xi - r;
      const double t = static_cast<double>(std::abs(ix - xi)) / r;
      return (1.0 - t) * center + t * delta(ex, yi);
    };

    auto col = snap.values.column(static_cast<std::size_t>(l));
    for (const auto& s : solvers) {
      const int x0 = s.x0(), y0 = s.y0();
      cell_values.assign(static_cast<std::size_t>((r + 1) * (r + 1)), 0.0);
      bool any = false;
      for (int iy = y0; iy <= y0 + r; ++iy)
        for (int ix = x0; ix <= x0 + r; ++ix) {
          if (ix != x0 && ix != x0 + r && iy != y0 && iy != y0 + r) continue;
          const double v = boundary_value(ix, iy);
          cell_values[static_cast<std::size_t>(s.cell_local(ix, iy))] = v;
          col[static_cast<std::size_t>(nb.local(ix, iy))] = v;
          any = any || v != 0.0;
        }
      if (!any) continue;
      const Vector inner = s.solve(cell_values);
      for (int iy = y0 + 1; iy < y0 + r; ++iy)
        for (int ix = x0 + 1; ix < x0 + r; ++ix)
          col[static_cast<std::size_t>(nb.local(ix, iy))] = inner[static_cast<std::size_t>(s.interior_local(ix, iy))];
    }
  }
  return snap;
}

inline SnapshotSpace build_snapshots(const FineSystem& fs, const Neighborhood& nb) {
  return build_snapshots(fs.grid, fs.kappa, nb);
}

// ---------------------------------------------------------------------------
// Spectral problem
// ---------------------------------------------------------------------------

struct SpectralMatrices {
  DenseMatrix stiffness;  ///< a_i(eta_k, eta_l) = int_omega kappa grad eta_k . grad eta_l
  DenseMatrix mass;       ///< s_i(eta_k, eta_l) = int_omega kappa_tilde eta_k eta_l
};

/// `ktilde` is the per-fine-cell kappa_tilde (see kappa_tilde()).
inline SpectralMatrices spectral_matrices(const GridPair& g, std::span<const double> kappa,
                                          std::span<const double> ktilde, const SnapshotSpace& snap) {
  const SparseSym a = local_stiffness(g, kappa, snap.nb);
  const SparseSym s = local_weighted_mass(g, ktilde, snap.nb);
  SpectralMatrices sm{detail::gram_sym(snap.values, detail::multiply(a, snap.values)),
                      detail::gram_sym(snap.values, detail::multiply(s, snap.values))};
  if (!cholesky_check(sm.mass))
    throw NumericalError("spectral mass matrix is not positive definite in neighborhood of coarse node " +
                         std::to_string(snap.nb.node) + " (degenerate snapshot set)");
  return sm;
}

// ---------------------------------------------------------------------------
// Offline basis
// ---------------------------------------------------------------------------

/// Basis functions psi_j = chi_i * phi_j of one neighbourhood, over the
/// closed box (local row-major), energy-orthonormalized when requested.
struct LocalBasis {
  Neighborhood nb;
  Vector eigenvalues;  ///< the kept eigenvalues, ascending
  DenseMatrix psi;     ///< box nodes x ell
};

struct OfflineBasis {
  int ell = 0;
  bool orthonormalized = true;
  std::vector<LocalBasis> locals;  ///< in GridPair::interior_coarse_nodes() order

  std::size_t dof_count() const noexcept { return locals.size() * static_cast<std::size_t>(ell); }
};

struct OfflineOptions {
  int ell = 6;
  bool orthonormalize = true;
  unsigned threads = 1;
};

namespace detail {

/// Modified Gram-Schmidt of the columns of `v` in the inner product x^T A y.
inline void energy_gram_schmidt(const SparseSym& a, DenseMatrix& v, int node) {
  Vector av(v.rows());
  for (std::size_t j = 0; j < v.cols(); ++j) {
    auto vj = v.column(j);
    a.multiply(vj, av);
    const double initial = dot(vj, av);
    for (std::size_t k = 0; k < j; ++k) {
      auto vk = v.column(k);
      const double proj = dot(vk, av);  // a(v_j, q_k)
      axpy(-proj, vk, vj);
      a.multiply(vj, av);
    }
    const double nrm2 = dot(vj, av);
    if (!(nrm2 > 1e-20 * initial) || !(nrm2 > 0.0))
      throw NumericalError("energy orthonormalization broke down at basis " + std::to_string(j) +
                           " of coarse node " + std::to_string(node) + " (near-dependent basis)");
    const double inv = 1.0 / std::sqrt(nrm2);
    for (double& x : vj) x *= inv;
  }
}

}  // namespace detail

inline LocalBasis build_local_basis(const GridPair& g, std::span<const double> kappa, std::span<const double> ktilde,
                                    int node, int ell, bool orthonormalize) {
  const Neighborhood nb = neighborhood(g, node);
  const SnapshotSpace snap = build_snapshots(g, kappa, nb);
  if (ell < 1 || static_cast<std::size_t>(ell) > nb.boundary_count())
    throw ConfigError("ell = " + std::to_string(ell) + " must lie in [1, " + std::to_string(nb.boundary_count()) +
                      "] for coarse node " + std::to_string(node));
  const SpectralMatrices sm = spectral_matrices(g, kappa, ktilde, snap);
  EigResult eig;
  try {
    eig = eig_gsym(sm.stiffness, sm.mass);
  } catch (const NumericalError& e) {
    throw NumericalError("eigensolver failed in neighborhood of coarse node " + std::to_string(node) + ": " + e.what());
  }

  LocalBasis lb;
  lb.nb = nb;
  lb.eigenvalues.assign(eig.values.begin(), eig.values.begin() + ell);
  lb.psi = DenseMatrix(nb.box_node_count(), static_cast<std::size_t>(ell));
  for (int j = 0; j < ell; ++j) {
    auto out = lb.psi.column(static_cast<std::size_t>(j));
    snap.values.multiply(eig.vectors.column(static_cast<std::size_t>(j)), out);
    for (int iy = nb.iy0; iy <= nb.iy1; ++iy)
      for (int ix = nb.ix0; ix <= nb.ix1; ++ix)
        out[static_cast<std::size_t>(nb.local(ix, iy))] *= coarse_hat_at_node(g, node, ix, iy);
  }
  if (orthonormalize) detail::energy_gram_schmidt(local_stiffness(g, kappa, nb), lb.psi, node);
  return lb;
}

inline OfflineBasis build_offline(const GridPair& g, std::span<const double> kappa, const OfflineOptions& opt) {
  const auto& nodes = g.interior_coarse_nodes();
  if (nodes.empty()) throw ConfigError("coarse grid has no interior nodes; at least 2x2 coarse cells are required");
  const Vector ktilde = kappa_tilde(g, kappa);
  OfflineBasis basis;
  basis.ell = opt.ell;
  basis.orthonormalized = opt.orthonormalize;
  basis.locals.resize(nodes.size());
  parallel_for(nodes.size(), opt.threads, [&](std::size_t k) {
    basis.locals[k] = build_local_basis(g, kappa, ktilde, nodes[k], opt.ell, opt.orthonormalize);
  });
  return basis;
}

inline OfflineBasis build_offline(const FineSystem& fs, const OfflineOptions& opt) {
  return build_offline(fs.grid, fs.kappa, opt);
}

// ---------------------------------------------------------------------------
// Prolongation
// ---------------------------------------------------------------------------

struct ColumnInfo {
  int coarse_node = -1;
  int rank = 0;                  ///< 0-based eigen-rank within the neighbourhood
  std::size_t neighborhood = 0;  ///< index into OfflineBasis::locals
};

/// Basis vector over interior fine unknowns, sorted row indices.
struct SparseColumn {
  std::vector<std::size_t> rows;
  Vector values;
};

/// R_off with its columns regrouped into eigen-rank blocks R_1, ..., R_p.
/// Natural column order is (neighbourhood, rank); stacked order lists block 1
/// (ranks [0, l1)) for every neighbourhood, then block 2, and so on.
class Prolongation {
public:
  Prolongation() = default;

  Prolongation(const GridPair& g, const OfflineBasis& basis, std::vector<int> blocks)
      : fine_size_(g.interior_nodes().size()), blocks_(std::move(blocks)) {
    if (blocks_.empty()) blocks_ = {basis.ell};
    int total = 0;
    for (int b : blocks_) {
      if (b < 1) throw ConfigError("block sizes must be positive");
      total += b;
    }
    if (total != basis.ell)
      throw ConfigError("block sizes sum to " + std::to_string(total) + " but ell = " + std::to_string(basis.ell));

    const std::size_t nn = basis.locals.size();
    const auto ell = static_cast<std::size_t>(basis.ell);
    natural_to_stacked_.assign(nn * ell, 0);
    offsets_.push_back(0);
    int rank0 = 0;
    for (int b : blocks_) {
      for (std::size_t k = 0; k < nn; ++k)
        for (int rnk = rank0; rnk < rank0 + b; ++rnk) {
          natural_to_stacked_[k * ell + static_cast<std::size_t>(rnk)] = columns_.size();
          columns_.push_back(extract(g, basis.locals[k], rnk));
          info_.push_back({basis.locals[k].nb.node, rnk, k});
        }
      offsets_.push_back(columns_.size());
      rank0 += b;
    }
  }

  std::size_t fine_size() const noexcept { return fine_size_; }
  std::size_t size() const noexcept { return columns_.size(); }
  std::size_t block_count() const noexcept { return blocks_.size(); }
  const std::vector<int>& block_sizes() const noexcept { return blocks_; }
  std::span<const std::size_t> offsets() const noexcept { return offsets_; }
  const std::vector<SparseColumn>& columns() const noexcept { return columns_; }
  const std::vector<ColumnInfo>& info() const noexcept { return info_; }
  /// Stacked position of natural column k * ell + rank.
  const std::vector<std::size_t>& natural_to_stacked() const noexcept { return natural_to_stacked_; }

  /// sum_q R_q Z_q for stacked coefficients.
  Vector apply(std::span<const double> z) const {
    if (z.size() != size()) throw ConfigError("prolongation: coefficient vector has wrong dimension");
    Vector u(fine_size_, 0.0);
    for (std::size_t s = 0; s < columns_.size(); ++s) {
      if (z[s] == 0.0) continue;
      const auto& c = columns_[s];
      for (std::size_t k = 0; k < c.rows.size(); ++k) u[c.rows[k]] += c.values[k] * z[s];
    }
    return u;
  }

  /// R_q Z_q for a single block.
  Vector apply_block(std::size_t q, std::span<const double> zq) const {
    if (q >= block_count() || zq.size() != offsets_[q + 1] - offsets_[q])
      throw ConfigError("prolongation: block coefficient vector has wrong dimension");
    Vector u(fine_size_, 0.0);
    for (std::size_t j = 0; j < zq.size(); ++j) {
      const auto& c = columns_[offsets_[q] + j];
      for (std::size_t k = 0; k < c.rows.size(); ++k) u[c.rows[k]] += c.values[k] * zq[j];
    }
    return u;
  }

  /// Stacked R^T v.
  Vector apply_transpose(std::span<const double> v) const {
    if (v.size() != fine_size_) throw ConfigError("prolongation: fine vector has wrong dimension");
    Vector z(size());
    for (std::size_t s = 0; s < columns_.size(); ++s) {
      const auto& c = columns_[s];
      double acc = 0.0;
      for (std::size_t k = 0; k < c.rows.size(); ++k) acc += c.values[k] * v[c.rows[k]];
      z[s] = acc;
    }
    return z;
  }

  /// Dense R_off in natural column order.
  DenseMatrix dense_natural() const {
    DenseMatrix r(fine_size_, size());
    for (std::size_t nat = 0; nat < natural_to_stacked_.size(); ++nat) {
      const auto& c = columns_[natural_to_stacked_[nat]];
      for (std::size_t k = 0; k < c.rows.size(); ++k) r(c.rows[k], nat) = c.values[k];
    }
    return r;
  }

  /// Dense R_q.
  DenseMatrix dense_block(std::size_t q) const {
    DenseMatrix r(fine_size_, offsets_[q + 1] - offsets_[q]);
    for (std::size_t j = 0; j < r.cols(); ++j) {
      const auto& c = columns_[offsets_[q] + j];
      for (std::size_t k = 0; k < c.rows.size(); ++k) r(c.rows[k], j) = c.values[k];
    }
    return r;
  }

private:
  static SparseColumn extract(const GridPair& g, const LocalBasis& lb, int rank) {
    SparseColumn col;
    const auto psi = lb.psi.column(static_cast<std::size_t>(rank));
    const auto& nb = lb.nb;
    std::vector<std::pair<std::size_t, double>> entries;
    for (int iy = nb.iy0; iy <= nb.iy1; ++iy)
      for (int ix = nb.ix0; ix <= nb.ix1; ++ix) {
        const double v = psi[static_cast<std::size_t>(nb.local(ix, iy))];
        const int d = g.interior_index(g.fine_node(ix, iy));
        if (d < 0 || v == 0.0) continue;
        entries.emplace_back(static_cast<std::size_t>(d), v);
      }
    std::sort(entries.begin(), entries.end());
    for (auto [r, v] : entries) {
      col.rows.push_back(r);
      col.values.push_back(v);
    }
    return col;
  }

  std::size_t fine_size_ = 0;
  std::vector<int> blocks_;
  std::vector<SparseColumn> columns_;
  std::vector<ColumnInfo> info_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> natural_to_stacked_;
};

inline Prolongation assemble_prolongation(const GridPair& g, const OfflineBasis& basis, std::vector<int> blocks) {
  return Prolongation(g, basis, std::move(blocks));
}

// ---------------------------------------------------------------------------
// Coarse projection
// ---------------------------------------------------------------------------

/// Source F(t, x) = time_factor(t) * spatial(x); an empty time factor means 1.
struct SourceTerm {
  SpaceFunction spatial;
  std::function<double(double)> time_factor;

  double operator()(double t, double x, double y) const {
    return (time_factor ? time_factor(t) : 1.0) * (spatial ? spatial(x, y) : 0.0);
  }
};

namespace detail {

/// G = R^T A R in stacked order, exploiting neighbourhood overlap; exactly symmetric.
inline DenseMatrix galerkin(const GridPair& g, const SparseSym& a, const Prolongation& p) {
  const std::size_t n = p.size();
  DenseMatrix out(n, n);
  const auto& cols = p.columns();
  const auto& info = p.info();
  std::map<int, std::vector<std::size_t>> by_node;
  for (std::size_t s = 0; s < n; ++s) by_node[info[s].coarse_node].push_back(s);

  const auto rp = a.csr().row_ptr();
  const auto ci = a.csr().col_index();
  const auto va = a.csr().values();
  Vector y(p.fine_size(), 0.0);
  std::vector<std::size_t> touched;
  for (std::size_t s = 0; s < n; ++s) {
    const auto& cs = cols[s];
    touched.clear();
    for (std::size_t k = 0; k < cs.rows.size(); ++k) {
      const std::size_t row = cs.rows[k];
      const double v = cs.values[k];
      for (std::size_t e = rp[row]; e < rp[row + 1]; ++e) {
        if (y[ci[e]] == 0.0) touched.push_back(ci[e]);
        y[ci[e]] += va[e] * v;
      }
    }
    const int I = g.coarse_I(info[s].coarse_node), J = g.coarse_J(info[s].coarse_node);
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        const int ni = I + di, nj = J + dj;
        if (ni < 0 || nj < 0 || ni > g.coarse_nx() || nj > g.coarse_ny()) continue;
        const auto it = by_node.find(g.coarse_node(ni, nj));
        if (it == by_node.end()) continue;
        for (std::size_t t : it->second) {
          if (t < s) continue;
          const auto& ct = cols[t];
          double acc = 0.0;
          for (std::size_t k = 0; k < ct.rows.size(); ++k) acc += ct.values[k] * y[ct.rows[k]];
          out(s, t) = acc;
          out(t, s) = acc;
        }
      }
    for (std::size_t r : touched) y[r] = 0.0;
  }
  return out;
}

}  // namespace detail

/// C = R^T M_h R, B = R^T A_h R (stacked block order), f(t) = R^T F_h(t),
/// and Z0 the coefficients of the L2 projection of u0: C Z0 = R^T M_h (Pi u0).
inline CoarseSystem project_coarse(const FineSystem& fs, const Prolongation& p, const SourceTerm& source,
                                   const SpaceFunction& initial) {
  const GridPair& g = fs.grid;
  DenseMatrix c = detail::galerkin(g, fs.mass, p);
  DenseMatrix b = detail::galerkin(g, fs.stiffness, p);

  std::optional<DenseCholesky> chol_c;
  try {
    chol_c.emplace(c, "coarse mass matrix C");
    DenseCholesky check_b(b, "coarse stiffness matrix B");
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(e.what()) + "; the multiscale basis is nearly linearly dependent");
  }

  Vector z0(p.size(), 0.0);
  if (initial) {
    const Vector u0 = interpolate(g, initial);
    z0 = chol_c->solve(p.apply_transpose(fs.mass * u0));
  }

  Forcing forcing;
  if (source.spatial) {
    const Vector fh = load(g, [&](double, double x, double y) { return source.spatial(x, y); }, 0.0);
    Vector coarse = p.apply_transpose(fh);
    forcing = [coarse = std::move(coarse), tf = source.time_factor](double t, std::span<double> out) {
      const double s = tf ? tf(t) : 1.0;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * coarse[i];
    };
  }
  std::vector<std::size_t> offsets(p.offsets().begin(), p.offsets().end());
  return CoarseSystem(std::move(c), std::move(b), std::move(offsets), std::move(forcing), std::move(z0));
}

// ---------------------------------------------------------------------------
// Basis dump
// ---------------------------------------------------------------------------

/// Plain-text basis dump:
///
///   msplit-basis 1
///   grid <nx_c> <ny_c> <r> ell <ell> orthonormalized <0|1> columns <N_c>
///   column <natural index> node <coarse node> rank <rank> eigenvalue <lambda> nnz <k>
///   <fine node id> <value>     (k lines, ascending fine node id)
///   ...
///
/// Columns appear in natural order (neighbourhood-major, rank-minor); values
/// are written with 17 significant digits and read back exactly.
inline void write_basis(std::ostream& out, const GridPair& g, const OfflineBasis& basis) {
  out << "msplit-basis 1\n";
  out << "grid " << g.coarse_nx() << ' ' << g.coarse_ny() << ' ' << g.refinement() << " ell " << basis.ell
      << " orthonormalized " << (basis.orthonormalized ? 1 : 0) << " columns " << basis.dof_count() << '\n';
  out << std::setprecision(17);
  std::size_t idx = 0;
  for (const auto& lb : basis.locals) {
    const auto& nb = lb.nb;
    for (int rank = 0; rank < basis.ell; ++rank, ++idx) {
      const auto psi = lb.psi.column(static_cast<std::size_t>(rank));
      std::vector<std::pair<int, double>> entries;
      for (int iy = nb.iy0; iy <= nb.iy1; ++iy)
        for (int ix = nb.ix0; ix <= nb.ix1; ++ix) {
          const double v = psi[static_cast<std::size_t>(nb.local(ix, iy))];
          if (v != 0.0) entries.emplace_back(g.fine_node(ix, iy), v);
        }
      out << "column " << idx << " node " << nb.node << " rank " << rank << " eigenvalue "
          << lb.eigenvalues[static_cast<std::size_t>(rank)] << " nnz " << entries.size() << '\n';
      for (auto [node, v] : entries) out << node << ' ' << v << '\n';
    }
  }
}

inline OfflineBasis read_basis(std::istream& in, const GridPair& g) {
  auto fail = [](const std::string& what) -> ConfigError { return ConfigError("basis file: " + what); };
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "msplit-basis" || version != 1) throw fail("bad header");
  std::string kw_grid, kw_ell, kw_orth, kw_cols;
  int nx = 0, ny = 0, r = 0, ell = 0, orth = 0;
  std::size_t ncols = 0;
  if (!(in >> kw_grid >> nx >> ny >> r >> kw_ell >> ell >> kw_orth >> orth >> kw_cols >> ncols) || kw_grid != "grid" ||
      kw_ell != "ell" || kw_orth != "orthonormalized" || kw_cols != "columns")
    throw fail("bad grid line");
  if (nx != g.coarse_nx() || ny != g.coarse_ny() || r != g.refinement())
    throw fail("grid does not match the configured grid");
  const auto& nodes = g.interior_coarse_nodes();
  if (ell < 1 || ncols != nodes.size() * static_cast<std::size_t>(ell)) throw fail("column count mismatch");

  OfflineBasis basis;
  basis.ell = ell;
  basis.orthonormalized = orth != 0;
  basis.locals.resize(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    auto& lb = basis.locals[k];
    lb.nb = neighborhood(g, nodes[k]);
    lb.eigenvalues.assign(static_cast<std::size_t>(ell), 0.0);
    lb.psi = DenseMatrix(lb.nb.box_node_count(), static_cast<std::size_t>(ell));
  }
  for (std::size_t idx = 0; idx < ncols; ++idx) {
    std::string kc, kn, kr, ke, kz;
    std::size_t cidx = 0, nnz = 0;
    int node = 0, rank = 0;
    std::string eig_tok;
    if (!(in >> kc >> cidx >> kn >> node >> kr >> rank >> ke >> eig_tok >> kz >> nnz) || kc != "column" ||
        kn != "node" || kr != "rank" || ke != "eigenvalue" || kz != "nnz" || cidx != idx)
      throw fail("bad column header at column " + std::to_string(idx));
    const std::size_t k = idx / static_cast<std::size_t>(ell);
    auto& lb = basis.locals[k];
    if (node != lb.nb.node || rank != static_cast<int>(idx % static_cast<std::size_t>(ell)))
      throw fail("column " + std::to_string(idx) + " out of natural order");
    lb.eigenvalues[static_cast<std::size_t>(rank)] = std::strtod(eig_tok.c_str(), nullptr);
    auto psi = lb.psi.column(static_cast<std::size_t>(rank));
    for (std::size_t e = 0; e < nnz; ++e) {
      int fnode = 0;
      std::string vtok;
      if (!(in >> fnode >> vtok)) throw fail("truncated column " + std::to_string(idx));
      const int ix = g.fine_ix(fnode), iy = g.fine_iy(fnode);
      if (fnode < 0 || static_cast<std::size_t>(fnode) >= g.fine_node_count() || !lb.nb.contains(ix, iy))
        throw fail("entry outside the neighborhood in column " + std::to_string(idx));
      psi[static_cast<std::size_t>(lb.nb.local(ix, iy))] = std::strtod(vtok.c_str(), nullptr);
    }
  }
  return basis;
}

}  // namespace msplit
