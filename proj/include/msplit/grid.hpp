#pragma once

/// @file grid.hpp
/// Nested structured grids on the unit square, coarse neighbourhoods and the
/// bilinear coarse partition of unity.
///
/// Node ordering (fixed): fine node (ix, iy) has id iy * (nx_c * r + 1) + ix,
/// coarse node (I, J) has id J * (nx_c + 1) + I, coarse cell (cx, cy) has id
/// cy * nx_c + cx, fine cell (fx, fy) has id fy * (nx_c * r) + fx. x runs
/// along rows, y increases with the row index.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "msplit/error.hpp"

namespace msplit {

class GridPair {
public:
  GridPair(int nx_c, int ny_c, int r) : nx_c_(nx_c), ny_c_(ny_c), r_(r) {
    if (nx_c < 1 || ny_c < 1 || r < 1)
      throw ConfigError("grid sizes must be >= 1 (got " + std::to_string(nx_c) + ", " + std::to_string(ny_c) +
                        ", " + std::to_string(r) + ")");
    const std::size_t n = fine_node_count();
    dirichlet_.assign(n, 0);
    interior_index_.assign(n, -1);
    for (int iy = 0; iy <= fine_ny(); ++iy)
      for (int ix = 0; ix <= fine_nx(); ++ix) {
        const auto id = static_cast<std::size_t>(fine_node(ix, iy));
        if (ix == 0 || iy == 0 || ix == fine_nx() || iy == fine_ny()) {
          dirichlet_[id] = 1;
        } else {
          interior_index_[id] = static_cast<int>(interior_nodes_.size());
          interior_nodes_.push_back(static_cast<int>(id));
        }
      }
    for (int J = 1; J < ny_c_; ++J)
      for (int I = 1; I < nx_c_; ++I) interior_coarse_.push_back(coarse_node(I, J));
  }

  int coarse_nx() const noexcept { return nx_c_; }
  int coarse_ny() const noexcept { return ny_c_; }
  int refinement() const noexcept { return r_; }

  /// Fine cells per axis.
  int fine_nx() const noexcept { return nx_c_ * r_; }
  int fine_ny() const noexcept { return ny_c_ * r_; }

  double hx() const noexcept { return 1.0 / fine_nx(); }
  double hy() const noexcept { return 1.0 / fine_ny(); }
  double coarse_hx() const noexcept { return 1.0 / nx_c_; }
  double coarse_hy() const noexcept { return 1.0 / ny_c_; }

  std::size_t fine_node_count() const noexcept {
    return static_cast<std::size_t>(fine_nx() + 1) * static_cast<std::size_t>(fine_ny() + 1);
  }
  std::size_t fine_cell_count() const noexcept {
    return static_cast<std::size_t>(fine_nx()) * static_cast<std::size_t>(fine_ny());
  }
  std::size_t coarse_node_count() const noexcept {
    return static_cast<std::size_t>(nx_c_ + 1) * static_cast<std::size_t>(ny_c_ + 1);
  }
  std::size_t coarse_cell_count() const noexcept {
    return static_cast<std::size_t>(nx_c_) * static_cast<std::size_t>(ny_c_);
  }

  int fine_node(int ix, int iy) const noexcept { return iy * (fine_nx() + 1) + ix; }
  int fine_cell(int fx, int fy) const noexcept { return fy * fine_nx() + fx; }
  int coarse_node(int I, int J) const noexcept { return J * (nx_c_ + 1) + I; }
  int coarse_cell(int cx, int cy) const noexcept { return cy * nx_c_ + cx; }

  int fine_ix(int node) const noexcept { return node % (fine_nx() + 1); }
  int fine_iy(int node) const noexcept { return node / (fine_nx() + 1); }
  int coarse_I(int node) const noexcept { return node % (nx_c_ + 1); }
  int coarse_J(int node) const noexcept { return node / (nx_c_ + 1); }

  double x_of(int ix) const noexcept { return static_cast<double>(ix) / fine_nx(); }
  double y_of(int iy) const noexcept { return static_cast<double>(iy) / fine_ny(); }

  /// Mask over fine nodes, 1 on the boundary of the unit square.
  const std::vector<std::uint8_t>& dirichlet_mask() const noexcept { return dirichlet_; }
  bool is_dirichlet(int node) const { return dirichlet_[static_cast<std::size_t>(node)] != 0; }

  /// Interior (non-Dirichlet) fine nodes in ascending id order; the unknowns
  /// of every fine-scale system.
  const std::vector<int>& interior_nodes() const noexcept { return interior_nodes_; }
  /// Position of a fine node among the interior unknowns, -1 on the boundary.
  int interior_index(int node) const { return interior_index_[static_cast<std::size_t>(node)]; }

  /// Coarse nodes not on the domain boundary; only these carry basis functions.
  const std::vector<int>& interior_coarse_nodes() const noexcept { return interior_coarse_; }

  bool valid_coarse_node(int i) const noexcept { return i >= 0 && static_cast<std::size_t>(i) < coarse_node_count(); }

private:
  int nx_c_, ny_c_, r_;
  std::vector<std::uint8_t> dirichlet_;
  std::vector<int> interior_index_;
  std::vector<int> interior_nodes_;
  std::vector<int> interior_coarse_;
};

inline GridPair build_grids(int nx_c, int ny_c, int r) { return GridPair(nx_c, ny_c, r); }

/// Coarse neighbourhood omega_i: union of coarse cells having x_i as a vertex.
/// It is always an axis-aligned box of fine nodes [ix0, ix1] x [iy0, iy1].
struct Neighborhood {
  int node = -1;
  std::vector<int> cells;           ///< coarse cell ids, ascending
  int ix0 = 0, ix1 = 0, iy0 = 0, iy1 = 0;
  std::vector<int> interior_nodes;  ///< fine nodes strictly inside, ascending id
  /// Fine nodes on the neighbourhood boundary (J_h), counter-clockwise from
  /// the lower-left corner.
  std::vector<int> boundary_nodes;

  std::size_t boundary_count() const noexcept { return boundary_nodes.size(); }
  int box_nx() const noexcept { return ix1 - ix0; }  ///< fine cells along x
  int box_ny() const noexcept { return iy1 - iy0; }
  std::size_t box_node_count() const noexcept {
    return static_cast<std::size_t>(box_nx() + 1) * static_cast<std::size_t>(box_ny() + 1);
  }
  /// Local row-major index of a fine node inside the closed box.
  int local(int ix, int iy) const noexcept { return (iy - iy0) * (box_nx() + 1) + (ix - ix0); }
  bool contains(int ix, int iy) const noexcept { return ix >= ix0 && ix <= ix1 && iy >= iy0 && iy <= iy1; }
  bool on_boundary(int ix, int iy) const noexcept {
    return contains(ix, iy) && (ix == ix0 || ix == ix1 || iy == iy0 || iy == iy1);
  }
};

inline Neighborhood neighborhood(const GridPair& g, int i) {
  if (!g.valid_coarse_node(i)) throw ConfigError("neighborhood: invalid coarse node id " + std::to_string(i));
  const int I = g.coarse_I(i), J = g.coarse_J(i), r = g.refinement();
  const int cx0 = std::max(I - 1, 0), cx1 = std::min(I, g.coarse_nx() - 1);
  const int cy0 = std::max(J - 1, 0), cy1 = std::min(J, g.coarse_ny() - 1);

  Neighborhood nb;
  nb.node = i;
  for (int cy = cy0; cy <= cy1; ++cy)
    for (int cx = cx0; cx <= cx1; ++cx) nb.cells.push_back(g.coarse_cell(cx, cy));
  nb.ix0 = cx0 * r;
  nb.ix1 = (cx1 + 1) * r;
  nb.iy0 = cy0 * r;
  nb.iy1 = (cy1 + 1) * r;

  for (int iy = nb.iy0 + 1; iy < nb.iy1; ++iy)
    for (int ix = nb.ix0 + 1; ix < nb.ix1; ++ix) nb.interior_nodes.push_back(g.fine_node(ix, iy));

  for (int ix = nb.ix0; ix < nb.ix1; ++ix) nb.boundary_nodes.push_back(g.fine_node(ix, nb.iy0));
  for (int iy = nb.iy0; iy < nb.iy1; ++iy) nb.boundary_nodes.push_back(g.fine_node(nb.ix1, iy));
  for (int ix = nb.ix1; ix > nb.ix0; --ix) nb.boundary_nodes.push_back(g.fine_node(ix, nb.iy1));
  for (int iy = nb.iy1; iy > nb.iy0; --iy) nb.boundary_nodes.push_back(g.fine_node(nb.ix0, iy));
  return nb;
}

/// Bilinear coarse hat of coarse node i evaluated at (x, y).
inline double coarse_hat(const GridPair& g, int i, double x, double y) {
  const double xi = g.coarse_I(i) * g.coarse_hx();
  const double yi = g.coarse_J(i) * g.coarse_hy();
  const double wx = 1.0 - std::abs(x - xi) / g.coarse_hx();
  const double wy = 1.0 - std::abs(y - yi) / g.coarse_hy();
  return (wx > 0.0 && wy > 0.0) ? wx * wy : 0.0;
}

/// Gradient of the bilinear coarse hat at a point strictly inside a coarse cell.
inline std::pair<double, double> coarse_hat_gradient(const GridPair& g, int i, double x, double y) {
  const double Hx = g.coarse_hx(), Hy = g.coarse_hy();
  const double dx = x - g.coarse_I(i) * Hx;
  const double dy = y - g.coarse_J(i) * Hy;
  if (std::abs(dx) >= Hx || std::abs(dy) >= Hy) return {0.0, 0.0};
  const double wx = 1.0 - std::abs(dx) / Hx;
  const double wy = 1.0 - std::abs(dy) / Hy;
  const double sx = dx > 0.0 ? -1.0 : 1.0;
  const double sy = dy > 0.0 ? -1.0 : 1.0;
  return {sx / Hx * wy, sy / Hy * wx};
}

/// Coarse hat of node i at fine node (ix, iy), computed from integer offsets
/// so that it is exactly 0 on the neighbourhood boundary and 1 at x_i.
inline double coarse_hat_at_node(const GridPair& g, int i, int ix, int iy) {
  const int r = g.refinement();
  const int dx = std::abs(ix - g.coarse_I(i) * r);
  const int dy = std::abs(iy - g.coarse_J(i) * r);
  if (dx >= r || dy >= r) return 0.0;
  return (static_cast<double>(r - dx) / r) * (static_cast<double>(r - dy) / r);
}

/// chi_i at every fine node (full fine-node vector, zero outside omega_i).
inline std::vector<double> partition_of_unity(const GridPair& g, int i) {
  if (!g.valid_coarse_node(i)) throw ConfigError("partition_of_unity: invalid coarse node id " + std::to_string(i));
  std::vector<double> chi(g.fine_node_count(), 0.0);
  const Neighborhood nb = neighborhood(g, i);
  for (int iy = nb.iy0; iy <= nb.iy1; ++iy)
    for (int ix = nb.ix0; ix <= nb.ix1; ++ix)
      chi[static_cast<std::size_t>(g.fine_node(ix, iy))] = coarse_hat_at_node(g, i, ix, iy);
  return chi;
}

}  // namespace msplit
