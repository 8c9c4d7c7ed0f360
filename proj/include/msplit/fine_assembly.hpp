#pragma once

/// @file fine_assembly.hpp
/// Bilinear (Q1) finite elements on the fine grid: mass, stiffness and load
/// assembly with homogeneous Dirichlet elimination, permeability sampling and
/// fine-grid norms.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "msplit/error.hpp"
#include "msplit/grid.hpp"
#include "msplit/linalg.hpp"

namespace msplit {

using SpaceFunction = std::function<double(double x, double y)>;
using SpaceTimeFunction = std::function<double(double t, double x, double y)>;

// ---------------------------------------------------------------------------
// Raster fields
// ---------------------------------------------------------------------------

/// Plain-text raster: first line "rows cols", then rows*cols reals, row-major,
/// first row at y = 1 (top), first column at x = 0.
struct RasterField {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vector values;

  double at(std::size_t row, std::size_t col) const { return values[row * cols + col]; }
};

inline RasterField parse_raster(std::istream& in, const std::string& name = "raster") {
  RasterField f;
  std::string header;
  if (!std::getline(in, header)) throw ConfigError(name + ": empty file");
  std::istringstream hs(header);
  long long rows = 0, cols = 0;
  std::string extra;
  if (!(hs >> rows >> cols) || (hs >> extra) || rows <= 0 || cols <= 0)
    throw ConfigError(name + ": first line must be \"rows cols\" with positive integers");
  f.rows = static_cast<std::size_t>(rows);
  f.cols = static_cast<std::size_t>(cols);
  f.values.reserve(f.rows * f.cols);
  std::string tok;
  while (in >> tok) {
    const char* s = tok.c_str();
    char* end = nullptr;
    const double v = std::strtod(s, &end);
    if (end == s || *end != '\0') throw ConfigError(name + ": malformed number '" + tok + "'");
    f.values.push_back(v);
  }
  if (f.values.size() != f.rows * f.cols)
    throw ConfigError(name + ": expected " + std::to_string(f.rows * f.cols) + " values, found " +
                      std::to_string(f.values.size()));
  return f;
}

inline RasterField read_raster(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open raster file '" + path + "'");
  return parse_raster(in, path);
}

/// Writes with 17 significant digits so that parse_raster round-trips exactly.
inline void write_raster(std::ostream& out, const RasterField& f) {
  out << f.rows << ' ' << f.cols << '\n';
  out << std::setprecision(17);
  for (std::size_t r = 0; r < f.rows; ++r) {
    for (std::size_t c = 0; c < f.cols; ++c) {
      if (c) out << ' ';
      out << f.at(r, c);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Permeability
// ---------------------------------------------------------------------------

class Permeability {
public:
  enum class Kind { Analytic, Raster };

  static Permeability analytic(SpaceFunction f) { return Permeability(Kind::Analytic, std::move(f)); }
  static Permeability constant(double v) {
    return analytic([v](double, double) { return v; });
  }
  /// Nearest-neighbour lookup when the raster resolution differs from the fine grid.
  static Permeability raster(RasterField field) {
    auto shared = std::make_shared<const RasterField>(std::move(field));
    return Permeability(Kind::Raster, [shared](double x, double y) {
      const auto& f = *shared;
      auto col = static_cast<long long>(std::floor(x * static_cast<double>(f.cols)));
      auto row = static_cast<long long>(std::floor((1.0 - y) * static_cast<double>(f.rows)));
      col = std::clamp<long long>(col, 0, static_cast<long long>(f.cols) - 1);
      row = std::clamp<long long>(row, 0, static_cast<long long>(f.rows) - 1);
      return f.at(static_cast<std::size_t>(row), static_cast<std::size_t>(col));
    });
  }

  Kind kind() const noexcept { return kind_; }
  double operator()(double x, double y) const { return eval_(x, y); }

private:
  Permeability(Kind k, SpaceFunction f) : kind_(k), eval_(std::move(f)) {}
  Kind kind_;
  SpaceFunction eval_;
};

/// kappa at every fine-cell centre (fine-cell id order). Rejects non-positive
/// or non-finite values, naming the offending cell.
inline Vector sample_cells(const GridPair& g, const Permeability& kappa) {
  Vector k(g.fine_cell_count());
  for (int fy = 0; fy < g.fine_ny(); ++fy)
    for (int fx = 0; fx < g.fine_nx(); ++fx) {
      const double x = (fx + 0.5) * g.hx(), y = (fy + 0.5) * g.hy();
      const double v = kappa(x, y);
      if (!(v > 0.0) || !std::isfinite(v)) {
        std::ostringstream msg;
        msg << "permeability must be positive: fine cell (" << fx << ", " << fy << ") at (" << x << ", " << y
            << ") has kappa = " << v;
        throw ConfigError(msg.str());
      }
      k[static_cast<std::size_t>(g.fine_cell(fx, fy))] = v;
    }
  return k;
}

// ---------------------------------------------------------------------------
// Q1 element matrices
// ---------------------------------------------------------------------------

/// Element matrices on an hx x hy rectangle; local node order
/// (0,0), (1,0), (0,1), (1,1).
struct Q1Element {
  std::array<std::array<double, 4>, 4> stiffness{};  ///< unit coefficient
  std::array<std::array<double, 4>, 4> mass{};

  Q1Element(double hx, double hy) {
    // Tensor products of the 1D linear-element matrices.
    const double kx[2][2] = {{1.0 / hx, -1.0 / hx}, {-1.0 / hx, 1.0 / hx}};
    const double ky[2][2] = {{1.0 / hy, -1.0 / hy}, {-1.0 / hy, 1.0 / hy}};
    const double mx[2][2] = {{hx / 3.0, hx / 6.0}, {hx / 6.0, hx / 3.0}};
    const double my[2][2] = {{hy / 3.0, hy / 6.0}, {hy / 6.0, hy / 3.0}};
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        const int ax = a % 2, ay = a / 2, bx = b % 2, by = b / 2;
        stiffness[a][b] = kx[ax][bx] * my[ay][by] + mx[ax][bx] * ky[ay][by];
        mass[a][b] = mx[ax][bx] * my[ay][by];
      }
  }
};

/// Fine node ids of fine cell (fx, fy) in Q1Element local order.
inline std::array<int, 4> cell_nodes(const GridPair& g, int fx, int fy) {
  return {g.fine_node(fx, fy), g.fine_node(fx + 1, fy), g.fine_node(fx, fy + 1), g.fine_node(fx + 1, fy + 1)};
}

// ---------------------------------------------------------------------------
// Fine system
// ---------------------------------------------------------------------------

/// Fine-scale matrices over the interior (non-Dirichlet) nodes, in
/// GridPair::interior_nodes() order.
struct FineSystem {
  GridPair grid;
  Vector kappa;      ///< per fine cell
  SparseSym mass;    ///< M_h
  SparseSym stiffness;  ///< A_h

  std::size_t size() const noexcept { return mass.size(); }
};

/// Mass and stiffness over all fine nodes, before Dirichlet elimination.
struct UnconstrainedSystem {
  SparseSym mass;
  SparseSym stiffness;
};

namespace detail {

inline std::pair<SparseSym, SparseSym> assemble_q1(const GridPair& g, std::span<const double> kappa, bool eliminate) {
  const Q1Element el(g.hx(), g.hy());
  const std::size_t n = eliminate ? g.interior_nodes().size() : g.fine_node_count();
  std::vector<Triplet> tm, ta;
  tm.reserve(g.fine_cell_count() * 16);
  ta.reserve(g.fine_cell_count() * 16);
  for (int fy = 0; fy < g.fine_ny(); ++fy)
    for (int fx = 0; fx < g.fine_nx(); ++fx) {
      const double k = kappa[static_cast<std::size_t>(g.fine_cell(fx, fy))];
      const auto nodes = cell_nodes(g, fx, fy);
      std::array<int, 4> dof{};
      for (int a = 0; a < 4; ++a) dof[a] = eliminate ? g.interior_index(nodes[a]) : nodes[a];
      for (int a = 0; a < 4; ++a) {
        if (dof[a] < 0) continue;
        for (int b = 0; b < 4; ++b) {
          if (dof[b] < 0) continue;
          const auto ra = static_cast<std::size_t>(dof[a]), cb = static_cast<std::size_t>(dof[b]);
          tm.push_back({ra, cb, el.mass[a][b]});
          ta.push_back({ra, cb, k * el.stiffness[a][b]});
        }
      }
    }
  return {SparseSym::from_triplets(n, std::move(tm)), SparseSym::from_triplets(n, std::move(ta))};
}

}  // namespace detail

inline UnconstrainedSystem assemble_unconstrained(const GridPair& g, const Permeability& kappa) {
  const Vector k = sample_cells(g, kappa);
  auto [m, a] = detail::assemble_q1(g, k, false);
  return {std::move(m), std::move(a)};
}

inline FineSystem assemble(const GridPair& g, const Permeability& kappa) {
  Vector k = sample_cells(g, kappa);
  auto [m, a] = detail::assemble_q1(g, k, true);
  return FineSystem{g, std::move(k), std::move(m), std::move(a)};
}

/// Consistent load vector over interior nodes, 2x2 Gauss quadrature per fine cell.
inline Vector load(const GridPair& g, const SpaceTimeFunction& source, double t) {
  Vector f(g.interior_nodes().size(), 0.0);
  const double hx = g.hx(), hy = g.hy();
  const double gp[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  const double w = 0.25 * hx * hy;
  for (int fy = 0; fy < g.fine_ny(); ++fy)
    for (int fx = 0; fx < g.fine_nx(); ++fx) {
      const auto nodes = cell_nodes(g, fx, fy);
      std::array<double, 4> acc{};
      for (double sy : gp)
        for (double sx : gp) {
          const double val = w * source(t, (fx + sx) * hx, (fy + sy) * hy);
          acc[0] += val * (1 - sx) * (1 - sy);
          acc[1] += val * sx * (1 - sy);
          acc[2] += val * (1 - sx) * sy;
          acc[3] += val * sx * sy;
        }
      for (int a = 0; a < 4; ++a) {
        const int d = g.interior_index(nodes[a]);
        if (d >= 0) f[static_cast<std::size_t>(d)] += acc[a];
      }
    }
  return f;
}

/// Nodal interpolant over interior nodes.
inline Vector interpolate(const GridPair& g, const SpaceFunction& u) {
  Vector v;
  v.reserve(g.interior_nodes().size());
  for (int node : g.interior_nodes()) v.push_back(u(g.x_of(g.fine_ix(node)), g.y_of(g.fine_iy(node))));
  return v;
}

/// Interior-node vector scattered to all fine nodes (zeros on the boundary).
inline Vector expand_to_nodes(const GridPair& g, std::span<const double> interior) {
  if (interior.size() != g.interior_nodes().size()) throw ConfigError("expand_to_nodes: dimension mismatch");
  Vector full(g.fine_node_count(), 0.0);
  for (std::size_t k = 0; k < interior.size(); ++k)
    full[static_cast<std::size_t>(g.interior_nodes()[k])] = interior[k];
  return full;
}

struct FineNorms {
  double l2 = 0.0;
  double energy = 0.0;
};

inline FineNorms norms(const FineSystem& fs, std::span<const double> v) {
  if (v.size() != fs.size())
    throw ConfigError("norms: vector has " + std::to_string(v.size()) + " entries, system has " +
                      std::to_string(fs.size()));
  return {std::sqrt(std::max(0.0, fs.mass.quadratic(v))), std::sqrt(std::max(0.0, fs.stiffness.quadratic(v)))};
}

}  // namespace msplit
