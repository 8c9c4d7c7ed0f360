#pragma once
// Dense oracles for the offline pipeline, written against the grid layout
// only: snapshots, kappa_tilde, basis functions and coarse matrices.

#include <algorithm>
#include <cmath>

#include "msplit/gmsfem.hpp"
#include "oracles.hpp"

namespace oracle {

using msplit::GridPair;
using msplit::Neighborhood;
using msplit::Vector;

/// Oracle patch and cell coefficients for the closed box of a neighbourhood.
inline std::pair<Patch, Vec> box_patch(const GridPair& g, const Neighborhood& nb, const Vector& cellv) {
  Patch p{nb.box_nx(), nb.box_ny(), g.hx(), g.hy()};
  Vec c;
  for (int fy = nb.iy0; fy < nb.iy1; ++fy)
    for (int fx = nb.ix0; fx < nb.ix1; ++fx) c.push_back(cellv[static_cast<std::size_t>(g.fine_cell(fx, fy))]);
  return {p, c};
}

/// Boundary data of snapshot l written out directly: delta on the
/// neighbourhood boundary, and on each interior coarse edge the linear
/// interpolant between its far end and the centre value, which is the mean of
/// the far ends.
inline Vec snapshot_oracle(const GridPair& g, const Neighborhood& nb, const Patch& p, const Mat& a,
                            int l) {
  const int r = g.refinement();
  const int bnode = nb.boundary_nodes[static_cast<std::size_t>(l)];
  const int bi = g.fine_ix(bnode) - nb.ix0, bj = g.fine_iy(bnode) - nb.iy0;
  const int ci = g.coarse_I(nb.node) * r - nb.ix0, cj = g.coarse_J(nb.node) * r - nb.iy0;
  auto on_edge = [&](int i, int j) { return i == 0 || j == 0 || i == p.nx || j == p.ny; };
  auto delta = [&](int i, int j) { return (i == bi && j == bj) ? 1.0 : 0.0; };
  double centre = 0.0;
  int ends = 0;
  const int di[4] = {-r, r, 0, 0}, dj[4] = {0, 0, -r, r};
  for (int k = 0; k < 4; ++k) {
    const int ei = ci + di[k], ej = cj + dj[k];
    if (ei < 0 || ej < 0 || ei > p.nx || ej > p.ny) continue;
    centre += delta(ei, ej);
    ++ends;
  }
  centre = on_edge(ci, cj) ? delta(ci, cj) : centre / ends;
  auto data = [&](int i, int j) {
    if (on_edge(i, j)) return delta(i, j);
    if (i == ci && j == cj) return centre;
    if (i == ci) {
      const double t = std::abs(j - cj) / static_cast<double>(r);
      return (1 - t) * centre + t * delta(ci, j > cj ? cj + r : cj - r);
    }
    const double t = std::abs(i - ci) / static_cast<double>(r);
    return (1 - t) * centre + t * delta(i > ci ? ci + r : ci - r, cj);
  };
  return cellwise_harmonic(p, r, a, data);
}

/// kappa_tilde from explicit bilinear hat gradients in each coarse cell.
inline double ktilde_oracle(const GridPair& g, double kappa, double x, double y) {
  const double H = g.coarse_hx();
  const double s = std::fmod(x, H) / H, t = std::fmod(y, H) / H;
  double sum = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const double gx = (a ? 1.0 : -1.0) * (b ? t : 1 - t) / H;
      const double gy = (a ? s : 1 - s) * (b ? 1.0 : -1.0) / H;
      sum += gx * gx + gy * gy;
    }
  return H * H * kappa * sum;
}

inline double max_entry(const Mat& m) {
  double s = 0.0;
  for (const auto& row : m)
    for (double v : row) s = std::max(s, std::abs(v));
  return s;
}


/// Bilinear coarse hat of coarse node (I, J) at a point.
inline double hat(const GridPair& g, int I, int J, double x, double y) {
  const double H = g.coarse_hx(), K = g.coarse_hy();
  return std::max(0.0, 1.0 - std::abs(x - I * H) / H) * std::max(0.0, 1.0 - std::abs(y - J * K) / K);
}

/// Number of generalized eigenvalues of (a, s) below `shift`, by Sylvester's
/// law of inertia on an LDL^T factorization of a - shift s (no pivoting).
inline std::size_t count_below(const Mat& a, const Mat& s, double shift) {
  const std::size_t n = a.size();
  Mat m = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i][j] = a[i][j] - shift * s[i][j];
  std::size_t neg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = m[k][k];
    if (d < 0.0) ++neg;
    for (std::size_t i = k + 1; i < n; ++i) {
      const double l = m[i][k] / d;
      for (std::size_t j = k + 1; j < n; ++j) m[i][j] -= l * m[k][j];
    }
  }
  return neg;
}

/// Local basis of one neighbourhood rebuilt from dense pieces: oracle
/// snapshots combined with the given eigenvector coefficients, times the
/// coarse hat, then Gram-Schmidt in the dense kappa energy of the box.
/// Returns box nodes x ell.
inline Mat basis_oracle(const GridPair& g, const Neighborhood& nb, const Vector& kappa, const Mat& coeffs,
                        bool orthonormalize) {
  const auto [p, c] = box_patch(g, nb, kappa);
  const Mat a = assemble(p, c, true);
  const std::size_t L = nb.boundary_count(), ell = coeffs[0].size(), nn = static_cast<std::size_t>(p.nodes());
  std::vector<Vec> snaps;
  for (std::size_t l = 0; l < L; ++l) snaps.push_back(snapshot_oracle(g, nb, p, a, static_cast<int>(l)));
  const int I = g.coarse_I(nb.node), J = g.coarse_J(nb.node);
  std::vector<Vec> psi(ell, Vec(nn, 0.0));
  for (std::size_t k = 0; k < ell; ++k)
    for (int j = 0; j <= p.ny; ++j)
      for (int i = 0; i <= p.nx; ++i) {
        const auto id = static_cast<std::size_t>(p.id(i, j));
        double v = 0.0;
        for (std::size_t l = 0; l < L; ++l) v += coeffs[l][k] * snaps[l][id];
        psi[k][id] = v * hat(g, I, J, (nb.ix0 + i) * g.hx(), (nb.iy0 + j) * g.hy());
      }
  auto energy = [&](const Vec& u, const Vec& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < nn; ++i)
      for (std::size_t j = 0; j < nn; ++j) s += u[i] * a[i][j] * v[j];
    return s;
  };
  if (orthonormalize)
    for (std::size_t k = 0; k < ell; ++k) {
      for (std::size_t q = 0; q < k; ++q) {
        const double proj = energy(psi[k], psi[q]);
        for (std::size_t i = 0; i < nn; ++i) psi[k][i] -= proj * psi[q][i];
      }
      const double nrm = std::sqrt(energy(psi[k], psi[k]));
      for (double& v : psi[k]) v /= nrm;
    }
  Mat out = zeros(nn, ell);
  for (std::size_t k = 0; k < ell; ++k)
    for (std::size_t i = 0; i < nn; ++i) out[i][k] = psi[k][i];
  return out;
}

}  // namespace oracle
