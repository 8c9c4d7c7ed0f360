#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "msplit/grid.hpp"

using namespace msplit;

TEST(Grid, Example1Counts) {
  const GridPair g = build_grids(16, 16, 16);
  EXPECT_EQ(g.fine_node_count(), 257u * 257u);
  EXPECT_EQ(g.fine_cell_count(), 256u * 256u);
  EXPECT_EQ(g.coarse_node_count(), 17u * 17u);
  EXPECT_EQ(g.interior_coarse_nodes().size(), 225u);
  EXPECT_EQ(g.interior_nodes().size(), 255u * 255u);
  EXPECT_DOUBLE_EQ(g.hx(), 1.0 / 256.0);
  EXPECT_DOUBLE_EQ(g.coarse_hx(), 1.0 / 16.0);
}

TEST(Grid, SingleCell) {
  const GridPair g = build_grids(1, 1, 1);
  EXPECT_EQ(g.fine_node_count(), 4u);
  EXPECT_TRUE(g.interior_coarse_nodes().empty());
  EXPECT_TRUE(g.interior_nodes().empty());
}

TEST(Grid, TwoByTwoRefinedTwice) {
  const GridPair g = build_grids(2, 2, 2);
  EXPECT_EQ(g.fine_node_count(), 25u);
  ASSERT_EQ(g.interior_coarse_nodes().size(), 1u);
  const int centre = g.interior_coarse_nodes()[0];
  EXPECT_EQ(centre, g.coarse_node(1, 1));
  const Neighborhood nb = neighborhood(g, centre);
  EXPECT_EQ(nb.cells.size(), 4u);
  EXPECT_EQ(nb.box_node_count(), 25u);
}

TEST(Grid, RejectsZeroSizes) {
  EXPECT_THROW(build_grids(0, 4, 4), ConfigError);
  EXPECT_THROW(build_grids(4, 0, 4), ConfigError);
  EXPECT_THROW(build_grids(4, 4, 0), ConfigError);
}

TEST(Grid, NodeIndexRoundTrip) {
  const GridPair g = build_grids(3, 5, 4);
  for (int iy = 0; iy <= g.fine_ny(); ++iy)
    for (int ix = 0; ix <= g.fine_nx(); ++ix) {
      const int id = g.fine_node(ix, iy);
      EXPECT_EQ(g.fine_ix(id), ix);
      EXPECT_EQ(g.fine_iy(id), iy);
      const bool edge = ix == 0 || iy == 0 || ix == g.fine_nx() || iy == g.fine_ny();
      EXPECT_EQ(g.is_dirichlet(id), edge);
      EXPECT_EQ(g.interior_index(id) < 0, edge);
    }
}

TEST(Neighborhood, CellCountsByPosition) {
  const GridPair g = build_grids(16, 16, 16);
  const Neighborhood inner = neighborhood(g, g.coarse_node(5, 7));
  EXPECT_EQ(inner.cells.size(), 4u);
  EXPECT_EQ(inner.boundary_count(), 128u);
  EXPECT_EQ(inner.interior_nodes.size(), 31u * 31u);
  EXPECT_EQ(neighborhood(g, g.coarse_node(0, 0)).cells.size(), 1u);
  EXPECT_EQ(neighborhood(g, g.coarse_node(0, 5)).cells.size(), 2u);
  EXPECT_EQ(neighborhood(g, g.coarse_node(16, 3)).cells.size(), 2u);
  EXPECT_EQ(neighborhood(g, g.coarse_node(16, 16)).cells.size(), 1u);
  EXPECT_THROW(neighborhood(g, -1), ConfigError);
  EXPECT_THROW(neighborhood(g, 17 * 17), ConfigError);
}

TEST(Neighborhood, BoundaryListIsExactlyTheBoxBoundary) {
  const GridPair g = build_grids(4, 3, 5);
  for (std::size_t i = 0; i < g.coarse_node_count(); ++i) {
    const Neighborhood nb = neighborhood(g, static_cast<int>(i));
    std::set<int> bnd(nb.boundary_nodes.begin(), nb.boundary_nodes.end());
    EXPECT_EQ(bnd.size(), nb.boundary_nodes.size()) << "duplicates in boundary list";
    std::size_t expected = 0;
    for (int iy = nb.iy0; iy <= nb.iy1; ++iy)
      for (int ix = nb.ix0; ix <= nb.ix1; ++ix) {
        const int id = g.fine_node(ix, iy);
        const bool on = nb.on_boundary(ix, iy);
        expected += on ? 1 : 0;
        EXPECT_EQ(bnd.count(id) == 1, on);
        const bool inner = std::binary_search(nb.interior_nodes.begin(), nb.interior_nodes.end(), id);
        EXPECT_NE(inner, on);
      }
    EXPECT_EQ(bnd.size(), expected);
  }
}

TEST(PartitionOfUnity, SumsToOneEverywhere) {
  const GridPair g = build_grids(4, 3, 6);
  std::vector<double> sum(g.fine_node_count(), 0.0);
  for (std::size_t i = 0; i < g.coarse_node_count(); ++i) {
    const auto chi = partition_of_unity(g, static_cast<int>(i));
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += chi[k];
  }
  for (double s : sum) EXPECT_NEAR(s, 1.0, 1e-14);
}

TEST(PartitionOfUnity, NodalValues) {
  const GridPair g = build_grids(16, 16, 16);
  const int i = g.coarse_node(4, 9);
  const Neighborhood nb = neighborhood(g, i);
  const auto chi = partition_of_unity(g, i);
  EXPECT_EQ(chi[static_cast<std::size_t>(g.fine_node(64, 144))], 1.0);
  for (int id : nb.boundary_nodes) EXPECT_EQ(chi[static_cast<std::size_t>(id)], 0.0);
  for (int id : nb.interior_nodes) EXPECT_GT(chi[static_cast<std::size_t>(id)], 0.0);
}

TEST(PartitionOfUnity, CellMidpointValue) {
  const GridPair g = build_grids(2, 2, 2);
  const auto chi = partition_of_unity(g, g.coarse_node(1, 1));
  EXPECT_DOUBLE_EQ(chi[static_cast<std::size_t>(g.fine_node(1, 1))], 0.25);
  EXPECT_DOUBLE_EQ(coarse_hat(g, g.coarse_node(1, 1), 0.25, 0.25), 0.25);
}

TEST(PartitionOfUnity, AtMostFourOverlaps) {
  const GridPair g = build_grids(5, 4, 3);
  std::vector<int> hits(g.fine_node_count(), 0);
  for (int i : g.interior_coarse_nodes())
    for (int id : neighborhood(g, i).interior_nodes) ++hits[static_cast<std::size_t>(id)];
  EXPECT_LE(*std::max_element(hits.begin(), hits.end()), 4);
}

TEST(PartitionOfUnity, IntegerAndPointEvaluationAgree) {
  const GridPair g = build_grids(3, 4, 5);
  for (std::size_t i = 0; i < g.coarse_node_count(); ++i)
    for (int iy = 0; iy <= g.fine_ny(); ++iy)
      for (int ix = 0; ix <= g.fine_nx(); ++ix)
        EXPECT_NEAR(coarse_hat_at_node(g, static_cast<int>(i), ix, iy),
                    coarse_hat(g, static_cast<int>(i), g.x_of(ix), g.y_of(iy)), 1e-14);
}

TEST(PartitionOfUnity, GradientMatchesFiniteDifference) {
  const GridPair g = build_grids(4, 4, 4);
  const int i = g.coarse_node(2, 1);
  const double x = 0.43, y = 0.19, h = 1e-6;
  const auto [gx, gy] = coarse_hat_gradient(g, i, x, y);
  EXPECT_NEAR(gx, (coarse_hat(g, i, x + h, y) - coarse_hat(g, i, x - h, y)) / (2 * h), 1e-6);
  EXPECT_NEAR(gy, (coarse_hat(g, i, x, y + h) - coarse_hat(g, i, x, y - h)) / (2 * h), 1e-6);
}
