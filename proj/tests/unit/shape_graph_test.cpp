#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <optional>

#include <sgm/error.hpp>
#include <sgm/shape_graph.hpp>

#include "support.hpp"

namespace sgm {
namespace {

using testing::random_graph;
using testing::random_permutation;
using testing::segment_srvf;
using testing::vec2;

Matrix points(std::initializer_list<std::pair<double, double>> xy) {
  Matrix m(static_cast<Eigen::Index>(xy.size()), 2);
  Eigen::Index i = 0;
  for (const auto& [x, y] : xy) m.row(i++) << x, y;
  return m;
}

// d_g straight from its definition: walk every unordered node pair of the
// padded graphs and compare what sits there.
double naive_graph_distance(const ShapeGraph& g, const ShapeGraph& g2, const Permutation& p, double lambda,
                            double null_cost) {
  const int n = g.node_count(), n2 = g2.node_count();
  // Stored orientation; d_e minimizes over orientations anyway.
  auto shape_at = [](const ShapeGraph& graph, int a, int b) -> std::optional<SrvfCurve> {
    if (a >= graph.node_count() || b >= graph.node_count()) return std::nullopt;
    for (const Edge& e : graph.edges())
      if ((e.source == a && e.target == b) || (e.source == b && e.target == a)) return e.shape;
    return std::nullopt;
  };
  double edges = 0.0;
  for (int i = 0; i < n2; ++i) {
    for (int j = i + 1; j < n2; ++j) {
      const auto a = shape_at(g, i, j);
      const auto b = shape_at(g2, p[i], p[j]);
      if (a && b)
        edges += std::min(shape_distance(*a, *b), shape_distance(reverse(*a), *b));
      else if (a)
        edges += l2_norm(*a);
      else if (b)
        edges += l2_norm(*b);
    }
  }
  double nodes = 0.0;
  for (int i = 0; i < n2; ++i) {
    if (i < n) {
      const double dx = g.nodes()(i, 0) - g2.nodes()(p[i], 0);
      const double dy = g.nodes()(i, 1) - g2.nodes()(p[i], 1);
      nodes += std::sqrt(dx * dx + dy * dy);
    } else {
      nodes += null_cost;
    }
  }
  return lambda * edges + (1.0 - lambda) * nodes;
}

TEST(ShapeGraph, RejectsMalformedEdges) {
  ShapeGraph g(points({{0, 0}, {1, 0}, {0, 1}}));
  const SrvfCurve q = segment_srvf(vec2(0, 0), vec2(1, 0), 16);
  g.add_edge(0, 1, q);
  EXPECT_THROW(g.add_edge(1, 0, q), Error);
  EXPECT_THROW(g.add_edge(2, 2, q), Error);
  EXPECT_THROW(g.add_edge(0, 3, q), Error);
  EXPECT_THROW(g.add_edge(0, 2, SrvfCurve::null(16, 2)), Error);
  EXPECT_THROW(g.add_edge(0, 2, segment_srvf(vec2(0, 0), vec2(0, 1), 32)), Error);
}

TEST(ShapeGraph, StoresCanonicalOrientation) {
  ShapeGraph g(points({{0, 0}, {1, 0}}));
  const SrvfCurve q = segment_srvf(vec2(1, 0), vec2(0, 0), 16);
  g.add_edge(1, 0, q);
  EXPECT_EQ(g.edge(0).source, 0);
  EXPECT_EQ(g.edge(0).target, 1);
  EXPECT_TRUE(g.edge(0).reversed_shape.values().isApprox(q.values()));
  EXPECT_TRUE(g.oriented_shape(0, 1).values().isApprox(q.values()));
  EXPECT_TRUE(g.edge(0).shape.values().isApprox(reverse(q).values()));
}

TEST(Connectivity, SingleEdge) {
  ShapeGraph g(points({{0, 0}, {1, 0}}));
  g.add_edge(0, 1, segment_srvf(vec2(0, 0), vec2(1, 0), 16));
  const Connectivity c = build_connectivity(g);
  EXPECT_EQ(c.sources, (Matrix(2, 1) << 1, 0).finished());
  EXPECT_EQ(c.targets, (Matrix(2, 1) << 0, 1).finished());
}

TEST(Connectivity, Path) {
  ShapeGraph g(points({{0, 0}, {1, 0}, {2, 0}}));
  g.add_edge(0, 1, segment_srvf(vec2(0, 0), vec2(1, 0), 16));
  g.add_edge(1, 2, segment_srvf(vec2(1, 0), vec2(2, 0), 16));
  const Connectivity c = build_connectivity(g);
  EXPECT_EQ(c.sources, (Matrix(3, 2) << 1, 0, 0, 1, 0, 0).finished());
  EXPECT_EQ(c.targets, (Matrix(3, 2) << 0, 0, 1, 0, 0, 1).finished());
}

TEST(Connectivity, ColumnsHaveOneEntry) {
  std::mt19937_64 rng(1);
  const ShapeGraph g = random_graph(rng, 10, 0);
  const Connectivity c = build_connectivity(g);
  EXPECT_TRUE((c.sources.colwise().sum().array() == 1.0).all());
  EXPECT_TRUE((c.targets.colwise().sum().array() == 1.0).all());
  EXPECT_TRUE(((c.sources.array() * c.targets.array()) == 0.0).all());
  // C^T u recovers source coordinates.
  const Matrix src = c.sources.transpose() * g.nodes();
  for (int s = 0; s < g.edge_count(); ++s) EXPECT_EQ(src.row(s), g.nodes().row(g.edge(s).source));
}

TEST(NodeDistance, Examples) {
  std::mt19937_64 rng(2);
  const ShapeGraph g = random_graph(rng, 6, 2);
  EXPECT_TRUE(node_distance_matrix(g, g).diagonal().isZero(0.0));

  const ShapeGraph a(points({{0, 0}}));
  const ShapeGraph b(points({{3, 4}}));
  EXPECT_EQ(node_distance_matrix(a, b), (Matrix(1, 1) << 5).finished());
}

TEST(NodeDistance, MatchesDoubleLoop) {
  std::mt19937_64 rng(3);
  const ShapeGraph g = random_graph(rng, 5, 1);
  const ShapeGraph h = random_graph(rng, 7, 2);
  const Matrix d = node_distance_matrix(g, h);
  ASSERT_EQ(d.rows(), 5);
  ASSERT_EQ(d.cols(), 7);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 7; ++j) {
      const double dx = g.nodes()(i, 0) - h.nodes()(j, 0), dy = g.nodes()(i, 1) - h.nodes()(j, 1);
      EXPECT_NEAR(d(i, j), std::sqrt(dx * dx + dy * dy), 1e-15);
    }
}

TEST(NodeDistance, DimensionMismatch) {
  const ShapeGraph a(points({{0, 0}}));
  const ShapeGraph b(Matrix::Zero(1, 3));
  EXPECT_THROW(node_distance_matrix(a, b), Error);
}

TEST(Padding, EqualSizesUnchanged) {
  std::mt19937_64 rng(4);
  const ShapeGraph g = random_graph(rng, 5, 1);
  const ShapeGraph h = random_graph(rng, 5, 2);
  const PaddedPair p = pad_null_nodes(g, h);
  EXPECT_EQ(p.null_count, 0);
  EXPECT_FALSE(p.swapped);
  EXPECT_EQ(p.distance, node_distance_matrix(g, h));
  EXPECT_EQ(p.sources, build_connectivity(g).sources);
  EXPECT_EQ(p.targets, build_connectivity(g).targets);
  EXPECT_EQ(p.sources_prime, build_connectivity(h).sources);
}

TEST(Padding, EpsilonFromLeadingDiagonal) {
  const Matrix d = (Matrix(2, 3) << 1, 2, 3, 4, 5, 6).finished();
  EXPECT_DOUBLE_EQ(null_node_epsilon(d), 3.0);
}

TEST(Padding, NullRows) {
  std::mt19937_64 rng(5);
  const ShapeGraph g = random_graph(rng, 3, 0);
  const ShapeGraph h = random_graph(rng, 5, 1);
  const PaddedPair p = pad_null_nodes(g, h, 1e-6);
  EXPECT_EQ(p.null_count, 2);
  EXPECT_EQ(p.n, 3);
  EXPECT_EQ(p.n_prime, 5);
  const Matrix d = node_distance_matrix(g, h);
  EXPECT_DOUBLE_EQ(p.epsilon, (d(0, 0) + d(1, 1) + d(2, 2)) / 3.0);
  EXPECT_EQ(p.distance.topRows(3), d);
  EXPECT_TRUE((p.distance.bottomRows(2).array() == p.epsilon).all());
  EXPECT_TRUE((p.sources.bottomRows(2).array() == 1e-6).all());
  EXPECT_TRUE((p.targets.bottomRows(2).array() == 1e-6).all());
  EXPECT_EQ(p.sources.topRows(3), build_connectivity(g).sources);
}

TEST(Padding, SwapsLargerFirst) {
  std::mt19937_64 rng(6);
  const ShapeGraph big = random_graph(rng, 6, 1);
  const ShapeGraph small = random_graph(rng, 4, 1);
  const PaddedPair p = pad_null_nodes(big, small);
  EXPECT_TRUE(p.swapped);
  EXPECT_EQ(p.n, 4);
  EXPECT_EQ(p.n_prime, 6);
}

TEST(Padding, RejectsNonPositiveXi) {
  std::mt19937_64 rng(7);
  const ShapeGraph g = random_graph(rng, 3, 0);
  EXPECT_THROW(pad_null_nodes(g, g, 0.0), Error);
  EXPECT_THROW(pad_null_nodes(g, g, -1.0), Error);
}

TEST(GraphDistance, SelfIsZero) {
  std::mt19937_64 rng(8);
  const ShapeGraph g = random_graph(rng, 6, 2);
  EXPECT_NEAR(graph_distance(g, g, Permutation::identity(6)), 0.0, 1e-12);
}

TEST(GraphDistance, TranslatedSingleEdge) {
  const SrvfCurve q = segment_srvf(vec2(0, 0), vec2(1, 1), 32);
  ShapeGraph a(points({{0, 0}, {1, 1}}));
  ShapeGraph b(points({{1, 0}, {2, 1}}));
  a.add_edge(0, 1, q);
  b.add_edge(0, 1, q);
  EXPECT_NEAR(graph_distance(a, b, Permutation::identity(2)), 1.0, 1e-12);
}

TEST(GraphDistance, MatchesDefinition) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 4; ++trial) {
    const ShapeGraph g = random_graph(rng, 5, 2);
    const ShapeGraph h = random_graph(rng, 5, 3);
    const Permutation p = random_permutation(rng, 5);
    EXPECT_NEAR(graph_distance(g, h, p), naive_graph_distance(g, h, p, 0.5, 0.0), 1e-9);
  }
}

TEST(GraphDistance, MatchesDefinitionWithNullNodes) {
  std::mt19937_64 rng(10);
  const ShapeGraph g = random_graph(rng, 3, 1);
  const ShapeGraph h = random_graph(rng, 5, 2);
  const Permutation p = random_permutation(rng, 5);
  const double eps = null_node_epsilon(node_distance_matrix(g, h));
  EXPECT_NEAR(graph_distance(g, h, p), naive_graph_distance(g, h, p, 0.5, eps), 1e-9);
  GraphDistanceOptions options;
  options.lambda = 0.3;
  options.null_node_cost = 0.25;
  EXPECT_NEAR(graph_distance(g, h, p, options), naive_graph_distance(g, h, p, 0.3, 0.25), 1e-9);
}

TEST(GraphDistance, UsesPrecomputedTable) {
  std::mt19937_64 rng(11);
  const ShapeGraph g = random_graph(rng, 5, 2);
  const ShapeGraph h = random_graph(rng, 5, 2);
  const EdgeDistanceTable table = edge_distance_table(g, h);
  GraphDistanceOptions options;
  options.table = &table;
  for (int k = 0; k < 3; ++k) {
    const Permutation p = random_permutation(rng, 5);
    EXPECT_NEAR(graph_distance(g, h, p, options), graph_distance(g, h, p), 1e-12);
  }
}

TEST(GraphDistance, Errors) {
  std::mt19937_64 rng(12);
  const ShapeGraph g = random_graph(rng, 4, 0);
  const ShapeGraph h = random_graph(rng, 5, 0);
  EXPECT_THROW(graph_distance(h, g, Permutation::identity(4)), Error);
  EXPECT_THROW(graph_distance(g, h, Permutation::identity(4)), Error);
  GraphDistanceOptions bad;
  bad.lambda = 1.0;
  EXPECT_THROW(graph_distance(g, h, Permutation::identity(5), bad), Error);
}

TEST(GraphDistance, NonNegative) {
  std::mt19937_64 rng(13);
  for (int k = 0; k < 5; ++k) {
    const ShapeGraph g = random_graph(rng, 4, 1);
    const ShapeGraph h = random_graph(rng, 6, 2);
    EXPECT_GE(graph_distance(g, h, random_permutation(rng, 6)), 0.0);
  }
}

TEST(ApplyPermutation, IdentityAndInvolution) {
  std::mt19937_64 rng(14);
  const ShapeGraph g = random_graph(rng, 6, 2);
  const ShapeGraph same = apply_permutation(g, Permutation::identity(6));
  EXPECT_EQ(same.nodes(), g.nodes());
  ASSERT_EQ(same.edge_count(), g.edge_count());
  for (int s = 0; s < g.edge_count(); ++s) EXPECT_EQ(same.edge(s).shape.values(), g.edge(s).shape.values());

  const Permutation swap({1, 0, 2, 3, 4, 5});
  const ShapeGraph back = apply_permutation(apply_permutation(g, swap), swap);
  EXPECT_EQ(back.nodes(), g.nodes());
  for (int s = 0; s < g.edge_count(); ++s) {
    const auto t = back.find_edge(g.edge(s).source, g.edge(s).target);
    ASSERT_TRUE(t);
    EXPECT_EQ(back.oriented_shape(*t, g.edge(s).source).values(), g.edge(s).shape.values());
  }
}

TEST(ApplyPermutation, PreservesEdgeNormsAndDistance) {
  std::mt19937_64 rng(15);
  const ShapeGraph g = random_graph(rng, 7, 3);
  const Permutation p = random_permutation(rng, 7);
  const ShapeGraph h = apply_permutation(g, p);
  EXPECT_EQ(h.node_count(), g.node_count());
  ASSERT_EQ(h.edge_count(), g.edge_count());
  std::vector<double> before, after;
  for (const Edge& e : g.edges()) before.push_back(l2_norm(e.shape));
  for (const Edge& e : h.edges()) after.push_back(l2_norm(e.shape));
  std::sort(before.begin(), before.end());
  std::sort(after.begin(), after.end());
  EXPECT_EQ(before, after);
  // Node i of h is node p[i] of g, so g registers onto h through p^-1.
  EXPECT_NEAR(graph_distance(g, h, p.inverse()), 0.0, 1e-12);
}

TEST(ApplyPermutation, SizeMismatch) {
  std::mt19937_64 rng(16);
  const ShapeGraph g = random_graph(rng, 4, 0);
  EXPECT_THROW(apply_permutation(g, Permutation::identity(5)), Error);
}

TEST(Permutation, Algebra) {
  std::mt19937_64 rng(17);
  const Permutation p = random_permutation(rng, 8);
  const Permutation q = random_permutation(rng, 8);
  EXPECT_EQ(p.after(p.inverse()), Permutation::identity(8));
  EXPECT_EQ(p.inverse().after(p), Permutation::identity(8));
  const Permutation pq = p.after(q);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(pq[i], p[q[i]]);
  const Matrix m = p.matrix();
  for (int i = 0; i < 8; ++i) EXPECT_EQ(m(i, p[i]), 1.0);
  EXPECT_EQ(m.sum(), 8.0);
  EXPECT_THROW(Permutation({0, 0, 1}), Error);
}

}  // namespace
}  // namespace sgm
