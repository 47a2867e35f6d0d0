#include <sgm/shape_graph.hpp>

#include <algorithm>
#include <cmath>
#include <string>

#include <sgm/error.hpp>
#include <sgm/parallel.hpp>

namespace sgm {

ShapeGraph::ShapeGraph(Matrix nodes) : nodes_(std::move(nodes)) {
  if (!nodes_.allFinite()) throw invalid_input("node attributes contain non-finite values");
}

long long ShapeGraph::key(int a, int b) const {
  if (a > b) std::swap(a, b);
  return static_cast<long long>(a) * node_count() + b;
}

int ShapeGraph::add_edge(int a, int b, const SrvfCurve& shape_from_a, double weight) {
  const int n = node_count();
  if (a < 0 || b < 0 || a >= n || b >= n) throw invalid_input("edge endpoint out of range");
  if (a == b) throw invalid_input("self-loops are not supported");
  if (lookup_.contains(key(a, b))) {
    throw invalid_input("duplicate edge between nodes " + std::to_string(a) + " and " + std::to_string(b));
  }
  if (shape_from_a.dim() != dim()) throw invalid_input("edge shape dimension differs from node dimension");
  if (shape_from_a.size() < 2) throw invalid_input("edge shape needs at least two samples");
  if (!edges_.empty() && shape_from_a.size() != samples())
    throw invalid_input("all edge shapes must share one sample count");
  if (shape_from_a.is_null()) throw invalid_input("edge shapes must be non-null");
  if (!shape_from_a.values().allFinite()) throw invalid_input("edge shape contains non-finite values");

  Edge e;
  if (a < b) {
    e.source = a;
    e.target = b;
    e.shape = shape_from_a;
    e.reversed_shape = reverse(shape_from_a);
  } else {
    e.source = b;
    e.target = a;
    e.reversed_shape = shape_from_a;
    e.shape = reverse(shape_from_a);
  }
  e.weight = weight;
  const int index = edge_count();
  lookup_.emplace(key(a, b), index);
  edges_.push_back(std::move(e));
  return index;
}

std::optional<int> ShapeGraph::find_edge(int a, int b) const {
  if (a == b || a < 0 || b < 0 || a >= node_count() || b >= node_count()) return std::nullopt;
  const auto it = lookup_.find(key(a, b));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

const SrvfCurve& ShapeGraph::oriented_shape(int s, int from) const {
  const Edge& e = edge(s);
  if (from == e.source) return e.shape;
  if (from == e.target) return e.reversed_shape;
  throw invalid_input("node is not an endpoint of the edge");
}

void ShapeGraph::set_node(int i, const Vector& position) {
  if (position.size() != dim()) throw invalid_input("node dimension mismatch");
  nodes_.row(i) = position.transpose();
}

void ShapeGraph::set_edge_weight(int s, double weight) { edges_.at(static_cast<std::size_t>(s)).weight = weight; }

Permutation::Permutation(std::vector<int> map) : map_(std::move(map)) {
  std::vector<char> seen(map_.size(), 0);
  for (int v : map_) {
    if (v < 0 || v >= size() || seen[static_cast<std::size_t>(v)])
      throw invalid_input("permutation is not a bijection");
    seen[static_cast<std::size_t>(v)] = 1;
  }
}

Permutation Permutation::identity(int n) {
  std::vector<int> map(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) map[static_cast<std::size_t>(i)] = i;
  return Permutation(std::move(map));
}

Permutation Permutation::inverse() const {
  std::vector<int> inv(map_.size());
  for (int i = 0; i < size(); ++i) inv[static_cast<std::size_t>(map_[static_cast<std::size_t>(i)])] = i;
  return Permutation(std::move(inv));
}

Permutation Permutation::after(const Permutation& other) const {
  if (other.size() != size()) throw invalid_input("permutation size mismatch");
  std::vector<int> out(map_.size());
  for (int i = 0; i < size(); ++i) out[static_cast<std::size_t>(i)] = (*this)[other[i]];
  return Permutation(std::move(out));
}

Matrix Permutation::matrix() const {
  Matrix p = Matrix::Zero(size(), size());
  for (int i = 0; i < size(); ++i) p(i, (*this)[i]) = 1.0;
  return p;
}

Connectivity build_connectivity(const ShapeGraph& g) {
  Connectivity c;
  c.sources = Matrix::Zero(g.node_count(), g.edge_count());
  c.targets = Matrix::Zero(g.node_count(), g.edge_count());
  for (int s = 0; s < g.edge_count(); ++s) {
    c.sources(g.edge(s).source, s) = 1.0;
    c.targets(g.edge(s).target, s) = 1.0;
  }
  return c;
}

Matrix node_distance_matrix(const ShapeGraph& g, const ShapeGraph& g2) {
  if (g.dim() != g2.dim()) throw invalid_input("node attribute dimensions differ");
  Matrix d(g.node_count(), g2.node_count());
  for (int i = 0; i < g.node_count(); ++i)
    for (int j = 0; j < g2.node_count(); ++j) d(i, j) = (g.nodes().row(i) - g2.nodes().row(j)).norm();
  return d;
}

double null_node_epsilon(const Matrix& distance) {
  const Eigen::Index k = std::min(distance.rows(), distance.cols());
  if (k == 0) return 0.0;
  return distance.diagonal().head(k).mean();
}

PaddedPair pad_null_nodes(const ShapeGraph& g, const ShapeGraph& g2, double xi) {
  if (!(xi > 0.0)) throw invalid_input("xi must be positive");
  if (g.node_count() == 0 || g2.node_count() == 0) throw invalid_input("graphs must have at least one node");
  const bool swapped = g.node_count() > g2.node_count();
  const ShapeGraph& first = swapped ? g2 : g;
  const ShapeGraph& second = swapped ? g : g2;

  PaddedPair pair;
  pair.swapped = swapped;
  pair.n = first.node_count();
  pair.n_prime = second.node_count();
  pair.null_count = pair.n_prime - pair.n;
  pair.xi = xi;

  const Matrix d = node_distance_matrix(first, second);
  pair.epsilon = null_node_epsilon(d);
  pair.distance.resize(pair.n_prime, pair.n_prime);
  pair.distance.topRows(pair.n) = d;
  pair.distance.bottomRows(pair.null_count).setConstant(pair.epsilon);

  const Connectivity c1 = build_connectivity(first);
  const Connectivity c2 = build_connectivity(second);
  pair.sources.resize(pair.n_prime, first.edge_count());
  pair.targets.resize(pair.n_prime, first.edge_count());
  pair.sources.topRows(pair.n) = c1.sources;
  pair.targets.topRows(pair.n) = c1.targets;
  pair.sources.bottomRows(pair.null_count).setConstant(xi);
  pair.targets.bottomRows(pair.null_count).setConstant(xi);
  pair.sources_prime = c2.sources;
  pair.targets_prime = c2.targets;
  return pair;
}

EdgeDistanceTable edge_distance_table(const ShapeGraph& g, const ShapeGraph& g2, const ElasticOptions& options) {
  EdgeDistanceTable table;
  const int ne = g.edge_count();
  const int ne2 = g2.edge_count();
  table.distance.resize(ne, ne2);
  table.norms_first.resize(ne);
  table.norms_second.resize(ne2);
  for (int s = 0; s < ne; ++s) table.norms_first(s) = l2_norm(g.edge(s).shape);
  for (int s = 0; s < ne2; ++s) table.norms_second(s) = l2_norm(g2.edge(s).shape);
  parallel_for(static_cast<std::size_t>(ne) * static_cast<std::size_t>(ne2), [&](std::size_t idx) {
    const int s = static_cast<int>(idx / static_cast<std::size_t>(ne2));
    const int t = static_cast<int>(idx % static_cast<std::size_t>(ne2));
    table.distance(s, t) = edge_distance(g.edge(s).shape, g2.edge(t).shape, options);
  });
  return table;
}

double graph_distance(const ShapeGraph& g, const ShapeGraph& g2, const Permutation& p,
                      const GraphDistanceOptions& options) {
  const int n = g.node_count();
  const int n2 = g2.node_count();
  if (n > n2) throw invalid_input("graph_distance expects the smaller graph first");
  if (p.size() != n2) throw invalid_input("permutation size must equal the padded node count");
  if (g.dim() != g2.dim()) throw invalid_input("node attribute dimensions differ");
  if (!(options.lambda > 0.0 && options.lambda < 1.0)) throw invalid_input("lambda must lie in (0, 1)");
  if (options.table != nullptr &&
      (options.table->distance.rows() != g.edge_count() || options.table->distance.cols() != g2.edge_count()))
    throw invalid_input("edge distance table does not match the graph pair");

  auto edge_term = [&](int s, int t) {
    return options.table ? options.table->distance(s, t) : edge_distance(g.edge(s).shape, g2.edge(t).shape, options.elastic);
  };
  auto norm_first = [&](int s) { return options.table ? options.table->norms_first(s) : l2_norm(g.edge(s).shape); };
  auto norm_second = [&](int t) { return options.table ? options.table->norms_second(t) : l2_norm(g2.edge(t).shape); };

  double edges = 0.0;
  std::vector<char> matched(static_cast<std::size_t>(g2.edge_count()), 0);
  for (int s = 0; s < g.edge_count(); ++s) {
    const Edge& e = g.edge(s);
    const auto partner = g2.find_edge(p[e.source], p[e.target]);
    if (partner) {
      edges += edge_term(s, *partner);
      matched[static_cast<std::size_t>(*partner)] = 1;
    } else {
      edges += norm_first(s);
    }
  }
  for (int t = 0; t < g2.edge_count(); ++t)
    if (!matched[static_cast<std::size_t>(t)]) edges += norm_second(t);

  double null_cost = 0.0;
  if (n < n2) null_cost = options.null_node_cost.value_or(null_node_epsilon(node_distance_matrix(g, g2)));
  double nodes = 0.0;
  for (int i = 0; i < n2; ++i)
    nodes += i < n ? (g.nodes().row(i) - g2.nodes().row(p[i])).norm() : null_cost;

  return options.lambda * edges + (1.0 - options.lambda) * nodes;
}

ShapeGraph apply_permutation(const ShapeGraph& g, const Permutation& p) {
  if (p.size() != g.node_count()) throw invalid_input("permutation size must equal the node count");
  Matrix nodes(g.node_count(), g.dim());
  for (int i = 0; i < g.node_count(); ++i) nodes.row(i) = g.nodes().row(p[i]);
  const Permutation inv = p.inverse();
  ShapeGraph out(std::move(nodes));
  for (const Edge& e : g.edges()) out.add_edge(inv[e.source], inv[e.target], e.shape, e.weight);
  return out;
}

}  // namespace sgm
