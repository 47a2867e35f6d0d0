#pragma once

#include <optional>
#include <unordered_map>
#include <vector>

#include <sgm/elastic_curves.hpp>
#include <sgm/types.hpp>

namespace sgm {

/// An undirected shaped edge. Stored once with source < target; `shape` runs
/// from source to target and `reversed_shape` is its reflection.
struct Edge {
  int source = 0;
  int target = 0;
  SrvfCurve shape;
  SrvfCurve reversed_shape;
  /// Presence weight; 1 for observed graphs, fractional on interpolated or
  /// averaged graphs.
  double weight = 1.0;
};

class ShapeGraph {
 public:
  ShapeGraph() = default;
  /// `nodes` is n x k, one node coordinate per row.
  explicit ShapeGraph(Matrix nodes);

  /// Adds the edge {a, b} whose shape runs from a to b. The edge is stored
  /// with the smaller index as source, reversing the shape when needed.
  /// Returns the edge index.
  int add_edge(int a, int b, const SrvfCurve& shape_from_a, double weight = 1.0);

  int node_count() const { return static_cast<int>(nodes_.rows()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  int dim() const { return static_cast<int>(nodes_.cols()); }
  /// Samples per edge shape; 0 for an edgeless graph.
  int samples() const { return edges_.empty() ? 0 : static_cast<int>(edges_.front().shape.size()); }

  const Matrix& nodes() const { return nodes_; }
  Vector node(int i) const { return nodes_.row(i).transpose(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(int s) const { return edges_.at(static_cast<std::size_t>(s)); }

  /// Index of the edge joining a and b in either orientation.
  std::optional<int> find_edge(int a, int b) const;

  /// Shape of edge s traversed starting at node `from`.
  const SrvfCurve& oriented_shape(int s, int from) const;

  void set_node(int i, const Vector& position);
  void set_edge_weight(int s, double weight);

 private:
  long long key(int a, int b) const;

  Matrix nodes_;
  std::vector<Edge> edges_;
  std::unordered_map<long long, int> lookup_;
};

/// Node-edge incidence: C(i, s) = 1 iff edge s starts at i, F(i, s) = 1 iff
/// it ends at i.
struct Connectivity {
  Matrix sources;  // C, n x n_e
  Matrix targets;  // F, n x n_e
};

/// Bijection on {0, ..., n-1}; row i of the matrix form has its 1 in column
/// perm(i). Maps a node of the first graph to its partner in the second.
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<int> map);

  static Permutation identity(int n);

  int size() const { return static_cast<int>(map_.size()); }
  int operator[](int i) const { return map_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& map() const { return map_; }

  Permutation inverse() const;
  /// (this after other)(i) = this[other[i]].
  Permutation after(const Permutation& other) const;
  Matrix matrix() const;

  friend bool operator==(const Permutation&, const Permutation&) = default;

 private:
  std::vector<int> map_;
};

/// Two graphs brought to a common node count n' by appending null nodes to
/// the smaller one.
struct PaddedPair {
  int n = 0;           // real nodes of the first (smaller) graph
  int n_prime = 0;     // nodes of the second graph
  int null_count = 0;  // m = n' - n
  /// True when the arguments were swapped so that n <= n'.
  bool swapped = false;
  double epsilon = 0.0;  // node distance assigned to null rows
  double xi = 0.0;       // connectivity value of null rows
  Matrix distance;       // D~, n' x n'
  Matrix sources;        // C~, n' x n_e
  Matrix targets;        // F~, n' x n_e
  Matrix sources_prime;  // C', n' x n'_e
  Matrix targets_prime;  // F', n' x n'_e
};

/// Pairwise elastic edge distances d_e between the edges of two graphs, and
/// the norm of every edge (its distance to the null edge).
struct EdgeDistanceTable {
  Matrix distance;  // n_e x n'_e
  Vector norms_first;
  Vector norms_second;
};

struct GraphDistanceOptions {
  double lambda = 0.5;
  /// Cost of a node matched to a null node. Defaults to the padding epsilon.
  std::optional<double> null_node_cost;
  /// Precomputed edge distances for exactly this graph pair.
  const EdgeDistanceTable* table = nullptr;
  ElasticOptions elastic;
};

Connectivity build_connectivity(const ShapeGraph& g);

/// D(i, j) = |u_i - u'_j|.
Matrix node_distance_matrix(const ShapeGraph& g, const ShapeGraph& g2);

/// Mean of the leading min(n, n') diagonal entries of D.
double null_node_epsilon(const Matrix& distance);

PaddedPair pad_null_nodes(const ShapeGraph& g, const ShapeGraph& g2, double xi = 1e-6);

EdgeDistanceTable edge_distance_table(const ShapeGraph& g, const ShapeGraph& g2, const ElasticOptions& options = {});

/// Composite distance d_g between g and g2 reordered by p. Requires
/// g.node_count() <= g2.node_count() == p.size(); nodes of g at index >= n
/// are null nodes.
double graph_distance(const ShapeGraph& g, const ShapeGraph& g2, const Permutation& p,
                      const GraphDistanceOptions& options = {});

/// G * P: node i of the result is node p[i] of g.
ShapeGraph apply_permutation(const ShapeGraph& g, const Permutation& p);

}  // namespace sgm
