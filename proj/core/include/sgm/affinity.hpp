#pragma once

#include <sgm/shape_graph.hpp>
#include <sgm/types.hpp>

namespace sgm {

/// Everything a matching instance needs: node affinity K~p (n' x n'), edge
/// affinity Ke (n_e x n'_e) and the padded connectivity matrices.
struct AffinityPair {
  Matrix node_affinity;
  Matrix edge_affinity;
  Matrix sources;        // C~
  Matrix targets;        // F~
  Matrix sources_prime;  // C'
  Matrix targets_prime;  // F'
  double lambda = 0.5;
  double alpha = 1.0;  // edge normalizer, max d_e
  double eta = 1.0;    // node normalizer, max D~

  int node_count() const { return static_cast<int>(node_affinity.rows()); }
  int edge_count() const { return static_cast<int>(edge_affinity.rows()); }
  int edge_count_prime() const { return static_cast<int>(edge_affinity.cols()); }
};

struct AffinityOptions {
  double lambda = 0.5;
  double xi = 1e-6;
  ElasticOptions elastic;
};

struct EdgeAffinity {
  Matrix affinity;
  double alpha = 1.0;
};

struct NodeAffinity {
  Matrix affinity;
  double eta = 1.0;
};

/// Ke(s, s') = lambda (1 - d_e / alpha), alpha = max d_e.
EdgeAffinity edge_affinity(const EdgeDistanceTable& table, double lambda);
EdgeAffinity edge_affinity(const ShapeGraph& g, const ShapeGraph& g2, double lambda, const ElasticOptions& elastic = {});

/// K~p(i, j) = (1 - lambda)(1 - D~(i, j) / eta), eta = max D~. An all-zero D~
/// uses eta = 1.
NodeAffinity node_affinity(const PaddedPair& padded, double lambda);

AffinityPair make_affinity(const PaddedPair& padded, const EdgeDistanceTable& table, double lambda);

/// Row index of the entry equal to 1 in each column of an incidence matrix
/// (padding rows hold xi < 1 and are skipped).
std::vector<int> incidence_rows(const Matrix& incidence);

/// Tr(K~p^T S) + Tr(Ke^T (C~^T S C' o F~^T S F' + C~^T S F' o F~^T S C')).
/// Edges are undirected, so an edge pair scores when its endpoints match in
/// either orientation; the second product covers the flipped one.
double factorized_objective(const AffinityPair& aff, const Matrix& assignment);

/// Same value as factorized_objective(aff, p.matrix()) in O(n_e n'_e).
double permutation_objective(const AffinityPair& aff, const Permutation& p);

/// diag(vec(K~p)) + (C' (x) C~) diag(vec(Ke)) (F' (x) F~)^T
/// + (F' (x) C~) diag(vec(Ke)) (C' (x) F~)^T with column-major vec, so row
/// (i + n' j) pairs node i of the first graph with node j of the second.
Matrix full_composite_K(const AffinityPair& aff, int max_nodes = 60);

/// A registration instance with the smaller graph first, its padding, edge
/// distance cache and affinities.
struct RegistrationProblem {
  ShapeGraph first;
  ShapeGraph second;
  /// True when the inputs were given larger graph first.
  bool swapped = false;
  double lambda = 0.5;
  PaddedPair padded;
  EdgeDistanceTable table;
  AffinityPair affinity;

  int node_count() const { return padded.n_prime; }
  /// d_g(first, second * p), p over the padded node set.
  double graph_distance(const Permutation& p) const;
};

RegistrationProblem make_problem(const ShapeGraph& a, const ShapeGraph& b, const AffinityOptions& options = {});

}  // namespace sgm
