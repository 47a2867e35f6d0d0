#pragma once

// Shape statistics on registered graphs: geodesic paths with edge birth and
// death, the iterative Karcher mean, and pruning of faded edges.

#include <functional>
#include <vector>

#include <sgm/affinity.hpp>
#include <sgm/shape_graph.hpp>

namespace sgm {

/// Point t of the geodesic from g to g2 * p. g must be the smaller graph and p
/// is over the padded node set, as in graph_distance. The result has
/// g2.node_count() nodes; null nodes of g sit on their partners.
///
/// Edges matched under p follow the elastic curve geodesic. An edge present
/// on one side only scales to or from the null edge and carries presence
/// weight (1 - t) or t. Edges of zero weight are omitted, so t = 0 and t = 1
/// reproduce the inputs.
ShapeGraph graph_geodesic(const ShapeGraph& g, const ShapeGraph& g2, const Permutation& p, double t,
                          const ElasticOptions& elastic = {});

/// For every node of the problem's original first argument, the index of its
/// partner in the original second argument, or -1 when it is matched to a
/// null node.
std::vector<int> correspondence(const RegistrationProblem& problem, const Permutation& p);

/// Drops edges whose presence weight is below `threshold`.
ShapeGraph prune(const ShapeGraph& g, double threshold);

/// Registers a problem; returns a permutation over its padded node set.
using RegistrationSolver = std::function<Permutation(const RegistrationProblem&)>;

struct KarcherConfig {
  double tol = 1e-3;
  int max_iterations = 20;
  AffinityOptions affinity;
};

struct KarcherResult {
  ShapeGraph mean;
  /// Sum of squared graph distances to the sample for each accepted mean,
  /// starting with the initial one. Non-increasing.
  std::vector<double> trajectory;
  int iterations = 0;
  bool converged = false;
  int initial_index = 0;  // medoid used to start
};

/// Graph distance after registering a to b with `solver`.
double registered_distance(const ShapeGraph& a, const ShapeGraph& b, const RegistrationSolver& solver,
                           const AffinityOptions& options = {});

/// Alternates registration of the current mean to every graph with averaging
/// of the matched node positions and edge shapes, starting from the medoid.
/// A candidate mean that increases the sum of squared distances is rejected
/// and ends the loop.
KarcherResult karcher_mean(const std::vector<ShapeGraph>& graphs, const RegistrationSolver& solver,
                           const KarcherConfig& config = {});

}  // namespace sgm
