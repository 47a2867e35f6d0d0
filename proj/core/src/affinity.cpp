#include <sgm/affinity.hpp>

#include <string>

#include <sgm/error.hpp>

namespace sgm {
namespace {

void require_lambda(double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw invalid_input("lambda must lie in (0, 1)");
}

void require_shapes(const AffinityPair& aff) {
  const Eigen::Index n = aff.node_affinity.rows();
  if (aff.node_affinity.cols() != n || aff.sources.rows() != n || aff.targets.rows() != n ||
      aff.sources_prime.rows() != n || aff.targets_prime.rows() != n ||
      aff.sources.cols() != aff.edge_affinity.rows() || aff.targets.cols() != aff.edge_affinity.rows() ||
      aff.sources_prime.cols() != aff.edge_affinity.cols() || aff.targets_prime.cols() != aff.edge_affinity.cols())
    throw invalid_input("inconsistent affinity pair shapes");
}

}  // namespace

std::vector<int> incidence_rows(const Matrix& incidence) {
  std::vector<int> rows(static_cast<std::size_t>(incidence.cols()), -1);
  for (Eigen::Index s = 0; s < incidence.cols(); ++s) {
    for (Eigen::Index i = 0; i < incidence.rows(); ++i) {
      if (incidence(i, s) == 1.0) {
        rows[static_cast<std::size_t>(s)] = static_cast<int>(i);
        break;
      }
    }
    if (rows[static_cast<std::size_t>(s)] < 0) throw invalid_input("incidence column without an endpoint");
  }
  return rows;
}

EdgeAffinity edge_affinity(const EdgeDistanceTable& table, double lambda) {
  require_lambda(lambda);
  if (table.distance.size() == 0) throw degenerate_input("edge affinity needs at least one edge in each graph");
  EdgeAffinity out;
  const double max_distance = table.distance.maxCoeff();
  out.alpha = max_distance > 0.0 ? max_distance : 1.0;
  out.affinity = lambda * (1.0 - table.distance.array() / out.alpha).matrix();
  return out;
}

EdgeAffinity edge_affinity(const ShapeGraph& g, const ShapeGraph& g2, double lambda, const ElasticOptions& elastic) {
  if (g.edge_count() == 0 || g2.edge_count() == 0)
    throw degenerate_input("edge affinity needs at least one edge in each graph");
  return edge_affinity(edge_distance_table(g, g2, elastic), lambda);
}

NodeAffinity node_affinity(const PaddedPair& padded, double lambda) {
  require_lambda(lambda);
  if (padded.distance.size() == 0) throw invalid_input("node affinity needs at least one node");
  NodeAffinity out;
  const double max_distance = padded.distance.maxCoeff();
  out.eta = max_distance > 0.0 ? max_distance : 1.0;
  out.affinity = (1.0 - lambda) * (1.0 - padded.distance.array() / out.eta).matrix();
  return out;
}

AffinityPair make_affinity(const PaddedPair& padded, const EdgeDistanceTable& table, double lambda) {
  AffinityPair aff;
  EdgeAffinity edges = edge_affinity(table, lambda);
  NodeAffinity nodes = node_affinity(padded, lambda);
  aff.edge_affinity = std::move(edges.affinity);
  aff.alpha = edges.alpha;
  aff.node_affinity = std::move(nodes.affinity);
  aff.eta = nodes.eta;
  aff.sources = padded.sources;
  aff.targets = padded.targets;
  aff.sources_prime = padded.sources_prime;
  aff.targets_prime = padded.targets_prime;
  aff.lambda = lambda;
  require_shapes(aff);
  return aff;
}

double factorized_objective(const AffinityPair& aff, const Matrix& assignment) {
  require_shapes(aff);
  if (assignment.rows() != aff.node_count() || assignment.cols() != aff.node_count())
    throw invalid_input("assignment matrix shape does not match the affinity pair");
  const double node_term = (aff.node_affinity.array() * assignment.array()).sum();
  if (aff.edge_affinity.size() == 0) return node_term;
  const Matrix src = aff.sources.transpose() * assignment * aff.sources_prime;
  const Matrix dst = aff.targets.transpose() * assignment * aff.targets_prime;
  const Matrix src_flip = aff.sources.transpose() * assignment * aff.targets_prime;
  const Matrix dst_flip = aff.targets.transpose() * assignment * aff.sources_prime;
  const double edge_term =
      (aff.edge_affinity.array() * (src.array() * dst.array() + src_flip.array() * dst_flip.array())).sum();
  return node_term + edge_term;
}

double permutation_objective(const AffinityPair& aff, const Permutation& p) {
  require_shapes(aff);
  if (p.size() != aff.node_count()) throw invalid_input("permutation size does not match the affinity pair");
  double value = 0.0;
  for (int i = 0; i < p.size(); ++i) value += aff.node_affinity(i, p[i]);
  if (aff.edge_affinity.size() == 0) return value;

  // (C~^T P C')(s, t) = C~(p^-1(src'(t)), s), likewise for F; the flipped
  // term swaps the roles of src' and dst'.
  const std::vector<int> src = incidence_rows(aff.sources_prime);
  const std::vector<int> dst = incidence_rows(aff.targets_prime);
  const Permutation inv = p.inverse();
  for (int t = 0; t < aff.edge_count_prime(); ++t) {
    const int a = inv[src[static_cast<std::size_t>(t)]];
    const int b = inv[dst[static_cast<std::size_t>(t)]];
    for (int s = 0; s < aff.edge_count(); ++s) {
      const double same = aff.sources(a, s) * aff.targets(b, s);
      const double flipped = aff.sources(b, s) * aff.targets(a, s);
      if (same == 0.0 && flipped == 0.0) continue;
      value += aff.edge_affinity(s, t) * (same + flipped);
    }
  }
  return value;
}

Matrix full_composite_K(const AffinityPair& aff, int max_nodes) {
  require_shapes(aff);
  const int n = aff.node_count();
  if (n > max_nodes)
    throw resource_limit("composite affinity matrix limited to " + std::to_string(max_nodes) + " nodes, got " +
                         std::to_string(n));
  const int n2 = n * n;
  const int ne = aff.edge_count();
  const int ne2 = aff.edge_count_prime();

  // Kronecker factors (C' (x) C~), (F' (x) F~) and the flipped pair
  // (F' (x) C~), (C' (x) F~), each n'^2 x (n_e n'_e).
  Matrix kron_sources(n2, ne * ne2);
  Matrix kron_targets(n2, ne * ne2);
  Matrix kron_sources_flip(n2, ne * ne2);
  Matrix kron_targets_flip(n2, ne * ne2);
  for (int j = 0; j < n; ++j)
    for (int t = 0; t < ne2; ++t)
      for (int i = 0; i < n; ++i)
        for (int s = 0; s < ne; ++s) {
          kron_sources(i + n * j, s + ne * t) = aff.sources_prime(j, t) * aff.sources(i, s);
          kron_targets(i + n * j, s + ne * t) = aff.targets_prime(j, t) * aff.targets(i, s);
          kron_sources_flip(i + n * j, s + ne * t) = aff.targets_prime(j, t) * aff.sources(i, s);
          kron_targets_flip(i + n * j, s + ne * t) = aff.sources_prime(j, t) * aff.targets(i, s);
        }
  const Eigen::Map<const Vector> vec_edges(aff.edge_affinity.data(), aff.edge_affinity.size());
  const Eigen::Map<const Vector> vec_nodes(aff.node_affinity.data(), aff.node_affinity.size());

  Matrix k = kron_sources * vec_edges.asDiagonal() * kron_targets.transpose() +
             kron_sources_flip * vec_edges.asDiagonal() * kron_targets_flip.transpose();
  k.diagonal() += vec_nodes;
  return k;
}

double RegistrationProblem::graph_distance(const Permutation& p) const {
  GraphDistanceOptions options;
  options.lambda = lambda;
  options.null_node_cost = padded.epsilon;
  options.table = &table;
  return sgm::graph_distance(first, second, p, options);
}

RegistrationProblem make_problem(const ShapeGraph& a, const ShapeGraph& b, const AffinityOptions& options) {
  RegistrationProblem problem;
  problem.swapped = a.node_count() > b.node_count();
  problem.first = problem.swapped ? b : a;
  problem.second = problem.swapped ? a : b;
  problem.lambda = options.lambda;
  problem.padded = pad_null_nodes(problem.first, problem.second, options.xi);
  if (problem.first.edge_count() == 0 || problem.second.edge_count() == 0)
    throw degenerate_input("registration needs at least one edge in each graph");
  problem.table = edge_distance_table(problem.first, problem.second, options.elastic);
  problem.affinity = make_affinity(problem.padded, problem.table, options.lambda);
  return problem;
}

}  // namespace sgm
