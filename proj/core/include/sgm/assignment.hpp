#pragma once

#include <cstdint>

#include <sgm/affinity.hpp>
#include <sgm/shape_graph.hpp>
#include <sgm/types.hpp>

namespace sgm {

/// Alternating column and row normalization of a non-negative matrix. `floor`
/// is added to every entry first so that no row or column is empty.
Matrix sinkhorn_normalize(const Matrix& scores, int iterations = 20, double floor = 1e-12);

/// Sinkhorn normalization of exp(log_scores), carried out in the log domain.
/// Equivalent to sinkhorn_normalize(exp(log_scores), iterations, 0) but free of
/// overflow for large scores.
Matrix sinkhorn_from_log(const Matrix& log_scores, int iterations = 20);

/// Exact linear assignment. Row i is assigned column result[i].
Permutation hungarian(const Matrix& weights, bool maximize);

struct GumbelOptions {
  double tau = 0.05;
  int samples = 64;
  int sinkhorn_iterations = 20;
  std::uint64_t seed = 0;
};

struct Selection {
  Permutation perm;
  double objective = 0.0;
  int sample = 0;  // index of the winning sample; 0 is the noise-free one
};

/// Samples S_k = sinkhorn(exp((scores + g_k) / 2 tau)) with Gumbel noise g_k
/// (g_0 = 0), projects each onto a permutation with the Hungarian method and
/// keeps the one with the highest factorized objective. Ties go to the lowest
/// sample index.
Selection gumbel_sinkhorn_select(const Matrix& scores, const AffinityPair& aff, const GumbelOptions& options);

struct QapSolution {
  Permutation perm;
  double objective = 0.0;
};

/// Exhaustive maximization of the factorized objective. Ties resolve to the
/// lexicographically smallest permutation.
QapSolution brute_force_qap(const AffinityPair& aff, int max_nodes = 9);

/// Learning-free baseline: Hungarian projection of sinkhorn(exp(K~p / 2 tau)).
QapSolution sinkhorn_baseline(const AffinityPair& aff, double tau = 0.05, int iterations = 20);

}  // namespace sgm
