#include <sgm/assignment.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include <sgm/error.hpp>
#include <sgm/parallel.hpp>

namespace sgm {
namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) throw invalid_input(std::string(what) + " must be square");
  if (m.rows() == 0) throw invalid_input(std::string(what) + " must be non-empty");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Matrix gumbel_noise(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(std::numeric_limits<double>::min(), 1.0);
  Matrix g(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = -std::log(-std::log(uniform(rng)));
  return g;
}

}  // namespace

Matrix sinkhorn_normalize(const Matrix& scores, int iterations, double floor) {
  require_square(scores, "Sinkhorn input");
  if (!scores.allFinite() || (scores.array() < 0.0).any())
    throw invalid_input("Sinkhorn input must be finite and non-negative");
  if (scores.isZero(0.0)) throw degenerate_input("Sinkhorn input is all zero");
  if (floor < 0.0) throw invalid_input("Sinkhorn floor must be non-negative");
  Matrix s = scores.array() + floor;
  for (int it = 0; it < iterations; ++it) {
    s.array().rowwise() /= s.colwise().sum().array();
    s.array().colwise() /= s.rowwise().sum().array();
  }
  return s;
}

Matrix sinkhorn_from_log(const Matrix& log_scores, int iterations) {
  require_square(log_scores, "Sinkhorn input");
  if (!log_scores.allFinite()) throw invalid_input("Sinkhorn log-scores must be finite");
  Matrix l = log_scores;
  const Eigen::Index n = l.rows();
  for (int it = 0; it < iterations; ++it) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double m = l.col(j).maxCoeff();
      l.col(j).array() -= m + std::log((l.col(j).array() - m).exp().sum());
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = l.row(i).maxCoeff();
      l.row(i).array() -= m + std::log((l.row(i).array() - m).exp().sum());
    }
  }
  return l.array().exp();
}

Permutation hungarian(const Matrix& weights, bool maximize) {
  require_square(weights, "assignment matrix");
  if (!weights.allFinite()) throw invalid_input("assignment matrix must be finite");
  const int n = static_cast<int>(weights.rows());
  const Matrix cost = maximize ? Matrix(-weights) : weights;

  // Shortest augmenting paths with dual potentials, 1-based with a dummy
  // column 0.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> match(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = match[static_cast<std::size_t>(j0)];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> assignment(static_cast<std::size_t>(n));
  for (int j = 1; j <= n; ++j) assignment[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return Permutation(std::move(assignment));
}

Selection gumbel_sinkhorn_select(const Matrix& scores, const AffinityPair& aff, const GumbelOptions& options) {
  require_square(scores, "score matrix");
  if (scores.rows() != aff.node_count()) throw invalid_input("score matrix does not match the affinity pair");
  if (options.samples < 1) throw invalid_input("Gumbel-Sinkhorn needs at least one sample");
  if (!(options.tau > 0.0)) throw invalid_input("tau must be positive");

  const auto samples = static_cast<std::size_t>(options.samples);
  std::vector<Permutation> perms(samples);
  std::vector<double> objectives(samples);
  parallel_for(samples, [&](std::size_t k) {
    Matrix noisy = scores;
    if (k > 0) noisy += gumbel_noise(scores.rows(), splitmix64(options.seed ^ splitmix64(k)));
    const Matrix soft = sinkhorn_from_log(noisy / (2.0 * options.tau), options.sinkhorn_iterations);
    perms[k] = hungarian(soft, true);
    objectives[k] = permutation_objective(aff, perms[k]);
  });

  Selection best{perms[0], objectives[0], 0};
  for (std::size_t k = 1; k < samples; ++k) {
    if (objectives[k] > best.objective) best = Selection{perms[k], objectives[k], static_cast<int>(k)};
  }
  return best;
}

QapSolution brute_force_qap(const AffinityPair& aff, int max_nodes) {
  const int n = aff.node_count();
  if (n > max_nodes)
    throw resource_limit("brute-force QAP limited to " + std::to_string(max_nodes) + " nodes, got " + std::to_string(n));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  QapSolution best{Permutation(order), -std::numeric_limits<double>::infinity()};
  do {
    Permutation p(order);
    const double value = permutation_objective(aff, p);
    if (value > best.objective) best = QapSolution{std::move(p), value};
  } while (std::next_permutation(order.begin(), order.end()));
  return best;
}

QapSolution sinkhorn_baseline(const AffinityPair& aff, double tau, int iterations) {
  if (!(tau > 0.0)) throw invalid_input("tau must be positive");
  const Matrix soft = sinkhorn_from_log(aff.node_affinity / (2.0 * tau), iterations);
  Permutation p = hungarian(soft, true);
  const double value = permutation_objective(aff, p);
  return {std::move(p), value};
}

}  // namespace sgm
