#include <sgm/statistics.hpp>

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>

#include <sgm/error.hpp>
#include <sgm/parallel.hpp>

namespace sgm {
namespace {

void add_if_present(ShapeGraph& out, int a, int b, SrvfCurve shape, double weight) {
  if (weight <= 0.0 || shape.is_null()) return;
  out.add_edge(a, b, shape, weight);
}

struct Registration {
  double distance = 0.0;
  std::vector<int> partner;  // mean node -> graph node or -1
};

Registration register_pair(const ShapeGraph& mean, const ShapeGraph& g, const RegistrationSolver& solver,
                           const AffinityOptions& options) {
  const RegistrationProblem problem = make_problem(mean, g, options);
  const Permutation p = solver(problem);
  if (p.size() != problem.node_count()) throw solver_failure("solver returned a permutation of the wrong size");
  return Registration{problem.graph_distance(p), correspondence(problem, p)};
}

std::vector<Registration> register_all(const ShapeGraph& mean, const std::vector<ShapeGraph>& graphs,
                                       const RegistrationSolver& solver, const AffinityOptions& options) {
  std::vector<Registration> out(graphs.size());
  parallel_for(graphs.size(), [&](std::size_t i) {
    try {
      out[i] = register_pair(mean, graphs[i], solver, options);
    } catch (const Error& e) {
      throw Error(e.kind(), "registration to graph " + std::to_string(i) + " failed: " + e.what());
    }
  });
  return out;
}

double sum_of_squares(const std::vector<Registration>& regs) {
  double total = 0.0;
  for (const Registration& r : regs) total += r.distance * r.distance;
  return total;
}

ShapeGraph average(const ShapeGraph& mean, const std::vector<ShapeGraph>& graphs,
                   const std::vector<Registration>& regs) {
  const int m = mean.node_count();
  const double count = static_cast<double>(graphs.size());

  Matrix nodes = mean.nodes();
  for (int v = 0; v < m; ++v) {
    Vector sum = Vector::Zero(mean.dim());
    int hits = 0;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      const int partner = regs[i].partner[static_cast<std::size_t>(v)];
      if (partner < 0) continue;
      sum += graphs[i].node(partner);
      ++hits;
    }
    if (hits > 0) nodes.row(v) = (sum / hits).transpose();
  }

  // Edge shapes oriented from the lower mean index, keyed by mean node pair.
  std::map<std::pair<int, int>, std::pair<Matrix, int>> sums;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    std::vector<int> back(static_cast<std::size_t>(graphs[i].node_count()), -1);
    for (int v = 0; v < m; ++v) {
      const int partner = regs[i].partner[static_cast<std::size_t>(v)];
      if (partner >= 0) back[static_cast<std::size_t>(partner)] = v;
    }
    for (int s = 0; s < graphs[i].edge_count(); ++s) {
      const Edge& e = graphs[i].edge(s);
      int a = back[static_cast<std::size_t>(e.source)];
      int b = back[static_cast<std::size_t>(e.target)];
      if (a < 0 || b < 0) continue;
      int from = e.source;
      if (a > b) {
        std::swap(a, b);
        from = e.target;
      }
      SrvfCurve q = graphs[i].oriented_shape(s, from);
      if (const auto current = mean.find_edge(a, b)) q = elastic_match(mean.oriented_shape(*current, a), q).warped;
      auto [it, inserted] = sums.try_emplace({a, b}, Matrix::Zero(q.size(), q.dim()), 0);
      it->second.first += q.values();
      it->second.second += 1;
    }
  }

  ShapeGraph out(std::move(nodes));
  for (const auto& [key, acc] : sums)
    add_if_present(out, key.first, key.second, SrvfCurve(acc.first / count), acc.second / count);
  return out;
}

}  // namespace

ShapeGraph graph_geodesic(const ShapeGraph& g, const ShapeGraph& g2, const Permutation& p, double t,
                          const ElasticOptions& elastic) {
  if (!(t >= 0.0 && t <= 1.0)) throw invalid_input("geodesic time must lie in [0, 1]");
  const int n = g.node_count();
  const int n2 = g2.node_count();
  if (n > n2) throw invalid_input("geodesic expects the smaller graph first");
  if (p.size() != n2) throw invalid_input("permutation size must equal the padded node count");
  if (g.dim() != g2.dim()) throw invalid_input("node attribute dimensions differ");

  Matrix nodes(n2, g.dim());
  for (int i = 0; i < n2; ++i) {
    if (i < n)
      nodes.row(i) = (1.0 - t) * g.nodes().row(i) + t * g2.nodes().row(p[i]);
    else
      nodes.row(i) = g2.nodes().row(p[i]);
  }
  ShapeGraph out(std::move(nodes));

  const Permutation inv = p.inverse();
  std::vector<char> matched(static_cast<std::size_t>(g2.edge_count()), 0);
  for (int s = 0; s < g.edge_count(); ++s) {
    const Edge& e = g.edge(s);
    const auto partner = g2.find_edge(p[e.source], p[e.target]);
    if (!partner) {
      add_if_present(out, e.source, e.target, SrvfCurve((1.0 - t) * e.shape.values()), (1.0 - t) * e.weight);
      continue;
    }
    matched[static_cast<std::size_t>(*partner)] = 1;
    const SrvfCurve& q2 = g2.oriented_shape(*partner, p[e.source]);
    const double weight = (1.0 - t) * e.weight + t * g2.edge(*partner).weight;
    if (t == 0.0)
      add_if_present(out, e.source, e.target, e.shape, weight);
    else if (t == 1.0)
      add_if_present(out, e.source, e.target, q2, weight);
    else
      add_if_present(out, e.source, e.target, curve_geodesic(e.shape, q2, t, elastic), weight);
  }
  for (int s = 0; s < g2.edge_count(); ++s) {
    if (matched[static_cast<std::size_t>(s)]) continue;
    const Edge& e = g2.edge(s);
    add_if_present(out, inv[e.source], inv[e.target], SrvfCurve(t * e.shape.values()), t * e.weight);
  }
  return out;
}

std::vector<int> correspondence(const RegistrationProblem& problem, const Permutation& p) {
  const int n = problem.first.node_count();
  const int n2 = problem.second.node_count();
  if (p.size() != n2) throw invalid_input("permutation size must equal the padded node count");
  if (!problem.swapped) {
    std::vector<int> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = p[i];
    return out;
  }
  const Permutation inv = p.inverse();
  std::vector<int> out(static_cast<std::size_t>(n2));
  for (int j = 0; j < n2; ++j) out[static_cast<std::size_t>(j)] = inv[j] < n ? inv[j] : -1;
  return out;
}

ShapeGraph prune(const ShapeGraph& g, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw invalid_input("prune threshold must lie in [0, 1]");
  ShapeGraph out(g.nodes());
  for (const Edge& e : g.edges())
    if (e.weight >= threshold) out.add_edge(e.source, e.target, e.shape, e.weight);
  return out;
}

double registered_distance(const ShapeGraph& a, const ShapeGraph& b, const RegistrationSolver& solver,
                           const AffinityOptions& options) {
  return register_pair(a, b, solver, options).distance;
}

KarcherResult karcher_mean(const std::vector<ShapeGraph>& graphs, const RegistrationSolver& solver,
                           const KarcherConfig& config) {
  if (graphs.size() < 2) throw invalid_input("the mean needs at least two graphs");
  if (config.max_iterations < 0 || !(config.tol >= 0.0)) throw invalid_input("invalid mean configuration");
  const std::size_t count = graphs.size();

  // Medoid under registered distance.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = i + 1; j < count; ++j) pairs.emplace_back(i, j);
  std::vector<double> distances(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    try {
      distances[k] = registered_distance(graphs[i], graphs[j], solver, config.affinity);
    } catch (const Error& e) {
      throw Error(e.kind(), "registration of graphs " + std::to_string(i) + " and " + std::to_string(j) +
                                " failed: " + e.what());
    }
  });
  std::vector<double> totals(count, 0.0);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    totals[pairs[k].first] += distances[k];
    totals[pairs[k].second] += distances[k];
  }
  const std::size_t medoid =
      static_cast<std::size_t>(std::min_element(totals.begin(), totals.end()) - totals.begin());

  KarcherResult result;
  result.initial_index = static_cast<int>(medoid);
  result.mean = graphs[medoid];
  std::vector<Registration> regs = register_all(result.mean, graphs, solver, config.affinity);
  double cost = sum_of_squares(regs);
  result.trajectory.push_back(cost);

  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    ShapeGraph candidate = average(result.mean, graphs, regs);
    std::vector<Registration> candidate_regs = register_all(candidate, graphs, solver, config.affinity);
    const double candidate_cost = sum_of_squares(candidate_regs);
    result.iterations = iter;
    const double change =
        std::abs(cost - candidate_cost) / std::max(cost, std::numeric_limits<double>::min());
    if (candidate_cost > cost) {
      // A zero cost means the mean already fits every graph exactly.
      result.converged = change < config.tol || cost == 0.0;
      break;
    }
    result.mean = std::move(candidate);
    regs = std::move(candidate_regs);
    cost = candidate_cost;
    result.trajectory.push_back(cost);
    if (change < config.tol || cost == 0.0) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace sgm
