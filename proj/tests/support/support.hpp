#pragma once

// Fixtures and independent oracles shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include <sgm/affinity.hpp>
#include <sgm/autodiff.hpp>
#include <sgm/elastic_curves.hpp>
#include <sgm/shape_graph.hpp>

namespace sgm::testing {

inline Matrix sample_curve(const std::function<Vector(double)>& f, int samples) {
  Matrix points(samples, f(0.0).size());
  for (int i = 0; i < samples; ++i) points.row(i) = f(static_cast<double>(i) / (samples - 1)).transpose();
  return points;
}

inline Vector vec2(double x, double y) { return (Vector(2) << x, y).finished(); }

inline SrvfCurve segment_srvf(const Vector& a, const Vector& b, int samples) {
  return srvf_transform(Curve(sample_curve([&](double t) { return Vector(a + t * (b - a)); }, samples)));
}

/// Low-frequency random planar curve from a to b.
inline Matrix random_curve_points(std::mt19937_64& rng, const Vector& a, const Vector& b, int samples,
                                  double amplitude = 0.2) {
  std::normal_distribution<double> normal(0.0, amplitude);
  Matrix c(3, a.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = normal(rng) / (1 + i % 3);
  return sample_curve(
      [&](double t) {
        Vector p = a + t * (b - a);
        for (int k = 0; k < 3; ++k) p += std::sin((k + 1) * std::numbers::pi * t) * c.row(k).transpose();
        return p;
      },
      samples);
}

inline SrvfCurve random_srvf(std::mt19937_64& rng, int samples) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const Vector a = vec2(unit(rng), unit(rng));
  const Vector b = vec2(unit(rng) + 2.0, unit(rng));
  return srvf_transform(resample_by_arclength(random_curve_points(rng, a, b, 4 * samples, 0.4), samples));
}

/// Smooth random diffeomorphism of [0, 1]: normalized integral of a positive
/// random density. Exact boundary values.
inline Warping random_warping(std::mt19937_64& rng, int samples, double strength = 0.6) {
  std::normal_distribution<double> normal(0.0, strength);
  const double c1 = normal(rng), c2 = normal(rng) / 2;
  Vector density(samples);
  for (int i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / (samples - 1);
    density(i) = std::exp(c1 * std::cos(std::numbers::pi * t) + c2 * std::cos(2 * std::numbers::pi * t));
  }
  Vector gamma(samples);
  gamma(0) = 0.0;
  for (int i = 1; i < samples; ++i) gamma(i) = gamma(i - 1) + 0.5 * (density(i) + density(i - 1));
  gamma /= gamma(samples - 1);
  gamma(samples - 1) = 1.0;
  return Warping(gamma);
}

/// Graph on the given nodes with random bent edges.
inline ShapeGraph make_graph(std::mt19937_64& rng, const Matrix& nodes, const std::vector<std::pair<int, int>>& edges,
                             int samples = 64) {
  ShapeGraph g(nodes);
  for (const auto& [a, b] : edges) {
    const Vector pa = nodes.row(a).transpose();
    const Vector pb = nodes.row(b).transpose();
    g.add_edge(a, b, srvf_transform(resample_by_arclength(random_curve_points(rng, pa, pb, 128, 0.1), samples)));
  }
  return g;
}

/// Random connected graph: random tree plus `extra` chords.
inline ShapeGraph random_graph(std::mt19937_64& rng, int n, int extra, int samples = 32) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix nodes(n, 2);
  for (int i = 0; i < n; ++i) nodes.row(i) << unit(rng), unit(rng);
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i < n; ++i) edges.emplace_back(std::uniform_int_distribution<int>(0, i - 1)(rng), i);
  for (int e = 0; e < extra; ++e) {
    const int a = std::uniform_int_distribution<int>(0, n - 1)(rng);
    const int b = std::uniform_int_distribution<int>(0, n - 1)(rng);
    if (a == b) continue;
    bool seen = false;
    for (const auto& [x, y] : edges) seen |= (x == a && y == b) || (x == b && y == a);
    if (!seen) edges.emplace_back(a, b);
  }
  return make_graph(rng, nodes, edges, samples);
}

inline Permutation random_permutation(std::mt19937_64& rng, int n) {
  std::vector<int> map(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) map[static_cast<std::size_t>(i)] = i;
  std::shuffle(map.begin(), map.end(), rng);
  return Permutation(map);
}

/// Lawler matrix straight from its entrywise definition:
/// K[(i,j),(a,b)] = [i=a, j=b] Kp(i,j)
///   + sum_{s,t} Ke(s,t) C~(i,s) F~(a,s) (C'(j,t) F'(b,t) + F'(j,t) C'(b,t)),
/// with (i,j) -> i + n' j; the second product matches edge t in reverse.
inline Matrix naive_lawler_matrix(const AffinityPair& aff) {
  const int n = aff.node_count();
  Matrix k = Matrix::Zero(n * n, n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      for (int b = 0; b < n; ++b)
        for (int a = 0; a < n; ++a) {
          double v = (i == a && j == b) ? aff.node_affinity(i, j) : 0.0;
          for (int s = 0; s < aff.edge_count(); ++s)
            for (int t = 0; t < aff.edge_count_prime(); ++t)
              v += aff.edge_affinity(s, t) * aff.sources(i, s) * aff.targets(a, s) *
                   (aff.sources_prime(j, t) * aff.targets_prime(b, t) + aff.targets_prime(j, t) * aff.sources_prime(b, t));
          k(i + n * j, a + n * b) = v;
        }
  return k;
}

inline double quadratic_form(const Matrix& k, const Matrix& assignment) {
  const Eigen::Map<const Vector> v(assignment.data(), assignment.size());
  return v.dot(k * v);
}

/// Relative error ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-8)
/// of d f / d x, with central differences of step h.
inline double gradient_error(const std::function<ad::Var(ad::Tape&, ad::Var)>& f, const Matrix& x, double h = 1e-5) {
  Matrix analytic;
  {
    ad::Tape tape;
    ad::Var leaf = tape.leaf(x);
    ad::Var y = f(tape, leaf);
    tape.backward(y);
    analytic = tape.grad(leaf);
  }
  auto eval = [&](const Matrix& point) {
    ad::Tape tape;
    return f(tape, tape.leaf(point)).scalar();
  };
  Matrix numeric(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix plus = x, minus = x;
    plus.data()[i] += h;
    minus.data()[i] -= h;
    numeric.data()[i] = (eval(plus) - eval(minus)) / (2 * h);
  }
  const double scale = std::max({analytic.norm(), numeric.norm(), 1e-8});
  return (analytic - numeric).norm() / scale;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> unit(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = unit(rng);
  return m;
}

}  // namespace sgm::testing
