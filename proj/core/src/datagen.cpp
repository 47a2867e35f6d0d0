#include <sgm/datagen.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include <sgm/error.hpp>
#include <sgm/graph_io.hpp>

namespace sgm {
namespace {

constexpr int kBendModes = 3;

// sum_k sin(k pi s) c_k: vanishes at both ends.
Matrix smooth_field(Eigen::Index samples, const Matrix& coefficients) {
  Matrix out = Matrix::Zero(samples, coefficients.cols());
  for (Eigen::Index i = 0; i < samples; ++i) {
    const double s = static_cast<double>(i) / static_cast<double>(samples - 1);
    for (Eigen::Index k = 0; k < coefficients.rows(); ++k)
      out.row(i) += std::sin(static_cast<double>(k + 1) * std::numbers::pi * s) * coefficients.row(k);
  }
  return out;
}

Matrix random_coefficients(std::mt19937_64& rng, Eigen::Index dim, double scale) {
  Matrix c(kBendModes, dim);
  for (Eigen::Index k = 0; k < kBendModes; ++k) {
    std::normal_distribution<double> normal(0.0, scale / static_cast<double>(k + 1));
    for (Eigen::Index d = 0; d < dim; ++d) c(k, d) = normal(rng);
  }
  return c;
}

// Chord from a to b bent sideways by a smooth random offset.
SrvfCurve bent_edge(std::mt19937_64& rng, const Vector& a, const Vector& b, int samples) {
  const Vector chord = b - a;
  const double length = chord.norm();
  Vector normal = Vector::Zero(a.size());
  if (a.size() >= 2) {
    normal(0) = -chord(1);
    normal(1) = chord(0);
    normal /= std::max(length, 1e-12);
  }
  std::normal_distribution<double> bend(0.0, 1.0);
  Matrix points(samples, a.size());
  std::vector<double> c(kBendModes);
  for (int k = 0; k < kBendModes; ++k) c[static_cast<std::size_t>(k)] = bend(rng) * 0.12 * length / (k + 1);
  for (int i = 0; i < samples; ++i) {
    const double s = static_cast<double>(i) / (samples - 1);
    double offset = 0.0;
    for (int k = 0; k < kBendModes; ++k) offset += c[static_cast<std::size_t>(k)] * std::sin((k + 1) * std::numbers::pi * s);
    points.row(i) = (a + s * chord + offset * normal).transpose();
  }
  return srvf_transform(resample_by_arclength(points, samples));
}

double bounding_diagonal(const Matrix& nodes) {
  return (nodes.colwise().maxCoeff() - nodes.colwise().minCoeff()).norm();
}

}  // namespace

DistortionLevel parse_level(const std::string& name) {
  if (name == "low") return DistortionLevel::kLow;
  if (name == "medium") return DistortionLevel::kMedium;
  if (name == "high") return DistortionLevel::kHigh;
  throw invalid_input("unknown distortion level '" + name + "' (expected low, medium or high)");
}

std::string level_name(DistortionLevel level) {
  switch (level) {
    case DistortionLevel::kLow: return "low";
    case DistortionLevel::kMedium: return "medium";
    case DistortionLevel::kHigh: return "high";
  }
  return "low";
}

Distortion distortion_for(DistortionLevel level) {
  switch (level) {
    case DistortionLevel::kLow: return {0.01, 0.01, 0.0, 0.0};
    case DistortionLevel::kMedium: return {0.03, 0.03, 0.05, 0.03};
    case DistortionLevel::kHigh: return {0.06, 0.06, 0.10, 0.08};
  }
  return {};
}

ShapeGraph random_base_graph(int node_count, std::uint64_t seed, int samples) {
  if (node_count < 2) throw invalid_input("a base graph needs at least two nodes");
  if (samples < 2) throw invalid_input("edges need at least two samples");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix nodes(node_count, 2);
  for (int i = 0; i < node_count; ++i) nodes.row(i) << unit(rng), unit(rng);
  ShapeGraph g(nodes);

  auto distance = [&](int a, int b) { return (nodes.row(a) - nodes.row(b)).norm(); };
  for (int i = 1; i < node_count; ++i) {
    int nearest = 0;
    for (int j = 1; j < i; ++j)
      if (distance(i, j) < distance(i, nearest)) nearest = j;
    g.add_edge(nearest, i, bent_edge(rng, g.node(nearest), g.node(i), samples));
  }
  std::uniform_int_distribution<int> pick(0, node_count - 1);
  for (int extra = 0; extra < node_count / 4; ++extra) {
    const int u = pick(rng);
    int best = -1;
    for (int v = 0; v < node_count; ++v) {
      if (v == u || g.find_edge(u, v)) continue;
      if (best < 0 || distance(u, v) < distance(u, best)) best = v;
    }
    if (best >= 0) g.add_edge(u, best, bent_edge(rng, g.node(u), g.node(best), samples));
  }
  return g;
}

SyntheticPair generate_pair(const ShapeGraph& base, DistortionLevel level, std::uint64_t seed) {
  return generate_pair(base, distortion_for(level), seed);
}

SyntheticPair generate_pair(const ShapeGraph& base, const Distortion& distortion, std::uint64_t seed) {
  const int n = base.node_count();
  if (n < 3) throw invalid_input("distortion needs a base graph with at least three nodes");
  if (base.edge_count() == 0) throw invalid_input("distortion needs a base graph with edges");
  if (distortion.jitter < 0.0 || distortion.perturbation < 0.0 || distortion.clutter < 0.0 ||
      distortion.deletion < 0.0 || distortion.deletion >= 1.0)
    throw invalid_input("distortion magnitudes must be non-negative and deletion below 1");
  std::mt19937_64 rng(seed);
  const int samples = base.samples();
  const double diagonal = bounding_diagonal(base.nodes());

  // (a) node jitter.
  Matrix displacement = Matrix::Zero(n, base.dim());
  if (distortion.jitter > 0.0) {
    std::normal_distribution<double> normal(0.0, distortion.jitter * diagonal);
    for (Eigen::Index i = 0; i < displacement.size(); ++i) displacement.data()[i] = normal(rng);
  }

  // (d) deletion, chosen up front so the edge loop stays simple.
  const int edge_count = base.edge_count();
  const int deletions = std::min(edge_count - 1, static_cast<int>(std::lround(distortion.deletion * edge_count)));
  std::vector<int> order(static_cast<std::size_t>(edge_count));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> deleted(static_cast<std::size_t>(edge_count), 0);
  for (int k = 0; k < deletions; ++k) deleted[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = 1;

  // (c) clutter nodes hang off random existing nodes.
  const int clutter = static_cast<int>(std::lround(distortion.clutter * n));
  const int total = n + clutter;
  Matrix nodes(total, base.dim());
  nodes.topRows(n) = base.nodes() + displacement;
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> anchors;
  for (int c = 0; c < clutter; ++c) {
    const int anchor = pick(rng);
    anchors.push_back(anchor);
    Vector direction = Vector::Zero(base.dim());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index d = 0; d < direction.size(); ++d) direction(d) = normal(rng);
    direction /= std::max(direction.norm(), 1e-12);
    const double radius = (0.05 + 0.07 * unit(rng)) * diagonal;
    nodes.row(n + c) = nodes.row(anchor) + radius * direction.transpose();
  }

  // (e) relabelling: unrelabelled node i becomes node relabel[i].
  std::vector<int> relabel(static_cast<std::size_t>(total));
  std::iota(relabel.begin(), relabel.end(), 0);
  std::shuffle(relabel.begin(), relabel.end(), rng);
  Matrix shuffled(total, base.dim());
  for (int i = 0; i < total; ++i) shuffled.row(relabel[static_cast<std::size_t>(i)]) = nodes.row(i);
  ShapeGraph second(shuffled);

  // (b) edge perturbation; endpoints follow their nodes.
  for (int s = 0; s < edge_count; ++s) {
    if (deleted[static_cast<std::size_t>(s)]) continue;
    const Edge& e = base.edge(s);
    const int a = relabel[static_cast<std::size_t>(e.source)];
    const int b = relabel[static_cast<std::size_t>(e.target)];
    const Matrix points = edge_points(base, s);
    const double chord = (points.row(points.rows() - 1) - points.row(0)).norm();
    const Matrix bend = distortion.perturbation > 0.0
                            ? smooth_field(points.rows(), random_coefficients(rng, base.dim(), distortion.perturbation * chord))
                            : Matrix::Zero(points.rows(), base.dim());
    const RowVector da = displacement.row(e.source);
    const RowVector db = displacement.row(e.target);
    if (bend.isZero(0.0) && da.isZero(0.0) && db.isZero(0.0)) {
      second.add_edge(a, b, e.shape);
      continue;
    }
    Matrix moved = points + bend;
    for (Eigen::Index i = 0; i < moved.rows(); ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(moved.rows() - 1);
      moved.row(i) += (1.0 - t) * da + t * db;
    }
    second.add_edge(a, b, srvf_transform(resample_by_arclength(moved, samples)));
  }
  for (int c = 0; c < clutter; ++c) {
    const int a = relabel[static_cast<std::size_t>(anchors[static_cast<std::size_t>(c)])];
    const int b = relabel[static_cast<std::size_t>(n + c)];
    second.add_edge(a, b, bent_edge(rng, second.node(a), second.node(b), samples));
  }
  return SyntheticPair{base, std::move(second), Permutation(std::move(relabel))};
}

}  // namespace sgm
