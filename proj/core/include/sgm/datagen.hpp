#pragma once

// Synthetic shape-graph pairs with a known node correspondence.

#include <cstdint>
#include <string>

#include <sgm/shape_graph.hpp>

namespace sgm {

enum class DistortionLevel { kLow, kMedium, kHigh };

DistortionLevel parse_level(const std::string& name);
std::string level_name(DistortionLevel level);

/// Magnitudes are fractions: jitter of the bounding-box diagonal, edge
/// perturbation of the edge's chord length, clutter of the node count and
/// deletion of the edge count.
struct Distortion {
  double jitter = 0.01;
  double perturbation = 0.01;
  double clutter = 0.0;
  double deletion = 0.0;
};

/// low: 1% / 1% / 0 / 0, medium: 3% / 3% / 5% / 3%, high: 6% / 6% / 10% / 8%.
Distortion distortion_for(DistortionLevel level);

struct SyntheticPair {
  ShapeGraph first;
  ShapeGraph second;
  /// Node i of `first` corresponds to node true_perm[i] of `second`; indices
  /// past first's node count pair clutter nodes with null nodes.
  Permutation true_perm;
};

/// Random planar points in the unit square joined by a nearest-neighbour
/// spanning tree plus about n / 4 extra short edges; edges bend smoothly.
ShapeGraph random_base_graph(int node_count, std::uint64_t seed, int samples = 64);

SyntheticPair generate_pair(const ShapeGraph& base, const Distortion& distortion, std::uint64_t seed);
SyntheticPair generate_pair(const ShapeGraph& base, DistortionLevel level, std::uint64_t seed);

}  // namespace sgm
