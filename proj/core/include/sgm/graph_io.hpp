#pragma once

// JSON exchange format for shape graphs:
//   {"k": 2, "nodes": [[x, y], ...],
//    "edges": [{"source": i, "target": j, "points": [[x, y], ...], "weight": w}]}
// Edge polylines run from source to target and must start and end on their
// nodes. "weight" is optional and defaults to 1.

#include <cstdint>
#include <filesystem>
#include <string>

#include <sgm/shape_graph.hpp>

namespace sgm {

inline constexpr int kDefaultSamples = 64;
inline constexpr double kEndpointTolerance = 1e-6;

/// Polyline of edge s from its source to its target node, rebuilt from the
/// SRVF with the integration drift spread linearly so both ends land exactly
/// on the nodes.
Matrix edge_points(const ShapeGraph& g, int s);

/// Edges are resampled by arc length to `samples` points before the SRVF
/// transform.
ShapeGraph parse_graph(const std::string& text, int samples = kDefaultSamples);
std::string graph_to_json(const ShapeGraph& g);

ShapeGraph load_graph(const std::filesystem::path& path, int samples = kDefaultSamples);
void save_graph(const std::filesystem::path& path, const ShapeGraph& g);

/// Ground truth written next to a synthetic pair.
struct PairTruth {
  Permutation true_perm;
  std::string level;
  std::uint64_t seed = 0;
};

PairTruth parse_truth(const std::string& text);
std::string truth_to_json(const PairTruth& truth);

std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace sgm
