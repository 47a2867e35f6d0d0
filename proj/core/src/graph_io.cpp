#include <sgm/graph_io.hpp>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include <sgm/error.hpp>

namespace sgm {
namespace {

using nlohmann::json;

Matrix rows_from_json(const json& rows, int k, const char* what) {
  if (!rows.is_array()) throw parse_error(std::string(what) + " must be an array");
  Matrix m(static_cast<Eigen::Index>(rows.size()), k);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const json& row = rows[i];
    if (!row.is_array() || static_cast<int>(row.size()) != k)
      throw parse_error(std::string(what) + " entries must have k coordinates");
    for (int c = 0; c < k; ++c) m(static_cast<Eigen::Index>(i), c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json rows_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

Matrix edge_points(const ShapeGraph& g, int s) {
  const Edge& e = g.edge(s);
  Matrix points = srvf_inverse(e.shape, g.node(e.source)).points();
  const Eigen::Index last = points.rows() - 1;
  const RowVector drift = g.nodes().row(e.target) - points.row(last);
  for (Eigen::Index i = 0; i <= last; ++i) points.row(i) += (static_cast<double>(i) / last) * drift;
  points.row(last) = g.nodes().row(e.target);
  return points;
}

ShapeGraph parse_graph(const std::string& text, int samples) {
  if (samples < 2) throw invalid_input("edges need at least two samples");
  try {
    const json j = json::parse(text);
    const int k = j.at("k").get<int>();
    if (k < 1) throw parse_error("k must be positive");
    ShapeGraph g(rows_from_json(j.at("nodes"), k, "nodes"));
    const int n = g.node_count();
    for (const json& edge : j.value("edges", json::array())) {
      const int a = edge.at("source").get<int>();
      const int b = edge.at("target").get<int>();
      if (a < 0 || b < 0 || a >= n || b >= n) throw parse_error("edge endpoint out of range");
      const Matrix points = rows_from_json(edge.at("points"), k, "edge points");
      if (points.rows() < 2) throw parse_error("edges need at least two points");
      if ((points.row(0) - g.nodes().row(a)).norm() > kEndpointTolerance ||
          (points.row(points.rows() - 1) - g.nodes().row(b)).norm() > kEndpointTolerance)
        throw parse_error("edge " + std::to_string(a) + "-" + std::to_string(b) + " does not end on its nodes");
      const double weight = edge.value("weight", 1.0);
      g.add_edge(a, b, srvf_transform(resample_by_arclength(points, samples)), weight);
    }
    return g;
  } catch (const json::exception& e) {
    throw parse_error(std::string("malformed graph: ") + e.what());
  }
}

std::string graph_to_json(const ShapeGraph& g) {
  json edges = json::array();
  for (int s = 0; s < g.edge_count(); ++s) {
    const Edge& e = g.edge(s);
    edges.push_back({{"source", e.source}, {"target", e.target}, {"weight", e.weight},
                     {"points", rows_to_json(edge_points(g, s))}});
  }
  const json j{{"k", g.dim()}, {"nodes", rows_to_json(g.nodes())}, {"edges", std::move(edges)}};
  return j.dump() + "\n";
}

ShapeGraph load_graph(const std::filesystem::path& path, int samples) {
  try {
    return parse_graph(read_text(path), samples);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void save_graph(const std::filesystem::path& path, const ShapeGraph& g) { write_text_atomic(path, graph_to_json(g)); }

PairTruth parse_truth(const std::string& text) {
  try {
    const json j = json::parse(text);
    PairTruth truth;
    truth.true_perm = Permutation(j.at("true_perm").get<std::vector<int>>());
    truth.level = j.value("level", std::string());
    truth.seed = j.value("seed", std::uint64_t{0});
    return truth;
  } catch (const json::exception& e) {
    throw parse_error(std::string("malformed truth file: ") + e.what());
  } catch (const Error& e) {
    throw parse_error(std::string("malformed truth file: ") + e.what());
  }
}

std::string truth_to_json(const PairTruth& truth) {
  const json j{{"true_perm", truth.true_perm.map()}, {"level", truth.level}, {"seed", truth.seed}};
  return j.dump() + "\n";
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw invalid_input("cannot write " + path.string());
    out << text;
    if (!out) throw invalid_input("cannot write " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace sgm
