#include <sgm/checkpoint.hpp>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include <sgm/error.hpp>

namespace sgm {
namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json values = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) values.push_back(m(i, j));
  return json{{"shape", {m.rows(), m.cols()}}, {"values", std::move(values)}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("shape").at(0).get<Eigen::Index>();
  const auto cols = j.at("shape").at(1).get<Eigen::Index>();
  const json& values = j.at("values");
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(values.size()) != rows * cols)
    throw parse_error("checkpoint tensor has inconsistent shape");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = values[k++].get<double>();
  return m;
}

json map_to_json(const ad::ParameterMap& map) {
  json out = json::object();
  for (const auto& [name, value] : map) out[name] = matrix_to_json(value);
  return out;
}

ad::ParameterMap map_from_json(const json& j) {
  ad::ParameterMap map;
  for (const auto& [name, value] : j.items()) map.emplace(name, matrix_from_json(value));
  return map;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& checkpoint) {
  json j;
  j["format"] = "sgm-checkpoint";
  j["version"] = kCheckpointVersion;
  j["epochs_completed"] = checkpoint.epochs_completed;
  j["params"] = map_to_json(checkpoint.params);
  j["loss_history"] = checkpoint.loss_history;
  if (checkpoint.optimizer) {
    j["optimizer"] = {
        {"step", checkpoint.optimizer->step},
        {"first_moment", map_to_json(checkpoint.optimizer->first_moment)},
        {"second_moment", map_to_json(checkpoint.optimizer->second_moment)},
    };
  }
  if (!checkpoint.config_json.empty()) j["config"] = json::parse(checkpoint.config_json);
  return j.dump(1);
}

Checkpoint checkpoint_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.value("format", std::string()) != "sgm-checkpoint") throw parse_error("not an sgm checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw parse_error("unsupported checkpoint version " + std::to_string(version));
    Checkpoint c;
    c.epochs_completed = j.value("epochs_completed", 0);
    c.params = map_from_json(j.at("params"));
    if (j.contains("loss_history")) c.loss_history = j["loss_history"].get<std::vector<double>>();
    if (j.contains("optimizer")) {
      ad::AdamState state;
      state.step = j["optimizer"].at("step").get<long long>();
      state.first_moment = map_from_json(j["optimizer"].at("first_moment"));
      state.second_moment = map_from_json(j["optimizer"].at("second_moment"));
      c.optimizer = std::move(state);
    }
    if (j.contains("config")) c.config_json = j["config"].dump();
    return c;
  } catch (const json::exception& e) {
    throw parse_error(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string text = checkpoint_to_json(checkpoint);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw invalid_input("cannot write checkpoint " + path.string());
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot read checkpoint " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return checkpoint_from_json(buffer.str());
}

}  // namespace sgm
