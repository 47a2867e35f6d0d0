#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <sgm/autodiff.hpp>

namespace sgm {

inline constexpr int kCheckpointVersion = 1;

/// Serialized training state. Parameters, optimizer moments and the loss
/// history round-trip bit-exactly.
struct Checkpoint {
  ad::ParameterMap params;
  std::optional<ad::AdamState> optimizer;
  int epochs_completed = 0;
  std::vector<double> loss_history;
  /// Training configuration as a JSON document; empty when unknown.
  std::string config_json;
};

std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sgm
