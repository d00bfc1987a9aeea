#pragma once

#include <optional>
#include <string>

#include "json.hpp"

#include "fscil/dataset.hpp"
#include "fscil/protocol.hpp"
#include "fscil/session_store.hpp"

namespace fscil {

struct Paths {
  std::string train = "train.fds";
  std::string test = "test.fds";
  std::string store = "store.fscs";
  std::string report_dir = "report";
  std::string split;  // optional class-order JSON
};

/// Experiment config file: protocol, train, flags, paths, and an optional
/// synth block for gen-synth.
struct ExperimentConfig {
  ProtocolSpec protocol;
  TrainConfig train;
  AblationFlags flags;
  Paths paths;
  SynthSpec synth;

  /// Replaces protocol.seed and every seed derived from it.
  void override_seed(std::uint64_t seed);
};

ExperimentConfig config_from_json(const nlohmann::json& j, const std::string& base_dir = "");
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Reads a class-order split file: {"base": [...], "sessions": [[...], ...]}.
std::vector<int> load_class_order(const std::string& path, ProtocolSpec& spec);

nlohmann::json report_to_json(const SessionReport& report);
SessionReport report_from_json(const nlohmann::json& j);

}  // namespace fscil
