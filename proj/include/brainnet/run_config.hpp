#pragma once

#include <string>

#include <json.hpp>

#include "brainnet/data_synth.hpp"
#include "brainnet/model.hpp"
#include "brainnet/train_eval.hpp"

namespace brainnet {

// One flat key-value document drives a whole run; keys are exactly the field
// names of ModelConfig / TrainConfig / SynthSpec (the root seed is shared).
// Unknown keys raise ConfigError naming the key and the nearest valid one.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SynthSpec synth;
  double test_fraction = 0.2;

  // Keeps the duplicated fields (seed, n_regions, n_classes, loss weights)
  // consistent across the three sub-configs.
  void sync();
};

RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);
nlohmann::json run_config_to_json(const RunConfig& cfg);

// Nearest valid key by edit distance, empty if nothing is close.
std::string suggest_config_key(const std::string& unknown);

}  // namespace brainnet
