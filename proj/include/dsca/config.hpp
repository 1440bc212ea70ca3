#pragma once

#include <string>

#include <json.hpp>

#include "dsca/backbone.hpp"
#include "dsca/engine.hpp"

namespace dsca {

struct RunParams {
  int edits_total = 200;
  int replay_pool_size = 256;
  int checkpoints = 5;
  int tasks = 1;  // > 1 switches run/ablate to the task-sequence protocol
  uint64_t seed = 1;
  std::string variant = "full";
};

struct ExperimentConfig {
  WorldParams world;
  EngineConfig engine;
  RunParams run;
  std::string output_dir = "out";

  void validate() const;  // throws config_error
};

ExperimentConfig desk_default_config();

// Overwrites the engine block with the published hyperparameter profile.
void apply_paper_profile(ExperimentConfig& cfg);

// Strict parse: unknown keys are rejected with a line-precise message.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);
std::string experiment_config_to_json(const ExperimentConfig& cfg);

} // namespace dsca
