#pragma once

#include <string>

#include "gar/hierarchy.hpp"
#include "gar/scenegen.hpp"
#include "gar/trainer.hpp"

namespace gar {

// One declarative file describes a full experiment: the synthetic task, the
// model, the optimizer, and the dataset sizes. Every field has a default;
// unknown keys are rejected so typos cannot silently change a run.
struct ExperimentConfig {
    TaskSpec task;
    ModelConfig model;
    TrainHyper train;
    std::size_t stage1_epochs = 100;
    std::size_t stage2_epochs = 100;
    std::size_t n_train = 60;
    std::size_t n_test = 20;
};

ExperimentConfig parse_config_json(const std::string& text, const std::string& source_name);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);

// Named built-in experiment setups:
//   default       small majority-rule task for quick runs
//   overfit8      eight separable scenes, both stages driven to 100%
//   key_person_mm marginal-matched key-person benchmark (temporal info only)
//   left_right    side-dependent activities probing sub-group pooling
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// Hyperparameters for one training stage (shared fields + per-stage epochs).
TrainHyper hyper_for_stage(const ExperimentConfig& cfg, int stage);

// Cross-checks task vs model fields (dims, label spaces, timesteps).
void validate_experiment(const ExperimentConfig& cfg);

} // namespace gar
