#pragma once

#include <string>
#include <vector>

#include "gar/config.hpp"
#include "gar/dataset_io.hpp"
#include "gar/gradcheck.hpp"

namespace gar {

// Command bodies behind the CLI. They throw gar errors; the CLI maps error
// types to exit codes. All printing goes to stdout, progress to stderr.

void cmd_gen(const ExperimentConfig& cfg, const std::string& out_dir);

// Returns true when the dataset validates cleanly.
bool cmd_validate(const std::string& data_dir);

void cmd_train(const ExperimentConfig& cfg, const std::string& data_dir,
               const std::string& out_dir);

void cmd_eval(const std::string& model_path, const std::string& data_dir,
              const std::string& report_dir, const std::string& split);

// Returns true when every parameter group passes.
bool cmd_gradcheck(std::size_t seeds);

struct AblationRequest {
    std::vector<ModelVariant> variants;                       // one table row each
    std::vector<PoolingConfig> poolings;                      // Full-variant sweep rows
};
AblationRequest default_ablation();

void cmd_ablate(const ExperimentConfig& cfg, const std::string& data_dir,
                const std::string& report_dir, const AblationRequest& request);

} // namespace gar
