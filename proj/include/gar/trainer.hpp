#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gar/numcore.hpp"

namespace gar {

struct EarlyStop {
    std::size_t patience = 10;
    double min_delta = 1e-4;
};

struct TrainHyper {
    double learning_rate = 1e-2; // synthetic-scale default; see paper_preset()
    double momentum = 0.9;
    std::size_t batch_size = 8;
    std::size_t max_epochs = 100;
    std::optional<double> clip_norm;
    std::uint64_t shuffle_seed = 0;
    std::optional<EarlyStop> early_stop;
};

// The learning rate and momentum used for the original full-scale CNN
// features. Far too small for the synthetic tasks here, kept as a named
// preset.
inline TrainHyper paper_preset() {
    TrainHyper h;
    h.learning_rate = 0.00001;
    h.momentum = 0.9;
    return h;
}

// List of views over the trainable tensors of a model, in a fixed order.
using ParamRefs = std::vector<std::span<double>>;

// Flat gradient buffers, index-aligned with a ParamRefs list.
using GradBuffers = std::vector<std::vector<double>>;

GradBuffers zeros_like(const ParamRefs& params);
void zero_buffers(GradBuffers& g);

// Momentum buffers, one per parameter tensor, zero-initialized.
class Velocity {
public:
    explicit Velocity(const ParamRefs& params);
    std::vector<std::vector<double>>& buffers() { return bufs_; }

private:
    std::vector<std::vector<double>> bufs_;

    friend void sgd_momentum_step(ParamRefs&, const GradBuffers&, Velocity&, double, double);
};

// Classic momentum: v <- mu v - lr g; p <- p + v.
void sgd_momentum_step(ParamRefs& params, const GradBuffers& grads, Velocity& vel, double lr,
                       double mu);

// Scales the gradients so their global L2 norm is at most clip; identity when
// already below. Returns the pre-clip norm.
double clip_global_norm(GradBuffers& grads, double clip);

struct EpochLog {
    std::size_t epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
    double seconds = 0.0;
};

struct BatchStats {
    double loss_sum = 0.0;    // summed over the scenes in the batch
    std::size_t correct = 0;  // stage-specific prediction counts
    std::size_t total = 0;
};

// Computes the summed gradient of the given scenes into grads (pre-zeroed;
// run_epochs divides by the batch size afterwards).
using BatchGradFn =
    std::function<BatchStats(std::span<const std::size_t> scene_indices, GradBuffers& grads)>;

// Shuffles scene order each epoch from shuffle_seed, accumulates batch
// gradients in index order, optionally clips, and applies momentum SGD.
// Throws Error naming the epoch and batch if the loss turns non-finite.
std::vector<EpochLog> run_epochs(std::size_t num_scenes, const TrainHyper& hyper,
                                 ParamRefs params, const BatchGradFn& batch_fn,
                                 const std::string& stage_name);

// Writes per-epoch rows as "<stage> <epoch> <loss> <accuracy>" lines
// (tab-separated); wall time is deliberately not persisted so reruns are
// byte-identical.
void append_log_rows(std::string& out, const std::string& stage,
                     std::span<const EpochLog> log);

} // namespace gar
