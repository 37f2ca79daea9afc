#pragma once

#include <optional>
#include <string>

#include "gar/lstm.hpp"
#include "gar/pooling.hpp"
#include "gar/scene.hpp"
#include "gar/trainer.hpp"

namespace gar {

// Full is the two-stage model; B1..B7 are the ablation baselines:
//   B1 frame classification from a scene-level feature
//   B2 person features pooled, frame classification
//   B3 as B2 but the encoder is pre-trained on person actions and frozen
//   B4 scene-level feature fed to the group LSTM
//   B5 pooled person features fed to the group LSTM
//   B6 Full without the person LSTM (actions classified from the encoder)
//   B7 Full without the group LSTM (frame classification after the fc layer)
enum class ModelVariant { Full, B1, B2, B3, B4, B5, B6, B7 };

std::string variant_name(ModelVariant v);
ModelVariant variant_from_name(const std::string& name);

// Which sub-networks a variant owns.
struct VariantShape {
    bool person_encoder = false; // encoder applied per person
    bool scene_encoder = false;  // encoder applied to the whole-frame feature
    bool stage1_lstm = false;
    bool person_head = false;
    bool fc = false;
    bool stage2_lstm = false;
    bool has_stage1_phase = false; // trained on person-action labels first
};
VariantShape variant_shape(ModelVariant v);

struct ModelConfig {
    std::size_t obs_dim = 8;
    std::size_t encoder_hidden = 16;
    std::size_t feature_dim = 8;     // encoder output (the x_tk stand-in)
    std::size_t stage1_hidden = 8;   // person LSTM units
    std::size_t stage1_timesteps = 4;
    std::size_t stage2_hidden = 8;   // group LSTM units
    std::size_t stage2_timesteps = 8;
    std::size_t fc_dim = 16;
    PoolingConfig pooling;
    std::size_t num_actions = 3;
    std::size_t num_activities = 3;
    ModelVariant variant = ModelVariant::Full;
    LossMode stage2_loss_mode = LossMode::AllSteps;
    std::uint64_t init_seed = 1;

    bool operator==(const ModelConfig&) const = default;
};

// Two-layer perceptron with a tanh hidden layer; stands in for the image
// feature extractor. Output is linear.
struct Encoder {
    Matrix w1; // encoder_hidden x obs_dim
    Vec b1;
    Matrix w2; // feature_dim x encoder_hidden
    Vec b2;

    bool operator==(const Encoder&) const = default;
};

// Affine layer between the pooled scene representation and the group LSTM.
struct FcLayer {
    Matrix w;
    Vec b;

    bool operator==(const FcLayer&) const = default;
};

// Only the components the variant demands are present.
struct ModelParams {
    std::optional<Encoder> encoder;
    std::optional<LstmParams> stage1;
    std::optional<SoftmaxHead> person_head;
    std::optional<FcLayer> fc;
    std::optional<LstmParams> stage2;
    std::optional<SoftmaxHead> scene_head;

    bool operator==(const ModelParams&) const = default;
};

struct TrainedModel {
    ModelConfig config;
    ModelParams params;
    bool stage1_done = false;
    bool stage2_done = false;

    bool operator==(const TrainedModel&) const = default;
};

// Allocates and initializes exactly the sub-networks the variant needs.
// Throws ConfigError on inconsistent settings (e.g. a scene-level variant
// with more than one pooling group).
TrainedModel build_model(const ModelConfig& cfg);

// --- forward pieces ---------------------------------------------------

Vec encode(const Encoder& e, const Vec& obs);

// Whole-frame observation stand-in: mean over the persons present at t.
Vec scene_observation(const Scene& scene, std::size_t t);

// Person LSTM hidden state at every frame. The sequence is processed in
// non-overlapping windows of `window` steps; state resets at each window
// boundary, and frame t takes its hidden state from the window containing it.
std::vector<Vec> person_hidden_states(const LstmParams& p, std::span<const Vec> xs,
                                      std::size_t window);

// The pooled per-frame representation fed to the scene path (before the fc
// layer, where the variant has one). For scene-level variants this is the
// encoded whole-frame feature.
std::vector<Vec> scene_sequence(const TrainedModel& model, const Scene& scene);

// --- training ----------------------------------------------------------

// Tensors updated during each stage, in a fixed documented order. Frozen
// components are simply not listed, which is what enforces stage freezing.
ParamRefs stage1_param_refs(TrainedModel& model);
ParamRefs stage2_param_refs(TrainedModel& model);

struct SceneStats {
    double loss = 0.0;
    std::size_t correct = 0;
    std::size_t total = 0;
};

// Loss, prediction counts, and parameter gradients (aligned with the
// corresponding param-ref list) of one scene. Gradients are accumulated, not
// overwritten.
SceneStats stage1_scene_gradients(const TrainedModel& model, const Scene& scene,
                                  GradBuffers& grads);
SceneStats stage2_scene_gradients(const TrainedModel& model, const Scene& scene,
                                  GradBuffers& grads);

double stage1_scene_loss(const TrainedModel& model, const Scene& scene);
double stage2_scene_loss(const TrainedModel& model, const Scene& scene);

// Person-action training phase (encoder, person LSTM and person head).
std::vector<EpochLog> train_stage1(TrainedModel& model, std::span<const Scene> scenes,
                                   const TrainHyper& hyper);

// Group-activity phase. Components trained during stage 1 stay frozen.
std::vector<EpochLog> train_stage2(TrainedModel& model, std::span<const Scene> scenes,
                                   const TrainHyper& hyper);

// --- inference ----------------------------------------------------------

struct Prediction {
    std::size_t group_label = 0;                          // argmax of the mean distribution
    std::vector<Vec> group_dists;                         // per timestep
    std::vector<std::vector<std::size_t>> person_actions; // [person][t]; empty w/o person head
};
Prediction predict(const TrainedModel& model, const Scene& scene);

struct Metrics {
    double frame_accuracy = 0.0; // per-frame group accuracy (the default report)
    double scene_accuracy = 0.0; // per-scene label via mean distribution
    std::vector<double> per_class_accuracy;
    std::vector<std::vector<std::size_t>> confusion; // [true][pred], frame counts
    std::optional<double> person_action_accuracy;
    std::size_t num_scenes = 0;
    std::size_t num_frames = 0;
};
Metrics evaluate(const TrainedModel& model, std::span<const Scene> scenes);

// Lowest index wins ties everywhere an argmax is taken.
std::size_t argmax_lowest(const Vec& v);

// Throws if the scene does not fit the model (dims, labels, person count).
void check_scene_compat(const ModelConfig& cfg, const Scene& scene);

} // namespace gar
