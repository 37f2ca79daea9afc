#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gar/scene.hpp"

namespace gar {

// How the group label is derived from the sampled person actions.
//   Majority:  the modal action (lowest index on ties) names the activity.
//   KeyPerson: the action of the leftmost person (by bbox) names the activity.
//   LeftRight: one active person in an otherwise idle scene; its action picks
//              the base activity and its side (first or second half of the
//              bbox order) picks the left or right variant.
enum class LabelRule { Majority, KeyPerson, LeftRight };

// Synthetic task description. Each action is a Markov chain over latent
// emission modes; an observation is the current mode's vector plus isotropic
// Gaussian noise. With marginal_matched set, all actions share one mode set
// and walk it with action-specific cyclic steps, so the per-frame observation
// distribution is identical across actions and only the temporal order is
// informative.
struct TaskSpec {
    LabelRule rule = LabelRule::Majority;
    std::size_t num_actions = 3;
    std::size_t num_activities = 3;
    std::size_t persons_min = 4;
    std::size_t persons_max = 4;
    std::size_t timesteps = 8;
    std::size_t obs_dim = 8;
    std::size_t latent_modes = 4;   // modes per action chain
    double stay_prob = 0.1;         // self-transition probability of each chain
    double noise_sigma = 0.05;
    bool marginal_matched = false;
    std::uint64_t seed = 1;

    bool operator==(const TaskSpec&) const = default;
};

// Throws ConfigError when the fields are inconsistent with the rule.
void validate_spec(const TaskSpec& spec);

// Mode emission vectors derived deterministically from the spec seed.
// Layout: modes[action][mode]; under marginal matching every action row is
// the same shared set.
std::vector<std::vector<Vec>> emission_modes(const TaskSpec& spec);

Scene generate_scene(const TaskSpec& spec, std::uint64_t scene_id);

struct Dataset {
    std::vector<Scene> train;
    std::vector<Scene> test;
};

// Scene ids 0..n_train-1 are the train split, the next n_test ids the test
// split; each scene is generated from its own (seed, id) substream.
Dataset generate_dataset(const TaskSpec& spec, std::size_t n_train, std::size_t n_test);

// Names used in manifests, index-aligned with the label spaces.
std::vector<std::string> action_names(const TaskSpec& spec);
std::vector<std::string> activity_names(const TaskSpec& spec);

} // namespace gar
