#include "gar/scenegen.hpp"

#include <algorithm>
#include <cmath>

namespace gar {

namespace {

constexpr std::uint64_t kModeStream = 0x6d6f646573ULL; // emission mode draws

void check(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("task spec: " + msg);
}

Vec unit_norm_vector(std::size_t dim, Rng& rng) {
    Vec v(dim);
    double norm2 = 0.0;
    do {
        for (double& x : v) x = rng.gaussian();
        norm2 = dot(v, v);
    } while (norm2 == 0.0);
    double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
    return v;
}

// Cyclic step size of action a's chain. Distinct across actions when the
// marginals are matched; otherwise every action walks its own mode set.
std::size_t chain_step(const TaskSpec& spec, std::size_t action) {
    if (spec.latent_modes == 1) return 0;
    if (spec.marginal_matched) return (action % (spec.latent_modes - 1)) + 1;
    return 1;
}

struct SceneLayout {
    std::vector<std::size_t> actions;           // per person
    std::vector<std::pair<double, double>> pos; // per person
    std::size_t group_label = 0;
};

SceneLayout sample_layout(const TaskSpec& spec, std::size_t k, Rng& rng) {
    SceneLayout out;
    out.actions.resize(k);
    out.pos.resize(k);
    switch (spec.rule) {
    case LabelRule::Majority: {
        for (std::size_t p = 0; p < k; ++p) out.actions[p] = rng.below(spec.num_actions);
        for (std::size_t p = 0; p < k; ++p) {
            out.pos[p] = {rng.next_double(), rng.next_double()};
        }
        std::vector<std::size_t> counts(spec.num_actions, 0);
        for (std::size_t a : out.actions) counts[a]++;
        std::size_t modal = 0;
        for (std::size_t a = 1; a < counts.size(); ++a) {
            if (counts[a] > counts[modal]) modal = a;
        }
        out.group_label = modal % spec.num_activities;
        break;
    }
    case LabelRule::KeyPerson: {
        // Person 0 is the key and sits strictly left of everyone else.
        for (std::size_t p = 0; p < k; ++p) out.actions[p] = rng.below(spec.num_actions);
        out.pos[0] = {rng.uniform(0.0, 0.1), rng.next_double()};
        for (std::size_t p = 1; p < k; ++p) {
            out.pos[p] = {rng.uniform(0.15, 0.95), rng.next_double()};
        }
        out.group_label = out.actions[0] % spec.num_activities;
        break;
    }
    case LabelRule::LeftRight: {
        // First half of the people on the left court side, rest on the right.
        // Exactly one key person is active; everyone else idles (action 0).
        const std::size_t half_people = k / 2;
        for (std::size_t p = 0; p < k; ++p) {
            double x = (p < half_people) ? rng.uniform(0.05, 0.45) : rng.uniform(0.55, 0.95);
            out.pos[p] = {x, rng.next_double()};
        }
        std::fill(out.actions.begin(), out.actions.end(), 0);
        const std::size_t key = rng.below(k);
        const std::size_t active = 1 + rng.below(spec.num_actions - 1);
        out.actions[key] = active;
        const std::size_t half_acts = spec.num_activities / 2;
        const std::size_t side = (key < half_people) ? 0 : 1;
        out.group_label = side * half_acts + (active - 1) % half_acts;
        break;
    }
    }
    return out;
}

} // namespace

void validate_spec(const TaskSpec& spec) {
    check(spec.num_actions >= 1, "num_actions must be >= 1");
    check(spec.num_activities >= 1, "num_activities must be >= 1");
    check(spec.persons_min >= 1 && spec.persons_min <= spec.persons_max,
          "persons range must satisfy 1 <= min <= max");
    check(spec.timesteps >= 1, "timesteps must be >= 1");
    check(spec.obs_dim >= 1, "obs_dim must be >= 1");
    check(spec.latent_modes >= 1, "latent_modes must be >= 1");
    check(spec.noise_sigma >= 0.0, "noise_sigma must be >= 0");
    check(spec.stay_prob >= 0.0 && spec.stay_prob < 1.0, "stay_prob must be in [0,1)");
    switch (spec.rule) {
    case LabelRule::Majority:
    case LabelRule::KeyPerson:
        check(spec.num_activities <= spec.num_actions,
              "num_activities must not exceed num_actions for this rule");
        break;
    case LabelRule::LeftRight:
        check(spec.num_activities % 2 == 0 && spec.num_activities >= 2,
              "left_right needs an even activity count");
        check(spec.num_actions >= 2, "left_right needs at least one active action");
        check(spec.num_actions - 1 >= spec.num_activities / 2,
              "left_right needs an active action per base activity");
        check(spec.persons_min >= 2 && spec.persons_min % 2 == 0 && spec.persons_max % 2 == 0,
              "left_right needs an even person count");
        break;
    }
    if (spec.marginal_matched) {
        check(spec.num_actions <= spec.latent_modes - 1,
              "marginal matching needs latent_modes >= num_actions + 1 for distinct dynamics");
    }
}

std::vector<std::vector<Vec>> emission_modes(const TaskSpec& spec) {
    Rng rng = Rng(spec.seed).fork(kModeStream);
    std::vector<std::vector<Vec>> modes(spec.num_actions);
    if (spec.marginal_matched) {
        std::vector<Vec> shared(spec.latent_modes);
        for (Vec& m : shared) m = unit_norm_vector(spec.obs_dim, rng);
        for (auto& row : modes) row = shared;
    } else {
        for (auto& row : modes) {
            row.resize(spec.latent_modes);
            for (Vec& m : row) m = unit_norm_vector(spec.obs_dim, rng);
        }
    }
    return modes;
}

Scene generate_scene(const TaskSpec& spec, std::uint64_t scene_id) {
    validate_spec(spec);
    const auto modes = emission_modes(spec);
    Rng rng = Rng(spec.seed).fork(scene_id);

    const std::size_t span = spec.persons_max - spec.persons_min + 1;
    const std::size_t k = spec.persons_min + (span > 1 ? rng.below(span) : 0);
    SceneLayout layout = sample_layout(spec, k, rng);

    Scene scene;
    scene.id = scene_id;
    scene.group_labels.assign(spec.timesteps, layout.group_label);
    scene.persons.resize(k);
    for (std::size_t p = 0; p < k; ++p) {
        Tracklet& tr = scene.persons[p];
        const std::size_t action = layout.actions[p];
        const std::size_t step = chain_step(spec, action);
        tr.actions.assign(spec.timesteps, action);
        tr.bbox.assign(spec.timesteps, layout.pos[p]);
        tr.obs.resize(spec.timesteps);
        std::size_t mode = rng.below(spec.latent_modes);
        for (std::size_t t = 0; t < spec.timesteps; ++t) {
            if (t > 0) {
                bool stay = spec.stay_prob > 0.0 && rng.next_double() < spec.stay_prob;
                if (!stay) mode = (mode + step) % spec.latent_modes;
            }
            Vec o = modes[action][mode];
            if (spec.noise_sigma > 0.0) {
                for (double& x : o) x += spec.noise_sigma * rng.gaussian();
            }
            tr.obs[t] = std::move(o);
        }
    }
    return scene;
}

Dataset generate_dataset(const TaskSpec& spec, std::size_t n_train, std::size_t n_test) {
    if (n_train == 0 || n_test == 0) {
        throw ConfigError("generate_dataset: both splits need at least one scene");
    }
    validate_spec(spec);
    Dataset ds;
    ds.train.reserve(n_train);
    ds.test.reserve(n_test);
    for (std::size_t i = 0; i < n_train; ++i) ds.train.push_back(generate_scene(spec, i));
    for (std::size_t i = 0; i < n_test; ++i) {
        ds.test.push_back(generate_scene(spec, n_train + i));
    }
    return ds;
}

std::vector<std::string> action_names(const TaskSpec& spec) {
    std::vector<std::string> names;
    names.reserve(spec.num_actions);
    for (std::size_t a = 0; a < spec.num_actions; ++a) names.push_back("act_" + std::to_string(a));
    return names;
}

std::vector<std::string> activity_names(const TaskSpec& spec) {
    std::vector<std::string> names;
    names.reserve(spec.num_activities);
    if (spec.rule == LabelRule::LeftRight) {
        const std::size_t half = spec.num_activities / 2;
        for (std::size_t b = 0; b < half; ++b) names.push_back("left_" + std::to_string(b));
        for (std::size_t b = 0; b < half; ++b) names.push_back("right_" + std::to_string(b));
    } else {
        for (std::size_t g = 0; g < spec.num_activities; ++g) {
            names.push_back("activity_" + std::to_string(g));
        }
    }
    return names;
}

} // namespace gar
