#include "gar/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gar {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& ctx) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError(ctx + ": unknown key '" + it.key() + "'");
    }
}

template <typename T>
void get_to(const json& j, const char* key, T& out, const std::string& ctx) {
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(out);
    } catch (const json::exception& e) {
        throw ConfigError(ctx + "." + key + ": " + e.what());
    }
}

LabelRule rule_from(const std::string& s) {
    if (s == "majority") return LabelRule::Majority;
    if (s == "key_person") return LabelRule::KeyPerson;
    if (s == "left_right") return LabelRule::LeftRight;
    throw ConfigError("unknown task rule '" + s + "'");
}

std::string rule_name(LabelRule r) {
    switch (r) {
    case LabelRule::Majority: return "majority";
    case LabelRule::KeyPerson: return "key_person";
    case LabelRule::LeftRight: return "left_right";
    }
    return "majority";
}

PoolStrategy strategy_from(const std::string& s) {
    if (s == "max") return PoolStrategy::Max;
    if (s == "avg" || s == "average") return PoolStrategy::Average;
    throw ConfigError("unknown pooling strategy '" + s + "'");
}

void parse_task(const json& j, TaskSpec& t) {
    check_keys(j,
               {"rule", "num_actions", "num_activities", "persons", "timesteps", "obs_dim",
                "latent_modes", "stay_prob", "noise_sigma", "marginal_matched", "seed"},
               "task");
    if (j.contains("rule")) t.rule = rule_from(j.at("rule").get<std::string>());
    get_to(j, "num_actions", t.num_actions, "task");
    get_to(j, "num_activities", t.num_activities, "task");
    if (j.contains("persons")) {
        const json& p = j.at("persons");
        if (p.is_array() && p.size() == 2) {
            p.at(0).get_to(t.persons_min);
            p.at(1).get_to(t.persons_max);
        } else if (p.is_number_unsigned()) {
            p.get_to(t.persons_min);
            t.persons_max = t.persons_min;
        } else {
            throw ConfigError("task.persons: expected a count or a [min, max] pair");
        }
    }
    get_to(j, "timesteps", t.timesteps, "task");
    get_to(j, "obs_dim", t.obs_dim, "task");
    get_to(j, "latent_modes", t.latent_modes, "task");
    get_to(j, "stay_prob", t.stay_prob, "task");
    get_to(j, "noise_sigma", t.noise_sigma, "task");
    get_to(j, "marginal_matched", t.marginal_matched, "task");
    get_to(j, "seed", t.seed, "task");
}

void parse_model(const json& j, ModelConfig& m) {
    check_keys(j,
               {"variant", "encoder_hidden", "feature_dim", "stage1_hidden", "stage1_timesteps",
                "stage2_hidden", "stage2_timesteps", "fc_dim", "pooling", "stage2_loss",
                "seed"},
               "model");
    if (j.contains("variant")) m.variant = variant_from_name(j.at("variant").get<std::string>());
    get_to(j, "encoder_hidden", m.encoder_hidden, "model");
    get_to(j, "feature_dim", m.feature_dim, "model");
    get_to(j, "stage1_hidden", m.stage1_hidden, "model");
    get_to(j, "stage1_timesteps", m.stage1_timesteps, "model");
    get_to(j, "stage2_hidden", m.stage2_hidden, "model");
    get_to(j, "stage2_timesteps", m.stage2_timesteps, "model");
    get_to(j, "fc_dim", m.fc_dim, "model");
    if (j.contains("pooling")) {
        const json& p = j.at("pooling");
        check_keys(p, {"strategy", "groups"}, "model.pooling");
        if (p.contains("strategy")) {
            m.pooling.strategy = strategy_from(p.at("strategy").get<std::string>());
        }
        get_to(p, "groups", m.pooling.groups, "model.pooling");
    }
    if (j.contains("stage2_loss")) {
        std::string mode = j.at("stage2_loss").get<std::string>();
        if (mode == "all") {
            m.stage2_loss_mode = LossMode::AllSteps;
        } else if (mode == "last") {
            m.stage2_loss_mode = LossMode::LastStep;
        } else {
            throw ConfigError("model.stage2_loss must be 'all' or 'last'");
        }
    }
    get_to(j, "seed", m.init_seed, "model");
}

void parse_train(const json& j, ExperimentConfig& cfg) {
    check_keys(j,
               {"learning_rate", "momentum", "batch_size", "stage1_epochs", "stage2_epochs",
                "clip_norm", "shuffle_seed", "early_stop"},
               "train");
    get_to(j, "learning_rate", cfg.train.learning_rate, "train");
    get_to(j, "momentum", cfg.train.momentum, "train");
    get_to(j, "batch_size", cfg.train.batch_size, "train");
    get_to(j, "stage1_epochs", cfg.stage1_epochs, "train");
    get_to(j, "stage2_epochs", cfg.stage2_epochs, "train");
    if (j.contains("clip_norm") && !j.at("clip_norm").is_null()) {
        double clip = 0.0;
        j.at("clip_norm").get_to(clip);
        cfg.train.clip_norm = clip;
    }
    get_to(j, "shuffle_seed", cfg.train.shuffle_seed, "train");
    if (j.contains("early_stop") && !j.at("early_stop").is_null()) {
        const json& e = j.at("early_stop");
        check_keys(e, {"patience", "min_delta"}, "train.early_stop");
        EarlyStop es;
        get_to(e, "patience", es.patience, "train.early_stop");
        get_to(e, "min_delta", es.min_delta, "train.early_stop");
        cfg.train.early_stop = es;
    }
}

} // namespace

ExperimentConfig parse_config_json(const std::string& text, const std::string& source_name) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(source_name + ": " + e.what());
    }
    check_keys(j, {"task", "model", "train", "data"}, source_name);

    ExperimentConfig cfg;
    if (j.contains("task")) parse_task(j.at("task"), cfg.task);
    if (j.contains("model")) parse_model(j.at("model"), cfg.model);
    if (j.contains("train")) parse_train(j.at("train"), cfg);
    if (j.contains("data")) {
        const json& d = j.at("data");
        check_keys(d, {"n_train", "n_test"}, "data");
        get_to(d, "n_train", cfg.n_train, "data");
        get_to(d, "n_test", cfg.n_test, "data");
    }

    // Fields that must agree between the task and the model are taken from
    // the task block.
    cfg.model.obs_dim = cfg.task.obs_dim;
    cfg.model.num_actions = cfg.task.num_actions;
    cfg.model.num_activities = cfg.task.num_activities;
    cfg.model.stage2_timesteps = cfg.task.timesteps;

    validate_experiment(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_json(ss.str(), path);
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["task"] = {{"rule", rule_name(cfg.task.rule)},
                 {"num_actions", cfg.task.num_actions},
                 {"num_activities", cfg.task.num_activities},
                 {"persons", {cfg.task.persons_min, cfg.task.persons_max}},
                 {"timesteps", cfg.task.timesteps},
                 {"obs_dim", cfg.task.obs_dim},
                 {"latent_modes", cfg.task.latent_modes},
                 {"stay_prob", cfg.task.stay_prob},
                 {"noise_sigma", cfg.task.noise_sigma},
                 {"marginal_matched", cfg.task.marginal_matched},
                 {"seed", cfg.task.seed}};
    j["model"] = {{"variant", variant_name(cfg.model.variant)},
                  {"encoder_hidden", cfg.model.encoder_hidden},
                  {"feature_dim", cfg.model.feature_dim},
                  {"stage1_hidden", cfg.model.stage1_hidden},
                  {"stage1_timesteps", cfg.model.stage1_timesteps},
                  {"stage2_hidden", cfg.model.stage2_hidden},
                  {"stage2_timesteps", cfg.model.stage2_timesteps},
                  {"fc_dim", cfg.model.fc_dim},
                  {"pooling",
                   {{"strategy",
                     cfg.model.pooling.strategy == PoolStrategy::Max ? "max" : "avg"},
                    {"groups", cfg.model.pooling.groups}}},
                  {"stage2_loss",
                   cfg.model.stage2_loss_mode == LossMode::AllSteps ? "all" : "last"},
                  {"seed", cfg.model.init_seed}};
    j["train"] = {{"learning_rate", cfg.train.learning_rate},
                  {"momentum", cfg.train.momentum},
                  {"batch_size", cfg.train.batch_size},
                  {"stage1_epochs", cfg.stage1_epochs},
                  {"stage2_epochs", cfg.stage2_epochs},
                  {"shuffle_seed", cfg.train.shuffle_seed}};
    if (cfg.train.clip_norm) {
        j["train"]["clip_norm"] = *cfg.train.clip_norm;
    } else {
        j["train"]["clip_norm"] = nullptr;
    }
    if (cfg.train.early_stop) {
        j["train"]["early_stop"] = {{"patience", cfg.train.early_stop->patience},
                                    {"min_delta", cfg.train.early_stop->min_delta}};
    } else {
        j["train"]["early_stop"] = nullptr;
    }
    j["data"] = {{"n_train", cfg.n_train}, {"n_test", cfg.n_test}};
    return j.dump(2) + "\n";
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig cfg;
    if (name == "default") {
        cfg.task.rule = LabelRule::Majority;
        cfg.task.num_actions = 3;
        cfg.task.num_activities = 3;
        cfg.task.persons_min = cfg.task.persons_max = 4;
        cfg.task.timesteps = 8;
        cfg.task.obs_dim = 8;
        cfg.task.latent_modes = 4;
        cfg.task.noise_sigma = 0.05;
        cfg.task.seed = 101;
        cfg.model.encoder_hidden = 16;
        cfg.model.feature_dim = 8;
        cfg.model.stage1_hidden = 8;
        cfg.model.stage1_timesteps = 4;
        cfg.model.stage2_hidden = 8;
        cfg.model.fc_dim = 16;
        cfg.model.pooling = {PoolStrategy::Max, 1};
        cfg.model.init_seed = 102;
        cfg.train.learning_rate = 0.02;
        cfg.train.shuffle_seed = 103;
        cfg.stage1_epochs = 30;
        cfg.stage2_epochs = 30;
        cfg.n_train = 60;
        cfg.n_test = 20;
    } else if (name == "overfit8") {
        cfg.task.rule = LabelRule::Majority;
        cfg.task.num_actions = 3;
        cfg.task.num_activities = 3;
        cfg.task.persons_min = cfg.task.persons_max = 3;
        cfg.task.timesteps = 6;
        cfg.task.obs_dim = 6;
        cfg.task.latent_modes = 3;
        cfg.task.noise_sigma = 0.02;
        cfg.task.seed = 111;
        cfg.model.encoder_hidden = 16;
        cfg.model.feature_dim = 8;
        cfg.model.stage1_hidden = 8;
        cfg.model.stage1_timesteps = 3;
        cfg.model.stage2_hidden = 8;
        cfg.model.fc_dim = 16;
        cfg.model.pooling = {PoolStrategy::Max, 1};
        cfg.model.init_seed = 112;
        cfg.train.learning_rate = 0.05;
        cfg.train.clip_norm = 5.0;
        cfg.train.shuffle_seed = 113;
        cfg.stage1_epochs = 500;
        cfg.stage2_epochs = 500;
        cfg.n_train = 8;
        cfg.n_test = 4;
    } else if (name == "key_person_mm") {
        cfg.task.rule = LabelRule::KeyPerson;
        cfg.task.num_actions = 4;
        cfg.task.num_activities = 4;
        cfg.task.persons_min = cfg.task.persons_max = 6;
        cfg.task.timesteps = 10;
        cfg.task.obs_dim = 10;
        cfg.task.latent_modes = 5;
        cfg.task.stay_prob = 0.1;
        cfg.task.noise_sigma = 0.05;
        cfg.task.marginal_matched = true;
        cfg.task.seed = 121;
        cfg.model.encoder_hidden = 24;
        cfg.model.feature_dim = 12;
        cfg.model.stage1_hidden = 12;
        cfg.model.stage1_timesteps = 5;
        cfg.model.stage2_hidden = 12;
        cfg.model.fc_dim = 24;
        // One pooling group per person keeps each ordered slot visible to the
        // scene stage; the key person is always the leftmost slot.
        cfg.model.pooling = {PoolStrategy::Max, 6};
        cfg.model.init_seed = 122;
        cfg.train.learning_rate = 0.02;
        cfg.train.clip_norm = 5.0;
        cfg.train.shuffle_seed = 123;
        cfg.stage1_epochs = 40;
        cfg.stage2_epochs = 60;
        cfg.n_train = 800;
        cfg.n_test = 200;
    } else if (name == "left_right") {
        cfg.task.rule = LabelRule::LeftRight;
        cfg.task.num_actions = 3;
        cfg.task.num_activities = 4;
        cfg.task.persons_min = cfg.task.persons_max = 6;
        cfg.task.timesteps = 10;
        cfg.task.obs_dim = 10;
        cfg.task.latent_modes = 4;
        cfg.task.stay_prob = 0.1;
        cfg.task.noise_sigma = 0.05;
        cfg.task.seed = 131;
        cfg.model.encoder_hidden = 24;
        cfg.model.feature_dim = 12;
        cfg.model.stage1_hidden = 12;
        cfg.model.stage1_timesteps = 5;
        cfg.model.stage2_hidden = 12;
        cfg.model.fc_dim = 24;
        cfg.model.pooling = {PoolStrategy::Max, 2};
        cfg.model.init_seed = 132;
        cfg.train.learning_rate = 0.02;
        cfg.train.clip_norm = 5.0;
        cfg.train.shuffle_seed = 133;
        cfg.stage1_epochs = 40;
        cfg.stage2_epochs = 60;
        cfg.n_train = 800;
        cfg.n_test = 200;
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    cfg.model.obs_dim = cfg.task.obs_dim;
    cfg.model.num_actions = cfg.task.num_actions;
    cfg.model.num_activities = cfg.task.num_activities;
    cfg.model.stage2_timesteps = cfg.task.timesteps;
    validate_experiment(cfg);
    return cfg;
}

std::vector<std::string> preset_names() {
    return {"default", "overfit8", "key_person_mm", "left_right"};
}

TrainHyper hyper_for_stage(const ExperimentConfig& cfg, int stage) {
    TrainHyper h = cfg.train;
    h.max_epochs = (stage == 1) ? cfg.stage1_epochs : cfg.stage2_epochs;
    return h;
}

void validate_experiment(const ExperimentConfig& cfg) {
    validate_spec(cfg.task);
    if (cfg.model.obs_dim != cfg.task.obs_dim) {
        throw ConfigError("model obs_dim must match task obs_dim");
    }
    if (cfg.model.num_actions != cfg.task.num_actions ||
        cfg.model.num_activities != cfg.task.num_activities) {
        throw ConfigError("model label spaces must match the task");
    }
    if (cfg.model.stage2_timesteps != cfg.task.timesteps) {
        throw ConfigError("model stage2_timesteps must match task timesteps");
    }
    if (cfg.model.pooling.groups > cfg.task.persons_min) {
        throw ConfigError("pooling groups exceed the minimum person count");
    }
    if (cfg.n_train == 0 || cfg.n_test == 0) {
        throw ConfigError("n_train and n_test must be >= 1");
    }
    if (cfg.train.learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
    if (cfg.train.momentum < 0.0 || cfg.train.momentum >= 1.0) {
        throw ConfigError("momentum must lie in [0, 1)");
    }
    // Building the model validates the variant-specific dimension rules.
    build_model(cfg.model);
}

} // namespace gar
