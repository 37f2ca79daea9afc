#include <iostream>

#include <CLI11.hpp>

#include "gar/commands.hpp"

namespace {

// Exit codes: 0 ok, 1 unexpected, 2 config, 3 data/parse, 4 compatibility,
// 5 verification failure.
constexpr int kExitOk = 0;
constexpr int kExitGeneric = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitCompat = 4;
constexpr int kExitVerify = 5;

gar::ExperimentConfig resolve_config(const std::string& config_path, const std::string& preset,
                                     std::optional<std::uint64_t> seed_override) {
    gar::ExperimentConfig cfg;
    if (!config_path.empty()) {
        cfg = gar::load_config(config_path);
    } else {
        cfg = gar::preset(preset.empty() ? "default" : preset);
    }
    if (seed_override) {
        cfg.task.seed = *seed_override;
        gar::validate_experiment(cfg);
    }
    return cfg;
}

std::vector<gar::ModelVariant> parse_variants(const std::vector<std::string>& names) {
    std::vector<gar::ModelVariant> out;
    for (const auto& n : names) out.push_back(gar::variant_from_name(n));
    return out;
}

std::vector<gar::PoolingConfig> parse_poolings(const std::vector<std::string>& specs) {
    std::vector<gar::PoolingConfig> out;
    for (const auto& s : specs) {
        // "<d>:<max|avg>"
        auto colon = s.find(':');
        if (colon == std::string::npos) {
            throw gar::ConfigError("pooling spec '" + s + "' must look like '2:max'");
        }
        gar::PoolingConfig p;
        p.groups = std::stoul(s.substr(0, colon));
        std::string strat = s.substr(colon + 1);
        if (strat == "max") {
            p.strategy = gar::PoolStrategy::Max;
        } else if (strat == "avg") {
            p.strategy = gar::PoolStrategy::Average;
        } else {
            throw gar::ConfigError("pooling spec '" + s + "': strategy must be max or avg");
        }
        out.push_back(p);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-stage hierarchical temporal model for group activity recognition"};
    app.require_subcommand(1);

    std::string config_path, preset_name, out_dir, data_dir, report_dir, model_path;
    std::string split = "test";
    std::optional<std::uint64_t> seed_override;
    std::size_t gradcheck_seeds = 20;
    std::vector<std::string> variant_names, pooling_specs;

    auto add_config_opts = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config JSON file");
        sub->add_option("--preset", preset_name, "built-in preset name");
    };

    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    add_config_opts(gen);
    gen->add_option("--out", out_dir, "output dataset directory")->required();
    gen->add_option("--seed", seed_override, "override the task seed");

    CLI::App* validate = app.add_subcommand("validate", "validate a dataset directory");
    validate->add_option("--data", data_dir, "dataset directory")->required();

    CLI::App* train = app.add_subcommand("train", "train a model on a dataset");
    add_config_opts(train);
    train->add_option("--data", data_dir, "dataset directory")->required();
    train->add_option("--out", out_dir, "output model directory")->required();

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--model", model_path, "model checkpoint file")->required();
    eval->add_option("--data", data_dir, "dataset directory")->required();
    eval->add_option("--report", report_dir, "report output directory")->required();
    eval->add_option("--split", split, "dataset split (train|test)");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    gradcheck->add_option("--seeds", gradcheck_seeds, "number of random configurations");

    CLI::App* ablate = app.add_subcommand("ablate", "train and score model variants");
    add_config_opts(ablate);
    ablate->add_option("--data", data_dir, "dataset directory")->required();
    ablate->add_option("--report", report_dir, "report output directory")->required();
    ablate->add_option("--variants", variant_names, "variant rows (default: full b1..b7)");
    ablate->add_option("--poolings", pooling_specs,
                       "pooling sweep cells as <d>:<max|avg> (default: 1,2,4 x max,avg)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            gar::cmd_gen(resolve_config(config_path, preset_name, seed_override), out_dir);
        } else if (validate->parsed()) {
            if (!gar::cmd_validate(data_dir)) return kExitData;
        } else if (train->parsed()) {
            gar::cmd_train(resolve_config(config_path, preset_name, {}), data_dir, out_dir);
        } else if (eval->parsed()) {
            if (split != "train" && split != "test") {
                throw gar::ConfigError("--split must be train or test");
            }
            gar::cmd_eval(model_path, data_dir, report_dir, split);
        } else if (gradcheck->parsed()) {
            if (!gar::cmd_gradcheck(gradcheck_seeds)) return kExitVerify;
        } else if (ablate->parsed()) {
            gar::AblationRequest req = gar::default_ablation();
            if (!variant_names.empty()) req.variants = parse_variants(variant_names);
            if (!pooling_specs.empty()) req.poolings = parse_poolings(pooling_specs);
            gar::cmd_ablate(resolve_config(config_path, preset_name, {}), data_dir, report_dir,
                            req);
        }
    } catch (const gar::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const gar::CompatError& e) {
        std::cerr << "compatibility error: " << e.what() << "\n";
        return kExitCompat;
    } catch (const gar::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitData;
    } catch (const gar::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const gar::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitGeneric;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return kExitGeneric;
    }
    return kExitOk;
}
