#include "gar/commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "gar/checkpoint.hpp"

namespace fs = std::filesystem;

namespace gar {

namespace {

bool verbose() { return std::getenv("GAR_VERBOSE") != nullptr; }

void print_epochs(const std::string& stage, const std::vector<EpochLog>& log) {
    if (!verbose()) return;
    for (const EpochLog& e : log) {
        std::cerr << stage << " epoch " << e.epoch << " loss " << e.loss << " acc " << e.accuracy
                  << "\n";
    }
}

void check_manifest_compat(const DatasetManifest& m, const ModelConfig& cfg) {
    if (m.obs_dim != cfg.obs_dim) {
        throw CompatError("dataset obs_dim " + std::to_string(m.obs_dim) + " vs model obs_dim " +
                          std::to_string(cfg.obs_dim));
    }
    if (m.num_actions() != cfg.num_actions) {
        throw CompatError("dataset has " + std::to_string(m.num_actions()) +
                          " actions, model expects " + std::to_string(cfg.num_actions));
    }
    if (m.num_activities() != cfg.num_activities) {
        throw CompatError("dataset has " + std::to_string(m.num_activities()) +
                          " activities, model expects " + std::to_string(cfg.num_activities));
    }
}

std::ofstream open_report(const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

void write_metrics_report(const Metrics& m, const DatasetManifest& manifest,
                          const fs::path& dir) {
    std::ofstream out = open_report(dir / "metrics.tsv");
    out << "overall\tframe_accuracy\t" << format_real(m.frame_accuracy) << '\n';
    out << "overall\tscene_accuracy\t" << format_real(m.scene_accuracy) << '\n';
    if (m.person_action_accuracy) {
        out << "overall\tperson_action_accuracy\t" << format_real(*m.person_action_accuracy)
            << '\n';
    }
    out << "overall\tnum_scenes\t" << m.num_scenes << '\n';
    out << "overall\tnum_frames\t" << m.num_frames << '\n';
    for (std::size_t c = 0; c < m.per_class_accuracy.size(); ++c) {
        out << "class\t" << manifest.activity_names[c] << '\t'
            << format_real(m.per_class_accuracy[c]) << '\n';
    }

    std::ofstream conf = open_report(dir / "confusion.tsv");
    conf << "labels";
    for (const auto& n : manifest.activity_names) conf << '\t' << n;
    conf << '\n';
    for (std::size_t r = 0; r < m.confusion.size(); ++r) {
        conf << manifest.activity_names[r];
        for (std::size_t c = 0; c < m.confusion[r].size(); ++c) conf << '\t' << m.confusion[r][c];
        conf << '\n';
    }
}

struct CellResult {
    std::string label;
    bool ok = false;
    std::string status;
    double frame_accuracy = 0.0;
    double scene_accuracy = 0.0;
};

CellResult run_cell(const std::string& label, ExperimentConfig cfg, const LoadedDataset& data) {
    CellResult cell;
    cell.label = label;
    try {
        check_manifest_compat(data.manifest, cfg.model);
        TrainedModel model = build_model(cfg.model);
        if (variant_shape(cfg.model.variant).has_stage1_phase) {
            print_epochs(label + " stage1", train_stage1(model, data.train,
                                                         hyper_for_stage(cfg, 1)));
        }
        print_epochs(label + " stage2", train_stage2(model, data.train, hyper_for_stage(cfg, 2)));
        Metrics m = evaluate(model, data.test);
        cell.ok = true;
        cell.status = "ok";
        cell.frame_accuracy = m.frame_accuracy;
        cell.scene_accuracy = m.scene_accuracy;
    } catch (const Error& e) {
        cell.status = e.what();
    }
    return cell;
}

std::string pooling_label(const PoolingConfig& p) {
    return "d=" + std::to_string(p.groups) +
           (p.strategy == PoolStrategy::Max ? " max" : " avg");
}

} // namespace

void cmd_gen(const ExperimentConfig& cfg, const std::string& out_dir) {
    Dataset ds = generate_dataset(cfg.task, cfg.n_train, cfg.n_test);
    write_dataset(ds, cfg.task, out_dir);
    ValidationReport rep = validate_dataset(out_dir);
    if (!rep.ok()) {
        throw DataError("generated dataset failed validation: " + rep.errors.front());
    }
    std::cout << "wrote " << rep.train_scenes << " train + " << rep.test_scenes
              << " test scenes to " << out_dir << "\n\n";
    auto names_a = activity_names(cfg.task);
    std::cout << "group activity class      instances\n";
    for (std::size_t g = 0; g < rep.activity_counts.size(); ++g) {
        std::cout << std::left << std::setw(26) << names_a[g] << rep.activity_counts[g] << "\n";
    }
    auto names_b = action_names(cfg.task);
    std::cout << "\naction class              instances\n";
    for (std::size_t a = 0; a < rep.action_counts.size(); ++a) {
        std::cout << std::left << std::setw(26) << names_b[a] << rep.action_counts[a] << "\n";
    }
}

bool cmd_validate(const std::string& data_dir) {
    ValidationReport rep = validate_dataset(data_dir);
    for (const auto& e : rep.errors) std::cout << "error: " << e << "\n";
    for (const auto& w : rep.warnings) std::cout << "warning: " << w << "\n";
    std::cout << "scenes: " << rep.train_scenes << " train, " << rep.test_scenes << " test\n";
    std::cout << "activity counts:";
    for (std::size_t c : rep.activity_counts) std::cout << ' ' << c;
    std::cout << "\naction counts:";
    for (std::size_t c : rep.action_counts) std::cout << ' ' << c;
    std::cout << "\n" << (rep.ok() ? "dataset OK" : "dataset INVALID") << "\n";
    return rep.ok();
}

void cmd_train(const ExperimentConfig& cfg, const std::string& data_dir,
               const std::string& out_dir) {
    LoadedDataset data = load_dataset(data_dir);
    check_manifest_compat(data.manifest, cfg.model);

    TrainedModel model = build_model(cfg.model);
    std::string log_text;
    if (variant_shape(cfg.model.variant).has_stage1_phase) {
        std::vector<EpochLog> log1 = train_stage1(model, data.train, hyper_for_stage(cfg, 1));
        print_epochs("stage1", log1);
        append_log_rows(log_text, "stage1_train", log1);
        std::cout << "stage1: " << log1.size() << " epochs, final loss "
                  << log1.back().loss << ", person-action accuracy " << log1.back().accuracy
                  << "\n";
    }
    std::vector<EpochLog> log2 = train_stage2(model, data.train, hyper_for_stage(cfg, 2));
    print_epochs("stage2", log2);
    append_log_rows(log_text, "stage2_train", log2);
    std::cout << "stage2: " << log2.size() << " epochs, final loss " << log2.back().loss
              << ", group accuracy " << log2.back().accuracy << "\n";

    fs::create_directories(out_dir);
    write_model(model, (fs::path(out_dir) / "model.txt").string());
    std::ofstream log_file = open_report(fs::path(out_dir) / "train_log.tsv");
    log_file << log_text;
    std::cout << "checkpoint written to " << (fs::path(out_dir) / "model.txt").string() << "\n";
}

void cmd_eval(const std::string& model_path, const std::string& data_dir,
              const std::string& report_dir, const std::string& split) {
    TrainedModel model = read_model(model_path);
    LoadedDataset data = load_dataset(data_dir);
    check_manifest_compat(data.manifest, model.config);
    const std::vector<Scene>& scenes = (split == "train") ? data.train : data.test;
    if (scenes.empty()) throw DataError("no scenes in split '" + split + "'");

    Metrics m = evaluate(model, scenes);
    write_metrics_report(m, data.manifest, report_dir);

    std::cout << variant_name(model.config.variant) << " " << split << ": frame accuracy "
              << m.frame_accuracy << ", scene accuracy " << m.scene_accuracy;
    if (m.person_action_accuracy) {
        std::cout << ", person-action accuracy " << *m.person_action_accuracy;
    }
    std::cout << " (" << m.num_scenes << " scenes)\n";
}

bool cmd_gradcheck(std::size_t seeds) {
    std::vector<GradCheckResult> results = run_gradcheck(seeds);
    for (const auto& r : results) {
        std::cout << (r.pass ? "PASS" : "FAIL") << "  " << std::left << std::setw(24) << r.group
                  << " max relative error " << r.max_rel_error << "\n";
    }
    return all_pass(results);
}

AblationRequest default_ablation() {
    AblationRequest req;
    req.variants = {ModelVariant::Full, ModelVariant::B1, ModelVariant::B2, ModelVariant::B3,
                    ModelVariant::B4,   ModelVariant::B5, ModelVariant::B6, ModelVariant::B7};
    for (std::size_t d : {1, 2, 4}) {
        req.poolings.push_back({PoolStrategy::Max, d});
        req.poolings.push_back({PoolStrategy::Average, d});
    }
    return req;
}

void cmd_ablate(const ExperimentConfig& cfg, const std::string& data_dir,
                const std::string& report_dir, const AblationRequest& request) {
    LoadedDataset data = load_dataset(data_dir);
    std::vector<CellResult> cells;

    for (ModelVariant v : request.variants) {
        ExperimentConfig cell_cfg = cfg;
        cell_cfg.model.variant = v;
        // Scene-level variants have no person pooling.
        if (variant_shape(v).scene_encoder) cell_cfg.model.pooling.groups = 1;
        std::string label = variant_name(v) + " (" + pooling_label(cell_cfg.model.pooling) + ")";
        std::cerr << "ablate: " << label << "\n";
        cells.push_back(run_cell(label, cell_cfg, data));
    }
    for (const PoolingConfig& p : request.poolings) {
        ExperimentConfig cell_cfg = cfg;
        cell_cfg.model.variant = ModelVariant::Full;
        cell_cfg.model.pooling = p;
        std::string label = "full (" + pooling_label(p) + ")";
        std::cerr << "ablate: " << label << "\n";
        cells.push_back(run_cell(label, cell_cfg, data));
    }

    std::ofstream out = open_report(fs::path(report_dir) / "ablation.tsv");
    out << "cell\tframe_accuracy\tscene_accuracy\tstatus\n";
    std::cout << "\ncell                      frame acc   scene acc   status\n";
    for (const CellResult& c : cells) {
        out << c.label << '\t' << format_real(c.frame_accuracy) << '\t'
            << format_real(c.scene_accuracy) << '\t' << c.status << '\n';
        std::cout << std::left << std::setw(26) << c.label;
        if (c.ok) {
            std::cout << std::setw(12) << c.frame_accuracy << std::setw(12) << c.scene_accuracy
                      << "ok\n";
        } else {
            std::cout << std::setw(12) << "-" << std::setw(12) << "-" << c.status << "\n";
        }
    }
}

} // namespace gar
