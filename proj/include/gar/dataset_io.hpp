#pragma once

#include <string>
#include <vector>

#include "gar/scene.hpp"
#include "gar/scenegen.hpp"

namespace gar {

// Describes a dataset directory: label spaces plus one entry per scene file.
struct DatasetManifest {
    std::vector<std::string> action_names;
    std::vector<std::string> activity_names;
    std::size_t obs_dim = 0;

    struct Entry {
        std::string split; // "train" or "test"
        std::string file;  // relative to the manifest directory
    };
    std::vector<Entry> scenes;

    std::size_t num_actions() const { return action_names.size(); }
    std::size_t num_activities() const { return activity_names.size(); }
};

// Scene file layout (all text, one record per line):
//   GARSCENE 1
//   <id> <T> <K> <obs_dim> <group label per timestep>
// then per person: a line of T action labels, a line of T "x y" bbox pairs,
// and T observation lines of obs_dim reals. Reals carry 17 significant
// digits so that write/read round trips are value-exact.
void write_scene(const Scene& scene, const std::string& path);
Scene read_scene(const std::string& path);

void write_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

// Writes scenes plus manifest into dir (created if missing).
void write_dataset(const Dataset& ds, const TaskSpec& spec, const std::string& dir);

struct LoadedDataset {
    DatasetManifest manifest;
    std::vector<Scene> train;
    std::vector<Scene> test;
};
LoadedDataset load_dataset(const std::string& dir);

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    // Instance counts in the annotation sense: activities per scene-frame,
    // actions per person-frame.
    std::vector<std::size_t> activity_counts;
    std::vector<std::size_t> action_counts;
    std::size_t train_scenes = 0;
    std::size_t test_scenes = 0;

    bool ok() const { return errors.empty(); }
};

// Validates every scene the manifest lists; keeps going past bad scenes so
// the report covers the whole dataset.
ValidationReport validate_dataset(const std::string& dir);

} // namespace gar
