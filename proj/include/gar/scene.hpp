#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "gar/numcore.hpp"

namespace gar {

// One person's track: per-timestep observation vectors, action labels and the
// top-left bounding box point used for ordering.
struct Tracklet {
    std::vector<Vec> obs;
    std::vector<std::size_t> actions;
    std::vector<std::pair<double, double>> bbox; // (x, y) per timestep

    std::size_t timesteps() const { return obs.size(); }
    bool operator==(const Tracklet&) const = default;
};

// A multi-person scene with a per-timestep group activity label (constant per
// scene as generated, but the format allows it to vary).
struct Scene {
    std::uint64_t id = 0;
    std::vector<Tracklet> persons;
    std::vector<std::size_t> group_labels;

    std::size_t timesteps() const { return group_labels.size(); }
    bool operator==(const Scene&) const = default;
};

} // namespace gar
