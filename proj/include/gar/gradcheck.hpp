#pragma once

#include <string>
#include <vector>

#include "gar/hierarchy.hpp"

namespace gar {

inline constexpr double kGradCheckEps = 1e-5;
inline constexpr double kGradCheckTol = 1e-4;

struct GradCheckResult {
    std::string group;
    double max_rel_error = 0.0;
    bool pass = false;
};

// Compares analytic gradients against central finite differences
// (eps = 1e-5, f64) for every parameter group, over `seeds` random
// configurations each. Relative error is |a - n| / max(|a|, |n|, 1e-4).
//
// corrupt_group is a test hook: a matching group gets one gradient entry
// perturbed before comparison and must then fail.
std::vector<GradCheckResult> run_gradcheck(std::size_t seeds = 20,
                                           const std::string& corrupt_group = "");

bool all_pass(const std::vector<GradCheckResult>& results);

} // namespace gar
