#pragma once

// Central-difference verification of every hand-derived gradient.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace amff {

struct GradcheckEntry {
    std::string name;
    double max_rel_error = 0.0;
};

struct GradcheckOptions {
    std::size_t dim = 12;
    std::size_t hidden = 8;
    std::size_t batch = 5;
    double eps = 1e-5;
};

/// Checks AFF (all blocks and inputs), both heads, the three similarity kinds,
/// fidelity and MSE losses, and the end-to-end model loss on seeded inputs.
std::vector<GradcheckEntry> run_gradcheck(std::uint64_t seed, const GradcheckOptions& options = {});

}  // namespace amff
