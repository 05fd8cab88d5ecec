#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace feast {

struct GradCheckResult {
    std::string kind;
    double worst_rel_err = 0.0;
    bool pass = true;
};

struct GradCheckReport {
    std::vector<GradCheckResult> results;
    double tolerance = 0.0;

    bool all_pass() const;
};

// Randomized central-finite-difference validation of every backward pass:
// the convolution in both assignment modes, the plain layers, the loss, and
// whole models with and without pooling. `corrupt_kind` deliberately breaks
// the named suite's analytic gradient (a hook for testing the reporting).
GradCheckReport run_gradient_checks(std::uint64_t seed, int trials, double tolerance,
                                    const std::string& corrupt_kind = {});

} // namespace feast
