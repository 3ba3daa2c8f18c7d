#pragma once

#include "hinormer/autodiff.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hinormer {

/// Builds a scalar loss on the given tape from the bound parameters.
using LossClosure = std::function<ad::Var(ad::Tape&)>;

struct GradCheckOptions {
    double step = 1e-5;
    double rel_tolerance = 1e-4;
    double abs_tolerance = 1e-7;
};

struct GradCheckEntry {
    std::string name;
    Eigen::Index size = 0;
    double max_abs_error = 0.0;
    double max_rel_error = 0.0;
    Eigen::Index failures = 0;
    bool passed = true;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    bool passed = true;
    double seconds = 0.0;

    std::string to_string() const;
};

class NondeterministicForward : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Compares reverse-mode gradients against central finite differences, entry
/// by entry. An entry passes when its relative error is within rel_tolerance
/// or its absolute error within abs_tolerance.
GradCheckReport grad_check(const LossClosure& loss, const std::vector<ad::Parameter*>& params,
                           const GradCheckOptions& options = {});

} // namespace hinormer
