#pragma once

#include <vector>

namespace hinormer {

struct Metrics {
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double loss = 0.0;
    double seconds = 0.0;
};

struct F1Scores {
    double micro = 0.0;
    double macro = 0.0;
};

/// Single-label F1. Micro pools TP/FP/FN over classes; macro averages the
/// per-class F1 over classes that occur in truth or prediction.
F1Scores f1_multiclass(const std::vector<int>& truth, const std::vector<int>& pred, int num_classes);

/// Multi-label F1 over label-indicator sets; macro averages all classes.
F1Scores f1_multilabel(const std::vector<std::vector<int>>& truth, const std::vector<std::vector<int>>& pred,
                       int num_classes);

} // namespace hinormer
