#pragma once

#include "hinormer/autodiff.hpp"

#include <span>
#include <string>
#include <vector>

namespace hinormer {

enum class Reduction { Mean, Sum };

Reduction parse_reduction(const std::string& s);
const char* to_string(Reduction r);

/// Softmax cross-entropy of one prediction vector against a class index.
double loss_multiclass(const Eigen::VectorXd& pred, int label);

/// Sigmoid binary cross-entropy summed over classes; `labels` lists the
/// positive classes.
double loss_multilabel(const Eigen::VectorXd& pred, std::span<const int> labels);

/// Loss over a batch of predictions (B x C). Multiclass rows use labels[i][0].
ad::Var batch_loss(const ad::Var& pred, std::span<const std::vector<int>> labels, bool multilabel, Reduction reduction);

} // namespace hinormer
