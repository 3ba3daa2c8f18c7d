#pragma once

#include "hinormer/checkpoint.hpp"
#include "hinormer/config.hpp"
#include "hinormer/dataset.hpp"
#include "hinormer/gradcheck.hpp"
#include "hinormer/metrics.hpp"
#include "hinormer/model.hpp"

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace hinormer {

/// Non-finite training loss.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_micro_f1 = 0.0;
    double val_macro_f1 = 0.0;
    double lr = 0.0;
    double seconds = 0.0;
};

/// One JSON object per line. Wall-clock seconds are left out so the text is a
/// pure function of seed, config and data; timings_jsonl carries them.
std::string metrics_jsonl(const std::vector<EpochRecord>& history);
std::string timings_jsonl(const std::vector<EpochRecord>& history);

struct TrainResult {
    std::unique_ptr<HINormerModel> model; ///< best-epoch parameters
    std::vector<EpochRecord> history;
    Metrics val;
    Metrics test;
    int best_epoch = 0;
    bool stopped_early = false;
    Checkpoint checkpoint;
};

struct TrainHooks {
    std::function<void(const EpochRecord&)> on_epoch;
};

TrainResult train(const Dataset& ds, const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Contexts of every node in `ids`, sampled with the config's sampler.
std::vector<ContextSequence> contexts_for(const HeteroGraph& g, std::span<const NodeId> ids, const TrainConfig& cfg,
                                          std::uint64_t salt = 0);

/// Normalized class scores, one row per id, in inference mode.
Eigen::MatrixXd predict_scores(HINormerModel& model, std::span<const ContextSequence> contexts);

/// Mean per-node loss and F1 over a split. Empty splits raise
/// std::invalid_argument.
Metrics evaluate(HINormerModel& model, const Dataset& ds, SplitPart part, const TrainConfig& cfg);

std::vector<NamedTensor> snapshot(HINormerModel& model);
/// Copies tensors into the model by name; missing names or shape mismatches
/// raise std::runtime_error.
void restore(HINormerModel& model, const std::vector<NamedTensor>& params);

/// Finite-difference check of every trainable parameter of a freshly
/// initialized model, with the training loss over the train split as the
/// objective. Dropout is disabled.
GradCheckReport model_grad_check(const Dataset& ds, const TrainConfig& cfg, const GradCheckOptions& options = {});

} // namespace hinormer
