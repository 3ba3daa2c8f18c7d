#pragma once

#include "hinormer/autodiff.hpp"

#include <span>
#include <string>
#include <vector>

namespace hinormer {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moment estimates aligned with the parameter list passed to step().
struct AdamState {
    long step = 0;
    std::vector<std::string> names;
    std::vector<Eigen::MatrixXd> m;
    std::vector<Eigen::MatrixXd> v;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    /// One bias-corrected update over `params` in the given order. Frozen
    /// parameters keep their value and state.
    void step(std::span<ad::Parameter* const> params, double lr);

    const AdamConfig& config() const { return cfg_; }
    const AdamState& state() const { return state_; }
    void set_state(AdamState s) { state_ = std::move(s); }

private:
    AdamConfig cfg_;
    AdamState state_;
};

/// Multiplies the learning rate by `factor` once `wait` consecutive epochs
/// pass without a strict decrease of the monitored loss.
class PlateauScheduler {
public:
    PlateauScheduler(double lr, double factor = 0.5, int wait = 10, double min_lr = 1e-6);

    double step(double val_loss);

    double lr() const { return lr_; }
    double best() const { return best_; }
    int bad_epochs() const { return bad_; }

private:
    double lr_;
    double factor_;
    int wait_;
    double min_lr_;
    double best_;
    int bad_ = 0;
};

/// Signals a stop after `patience` consecutive epochs without improvement.
class EarlyStopping {
public:
    explicit EarlyStopping(int patience = 50, bool lower_is_better = true);

    /// Returns true when training should stop.
    bool step(double metric);

    bool improved() const { return improved_; }
    double best() const { return best_; }
    int bad_epochs() const { return bad_; }

private:
    int patience_;
    bool lower_;
    double best_;
    int bad_ = 0;
    bool improved_ = false;
};

} // namespace hinormer
