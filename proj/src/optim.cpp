#include "hinormer/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hinormer {

void Adam::step(std::span<ad::Parameter* const> params, double lr)
{
    if (state_.names.empty()) {
        for (const ad::Parameter* p : params) {
            state_.names.push_back(p->name);
            state_.m.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
            state_.v.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
        }
    }
    if (state_.names.size() != params.size())
        throw std::invalid_argument("adam: state holds " + std::to_string(state_.names.size()) + " parameters, got " +
                                    std::to_string(params.size()));
    ++state_.step;
    const double t = static_cast<double>(state_.step);
    const double c1 = 1.0 - std::pow(cfg_.beta1, t);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        ad::Parameter& p = *params[i];
        if (p.name != state_.names[i])
            throw std::invalid_argument("adam: parameter order changed at '" + p.name + "'");
        if (!p.trainable) continue;
        auto& m = state_.m[i];
        auto& v = state_.v[i];
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * p.grad;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * p.grad.cwiseAbs2();
        p.value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.eps);
    }
}

PlateauScheduler::PlateauScheduler(double lr, double factor, int wait, double min_lr)
    : lr_(lr), factor_(factor), wait_(wait), min_lr_(min_lr), best_(std::numeric_limits<double>::infinity())
{
    if (factor <= 0.0 || factor >= 1.0) throw std::invalid_argument("plateau: factor must lie in (0, 1)");
    if (wait < 1) throw std::invalid_argument("plateau: wait must be positive");
}

double PlateauScheduler::step(double val_loss)
{
    if (val_loss < best_) {
        best_ = val_loss;
        bad_ = 0;
        return lr_;
    }
    if (++bad_ >= wait_) {
        lr_ = std::max(lr_ * factor_, min_lr_);
        bad_ = 0;
    }
    return lr_;
}

EarlyStopping::EarlyStopping(int patience, bool lower_is_better)
    : patience_(patience), lower_(lower_is_better),
      best_(lower_is_better ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity())
{
    if (patience < 1) throw std::invalid_argument("early stopping: patience must be positive");
}

bool EarlyStopping::step(double metric)
{
    improved_ = lower_ ? metric < best_ : metric > best_;
    if (improved_) {
        best_ = metric;
        bad_ = 0;
        return false;
    }
    return ++bad_ >= patience_;
}

} // namespace hinormer
