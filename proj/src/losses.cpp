#include "hinormer/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace hinormer {

Reduction parse_reduction(const std::string& s)
{
    if (s == "mean") return Reduction::Mean;
    if (s == "sum") return Reduction::Sum;
    throw std::invalid_argument("unknown loss reduction '" + s + "' (expected mean or sum)");
}

const char* to_string(Reduction r) { return r == Reduction::Mean ? "mean" : "sum"; }

namespace {

void check_label(int label, Eigen::Index classes)
{
    if (label < 0 || label >= classes)
        throw std::out_of_range("label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
}

} // namespace

double loss_multiclass(const Eigen::VectorXd& pred, int label)
{
    check_label(label, pred.size());
    const double m = pred.maxCoeff();
    const double lse = m + std::log((pred.array() - m).exp().sum());
    return lse - pred(label);
}

double loss_multilabel(const Eigen::VectorXd& pred, std::span<const int> labels)
{
    Eigen::VectorXd y = Eigen::VectorXd::Zero(pred.size());
    for (int l : labels) {
        check_label(l, pred.size());
        y(l) = 1.0;
    }
    double total = 0.0;
    for (Eigen::Index c = 0; c < pred.size(); ++c) {
        const double z = pred(c);
        total += std::max(z, 0.0) - z * y(c) + std::log1p(std::exp(-std::abs(z)));
    }
    return total;
}

ad::Var batch_loss(const ad::Var& pred, std::span<const std::vector<int>> labels, bool multilabel, Reduction reduction)
{
    if (static_cast<Eigen::Index>(labels.size()) != pred.rows())
        throw std::invalid_argument("batch_loss: " + std::to_string(labels.size()) + " labels for " +
                                    std::to_string(pred.rows()) + " predictions");
    ad::Var total;
    if (multilabel) {
        Eigen::MatrixXd y = Eigen::MatrixXd::Zero(pred.rows(), pred.cols());
        for (std::size_t i = 0; i < labels.size(); ++i)
            for (int l : labels[i]) {
                check_label(l, pred.cols());
                y(static_cast<Eigen::Index>(i), l) = 1.0;
            }
        total = ad::sigmoid_bce(pred, std::move(y));
    } else {
        std::vector<int> flat;
        flat.reserve(labels.size());
        for (const auto& l : labels) {
            if (l.size() != 1) throw std::invalid_argument("batch_loss: multiclass node needs exactly one label");
            flat.push_back(l.front());
        }
        total = ad::softmax_cross_entropy(pred, std::move(flat));
    }
    if (reduction == Reduction::Mean) total = ad::scale(total, 1.0 / static_cast<double>(labels.size()));
    return total;
}

} // namespace hinormer
