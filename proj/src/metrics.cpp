#include "hinormer/metrics.hpp"

#include <stdexcept>
#include <string>

namespace hinormer {

namespace {

struct Counts {
    std::vector<long> tp, fp, fn;
    explicit Counts(int c) : tp(c, 0), fp(c, 0), fn(c, 0) {}
};

double f1(long tp, long fp, long fn)
{
    const long denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double micro(const Counts& c)
{
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t k = 0; k < c.tp.size(); ++k) {
        tp += c.tp[k];
        fp += c.fp[k];
        fn += c.fn[k];
    }
    return f1(tp, fp, fn);
}

void check_class(int c, int num_classes)
{
    if (c < 0 || c >= num_classes)
        throw std::out_of_range("class " + std::to_string(c) + " outside [0, " + std::to_string(num_classes) + ")");
}

} // namespace

F1Scores f1_multiclass(const std::vector<int>& truth, const std::vector<int>& pred, int num_classes)
{
    if (truth.empty()) throw std::invalid_argument("f1: empty split");
    if (truth.size() != pred.size()) throw std::invalid_argument("f1: truth and prediction lengths differ");
    Counts c(num_classes);
    std::vector<bool> present(num_classes, false);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        check_class(truth[i], num_classes);
        check_class(pred[i], num_classes);
        present[truth[i]] = present[pred[i]] = true;
        if (truth[i] == pred[i]) {
            ++c.tp[truth[i]];
        } else {
            ++c.fn[truth[i]];
            ++c.fp[pred[i]];
        }
    }
    double sum = 0.0;
    int n = 0;
    for (int k = 0; k < num_classes; ++k)
        if (present[k]) {
            sum += f1(c.tp[k], c.fp[k], c.fn[k]);
            ++n;
        }
    return {micro(c), sum / n};
}

F1Scores f1_multilabel(const std::vector<std::vector<int>>& truth, const std::vector<std::vector<int>>& pred,
                       int num_classes)
{
    if (truth.empty()) throw std::invalid_argument("f1: empty split");
    if (truth.size() != pred.size()) throw std::invalid_argument("f1: truth and prediction lengths differ");
    if (num_classes < 1) throw std::invalid_argument("f1: num_classes must be positive");
    Counts c(num_classes);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        std::vector<bool> t(num_classes, false), p(num_classes, false);
        for (int k : truth[i]) check_class(k, num_classes), t[k] = true;
        for (int k : pred[i]) check_class(k, num_classes), p[k] = true;
        for (int k = 0; k < num_classes; ++k) {
            if (t[k] && p[k]) ++c.tp[k];
            else if (p[k]) ++c.fp[k];
            else if (t[k]) ++c.fn[k];
        }
    }
    double sum = 0.0;
    for (int k = 0; k < num_classes; ++k) sum += f1(c.tp[k], c.fp[k], c.fn[k]);
    return {micro(c), sum / num_classes};
}

} // namespace hinormer
