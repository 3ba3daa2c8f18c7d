#include "hinormer/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace hinormer {

namespace {

double evaluate(const LossClosure& loss)
{
    ad::Tape tape;
    return loss(tape).scalar();
}

} // namespace

std::string GradCheckReport::to_string() const
{
    std::ostringstream os;
    os << std::setprecision(3) << std::scientific;
    for (const auto& e : entries)
        os << (e.passed ? "PASS " : "FAIL ") << e.name << " size=" << e.size << " max_abs=" << e.max_abs_error
           << " max_rel=" << e.max_rel_error << " failures=" << e.failures << '\n';
    os << (passed ? "gradcheck PASS" : "gradcheck FAIL") << '\n';
    return os.str();
}

GradCheckReport grad_check(const LossClosure& loss, const std::vector<ad::Parameter*>& params,
                           const GradCheckOptions& options)
{
    const auto start = std::chrono::steady_clock::now();

    for (ad::Parameter* p : params) p->zero_grad();
    double base = 0.0;
    {
        ad::Tape tape;
        ad::Var l = loss(tape);
        base = l.scalar();
        tape.backward(l);
    }
    if (const double again = evaluate(loss); again != base) {
        std::ostringstream os;
        os << std::setprecision(17) << "grad_check: forward is not deterministic (" << base << " vs " << again << ")";
        throw NondeterministicForward(os.str());
    }

    GradCheckReport report;
    for (ad::Parameter* p : params) {
        GradCheckEntry entry;
        entry.name = p->name;
        entry.size = p->size();
        const ad::Matrix analytic = p->grad;
        for (Eigen::Index k = 0; k < p->size(); ++k) {
            double& x = p->value.data()[k];
            const double saved = x;
            x = saved + options.step;
            const double up = evaluate(loss);
            x = saved - options.step;
            const double down = evaluate(loss);
            x = saved;

            const double numeric = (up - down) / (2.0 * options.step);
            const double a = analytic.data()[k];
            const double abs_err = std::abs(a - numeric);
            const double denom = std::max(std::abs(a), std::abs(numeric));
            const double rel_err = denom > 0.0 ? abs_err / denom : 0.0;
            entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
            entry.max_rel_error = std::max(entry.max_rel_error, rel_err);
            if (abs_err > options.abs_tolerance && rel_err > options.rel_tolerance) ++entry.failures;
        }
        entry.passed = entry.failures == 0;
        report.passed = report.passed && entry.passed;
        report.entries.push_back(std::move(entry));
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace hinormer
