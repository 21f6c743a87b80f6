#include "mtd/gradcheck.hpp"

#include <cmath>
#include <vector>

#include "mtd/error.hpp"

namespace mtd {

GradCheckReport grad_check(std::span<ParamTensor* const> params,
                           const std::function<double(bool)>& loss_fn,
                           double h) {
    if (h <= 0.0) throw NumericError("grad_check: step size must be positive");

    for (ParamTensor* p : params) p->zero_grad();
    loss_fn(true);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (ParamTensor* p : params) analytic.push_back(p->grad.data);

    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        ParamTensor& p = *params[pi];
        for (std::size_t i = 0; i < p.value.data.size(); ++i) {
            const double saved = p.value.data[i];
            p.value.data[i] = saved + h;
            const double up = loss_fn(false);
            p.value.data[i] = saved - h;
            const double down = loss_fn(false);
            p.value.data[i] = saved;

            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[pi][i];
            const double denom = std::fabs(a) + std::fabs(numeric);
            if (denom < 1e-8) {
                ++report.skipped;
                continue;
            }
            ++report.checked;
            const double rel = std::fabs(a - numeric) / denom;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = p.name;
                report.worst_index = static_cast<int>(i);
            }
        }
    }
    for (ParamTensor* p : params) p->zero_grad();
    return report;
}

}  // namespace mtd
