#include "mtd/param.hpp"

#include <cmath>
#include <utility>

#include "mtd/error.hpp"

namespace mtd {

ParamTensor::ParamTensor(std::string name_, DenseMatrix value_)
    : name(std::move(name_)),
      value(std::move(value_)),
      grad(value.rows, value.cols),
      adam_m(value.rows, value.cols),
      adam_v(value.rows, value.cols) {}

void adam_step(ParamTensor& p, const AdamConfig& cfg) {
    if (!p.grad.all_finite()) {
        throw NumericError("adam_step: non-finite gradient in parameter '" + p.name + "'");
    }
    p.step_count += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.step_count));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.step_count));
    for (std::size_t i = 0; i < p.value.data.size(); ++i) {
        const double g = p.grad.data[i];
        p.adam_m.data[i] = cfg.beta1 * p.adam_m.data[i] + (1.0 - cfg.beta1) * g;
        p.adam_v.data[i] = cfg.beta2 * p.adam_v.data[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = p.adam_m.data[i] / bc1;
        const double vhat = p.adam_v.data[i] / bc2;
        p.value.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    p.grad.zero();
}

double l2_regularize(ParamTensor& p, double lambda2) {
    if (lambda2 == 0.0) return 0.0;
    double term = 0.0;
    for (std::size_t i = 0; i < p.value.data.size(); ++i) {
        const double v = p.value.data[i];
        term += v * v;
        p.grad.data[i] += 2.0 * lambda2 * v;
    }
    return lambda2 * term;
}

}  // namespace mtd
