#pragma once

#include <string>

#include "mtd/matrix.hpp"

namespace mtd {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// A named parameter with its gradient buffer and Adam moment state. The
// value/grad/moment matrices always share one shape; step_count advances by
// exactly one per optimizer step.
struct ParamTensor {
    std::string name;
    DenseMatrix value;
    DenseMatrix grad;
    DenseMatrix adam_m;
    DenseMatrix adam_v;
    long step_count = 0;

    ParamTensor() = default;
    ParamTensor(std::string name_, DenseMatrix value_);

    void zero_grad() { grad.zero(); }
};

// Bias-corrected Adam update applied in place; zeroes the gradient afterward.
// Throws NumericError naming the parameter if the gradient is not finite.
void adam_step(ParamTensor& p, const AdamConfig& cfg);

// L2 penalty: adds lambda2 * sum(theta^2) to the returned loss term and
// 2 * lambda2 * theta to the gradient buffer.
double l2_regularize(ParamTensor& p, double lambda2);

}  // namespace mtd
