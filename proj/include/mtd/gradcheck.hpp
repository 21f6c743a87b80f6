#pragma once

#include <functional>
#include <span>
#include <string>

#include "mtd/param.hpp"

namespace mtd {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    int worst_index = -1;
    long checked = 0;
    long skipped = 0;
};

// Central-difference verification of hand-derived gradients.
//
// loss_fn(true) must return the loss and accumulate analytic gradients into
// the grad buffers of `params` (which arrive zeroed); loss_fn(false) must
// return the loss only and leave the buffers alone. Every parameter entry is
// perturbed by +-h in turn; entries with |analytic| + |numeric| < 1e-8 are
// skipped. Relative error is |a - n| / (|a| + |n|).
GradCheckReport grad_check(std::span<ParamTensor* const> params,
                           const std::function<double(bool)>& loss_fn,
                           double h);

}  // namespace mtd
