#pragma once

#include <functional>
#include <vector>

#include "core/rng.hpp"
#include "grad/tensor.hpp"

namespace mvb::grad {

struct GradCheckReport {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    size_t checked = 0;
};

// Central-difference check of reverse-mode gradients. build_loss must rebuild
// the whole graph from the params' current data each time it is called. For
// large params only a random subset of components is probed (per_param caps
// the count); rel err uses max(|analytic|,|numeric|,1e-8) as denominator.
GradCheckReport grad_check(const std::function<Tensor()>& build_loss,
                           std::vector<Tensor> params,
                           double h = 1e-6,
                           size_t per_param = 0,
                           Rng* rng = nullptr);

}  // namespace mvb::grad
