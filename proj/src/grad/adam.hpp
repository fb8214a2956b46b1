#pragma once

#include <cstdint>
#include <vector>

#include "grad/tensor.hpp"

namespace mvb::grad {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Moment buffers are keyed by position in the param list, so the list must be
// stable across steps.
struct AdamState {
    int64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    void init(const std::vector<Tensor>& params);
};

// One Adam update from the gradients currently stored on the params.
void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamConfig& cfg);

}  // namespace mvb::grad
