#pragma once

#include <vector>

#include "core/multiview.hpp"
#include "grad/tensor.hpp"

namespace mvb::pipeline {

using grad::Tensor;

// Weighted sum of plain MSE and the perceptual proxy, the latter computed at
// its own (usually coarser) resolution.
struct LossSpec {
    double mse_weight = 1.0;
    double perceptual_weight = 1.0;
    int perceptual_resolution = 256;
};

void validate_loss_spec(const LossSpec& spec);

struct LossTerms {
    Tensor total;       // mse_weight * mse + perceptual_weight * perceptual
    Tensor mse;         // mean over views of per-view mean squared error
    Tensor perceptual;  // mean over views of the perceptual proxy
};

// Core graph builder: differentiable rendered views against fixed targets.
// Sizes must match pairwise; every view must be square RGB.
LossTerms loss_terms(const std::vector<Tensor>& rendered, const std::vector<const Image*>& targets,
                     const LossSpec& spec);

// Whole-set convenience wrapper. Checks that the two sets share the rig
// (pose-for-pose) and resolution, wraps the rendered images as constant
// tensors, and reduces over all views. Differentiable w.r.t. nothing; used
// for evaluation and finite-difference probes via the core overload.
LossTerms loss_terms(const MultiViewSet& rendered, const MultiViewSet& targets, const LossSpec& spec);

double loss_value(const MultiViewSet& rendered, const MultiViewSet& targets, const LossSpec& spec);

}  // namespace mvb::pipeline
