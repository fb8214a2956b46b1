#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grad/adam.hpp"
#include "pipeline/dataset.hpp"
#include "pipeline/loss.hpp"
#include "recon/model.hpp"

namespace mvb::pipeline {

// Which target views contribute to each step's loss: the full rig, or one
// view drawn per step.
enum class ViewSampling { all, single };

struct TrainConfig {
    int steps = 500;
    grad::AdamConfig adam;  // lr 1e-3 default
    ViewSampling view_sampling = ViewSampling::all;
    LossSpec loss;
    std::uint64_t seed = 1;
    std::string log_path;  // when set, a CSV "step,loss,mse,perceptual" is written
};

struct StepLog {
    int step = 0;
    double loss = 0, mse = 0, perceptual = 0;
};

struct TrainReport {
    std::vector<StepLog> steps;
    // Mean total loss over the first 10 and last 50 logged steps; convergence
    // checks compare these.
    double early_loss = 0;
    double late_loss = 0;
};

// Base pre-training on oracle-consistent data: every step samples a scene
// from the pool, feeds its exact rig renders as both input and supervision,
// and updates all base parameters.
TrainReport pretrain_base(recon::ReconstructorParams& params,
                          const std::vector<SceneSpec>& pool, int resolution,
                          double rig_extent, const TrainConfig& cfg);

// LoRA boost training on refined pairs. The base is frozen (verified by
// digest); only adapter tensors receive Adam updates. A non-finite loss
// aborts with the step, pair and seed in the diagnostic. Deterministic under
// cfg.seed.
TrainReport train_boost(const std::vector<RefinedPair>& dataset,
                        recon::ReconstructorParams& base, recon::LoraParams& lora,
                        const TrainConfig& cfg);

}  // namespace mvb::pipeline
