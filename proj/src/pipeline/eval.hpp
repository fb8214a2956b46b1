#pragma once

#include <cstdint>
#include <vector>

#include "oracle/mv_generate.hpp"
#include "oracle/scene_gen.hpp"
#include "recon/model.hpp"

namespace mvb::pipeline {

struct EvalConfig {
    InconsistencyModel inc;  // perturbations applied to the model's input views
    int resolution = 64;
    double rig_extent = 1.2;
    int points = 2048;              // samples per cloud for the geometry metrics
    std::uint64_t seed = 1;         // drives view generation and point sampling
    int orbit_views = 24;           // orbiting cameras at elevation 0 for image metrics
    int perceptual_resolution = 32;
};

struct SceneEval {
    double psnr = 0;        // mean over the orbit vs GT renders
    double ssim = 0;        // likewise
    double perceptual = 0;  // perceptual proxy, likewise
    double chamfer = 0;     // between normalized point clouds
    double fscore = 0;      // at the default threshold
};

// Reconstruction quality of (base [+ lora]) on one synthetic scene: feed it
// oracle-generated views of the scene, render the predicted Gaussians from an
// orbiting camera ring and compare against ground truth in image and
// geometry space. Deterministic in (spec, cfg), so base-vs-boosted
// comparisons see identical inputs.
SceneEval evaluate_scene(const SceneSpec& spec, const recon::ReconstructorParams& base,
                         const recon::LoraParams* lora, const EvalConfig& cfg);

}  // namespace mvb::pipeline
