#pragma once

#include "core/camera.hpp"
#include "core/multiview.hpp"
#include "core/rng.hpp"
#include "core/scene.hpp"

namespace mvb {

// Controllable cross-view inconsistency for the synthetic multi-view
// generator. Zero amplitudes make the generator an exact renderer.
struct InconsistencyModel {
    double color_shift_amp = 0.08;      // per-channel additive shift bound
    double warp_amp = 3.0;              // px, smooth displacement amplitude
    double silhouette_noise_amp = 0.05; // boundary erosion/dilation strength
};

// Stand-in for a conditioned multi-view generator: renders the ground-truth
// scene from the rig, then corrupts every view except the front one (the
// condition) with view-independent color shift, smooth warp, and silhouette
// noise. Resolution follows the condition image, stage is `generated`.
MultiViewSet mv_generate(const Image& condition, const GaussianScene& gt_scene,
                         const CanonicalRig& rig, const InconsistencyModel& inc, Rng& rng);

// The exact renders the generator starts from (stage `rendered`).
MultiViewSet render_rig_views(const GaussianScene& scene, const CanonicalRig& rig,
                              int resolution);

}  // namespace mvb
