#pragma once

#include <string>
#include <vector>

#include "core/camera.hpp"
#include "core/image.hpp"
#include "core/multiview.hpp"
#include "core/scene.hpp"

namespace mvb::viewopt {

// Pose search: coarse azimuth x elevation grid scored by the perceptual
// proxy, then golden-section refinement of the azimuth around the best cell.
struct PoseSearchConfig {
    double az_step_deg = 15.0;
    std::vector<double> elevations_deg = {-20.0, 0.0, 20.0};
    double tol_deg = 0.5;           // azimuth refinement stops below this width
    int perceptual_resolution = 32;
    double ortho_half_extent = 1.2;
};

struct PoseSample {
    CameraPose pose;
    double distance = 0;
};

struct PoseSearchResult {
    CameraPose pose;
    double distance = 0;             // proxy value at `pose`
    std::vector<PoseSample> trace;   // every pose evaluated, in order
};

PoseSearchResult pose_search(const GaussianScene& scene, const Image& input_view,
                             const PoseSearchConfig& cfg);

// Per-splat compositing weight from `pose`, normalized into [0,1] by the
// maximum weight. Splats contributing nothing to the render get 0.
std::vector<double> visibility_weights(const GaussianScene& scene, const CameraPose& pose,
                                       int resolution);

// Gated per-splat residual. Deltas act through range-safe maps:
//   color'   = sigmoid(logit(color) + gate * d_color)
//   opacity' = opacity_logit + gate * d_opacity_logit
//   mean'    = mean + gate * bound * tanh(d_mean)
// so any delta value yields a valid scene. The gate is fixed, not trained.
struct ResidualField {
    std::vector<double> gate;       // n, in [0,1]
    std::vector<Vec3> d_color;      // n, logit-space offsets
    std::vector<double> d_opacity;  // n, logit-space offsets
    std::vector<Vec3> d_mean;       // n, unbounded; tanh-squashed on use
    double mean_bound = 0.05;       // scene units

    static ResidualField zeros(size_t n, std::vector<double> gate, double mean_bound = 0.05);
};

// Applies the field. A splat whose three deltas are all exactly zero is
// copied verbatim, so a zero field returns a bit-identical scene.
GaussianScene apply_residual(const GaussianScene& scene, const ResidualField& field);

struct ResidualOptConfig {
    int iters = 200;
    double lr = 0.05;
    int perceptual_resolution = 32;
    double mean_bound = 0.05;
    int divergence_patience = 50;  // consecutive non-improving iters before stopping
};

struct ResidualReport {
    CameraPose pose;
    double dist_before = 0;
    double dist_after = 0;          // proxy at the best iterate
    int iters_run = 0;
    bool diverged = false;
    std::vector<double> loss_trace;
    // Quality change at the canonical poses other than the one facing the
    // optimized view: psnr(render, gt) after minus before. Filled only when
    // ground-truth rig renders are supplied.
    std::vector<double> psnr_drift_per_view;
    std::vector<std::string> drift_labels;
};

struct ResidualOutcome {
    ResidualField field;
    GaussianScene optimized;
    ResidualReport report;
};

// Adam on the gated residual, minimizing the perceptual proxy between the
// differentiable render at `pose_opt` and `input_view`. Tracks the best
// iterate; stops early when the loss fails to improve for
// `divergence_patience` consecutive iterations. When `gt_rig` is non-null it
// must hold canonical-rig renders of the ground-truth scene at the input
// view's resolution; the report then includes per-view PSNR drift.
ResidualOutcome optimize_residual(const GaussianScene& scene, const CameraPose& pose_opt,
                                  const Image& input_view, const ResidualOptConfig& cfg,
                                  const MultiViewSet* gt_rig = nullptr);

// Writes report.csv (pose_az,pose_el,dist_before,dist_after,
// psnr_drift_per_view with ';'-separated values) plus before.png/after.png
// rendered at `pose_opt` into `out_dir`.
void write_residual_report(const std::string& out_dir, const GaussianScene& before,
                           const ResidualOutcome& outcome, int resolution);

}  // namespace mvb::viewopt
