#include "pipeline/eval.hpp"

#include "core/error.hpp"
#include "metrics/geometry.hpp"
#include "metrics/image_metrics.hpp"
#include "metrics/perceptual.hpp"
#include "render/rasterizer.hpp"

namespace mvb::pipeline {

SceneEval evaluate_scene(const SceneSpec& spec, const recon::ReconstructorParams& base,
                         const recon::LoraParams* lora, const EvalConfig& cfg) {
    if (cfg.orbit_views < 1) fail_param("evaluate_scene: need at least one orbit view");
    const GaussianScene scene = generate_scene(spec);
    const CanonicalRig rig = make_canonical_rig(cfg.rig_extent);
    const MultiViewSet gt = render_rig_views(scene, rig, cfg.resolution);

    Rng root(cfg.seed);
    Rng mv_rng = root.child("eval_mv", spec.seed);
    const MultiViewSet inputs = mv_generate(gt.views[0], scene, rig, cfg.inc, mv_rng);

    const GaussianScene theta = recon::forward(inputs, base, lora);

    SceneEval out;
    const double step = 360.0 / static_cast<double>(cfg.orbit_views);
    for (int k = 0; k < cfg.orbit_views; ++k) {
        CameraPose pose;
        pose.azimuth_deg = step * k;
        pose.elevation_deg = 0.0;
        pose.ortho_half_extent = cfg.rig_extent;
        const Image truth = render_scene(scene, pose, cfg.resolution);
        const Image pred = render_scene(theta, pose, cfg.resolution);
        out.psnr += psnr(pred, truth);
        out.ssim += ssim(pred, truth);
        out.perceptual += perceptual_proxy(pred, truth, cfg.perceptual_resolution);
    }
    out.psnr /= cfg.orbit_views;
    out.ssim /= cfg.orbit_views;
    out.perceptual /= cfg.orbit_views;

    Rng pred_rng = root.child("eval_points_pred", spec.seed);
    Rng gt_rng = root.child("eval_points_gt", spec.seed);
    const PointSet pred = normalize_points(sample_points_from_scene(theta, cfg.points, pred_rng));
    const PointSet truth = normalize_points(sample_points_from_scene(scene, cfg.points, gt_rng));
    out.chamfer = chamfer(pred, truth);
    out.fscore = fscore(pred, truth);
    return out;
}

}  // namespace mvb::pipeline
