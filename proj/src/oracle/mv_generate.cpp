#include "oracle/mv_generate.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"
#include "oracle/field.hpp"
#include "render/rasterizer.hpp"

namespace mvb {

namespace {

double bilinear(const Image& img, double x, double y, int c) {
    const int w = img.width, h = img.height;
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    const double fx = x - x0, fy = y - y0;
    return (1 - fy) * ((1 - fx) * img.at(y0, x0, c) + fx * img.at(y0, x1, c)) +
           fy * ((1 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c));
}

}  // namespace

MultiViewSet render_rig_views(const GaussianScene& scene, const CanonicalRig& rig,
                              int resolution) {
    MultiViewSet set;
    set.stage = MultiViewSet::Stage::rendered;
    for (const CameraPose& pose : rig.poses) {
        set.poses.push_back(pose);
        set.views.push_back(render_scene(scene, pose, resolution));
    }
    return set;
}

MultiViewSet mv_generate(const Image& condition, const GaussianScene& gt_scene,
                         const CanonicalRig& rig, const InconsistencyModel& inc, Rng& rng) {
    if (condition.width != condition.height || condition.width < 8)
        fail_param("mv_generate: condition must be square and at least 8 px");
    if (inc.color_shift_amp < 0 || inc.warp_amp < 0 || inc.silhouette_noise_amp < 0)
        fail_param("mv_generate: inconsistency amplitudes must be >= 0");
    const int res = condition.width;

    MultiViewSet out;
    out.stage = MultiViewSet::Stage::generated;
    out.condition = condition;
    for (int v = 0; v < kRigViews; ++v) {
        const CameraPose& pose = rig.poses[v];
        out.poses.push_back(pose);
        if (v == 0) {
            // the condition view passes through untouched
            out.views.push_back(condition);
            continue;
        }
        Image img = render_scene(gt_scene, pose, res);
        Rng stream = rng.child("view", static_cast<uint64_t>(v));

        // Draw every perturbation's parameters up front in a fixed order, so
        // zeroing one amplitude never shifts the draws of another.
        double shift[3];
        for (double& s : shift) s = stream.uniform(-inc.color_shift_amp, inc.color_shift_amp);
        const int family = static_cast<int>(v % kFieldFamilies);
        Rng warp_rng = stream.child("warp");
        SmoothField2D warp_x(warp_rng, family), warp_y(warp_rng, family);
        Rng sil_rng = stream.child("silhouette");
        SmoothField2D sil(sil_rng, family);

        if (inc.color_shift_amp > 0) {
            for (int y = 0; y < res; ++y)
                for (int x = 0; x < res; ++x)
                    for (int c = 0; c < 3; ++c)
                        img.at(y, x, c) = std::clamp(img.at(y, x, c) + shift[c], 0.0, 1.0);
        }

        if (inc.warp_amp > 0) {
            Image warped = img;
            for (int y = 0; y < res; ++y) {
                const double v_ = (y + 0.5) / res;
                for (int x = 0; x < res; ++x) {
                    const double u_ = (x + 0.5) / res;
                    const double dx = inc.warp_amp * warp_x.sample(u_, v_);
                    const double dy = inc.warp_amp * warp_y.sample(u_, v_);
                    for (int c = 0; c < 3; ++c)
                        warped.at(y, x, c) = bilinear(img, x - dx, y - dy, c);
                }
            }
            img = std::move(warped);
        }

        if (inc.silhouette_noise_amp > 0) {
            // Scale the deviation from the background near the silhouette:
            // erode (toward background) or dilate depending on the field sign.
            const SplatWeights w = render_splat_weights(gt_scene, pose, res);
            for (int y = 0; y < res; ++y) {
                const double v_ = (y + 0.5) / res;
                for (int x = 0; x < res; ++x) {
                    const double u_ = (x + 0.5) / res;
                    const double alpha = 1.0 - w.residual[static_cast<size_t>(y) * res + x];
                    const double border = 4.0 * alpha * (1.0 - alpha);
                    const double g = std::clamp(
                        1.0 + 2.0 * inc.silhouette_noise_amp * sil.sample(u_, v_) * border, 0.0,
                        1.5);
                    for (int c = 0; c < 3; ++c) {
                        const double bg = 1.0;  // renders use a white background
                        img.at(y, x, c) =
                            std::clamp(bg + (img.at(y, x, c) - bg) * g, 0.0, 1.0);
                    }
                }
            }
        }
        out.views.push_back(std::move(img));
    }
    return out;
}

}  // namespace mvb
