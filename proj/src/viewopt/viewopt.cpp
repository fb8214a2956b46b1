#include "viewopt/viewopt.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "core/error.hpp"
#include "grad/adam.hpp"
#include "grad/render_op.hpp"
#include "grad/tensor.hpp"
#include "metrics/image_metrics.hpp"
#include "metrics/perceptual.hpp"
#include "render/rasterizer.hpp"

namespace mvb::viewopt {

namespace {

constexpr double kColorEps = 1e-6;

double logit_clamped(double c) {
    const double x = std::clamp(c, kColorEps, 1.0 - kColorEps);
    return std::log(x / (1.0 - x));
}

double wrap_az(double az) {
    double a = std::fmod(az, 360.0);
    if (a < 0) a += 360.0;
    return a;
}

double az_diff(double a, double b) {
    double d = std::fabs(wrap_az(a) - wrap_az(b));
    return std::min(d, 360.0 - d);
}

}  // namespace

PoseSearchResult pose_search(const GaussianScene& scene, const Image& input_view,
                             const PoseSearchConfig& cfg) {
    if (input_view.width != input_view.height) fail_param("pose_search: input view must be square");
    if (cfg.az_step_deg <= 0 || cfg.az_step_deg > 120)
        fail_param("pose_search: azimuth step out of range");
    if (cfg.elevations_deg.empty()) fail_param("pose_search: no elevations to search");
    if (cfg.tol_deg <= 0) fail_param("pose_search: tolerance must be positive");

    PoseSearchResult out;
    out.distance = std::numeric_limits<double>::infinity();
    auto eval = [&](double az, double el) {
        CameraPose pose;
        pose.azimuth_deg = wrap_az(az);
        pose.elevation_deg = el;
        pose.ortho_half_extent = cfg.ortho_half_extent;
        Image r = render_scene(scene, pose, input_view.width);
        const double d = perceptual_proxy(r, input_view, cfg.perceptual_resolution);
        out.trace.push_back({pose, d});
        if (d < out.distance) {
            out.distance = d;
            out.pose = pose;
        }
        return d;
    };

    double best_az = 0, best_el = cfg.elevations_deg.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (double el : cfg.elevations_deg) {
        for (double az = 0.0; az < 360.0 - 1e-9; az += cfg.az_step_deg) {
            const double d = eval(az, el);
            if (d < best_d) {
                best_d = d;
                best_az = az;
                best_el = el;
            }
        }
    }

    // Golden-section refinement of the azimuth inside the bracketing cells.
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = best_az - cfg.az_step_deg;
    double b = best_az + cfg.az_step_deg;
    double x1 = b - gr * (b - a);
    double x2 = a + gr * (b - a);
    double f1 = eval(x1, best_el);
    double f2 = eval(x2, best_el);
    while (b - a > cfg.tol_deg) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = eval(x1, best_el);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = eval(x2, best_el);
        }
    }
    return out;
}

std::vector<double> visibility_weights(const GaussianScene& scene, const CameraPose& pose,
                                       int resolution) {
    SplatWeights sw = render_splat_weights(scene, pose, resolution);
    double mx = 0.0;
    for (double w : sw.weight) mx = std::max(mx, w);
    std::vector<double> gates(sw.weight.size(), 0.0);
    if (mx > 0.0)
        for (size_t i = 0; i < gates.size(); ++i) gates[i] = sw.weight[i] / mx;
    return gates;
}

ResidualField ResidualField::zeros(size_t n, std::vector<double> gate, double mean_bound) {
    if (gate.size() != n) fail_param("residual field: gate count does not match splat count");
    for (double g : gate)
        if (!(g >= 0.0 && g <= 1.0)) fail_param("residual field: gate outside [0,1]");
    ResidualField f;
    f.gate = std::move(gate);
    f.d_color.assign(n, Vec3{0, 0, 0});
    f.d_opacity.assign(n, 0.0);
    f.d_mean.assign(n, Vec3{0, 0, 0});
    f.mean_bound = mean_bound;
    return f;
}

GaussianScene apply_residual(const GaussianScene& scene, const ResidualField& field) {
    const size_t n = scene.splats.size();
    if (field.gate.size() != n || field.d_color.size() != n || field.d_opacity.size() != n ||
        field.d_mean.size() != n)
        fail_param("apply_residual: field size does not match scene");

    GaussianScene out = scene;
    for (size_t i = 0; i < n; ++i) {
        const Vec3& dc = field.d_color[i];
        const Vec3& dm = field.d_mean[i];
        const double dop = field.d_opacity[i];
        if (dc.x == 0 && dc.y == 0 && dc.z == 0 && dm.x == 0 && dm.y == 0 && dm.z == 0 &&
            dop == 0)
            continue;  // untouched splats stay bit-identical
        const double g = field.gate[i];
        Splat& s = out.splats[i];
        // Same expression shapes as the training graph so the applied scene
        // matches the optimized one bit for bit.
        s.color.x = 1.0 / (1.0 + std::exp(-(logit_clamped(s.color.x) + g * dc.x)));
        s.color.y = 1.0 / (1.0 + std::exp(-(logit_clamped(s.color.y) + g * dc.y)));
        s.color.z = 1.0 / (1.0 + std::exp(-(logit_clamped(s.color.z) + g * dc.z)));
        s.opacity_logit += g * dop;
        s.mean.x += g * (std::tanh(dm.x) * field.mean_bound);
        s.mean.y += g * (std::tanh(dm.y) * field.mean_bound);
        s.mean.z += g * (std::tanh(dm.z) * field.mean_bound);
    }
    return out;
}

ResidualOutcome optimize_residual(const GaussianScene& scene, const CameraPose& pose_opt,
                                  const Image& input_view, const ResidualOptConfig& cfg,
                                  const MultiViewSet* gt_rig) {
    if (input_view.width != input_view.height)
        fail_param("optimize_residual: input view must be square");
    if (cfg.iters < 0) fail_param("optimize_residual: negative iteration count");
    if (cfg.lr <= 0) fail_param("optimize_residual: learning rate must be positive");
    if (cfg.divergence_patience < 1) fail_param("optimize_residual: patience must be >= 1");
    const int res = input_view.width;
    const int n = static_cast<int>(scene.splats.size());
    if (n == 0) fail_param("optimize_residual: empty scene");

    std::vector<double> gates = visibility_weights(scene, pose_opt, res);

    using grad::Tensor;
    std::vector<double> gate1(static_cast<size_t>(n)), gate3(static_cast<size_t>(n) * 3);
    std::vector<double> mean0(static_cast<size_t>(n) * 3), quat0(static_cast<size_t>(n) * 4);
    std::vector<double> scale0(static_cast<size_t>(n) * 3), op0(static_cast<size_t>(n));
    std::vector<double> logit_c0(static_cast<size_t>(n) * 3);
    for (int i = 0; i < n; ++i) {
        const Splat& s = scene.splats[static_cast<size_t>(i)];
        gate1[static_cast<size_t>(i)] = gates[static_cast<size_t>(i)];
        for (int k = 0; k < 3; ++k) gate3[static_cast<size_t>(i) * 3 + k] = gates[static_cast<size_t>(i)];
        mean0[static_cast<size_t>(i) * 3 + 0] = s.mean.x;
        mean0[static_cast<size_t>(i) * 3 + 1] = s.mean.y;
        mean0[static_cast<size_t>(i) * 3 + 2] = s.mean.z;
        quat0[static_cast<size_t>(i) * 4 + 0] = s.rotation.w;
        quat0[static_cast<size_t>(i) * 4 + 1] = s.rotation.x;
        quat0[static_cast<size_t>(i) * 4 + 2] = s.rotation.y;
        quat0[static_cast<size_t>(i) * 4 + 3] = s.rotation.z;
        scale0[static_cast<size_t>(i) * 3 + 0] = s.scale.x;
        scale0[static_cast<size_t>(i) * 3 + 1] = s.scale.y;
        scale0[static_cast<size_t>(i) * 3 + 2] = s.scale.z;
        op0[static_cast<size_t>(i)] = s.opacity_logit;
        logit_c0[static_cast<size_t>(i) * 3 + 0] = logit_clamped(s.color.x);
        logit_c0[static_cast<size_t>(i) * 3 + 1] = logit_clamped(s.color.y);
        logit_c0[static_cast<size_t>(i) * 3 + 2] = logit_clamped(s.color.z);
    }
    const Tensor t_gate1 = Tensor::from({n, 1}, gate1);
    const Tensor t_gate3 = Tensor::from({n, 3}, gate3);
    const Tensor t_mean0 = Tensor::from({n, 3}, mean0);
    const Tensor t_quat0 = Tensor::from({n, 4}, quat0);
    const Tensor t_scale0 = Tensor::from({n, 3}, scale0);
    const Tensor t_op0 = Tensor::from({n, 1}, op0);
    const Tensor t_logc0 = Tensor::from({n, 3}, logit_c0);
    const Tensor input_t = image_to_tensor(input_view);

    Tensor dc = Tensor::zeros({n, 3}, true);
    Tensor dop = Tensor::zeros({n, 1}, true);
    Tensor dm = Tensor::zeros({n, 3}, true);
    std::vector<Tensor> params{dc, dop, dm};
    grad::AdamState state;
    state.init(params);
    grad::AdamConfig adam;
    adam.lr = cfg.lr;

    auto build_loss = [&]() {
        Tensor mean_t = grad::add(t_mean0, grad::mul(t_gate3, grad::scale(grad::tanh_t(dm), cfg.mean_bound)));
        Tensor op_t = grad::add(t_op0, grad::mul(t_gate1, dop));
        Tensor col_t = grad::sigmoid(grad::add(t_logc0, grad::mul(t_gate3, dc)));
        Tensor rows = grad::concat_cols({mean_t, t_quat0, t_scale0, op_t, col_t});
        Tensor img = grad::render_op(rows, pose_opt, res);
        return perceptual_graph(img, input_t, cfg.perceptual_resolution);
    };

    ResidualOutcome out;
    out.report.pose = pose_opt;
    out.report.dist_before =
        perceptual_proxy(render_scene(scene, pose_opt, res), input_view, cfg.perceptual_resolution);

    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_dc = dc.data(), best_dop = dop.data(), best_dm = dm.data();
    int stall = 0;
    for (int it = 0; it < cfg.iters; ++it) {
        Tensor loss = build_loss();
        const double val = loss.value();
        if (!std::isfinite(val))
            fail_numeric("optimize_residual: non-finite loss at iteration " + std::to_string(it));
        out.report.loss_trace.push_back(val);
        out.report.iters_run = it + 1;
        if (val < best) {
            best = val;
            best_dc = dc.data();
            best_dop = dop.data();
            best_dm = dm.data();
            stall = 0;
        } else if (++stall >= cfg.divergence_patience) {
            out.report.diverged = true;
            break;
        }
        grad::backward(loss);
        grad::adam_step(params, state, adam);
    }

    out.field = ResidualField::zeros(static_cast<size_t>(n), gates, cfg.mean_bound);
    for (int i = 0; i < n; ++i) {
        out.field.d_color[static_cast<size_t>(i)] = {best_dc[static_cast<size_t>(i) * 3 + 0],
                                                     best_dc[static_cast<size_t>(i) * 3 + 1],
                                                     best_dc[static_cast<size_t>(i) * 3 + 2]};
        out.field.d_opacity[static_cast<size_t>(i)] = best_dop[static_cast<size_t>(i)];
        out.field.d_mean[static_cast<size_t>(i)] = {best_dm[static_cast<size_t>(i) * 3 + 0],
                                                    best_dm[static_cast<size_t>(i) * 3 + 1],
                                                    best_dm[static_cast<size_t>(i) * 3 + 2]};
    }
    out.optimized = apply_residual(scene, out.field);
    out.report.dist_after = perceptual_proxy(render_scene(out.optimized, pose_opt, res),
                                             input_view, cfg.perceptual_resolution);

    if (gt_rig != nullptr) {
        if (gt_rig->views.size() != gt_rig->poses.size() || gt_rig->views.empty())
            fail_param("optimize_residual: malformed reference view set");
        // The canonical pose facing the optimized view stays out of the drift
        // measurement; it is the one view that is supposed to change.
        size_t facing = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (size_t v = 0; v < gt_rig->poses.size(); ++v) {
            const CameraPose& p = gt_rig->poses[v];
            const double d = az_diff(p.azimuth_deg, pose_opt.azimuth_deg) +
                             std::fabs(p.elevation_deg - pose_opt.elevation_deg);
            if (d < best_d) {
                best_d = d;
                facing = v;
            }
        }
        for (size_t v = 0; v < gt_rig->poses.size(); ++v) {
            if (v == facing) continue;
            const Image& gt = gt_rig->views[v];
            if (gt.width != gt.height) fail_param("optimize_residual: reference views must be square");
            const CameraPose& p = gt_rig->poses[v];
            const double before = psnr(render_scene(scene, p, gt.width), gt);
            const double after = psnr(render_scene(out.optimized, p, gt.width), gt);
            out.report.psnr_drift_per_view.push_back(after - before);
            out.report.drift_labels.push_back(p.label);
        }
    }
    return out;
}

void write_residual_report(const std::string& out_dir, const GaussianScene& before,
                           const ResidualOutcome& outcome, int resolution) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const CameraPose& pose = outcome.report.pose;
    save_png(render_scene(before, pose, resolution), (fs::path(out_dir) / "before.png").string());
    save_png(render_scene(outcome.optimized, pose, resolution),
             (fs::path(out_dir) / "after.png").string());

    std::ofstream f(fs::path(out_dir) / "report.csv");
    if (!f) fail_data("cannot write residual report in " + out_dir);
    f << "pose_az,pose_el,dist_before,dist_after,psnr_drift_per_view\n";
    std::ostringstream drift;
    for (size_t i = 0; i < outcome.report.psnr_drift_per_view.size(); ++i) {
        if (i) drift << ';';
        drift << outcome.report.psnr_drift_per_view[i];
    }
    f << pose.azimuth_deg << ',' << pose.elevation_deg << ',' << outcome.report.dist_before << ','
      << outcome.report.dist_after << ',' << drift.str() << "\n";
    if (!f) fail_data("short write to residual report in " + out_dir);
}

}  // namespace mvb::viewopt
