#include "grad/render_op.hpp"

#include "core/error.hpp"

namespace mvb::grad {

GaussianScene scene_from_rows(const Tensor& splats) {
    const auto& sh = splats.shape();
    if (sh.size() != 2 || sh[1] != kSplatCols)
        fail_param("scene_from_rows: expected an (n,14) tensor");
    const int n = sh[0];
    const auto& d = splats.data();
    GaussianScene scene;
    scene.splats.resize(n);
    for (int i = 0; i < n; ++i) {
        const double* r = d.data() + static_cast<size_t>(i) * kSplatCols;
        Splat& s = scene.splats[i];
        s.mean = {r[0], r[1], r[2]};
        s.rotation = {r[3], r[4], r[5], r[6]};
        s.scale = {r[7], r[8], r[9]};
        s.opacity_logit = r[10];
        s.color = {r[11], r[12], r[13]};
    }
    return scene;
}

Tensor rows_from_scene(const GaussianScene& scene, bool requires_grad) {
    const int n = static_cast<int>(scene.splats.size());
    Tensor t = Tensor::zeros({n, kSplatCols}, requires_grad);
    auto& d = t.data();
    for (int i = 0; i < n; ++i) {
        const Splat& s = scene.splats[i];
        double* r = d.data() + static_cast<size_t>(i) * kSplatCols;
        r[0] = s.mean.x;
        r[1] = s.mean.y;
        r[2] = s.mean.z;
        r[3] = s.rotation.w;
        r[4] = s.rotation.x;
        r[5] = s.rotation.y;
        r[6] = s.rotation.z;
        r[7] = s.scale.x;
        r[8] = s.scale.y;
        r[9] = s.scale.z;
        r[10] = s.opacity_logit;
        r[11] = s.color.x;
        r[12] = s.color.y;
        r[13] = s.color.z;
    }
    return t;
}

Tensor render_op(const Tensor& splats, const CameraPose& pose, int resolution,
                 const Vec3& background) {
    const auto& sh = splats.shape();
    if (sh.size() != 2 || sh[1] != kSplatCols)
        fail_param("render_op: expected an (n,14) tensor");
    if (resolution < 1) fail_param("render_op: resolution must be positive");

    GaussianScene scene = scene_from_rows(splats);
    Image img = render_scene(scene, pose, resolution, background);

    auto node = std::make_shared<Node>();
    node->shape = {resolution, resolution, 3};
    node->v = std::move(img.data);
    node->op = "render";
    if (splats.requires_grad()) {
        node->requires_grad = true;
        node->parents = {splats};
        node->backprop = [pose, resolution, background](Node& self) {
            Node& p = *self.parents[0].node();
            if (!p.requires_grad) return;
            p.ensure_grad();
            GaussianScene sc = scene_from_rows(self.parents[0]);
            Image gimg;
            gimg.width = resolution;
            gimg.height = resolution;
            gimg.data = self.g;
            RenderGrads rg = render_backward(sc, pose, resolution, background, gimg);
            const int n = static_cast<int>(sc.splats.size());
            for (int i = 0; i < n; ++i) {
                double* r = p.g.data() + static_cast<size_t>(i) * kSplatCols;
                r[0] += rg.d_mean[i].x;
                r[1] += rg.d_mean[i].y;
                r[2] += rg.d_mean[i].z;
                for (int q = 0; q < 4; ++q) r[3 + q] += rg.d_rotation[i][q];
                r[7] += rg.d_scale[i].x;
                r[8] += rg.d_scale[i].y;
                r[9] += rg.d_scale[i].z;
                r[10] += rg.d_opacity_logit[i];
                r[11] += rg.d_color[i].x;
                r[12] += rg.d_color[i].y;
                r[13] += rg.d_color[i].z;
            }
        };
    }
    return Tensor(node);
}

}  // namespace mvb::grad
