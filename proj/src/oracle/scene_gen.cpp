#include "oracle/scene_gen.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "render/rasterizer.hpp"

namespace mvb {

namespace {

Quat random_rotation(Rng& rng) {
    Quat q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    const double n = std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
    if (n < 1e-12) return {1, 0, 0, 0};
    return {q.w / n, q.x / n, q.y / n, q.z / n};
}

Vec3 random_unit(Rng& rng) {
    for (;;) {
        Vec3 v{rng.normal(), rng.normal(), rng.normal()};
        const double n = norm(v);
        if (n > 1e-9) return {v.x / n, v.y / n, v.z / n};
    }
}

Vec3 pick_color(const std::vector<Vec3>& palette, Rng& rng) {
    const Vec3 base = palette[rng.next_below(palette.size())];
    auto jitter = [&](double c) {
        return std::clamp(c + rng.uniform(-0.05, 0.05), 0.02, 0.98);
    };
    return {jitter(base.x), jitter(base.y), jitter(base.z)};
}

Splat make_splat(const Vec3& mean, const Vec3& scale, const Vec3& color, Rng& rng) {
    Splat s;
    s.mean = {std::clamp(mean.x, -0.88, 0.88), std::clamp(mean.y, -0.88, 0.88),
              std::clamp(mean.z, -0.88, 0.88)};
    s.rotation = random_rotation(rng);
    s.scale = scale;
    s.opacity_logit = rng.uniform(1.0, 3.0);
    s.color = color;
    return s;
}

void add_primitive(GaussianScene& scene, PrimitiveKind kind, int count,
                   const std::vector<Vec3>& palette, Rng& rng) {
    const Vec3 center{rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)};
    switch (kind) {
        case PrimitiveKind::sphere_cluster: {
            const double radius = rng.uniform(0.18, 0.32);
            for (int i = 0; i < count; ++i) {
                const Vec3 dir = random_unit(rng);
                const double r = radius * std::cbrt(rng.next_double());
                const Vec3 mean{center.x + dir.x * r, center.y + dir.y * r,
                                center.z + dir.z * r};
                const Vec3 scale{rng.uniform(0.03, 0.09), rng.uniform(0.03, 0.09),
                                 rng.uniform(0.03, 0.09)};
                scene.splats.push_back(make_splat(mean, scale, pick_color(palette, rng), rng));
            }
            break;
        }
        case PrimitiveKind::box_cluster: {
            const Vec3 half{rng.uniform(0.12, 0.28), rng.uniform(0.12, 0.28),
                            rng.uniform(0.12, 0.28)};
            for (int i = 0; i < count; ++i) {
                const Vec3 mean{center.x + rng.uniform(-half.x, half.x),
                                center.y + rng.uniform(-half.y, half.y),
                                center.z + rng.uniform(-half.z, half.z)};
                const Vec3 scale{rng.uniform(0.03, 0.09), rng.uniform(0.03, 0.09),
                                 rng.uniform(0.03, 0.09)};
                scene.splats.push_back(make_splat(mean, scale, pick_color(palette, rng), rng));
            }
            break;
        }
        case PrimitiveKind::torus_ring: {
            const double ring = rng.uniform(0.18, 0.3);
            const double tube = rng.uniform(0.04, 0.09);
            const Mat3 orient = rotation_matrix(random_rotation(rng));
            for (int i = 0; i < count; ++i) {
                const double phi = rng.uniform(0.0, 2.0 * M_PI);
                const Vec3 local{ring * std::cos(phi) + tube * 0.5 * rng.normal(),
                                 tube * 0.5 * rng.normal(),
                                 ring * std::sin(phi) + tube * 0.5 * rng.normal()};
                const Vec3 mean = center + mul(orient, local);
                const Vec3 scale{rng.uniform(0.03, 0.08), rng.uniform(0.03, 0.08),
                                 rng.uniform(0.03, 0.08)};
                scene.splats.push_back(make_splat(mean, scale, pick_color(palette, rng), rng));
            }
            break;
        }
    }
}

}  // namespace

const std::vector<Vec3>& default_palette() {
    static const std::vector<Vec3> p = {
        {0.85, 0.22, 0.20}, {0.90, 0.55, 0.15}, {0.90, 0.85, 0.25}, {0.25, 0.70, 0.30},
        {0.20, 0.75, 0.80}, {0.25, 0.35, 0.85}, {0.60, 0.30, 0.80}, {0.80, 0.80, 0.78},
    };
    return p;
}

double alpha_coverage(const GaussianScene& scene, const CameraPose& pose, int resolution) {
    const SplatWeights w = render_splat_weights(scene, pose, resolution);
    int covered = 0;
    for (double t : w.residual)
        if (1.0 - t > 0.5) ++covered;
    return static_cast<double>(covered) / static_cast<double>(w.residual.size());
}

GaussianScene generate_scene(const SceneSpec& spec) {
    if (spec.primitive_count < 1 || spec.primitive_count > 8)
        fail_param("generate_scene: primitive_count must be in [1, 8]");
    const std::vector<Vec3>& palette = spec.palette.empty() ? default_palette() : spec.palette;
    for (const Vec3& c : palette)
        if (c.x < 0 || c.x > 1 || c.y < 0 || c.y > 1 || c.z < 0 || c.z > 1)
            fail_param("generate_scene: palette colors must be in [0,1]");

    const CanonicalRig rig = make_canonical_rig(1.2);
    for (int attempt = 0; attempt < 25; ++attempt) {
        Rng rng = Rng(spec.seed).child("scenegen", static_cast<uint64_t>(attempt));
        GaussianScene scene;
        for (int p = 0; p < spec.primitive_count; ++p) {
            const auto kind = static_cast<PrimitiveKind>(rng.next_below(3));
            // the first primitive alone already clears the 64-splat floor
            const int count = (p == 0) ? static_cast<int>(80 + rng.next_below(121))
                                       : static_cast<int>(24 + rng.next_below(137));
            add_primitive(scene, kind, count, palette, rng);
        }
        validate_scene(scene, 0.9);
        bool visible = true;
        for (const CameraPose& pose : rig.poses)
            if (alpha_coverage(scene, pose, 64) < 0.01) {
                visible = false;
                break;
            }
        if (visible) return scene;
    }
    fail_numeric("generate_scene: could not produce a visible scene for this seed");
}

}  // namespace mvb
