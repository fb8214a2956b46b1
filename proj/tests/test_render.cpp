#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "core/rng.hpp"
#include "core/scene.hpp"
#include "render/rasterizer.hpp"

using namespace mvb;

namespace {

// Scenes used for gradient checks keep opacities <= ~0.75 and few splats so
// per-pixel transmittance never crosses the termination threshold (which is a
// genuine discontinuity of the forward model).
GaussianScene random_scene(Rng& rng, int count) {
    GaussianScene scene;
    for (int i = 0; i < count; i++) {
        Splat s;
        s.mean = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
        Quat q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        double qn = norm(q);
        s.rotation = {q.w / qn, q.x / qn, q.y / qn, q.z / qn};
        s.scale = {rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3)};
        s.opacity_logit = rng.uniform(-1.5, 1.1);
        s.color = {rng.next_double(), rng.next_double(), rng.next_double()};
        scene.splats.push_back(s);
    }
    return scene;
}

CameraPose random_pose(Rng& rng) {
    return make_pose(rng.uniform(0, 360), rng.uniform(-60, 60), 1.2);
}

double weighted_sum(const Image& img, const Image& w) {
    double s = 0;
    for (size_t i = 0; i < img.data.size(); i++) s += img.data[i] * w.data[i];
    return s;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace

TEST_CASE("single centered splat reproduces its color at the image center") {
    GaussianScene scene;
    Splat s;
    s.mean = {0, 0, 0};
    s.scale = {0.6, 0.6, 0.6};
    s.opacity_logit = 12.0;  // essentially opaque
    s.color = {0.2, 0.7, 0.4};
    scene.splats.push_back(s);
    Image img = render_scene(scene, make_pose(0, 0, 1.2), 64, {1, 1, 1});
    // Pixel grid is even so sample the four pixels around the exact center.
    for (int y : {31, 32})
        for (int x : {31, 32}) {
            CHECK(std::abs(img.at(y, x, 0) - 0.2) < 1e-3);
            CHECK(std::abs(img.at(y, x, 1) - 0.7) < 1e-3);
            CHECK(std::abs(img.at(y, x, 2) - 0.4) < 1e-3);
        }
}

TEST_CASE("axis-aligned isotropic splat projects to diagonal cov2d with floor") {
    GaussianScene scene;
    Splat s;
    s.scale = {0.25, 0.25, 0.25};
    scene.splats.push_back(s);
    int res = 64;
    double extent = 1.2;
    auto proj = project_scene(scene, make_pose(0, 0, extent), res);
    REQUIRE(proj.size() == 1);
    double expected = std::pow(0.25 * res / (2 * extent), 2) + kCovFloor;
    CHECK(proj[0].cov2d[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(proj[0].cov2d[2] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(proj[0].cov2d[1]) < 1e-12);
    CHECK(proj[0].mean2d.x == doctest::Approx(res / 2.0));
    CHECK(proj[0].mean2d.y == doctest::Approx(res / 2.0));
}

TEST_CASE("front and back views mirror mean2d horizontally") {
    Rng rng(31);
    GaussianScene scene = random_scene(rng, 8);
    int res = 48;
    auto front = project_scene(scene, make_pose(0, 0, 1.2), res);
    auto back = project_scene(scene, make_pose(180, 0, 1.2), res);
    for (size_t i = 0; i < scene.size(); i++) {
        CHECK(front[i].mean2d.x == doctest::Approx(res - back[i].mean2d.x).epsilon(1e-9));
        CHECK(front[i].mean2d.y == doctest::Approx(back[i].mean2d.y).epsilon(1e-9));
    }
}

TEST_CASE("render is invariant under splat permutation at distinct depths") {
    Rng rng(77);
    GaussianScene scene = random_scene(rng, 12);
    CameraPose pose = random_pose(rng);
    // Force distinct depths along the current view axis by construction.
    Image a = render_scene(scene, pose, 32);
    GaussianScene shuffled = scene;
    std::reverse(shuffled.splats.begin(), shuffled.splats.end());
    Image b = render_scene(shuffled, pose, 32);
    for (size_t i = 0; i < a.data.size(); i++) CHECK(a.data[i] == b.data[i]);
}

TEST_CASE("per-pixel compositing weights plus residual transmittance equal one") {
    Rng rng(13);
    GaussianScene scene = random_scene(rng, 10);
    CameraPose pose = random_pose(rng);
    int res = 32;
    SplatWeights w = render_splat_weights(scene, pose, res);

    // Re-derive the per-pixel weight sums by rendering each splat color as a
    // one-hot and checking column sums: instead just verify the invariant via
    // a white-on-black render: sum_i a_i T_i = 1 - T_end per pixel.
    GaussianScene white = scene;
    for (auto& s : white.splats) s.color = {1, 1, 1};
    Image img = render_scene(white, pose, res, {0, 0, 0});
    for (int y = 0; y < res; y++)
        for (int x = 0; x < res; x++) {
            double covered = img.at(y, x, 0);
            double residual = w.residual[static_cast<size_t>(y) * res + x];
            CHECK(std::abs(covered + residual - 1.0) < 1e-6);
        }
    double total = 0;
    for (double v : w.weight) total += v;
    double covered_total = 0;
    for (size_t px = 0; px < w.residual.size(); px++) covered_total += 1.0 - w.residual[px];
    CHECK(total == doctest::Approx(covered_total).epsilon(1e-9));
}

TEST_CASE("zero upstream gradient and off-screen splats give zero gradients") {
    Rng rng(41);
    GaussianScene scene = random_scene(rng, 5);
    scene.splats[2].mean = {5.0, 5.0, 5.0};  // far outside every frustum at extent 1.2
    CameraPose pose = make_pose(20, 10, 1.2);
    Image zero_grad(32, 32, 0.0);
    RenderGrads g = render_backward(scene, pose, 32, {1, 1, 1}, zero_grad);
    for (size_t i = 0; i < scene.size(); i++) {
        CHECK(g.d_mean[i].x == 0.0);
        CHECK(g.d_opacity_logit[i] == 0.0);
        CHECK(g.d_color[i].y == 0.0);
    }
    Image w(32, 32);
    Rng wr = rng.child("w");
    for (double& v : w.data) v = wr.uniform(-1, 1);
    RenderGrads g2 = render_backward(scene, pose, 32, {1, 1, 1}, w);
    CHECK(g2.d_mean[2].x == 0.0);
    CHECK(g2.d_mean[2].y == 0.0);
    CHECK(g2.d_rotation[2][0] == 0.0);
    CHECK(g2.d_scale[2].z == 0.0);
    CHECK(g2.d_opacity_logit[2] == 0.0);
    CHECK(g2.d_color[2].x == 0.0);
}

TEST_CASE("analytic gradients match central differences for all parameter classes") {
    Rng master(2024);
    const int instances = 25;
    const double h = 1e-5;
    double worst = 0;
    for (int inst = 0; inst < instances; inst++) {
        Rng rng = master.child("inst", inst);
        GaussianScene scene = random_scene(rng, 2 + static_cast<int>(rng.next_below(5)));
        CameraPose pose = random_pose(rng);
        int res = 32;
        Vec3 bg{1, 1, 1};
        Image w(res, res);
        for (double& v : w.data) v = rng.uniform(-1, 1);

        RenderGrads g = render_backward(scene, pose, res, bg, w);
        auto loss = [&](const GaussianScene& sc) {
            return weighted_sum(render_scene(sc, pose, res, bg), w);
        };
        // Field layout per splat: mean(3), rotation(4), scale(3), logit, color(3).
        auto field = [](GaussianScene& sc, size_t i, int f) -> double& {
            Splat& s = sc.splats[i];
            switch (f) {
                case 0: return s.mean.x;
                case 1: return s.mean.y;
                case 2: return s.mean.z;
                case 3: return s.rotation.w;
                case 4: return s.rotation.x;
                case 5: return s.rotation.y;
                case 6: return s.rotation.z;
                case 7: return s.scale.x;
                case 8: return s.scale.y;
                case 9: return s.scale.z;
                case 10: return s.opacity_logit;
                case 11: return s.color.x;
                case 12: return s.color.y;
                default: return s.color.z;
            }
        };
        auto analytic = [&](size_t i, int f) -> double {
            switch (f) {
                case 0: return g.d_mean[i].x;
                case 1: return g.d_mean[i].y;
                case 2: return g.d_mean[i].z;
                case 3: return g.d_rotation[i][0];
                case 4: return g.d_rotation[i][1];
                case 5: return g.d_rotation[i][2];
                case 6: return g.d_rotation[i][3];
                case 7: return g.d_scale[i].x;
                case 8: return g.d_scale[i].y;
                case 9: return g.d_scale[i].z;
                case 10: return g.d_opacity_logit[i];
                case 11: return g.d_color[i].x;
                case 12: return g.d_color[i].y;
                default: return g.d_color[i].z;
            }
        };

        GaussianScene tmp = scene;
        for (size_t i = 0; i < scene.size(); i++) {
            for (int f = 0; f < 14; f++) {
                double orig = field(tmp, i, f);
                field(tmp, i, f) = orig + h;
                double up = loss(tmp);
                field(tmp, i, f) = orig - h;
                double down = loss(tmp);
                field(tmp, i, f) = orig;
                double numeric = (up - down) / (2 * h);
                worst = std::max(worst, rel_err(analytic(i, f), numeric));
            }
        }
    }
    CHECK(worst < 1e-3);
}
