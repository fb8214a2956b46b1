#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>

#include "core/camera.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"
#include "grad/gradcheck.hpp"
#include "grad/render_op.hpp"
#include "oracle/scene_gen.hpp"
#include "recon/checkpoint.hpp"
#include "recon/model.hpp"
#include "render/rasterizer.hpp"

using namespace mvb;
using namespace mvb::recon;

namespace {

Image random_image(int res, Rng& rng) {
    Image img;
    img.width = img.height = res;
    img.data.resize(static_cast<size_t>(res) * res * 3);
    for (double& v : img.data) v = rng.uniform(0.0, 1.0);
    return img;
}

MultiViewSet random_rig_set(int res, uint64_t seed, double extent = 1.2) {
    Rng rng(seed);
    MultiViewSet mvs;
    const CanonicalRig rig = make_canonical_rig(extent);
    for (const CameraPose& pose : rig.poses) {
        mvs.poses.push_back(pose);
        mvs.views.push_back(random_image(res, rng));
    }
    return mvs;
}

MultiViewSet rendered_rig_set(uint64_t scene_seed, int res) {
    SceneSpec spec;
    spec.seed = scene_seed;
    GaussianScene scene = generate_scene(spec);
    MultiViewSet mvs;
    const CanonicalRig rig = make_canonical_rig(1.2);
    for (const CameraPose& pose : rig.poses) {
        mvs.poses.push_back(pose);
        mvs.views.push_back(render_scene(scene, pose, res));
    }
    return mvs;
}

void fill_zero(Tensor t) {
    for (double& v : t.data()) v = 0.0;
}

}  // namespace

TEST_CASE("encode produces one token per patch and reacts to the pose") {
    ModelConfig cfg;
    ReconstructorParams p = init_base_params(cfg, 7);
    Rng rng(3);
    Image img = random_image(64, rng);
    CameraPose front = make_pose(0, 0, 1.2);
    Tensor tok = encode_view(img, front, p);
    REQUIRE(tok.shape() == std::vector<int>{64, 64});

    CameraPose side = make_pose(90, 0, 1.2);
    Tensor tok2 = encode_view(img, side, p);
    double diff = 0;
    for (size_t i = 0; i < tok.data().size(); ++i)
        diff = std::max(diff, std::fabs(tok.data()[i] - tok2.data()[i]));
    CHECK(diff > 1e-6);  // pose embedding is active

    Image odd;
    odd.width = odd.height = 60;  // not divisible by patch 8
    odd.data.assign(60 * 60 * 3, 0.0);
    CHECK_THROWS_AS(encode_view(odd, front, p), Error);
}

TEST_CASE("zero image with zero embedding weights gives bias tokens") {
    ModelConfig cfg;
    ReconstructorParams p = init_base_params(cfg, 11);
    fill_zero(p.embed_w);
    for (int j = 0; j < cfg.d_model; ++j) p.embed_b.data()[static_cast<size_t>(j)] = 0.25 * j;
    Image img;
    img.width = img.height = 32;
    img.data.assign(32 * 32 * 3, 0.0);
    Tensor tok = encode_view(img, make_pose(45, 0, 1.2), p);
    REQUIRE(tok.shape() == std::vector<int>{16, 64});
    for (int r = 0; r < 16; ++r)
        for (int j = 0; j < cfg.d_model; ++j)
            CHECK(tok.data()[static_cast<size_t>(r * cfg.d_model + j)] == 0.25 * j);
}

TEST_CASE("fresh adapter leaves the forward pass bit-identical") {
    ModelConfig cfg;
    ReconstructorParams p = init_base_params(cfg, 21);
    LoraParams lora = init_lora_params(cfg, 22);
    MultiViewSet mvs = rendered_rig_set(301, 32);

    Tensor base_rows = forward_rows(mvs, p, nullptr);
    Tensor lora_rows = forward_rows(mvs, p, &lora);
    REQUIRE(base_rows.shape() == lora_rows.shape());
    CHECK(base_rows.data() == lora_rows.data());

    // and a nonzero B genuinely changes the output
    for (double& v : lora.blocks[0].at[0]->b.data()) v = 0.01;
    Tensor changed = forward_rows(mvs, p, &lora);
    double diff = 0;
    for (size_t i = 0; i < changed.data().size(); ++i)
        diff = std::max(diff, std::fabs(changed.data()[i] - base_rows.data()[i]));
    CHECK(diff > 1e-9);
}

TEST_CASE("attention trunk is view-permutation equivariant") {
    ModelConfig cfg;
    ReconstructorParams p = init_base_params(cfg, 31);
    Rng rng(8);
    const CanonicalRig rig = make_canonical_rig(1.2);
    std::vector<Image> imgs;
    for (int v = 0; v < kRigViews; ++v) imgs.push_back(random_image(32, rng));
    const int per_view = 16;  // 32/8 squared
    const int d = cfg.d_model;

    auto joint_tokens = [&](const std::vector<int>& order) {
        Tensor out = Tensor::zeros({kRigViews * per_view, d});
        for (int slot = 0; slot < kRigViews; ++slot) {
            int v = order[static_cast<size_t>(slot)];
            Tensor tok = encode_view(imgs[static_cast<size_t>(v)],
                                     rig.poses[static_cast<size_t>(v)], p);
            std::copy(tok.data().begin(), tok.data().end(),
                      out.data().begin() + static_cast<size_t>(slot) * per_view * d);
        }
        return out;
    };

    Tensor fused = fuse_tokens(joint_tokens({0, 1, 2, 3, 4, 5}), p, nullptr);
    const std::vector<int> perm = {3, 0, 5, 1, 4, 2};
    Tensor fused_perm = fuse_tokens(joint_tokens(perm), p, nullptr);

    double worst = 0;
    for (int slot = 0; slot < kRigViews; ++slot) {
        int v = perm[static_cast<size_t>(slot)];
        for (int i = 0; i < per_view * d; ++i) {
            double a = fused.data()[static_cast<size_t>(v * per_view * d + i)];
            double b = fused_perm.data()[static_cast<size_t>(slot * per_view * d + i)];
            worst = std::max(worst, std::fabs(a - b));
        }
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("decode anchors splats at unprojected patch centers") {
    ModelConfig cfg;
    ReconstructorParams p = init_base_params(cfg, 41);
    fill_zero(p.head_w);
    fill_zero(p.head_b);
    MultiViewSet mvs = rendered_rig_set(302, 64);
    GaussianScene scene = forward(mvs, p);
    REQUIRE(scene.size() == 6 * 64);  // six views, 64 tokens each

    const int per_side = 8;
    size_t idx = 0;
    for (int v = 0; v < kRigViews; ++v) {
        const CameraBasis basis = camera_basis(mvs.poses[static_cast<size_t>(v)]);
        const double pixscale = 64.0 / (2.0 * 1.2);
        for (int pr = 0; pr < per_side; ++pr)
            for (int pc = 0; pc < per_side; ++pc, ++idx) {
                const Splat& s = scene.splats[idx];
                const double camx = (pc * 8 + 4.0 - 32.0) / pixscale;
                const double camy = -(pr * 8 + 4.0 - 32.0) / pixscale;
                const Vec3 want = basis.right * camx + basis.up * camy;
                CHECK(std::fabs(s.mean.x - want.x) < 1e-12);
                CHECK(std::fabs(s.mean.y - want.y) < 1e-12);
                CHECK(std::fabs(s.mean.z - want.z) < 1e-12);
                CHECK(s.rotation.w == doctest::Approx(1.0).epsilon(1e-12));
                CHECK(std::fabs(s.rotation.x) < 1e-12);
                CHECK(s.scale.x == doctest::Approx(std::log(2.0)).epsilon(1e-12));
                CHECK(s.opacity_logit == 0.0);
                CHECK(s.color.x == doctest::Approx(0.5).epsilon(1e-12));
            }
    }
    validate_scene(scene, 2.0);
}

TEST_CASE("arbitrary parameter values still decode to a valid scene") {
    ModelConfig cfg;
    ReconstructorParams p = init_base_params(cfg, 51);
    for (auto& [name, t] : named_base_params(p))
        for (double& v : t.data()) v *= 37.0;  // wild, far outside training range
    MultiViewSet mvs = rendered_rig_set(303, 32);
    GaussianScene scene = forward(mvs, p);
    validate_scene(scene, 2.0);  // anchors stay within extent + offset bound
}

TEST_CASE("forward is deterministic") {
    ModelConfig cfg;
    ReconstructorParams p = init_base_params(cfg, 61);
    LoraParams lora = init_lora_params(cfg, 62);
    for (double& v : lora.blocks[1].at[2]->b.data()) v = 0.005;
    MultiViewSet mvs = rendered_rig_set(304, 32);
    Tensor a = forward_rows(mvs, p, &lora);
    Tensor b = forward_rows(mvs, p, &lora);
    CHECK(a.data() == b.data());
}

TEST_CASE("parameter partition is disjoint, exhaustive and sized r*(2 d r)") {
    ModelConfig cfg;
    ReconstructorParams p = init_base_params(cfg, 71);
    LoraParams lora = init_lora_params(cfg, 72);
    auto [frozen, trainable] = partition_params(p, lora);

    std::set<grad::Node*> fset, tset;
    for (auto& t : frozen) fset.insert(t.node());
    for (auto& t : trainable) tset.insert(t.node());
    CHECK(fset.size() == frozen.size());
    CHECK(tset.size() == trainable.size());
    for (grad::Node* n : tset) CHECK(fset.count(n) == 0);
    CHECK(frozen.size() == named_base_params(p).size());
    CHECK(trainable.size() == named_lora_params(lora).size());

    size_t tn = 0;
    for (auto& t : trainable) tn += t.size();
    // 2 blocks x {W_Q, W_V} x (A 64x32 + B 32x64)
    CHECK(tn == 16384);

    ModelConfig all = cfg;
    all.lora_targets = "qkvo";
    LoraParams lora4 = init_lora_params(all, 73);
    size_t tn4 = 0;
    for (auto& t : lora_param_list(lora4)) tn4 += t.size();
    CHECK(tn4 == 32768);
}

TEST_CASE("adapter gradients match finite differences through the renderer") {
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.heads = 2;
    cfg.patch = 4;
    cfg.lora_rank = 4;
    cfg.lora_alpha = 4.0;
    ReconstructorParams p = init_base_params(cfg, 81);
    LoraParams lora = init_lora_params(cfg, 82);
    Rng lrng(83);
    for (auto& t : lora_param_list(lora)) {
        for (double& v : t.data()) v = 0.05 * lrng.normal();
        t.node()->requires_grad = true;
    }

    MultiViewSet mvs = rendered_rig_set(305, 8);
    Rng trng(84);
    Image target = random_image(8, trng);
    Tensor target_t = Tensor::from({8, 8, 3}, std::vector<double>(target.data));

    auto build_loss = [&]() {
        Tensor rows = forward_rows(mvs, p, &lora);
        Tensor img = grad::render_op(rows, mvs.poses[1], 8, {1, 1, 1});
        return grad::mse(img, target_t);
    };
    std::vector<Tensor> params = lora_param_list(lora);
    Rng crng(85);
    grad::GradCheckReport rep = grad::grad_check(build_loss, params, 1e-5, 3, &crng);
    CAPTURE(rep.max_rel_err);
    CAPTURE(rep.max_abs_err);
    CHECK(rep.checked >= 24);
    CHECK(rep.max_rel_err < 1e-3);
}

TEST_CASE("checkpoints round trip exactly and reject mismatches") {
    ModelConfig cfg;
    ReconstructorParams p = init_base_params(cfg, 91);
    LoraParams lora = init_lora_params(cfg, 92);
    for (double& v : lora.blocks[0].at[2]->b.data()) v = 0.125;

    const std::string base_path = "test_recon_base.ckpt";
    const std::string lora_path = "test_recon_lora.ckpt";
    save_base_checkpoint(base_path, p);
    save_lora_checkpoint(lora_path, lora);

    ReconstructorParams p2 = load_base_checkpoint(base_path, cfg);
    auto na = named_base_params(p), nb = named_base_params(p2);
    REQUIRE(na.size() == nb.size());
    for (size_t i = 0; i < na.size(); ++i) {
        CHECK(na[i].first == nb[i].first);
        CHECK(na[i].second.data() == nb[i].second.data());
    }
    CHECK(params_digest(p) == params_digest(p2));

    LoraParams lora2 = load_lora_checkpoint(lora_path, cfg);
    auto la = named_lora_params(lora), lb = named_lora_params(lora2);
    REQUIRE(la.size() == lb.size());
    for (size_t i = 0; i < la.size(); ++i) CHECK(la[i].second.data() == lb[i].second.data());

    // digest reacts to any single-value change
    p2.head_b.data()[0] += 1e-9;
    CHECK(params_digest(p) != params_digest(p2));

    // wrong architecture is refused
    ModelConfig other = cfg;
    other.d_model = 32;
    CHECK_THROWS_AS(load_base_checkpoint(base_path, other), Error);
    // base/lora magics are not interchangeable
    CHECK_THROWS(load_base_checkpoint(lora_path, cfg));
    // truncation is detected
    {
        std::FILE* f = std::fopen(base_path.c_str(), "rb+");
        REQUIRE(f);
        std::fclose(f);
        std::FILE* t = std::fopen("test_recon_trunc.ckpt", "wb");
        std::FILE* s = std::fopen(base_path.c_str(), "rb");
        char buf[4096];
        size_t total = 0, want = 10000;
        while (total < want) {
            size_t got = std::fread(buf, 1, std::min(sizeof buf, want - total), s);
            if (got == 0) break;
            std::fwrite(buf, 1, got, t);
            total += got;
        }
        std::fclose(s);
        std::fclose(t);
    }
    CHECK_THROWS(load_base_checkpoint("test_recon_trunc.ckpt", cfg));
    std::remove(base_path.c_str());
    std::remove(lora_path.c_str());
    std::remove("test_recon_trunc.ckpt");
}
