#include "recon/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "core/error.hpp"
#include "grad/render_op.hpp"

namespace mvb::recon {

namespace {

constexpr double kMeanOffsetBound = 0.5;
constexpr double kInitScale = 0.12;  // softplus(head scale bias) at init

int lora_slot(char c) {
    switch (c) {
        case 'q': return 0;
        case 'k': return 1;
        case 'v': return 2;
        case 'o': return 3;
        default: return -1;
    }
}

Tensor randn(std::vector<int> shape, double stddev, Rng& rng) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    std::vector<double> v(n);
    for (double& x : v) x = stddev * rng.normal();
    return Tensor::from(std::move(shape), std::move(v));
}

// x*W with an optional low-rank delta. alpha/r is folded into one scale.
Tensor project(const Tensor& x, const Tensor& w, const ModelConfig& cfg,
               const std::optional<LoraPair>& lora) {
    Tensor out = grad::matmul(x, w);
    if (lora) {
        double s = cfg.lora_alpha / static_cast<double>(cfg.lora_rank);
        out = grad::add(out, grad::scale(grad::matmul(grad::matmul(x, lora->a), lora->b), s));
    }
    return out;
}

}  // namespace

void validate_model_config(const ModelConfig& cfg) {
    if (cfg.d_model < 1 || cfg.layers < 1 || cfg.heads < 1 || cfg.patch < 1)
        fail_param("model config: dimensions must be positive");
    if (cfg.d_model % cfg.heads != 0) fail_param("model config: heads must divide d_model");
    if (cfg.lora_rank < 1) fail_param("model config: lora rank must be positive");
    if (cfg.lora_targets.empty()) fail_param("model config: lora targets empty");
    for (char c : cfg.lora_targets)
        if (lora_slot(c) < 0) fail_param("model config: lora target must be one of q,k,v,o");
    for (size_t i = 0; i < cfg.lora_targets.size(); ++i)
        for (size_t j = i + 1; j < cfg.lora_targets.size(); ++j)
            if (cfg.lora_targets[i] == cfg.lora_targets[j])
                fail_param("model config: duplicate lora target");
}

std::uint64_t model_config_hash(const ModelConfig& cfg) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "d=%d;L=%d;h=%d;p=%d;r=%d;a=%.17g;t=%s", cfg.d_model, cfg.layers,
                  cfg.heads, cfg.patch, cfg.lora_rank, cfg.lora_alpha, cfg.lora_targets.c_str());
    std::uint64_t h = 1469598103934665603ull;
    for (const char* c = buf; *c; ++c) {
        h ^= static_cast<unsigned char>(*c);
        h *= 1099511628211ull;
    }
    return h;
}

ReconstructorParams init_base_params(const ModelConfig& cfg, std::uint64_t seed) {
    validate_model_config(cfg);
    ReconstructorParams p;
    p.cfg = cfg;
    const int d = cfg.d_model;
    const int feat = cfg.patch * cfg.patch * 3 + 6;
    Rng root(seed);

    {
        Rng r = root.child("embed");
        p.embed_w = randn({feat, d}, 0.05, r);
        p.embed_b = Tensor::zeros({d});
    }
    const double wstd = 1.0 / std::sqrt(static_cast<double>(d));
    for (int l = 0; l < cfg.layers; ++l) {
        Rng r = root.child("block", static_cast<std::uint64_t>(l));
        AttnBlock b;
        b.ln1_g = Tensor::full({d}, 1.0);
        b.ln1_b = Tensor::zeros({d});
        b.wq = randn({d, d}, wstd, r);
        b.wk = randn({d, d}, wstd, r);
        b.wv = randn({d, d}, wstd, r);
        b.wo = randn({d, d}, wstd, r);
        b.ln2_g = Tensor::full({d}, 1.0);
        b.ln2_b = Tensor::zeros({d});
        b.mlp_w1 = randn({d, 4 * d}, wstd, r);
        b.mlp_b1 = Tensor::zeros({4 * d});
        b.mlp_w2 = randn({4 * d, d}, 1.0 / std::sqrt(4.0 * d), r);
        b.mlp_b2 = Tensor::zeros({d});
        p.blocks.push_back(std::move(b));
    }
    p.final_g = Tensor::full({d}, 1.0);
    p.final_b = Tensor::zeros({d});
    {
        Rng r = root.child("head");
        p.head_w = randn({d, grad::kSplatCols}, 0.01, r);
        std::vector<double> hb(grad::kSplatCols, 0.0);
        // scale columns start at softplus^-1(kInitScale); everything else at
        // zero, which decodes to patch-center anchors, identity rotations,
        // opacity 0.5 and mid-gray colors.
        for (int c = 7; c < 10; ++c) hb[c] = std::log(std::expm1(kInitScale));
        p.head_b = Tensor::from({grad::kSplatCols}, std::move(hb));
    }
    return p;
}

LoraParams init_lora_params(const ModelConfig& cfg, std::uint64_t seed) {
    validate_model_config(cfg);
    LoraParams p;
    p.cfg = cfg;
    Rng root(seed);
    for (int l = 0; l < cfg.layers; ++l) {
        LoraBlock b;
        for (char t : cfg.lora_targets) {
            Rng r = root.child("lora", static_cast<std::uint64_t>(l)).child(std::string(1, t));
            LoraPair pair;
            pair.a = randn({cfg.d_model, cfg.lora_rank}, 0.02, r);
            pair.b = Tensor::zeros({cfg.lora_rank, cfg.d_model});
            b.at[static_cast<size_t>(lora_slot(t))] = std::move(pair);
        }
        p.blocks.push_back(std::move(b));
    }
    return p;
}

std::vector<std::pair<std::string, Tensor>> named_base_params(const ReconstructorParams& p) {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("embed_w", p.embed_w);
    out.emplace_back("embed_b", p.embed_b);
    for (size_t l = 0; l < p.blocks.size(); ++l) {
        const AttnBlock& b = p.blocks[l];
        std::string pre = "block" + std::to_string(l) + ".";
        out.emplace_back(pre + "ln1_g", b.ln1_g);
        out.emplace_back(pre + "ln1_b", b.ln1_b);
        out.emplace_back(pre + "wq", b.wq);
        out.emplace_back(pre + "wk", b.wk);
        out.emplace_back(pre + "wv", b.wv);
        out.emplace_back(pre + "wo", b.wo);
        out.emplace_back(pre + "ln2_g", b.ln2_g);
        out.emplace_back(pre + "ln2_b", b.ln2_b);
        out.emplace_back(pre + "mlp_w1", b.mlp_w1);
        out.emplace_back(pre + "mlp_b1", b.mlp_b1);
        out.emplace_back(pre + "mlp_w2", b.mlp_w2);
        out.emplace_back(pre + "mlp_b2", b.mlp_b2);
    }
    out.emplace_back("final_g", p.final_g);
    out.emplace_back("final_b", p.final_b);
    out.emplace_back("head_w", p.head_w);
    out.emplace_back("head_b", p.head_b);
    return out;
}

std::vector<std::pair<std::string, Tensor>> named_lora_params(const LoraParams& p) {
    static const char* names[4] = {"q", "k", "v", "o"};
    std::vector<std::pair<std::string, Tensor>> out;
    for (size_t l = 0; l < p.blocks.size(); ++l) {
        for (int s = 0; s < 4; ++s) {
            const auto& slot = p.blocks[l].at[static_cast<size_t>(s)];
            if (!slot) continue;
            std::string pre = "block" + std::to_string(l) + ".lora_" + names[s] + ".";
            out.emplace_back(pre + "a", slot->a);
            out.emplace_back(pre + "b", slot->b);
        }
    }
    return out;
}

std::vector<Tensor> base_param_list(const ReconstructorParams& p) {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_base_params(p)) out.push_back(t);
    return out;
}

std::vector<Tensor> lora_param_list(const LoraParams& p) {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_lora_params(p)) out.push_back(t);
    return out;
}

void set_trainable(ReconstructorParams& p, bool trainable) {
    for (auto& t : base_param_list(p)) t.node()->requires_grad = trainable;
}

void set_trainable(LoraParams& p, bool trainable) {
    for (auto& t : lora_param_list(p)) t.node()->requires_grad = trainable;
}

std::pair<std::vector<Tensor>, std::vector<Tensor>> partition_params(const ReconstructorParams& base,
                                                                     const LoraParams& lora) {
    return {base_param_list(base), lora_param_list(lora)};
}

namespace {

void pose_embedding(const CameraPose& pose, double out[6]) {
    const double az = pose.azimuth_deg * M_PI / 180.0;
    const double el = pose.elevation_deg * M_PI / 180.0;
    out[0] = std::sin(az);
    out[1] = std::cos(az);
    out[2] = std::sin(el);
    out[3] = std::cos(el);
    out[4] = pose.ortho_half_extent;
    out[5] = 1.0;
}

// Raw (un-embedded) patch features of one view, appended to `rows`.
void view_features(const Image& img, const CameraPose& pose, int patch, std::vector<double>& rows) {
    if (img.width != img.height) fail_param("encode_view: image must be square");
    if (img.width % patch != 0) fail_param("encode_view: resolution not divisible by patch size");
    const int res = img.width;
    const int per_side = res / patch;
    double pe[6];
    pose_embedding(pose, pe);
    for (int pr = 0; pr < per_side; ++pr) {
        for (int pc = 0; pc < per_side; ++pc) {
            for (int y = 0; y < patch; ++y)
                for (int x = 0; x < patch; ++x)
                    for (int c = 0; c < 3; ++c)
                        rows.push_back(img.at(pr * patch + y, pc * patch + x, c));
            rows.insert(rows.end(), pe, pe + 6);
        }
    }
}

Tensor embed_features(std::vector<double> rows, int feat, const ReconstructorParams& p) {
    const int n = static_cast<int>(rows.size()) / feat;
    Tensor f = Tensor::from({n, feat}, std::move(rows));
    return grad::linear(f, p.embed_w, p.embed_b);
}

}  // namespace

Tensor encode_view(const Image& image, const CameraPose& pose, const ReconstructorParams& p) {
    std::vector<double> rows;
    view_features(image, pose, p.cfg.patch, rows);
    return embed_features(std::move(rows), p.cfg.patch * p.cfg.patch * 3 + 6, p);
}

Tensor fuse_tokens(const Tensor& tokens, const ReconstructorParams& p, const LoraParams* lora) {
    if (tokens.shape().size() != 2 || tokens.shape()[1] != p.cfg.d_model)
        fail_param("fuse_tokens: expected (n, d_model) tokens");
    if (lora) {
        if (lora->cfg.layers != p.cfg.layers || lora->cfg.d_model != p.cfg.d_model)
            fail_param("fuse_tokens: lora config does not match the base model");
        if (lora->blocks.size() != p.blocks.size())
            fail_param("fuse_tokens: lora block count does not match");
    }
    const int d = p.cfg.d_model;
    const int dh = d / p.cfg.heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    static const std::array<std::optional<LoraPair>, 4> kNoLora{};

    Tensor x = tokens;
    for (size_t l = 0; l < p.blocks.size(); ++l) {
        const AttnBlock& b = p.blocks[l];
        const auto& ad = lora ? lora->blocks[l].at : kNoLora;
        Tensor h = grad::layer_norm(x, b.ln1_g, b.ln1_b);
        Tensor q = project(h, b.wq, p.cfg, ad[0]);
        Tensor k = project(h, b.wk, p.cfg, ad[1]);
        Tensor v = project(h, b.wv, p.cfg, ad[2]);
        std::vector<Tensor> heads;
        heads.reserve(static_cast<size_t>(p.cfg.heads));
        for (int i = 0; i < p.cfg.heads; ++i) {
            Tensor qh = grad::slice_cols(q, i * dh, dh);
            Tensor kh = grad::slice_cols(k, i * dh, dh);
            Tensor vh = grad::slice_cols(v, i * dh, dh);
            Tensor att = grad::softmax_rows(grad::scale(grad::matmul_nt(qh, kh), inv_sqrt_dh));
            heads.push_back(grad::matmul(att, vh));
        }
        Tensor o = project(grad::concat_cols(heads), b.wo, p.cfg, ad[3]);
        x = grad::add(x, o);
        Tensor h2 = grad::layer_norm(x, b.ln2_g, b.ln2_b);
        Tensor m = grad::linear(grad::gelu(grad::linear(h2, b.mlp_w1, b.mlp_b1)), b.mlp_w2, b.mlp_b2);
        x = grad::add(x, m);
    }
    return grad::layer_norm(x, p.final_g, p.final_b);
}

Tensor decode_rows(const Tensor& fused, const ReconstructorParams& p,
                   const std::vector<CameraPose>& poses, int resolution) {
    if (fused.shape().size() != 2 || fused.shape()[1] != p.cfg.d_model)
        fail_param("decode_rows: expected (n, d_model) tokens");
    if (resolution % p.cfg.patch != 0) fail_param("decode_rows: resolution not divisible by patch");
    const int per_side = resolution / p.cfg.patch;
    const int per_view = per_side * per_side;
    const int n = fused.shape()[0];
    if (n != per_view * static_cast<int>(poses.size()))
        fail_param("decode_rows: token count does not match views * tokens_per_view");

    // Anchor of token t: the patch-center pixel of its source view unprojected
    // onto the plane through the origin (inverse of the rasterizer's
    // pixel = dot(mean, right)*pixscale + res/2 mapping, y flipped).
    std::vector<double> anchors;
    anchors.reserve(static_cast<size_t>(n) * 3);
    for (const CameraPose& pose : poses) {
        const CameraBasis basis = camera_basis(pose);
        const double pixscale = resolution / (2.0 * pose.ortho_half_extent);
        for (int pr = 0; pr < per_side; ++pr) {
            for (int pc = 0; pc < per_side; ++pc) {
                const double px = pc * p.cfg.patch + p.cfg.patch * 0.5;
                const double py = pr * p.cfg.patch + p.cfg.patch * 0.5;
                const double camx = (px - resolution * 0.5) / pixscale;
                const double camy = -(py - resolution * 0.5) / pixscale;
                const Vec3 a = basis.right * camx + basis.up * camy;
                anchors.push_back(a.x);
                anchors.push_back(a.y);
                anchors.push_back(a.z);
            }
        }
    }
    Tensor anchor_t = Tensor::from({n, 3}, std::move(anchors));

    Tensor head = grad::linear(fused, p.head_w, p.head_b);
    Tensor mean = grad::add(anchor_t, grad::scale(grad::tanh_t(grad::slice_cols(head, 0, 3)),
                                                  kMeanOffsetBound));
    // tanh keeps the w component in (0, 2), so the quaternion can never be the
    // zero vector and normalization downstream is always well defined.
    Tensor rot = grad::add_rowvec(grad::tanh_t(grad::slice_cols(head, 3, 4)),
                                  Tensor::from({4}, {1.0, 0.0, 0.0, 0.0}));
    Tensor scl = grad::softplus(grad::slice_cols(head, 7, 3));
    Tensor opa = grad::slice_cols(head, 10, 1);
    Tensor col = grad::sigmoid(grad::slice_cols(head, 11, 3));
    return grad::concat_cols({mean, rot, scl, opa, col});
}

namespace {

void check_canonical_rig(const MultiViewSet& mvs) {
    if (mvs.views.size() != static_cast<size_t>(kRigViews) || mvs.poses.size() != mvs.views.size())
        fail_param("forward: expected the canonical six-view rig");
    const double extent = mvs.poses[0].ortho_half_extent;
    const CanonicalRig rig = make_canonical_rig(extent);
    for (int v = 0; v < kRigViews; ++v) {
        const CameraPose& got = mvs.poses[static_cast<size_t>(v)];
        const CameraPose& want = rig.poses[static_cast<size_t>(v)];
        if (std::fabs(got.azimuth_deg - want.azimuth_deg) > 1e-9 ||
            std::fabs(got.elevation_deg - want.elevation_deg) > 1e-9 ||
            std::fabs(got.ortho_half_extent - extent) > 1e-9)
            fail_param("forward: poses do not match the canonical rig");
    }
    for (const Image& img : mvs.views)
        if (!img.same_shape(mvs.views[0])) fail_param("forward: views differ in resolution");
}

}  // namespace

Tensor forward_rows(const MultiViewSet& mvs, const ReconstructorParams& p, const LoraParams* lora) {
    check_canonical_rig(mvs);
    std::vector<double> rows;
    for (size_t v = 0; v < mvs.views.size(); ++v)
        view_features(mvs.views[v], mvs.poses[v], p.cfg.patch, rows);
    Tensor tokens = embed_features(std::move(rows), p.cfg.patch * p.cfg.patch * 3 + 6, p);
    Tensor fused = fuse_tokens(tokens, p, lora);
    return decode_rows(fused, p, mvs.poses, mvs.views[0].width);
}

GaussianScene forward(const MultiViewSet& mvs, const ReconstructorParams& p, const LoraParams* lora) {
    Tensor rows = forward_rows(mvs, p, lora);
    GaussianScene scene = grad::scene_from_rows(rows);
    for (Splat& s : scene.splats) {
        const double n = norm(s.rotation);
        s.rotation = {s.rotation.w / n, s.rotation.x / n, s.rotation.y / n, s.rotation.z / n};
    }
    return scene;
}

}  // namespace mvb::recon
