#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core/camera.hpp"
#include "core/multiview.hpp"
#include "core/rng.hpp"
#include "core/scene.hpp"
#include "grad/tensor.hpp"

namespace mvb::recon {

using grad::Tensor;

// Architecture and adapter hyper-parameters. The hash of this struct is
// embedded in checkpoints so weights can never be loaded into a model of a
// different shape.
struct ModelConfig {
    int d_model = 64;
    int layers = 2;
    int heads = 4;
    int patch = 8;
    int lora_rank = 32;
    double lora_alpha = 32.0;
    std::string lora_targets = "qv";  // subset of the letters q,k,v,o
};

std::uint64_t model_config_hash(const ModelConfig& cfg);
void validate_model_config(const ModelConfig& cfg);

struct AttnBlock {
    Tensor ln1_g, ln1_b;      // (d)
    Tensor wq, wk, wv, wo;    // (d, d)
    Tensor ln2_g, ln2_b;      // (d)
    Tensor mlp_w1, mlp_b1;    // (d, 4d), (4d)
    Tensor mlp_w2, mlp_b2;    // (4d, d), (d)
};

// Frozen base weights. Tokens are row vectors, so every map is applied as
// x * W (+ bias row).
struct ReconstructorParams {
    ModelConfig cfg;
    Tensor embed_w, embed_b;  // (patch*patch*3 + 6, d), (d)
    std::vector<AttnBlock> blocks;
    Tensor final_g, final_b;  // closing layer norm, (d)
    Tensor head_w, head_b;    // (d, 14), (14)
};

// One low-rank adapter: W x -> W x + (alpha/r) * (x A) B.
struct LoraPair {
    Tensor a;  // (d, r)
    Tensor b;  // (r, d)
};

// Adapters for one block, indexed q=0, k=1, v=2, o=3; only the matrices
// named in ModelConfig::lora_targets are populated.
struct LoraBlock {
    std::array<std::optional<LoraPair>, 4> at;
};

struct LoraParams {
    ModelConfig cfg;
    std::vector<LoraBlock> blocks;
};

ReconstructorParams init_base_params(const ModelConfig& cfg, std::uint64_t seed);
// A ~ N(0, 0.02^2), B = 0, so a fresh adapter leaves the model bit-identical.
LoraParams init_lora_params(const ModelConfig& cfg, std::uint64_t seed);

std::vector<std::pair<std::string, Tensor>> named_base_params(const ReconstructorParams& p);
std::vector<std::pair<std::string, Tensor>> named_lora_params(const LoraParams& p);
std::vector<Tensor> base_param_list(const ReconstructorParams& p);
std::vector<Tensor> lora_param_list(const LoraParams& p);
void set_trainable(ReconstructorParams& p, bool trainable);
void set_trainable(LoraParams& p, bool trainable);

// Frozen/trainable split for boost training: (all base params, all adapter
// params). The two sets share no tensor.
std::pair<std::vector<Tensor>, std::vector<Tensor>> partition_params(const ReconstructorParams& base,
                                                                     const LoraParams& lora);

// Patch features of one posed view: ((res/patch)^2, patch*patch*3 + 6) rows of
// flattened pixels plus the pose embedding
// [sin az, cos az, sin el, cos el, extent, 1].
Tensor encode_view(const Image& image, const CameraPose& pose, const ReconstructorParams& p);

// Attention trunk: joint sequence over all views' tokens, `layers` pre-norm
// blocks, closing layer norm. Accepts any token count; rows stay aligned with
// the input order, which is what makes the stage view-permutation
// equivariant.
Tensor fuse_tokens(const Tensor& tokens, const ReconstructorParams& p, const LoraParams* lora);

// Decode fused tokens into splat rows (n, 14), one splat per token, anchored
// at the unprojection of the token's patch center in its source view.
Tensor decode_rows(const Tensor& fused, const ReconstructorParams& p,
                   const std::vector<CameraPose>& poses, int resolution);

// encode -> fuse -> decode, differentiable w.r.t. every parameter tensor.
// Requires the canonical rig.
Tensor forward_rows(const MultiViewSet& mvs, const ReconstructorParams& p, const LoraParams* lora);

// forward_rows materialized as a scene (rotations normalized).
GaussianScene forward(const MultiViewSet& mvs, const ReconstructorParams& p,
                      const LoraParams* lora = nullptr);

}  // namespace mvb::recon
