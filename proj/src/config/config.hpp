#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffusion/schedule.hpp"
#include "oracle/denoiser.hpp"
#include "oracle/mv_generate.hpp"
#include "pipeline/dataset.hpp"
#include "pipeline/eval.hpp"
#include "pipeline/train.hpp"
#include "recon/model.hpp"
#include "viewopt/viewopt.hpp"

namespace mvb::config {

// Whole-run configuration, one versioned plain-text file. Format:
//
//   mvbconfig v1
//   [section]
//   key = value
//
// '#' starts a comment. Every key belongs to exactly one section; unknown
// sections or keys are rejected by name. Omitted keys keep the defaults
// below, which are the desk-scale operating point.
struct MvbConfig {
    // [core]
    int resolution = 64;
    double rig_extent = 1.2;

    // [scenes]
    int scene_count = 50;
    int primitives = 3;
    std::string palette;  // "r,g,b;r,g,b;..." or empty for the default palette
    std::uint64_t scenes_seed = 1;

    // [schedule]
    ScheduleKind schedule_kind = ScheduleKind::cosine_vp;
    int schedule_T = 1000;

    // [refine]
    double refine_strength = 0.95;
    int refine_steps = 1;

    // [oracle]
    OracleParams oracle;

    // [inconsistency]
    InconsistencyModel inconsistency;

    // [model]
    recon::ModelConfig model;

    // [dataset]
    std::uint64_t dataset_seed = 1;

    // [train]
    int train_steps = 500;
    double train_lr = 1e-3;
    pipeline::ViewSampling view_sampling = pipeline::ViewSampling::all;
    double mse_weight = 1.0;
    double perceptual_weight = 1.0;
    int perceptual_resolution = 32;
    std::uint64_t train_seed = 1;
    int pretrain_steps = 2000;
    int pretrain_pool = 24;
    // Root for base pre-training: weights init at pretrain_seed, the step
    // loop at pretrain_seed + 1, pool scene seeds at 100 * pretrain_seed + i.
    std::uint64_t pretrain_seed = 1;

    // [eval]
    int eval_scenes = 20;
    std::uint64_t eval_seed = 9000;  // scene seeds eval_seed .. eval_seed+scenes-1
    int eval_points = 2048;
    int orbit_views = 24;

    // [ablate]
    int ablate_scenes = 20;
    std::vector<double> ablate_strengths = {0.0, 0.10, 0.50, 0.70, 0.90, 0.95, 1.00};
    std::uint64_t ablate_seed = 5000;

    // [viewopt]
    int viewopt_iters = 200;
    double viewopt_lr = 0.05;
    int viewopt_perceptual_resolution = 32;
    std::uint64_t viewopt_scene_seed = 77;
    double viewopt_mean_bound = 0.05;
};

// Parses and validates. Problems raise Error with the offending
// section/key named in the message.
MvbConfig parse_config_text(const std::string& text, const std::string& origin);
MvbConfig parse_config_file(const std::string& path);

// The full config re-rendered in one canonical ordering/formatting; equal
// configurations hash equal regardless of how the file was laid out.
std::string canonical_config_text(const MvbConfig& cfg);
std::uint64_t config_hash(const MvbConfig& cfg);

// A default file with every key spelled out.
std::string default_config_text();

// Single-key access by dotted name, e.g. "refine.strength". Unknown keys are
// rejected by name. set_key parses the value but skips cross-key validation;
// call validate_config once a batch of overrides has been applied.
void set_key(MvbConfig& cfg, const std::string& dotted_key, const std::string& value);
std::string get_key(const MvbConfig& cfg, const std::string& dotted_key);
void validate_config(const MvbConfig& cfg);

// Adapters into the module-level configs.
pipeline::DatasetBuildConfig to_dataset_build_config(const MvbConfig& cfg);
pipeline::TrainConfig to_boost_train_config(const MvbConfig& cfg);
pipeline::TrainConfig to_pretrain_config(const MvbConfig& cfg);
pipeline::EvalConfig to_eval_config(const MvbConfig& cfg);
viewopt::ResidualOptConfig to_viewopt_config(const MvbConfig& cfg);
SceneSpec scene_spec(const MvbConfig& cfg, std::uint64_t seed);

}  // namespace mvb::config
