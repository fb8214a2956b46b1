#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/multiview.hpp"
#include "diffusion/refine.hpp"
#include "diffusion/schedule.hpp"
#include "oracle/denoiser.hpp"
#include "oracle/mv_generate.hpp"
#include "oracle/scene_gen.hpp"
#include "recon/model.hpp"

namespace mvb::pipeline {

// Concrete random streams consumed while building one pair; recorded in the
// manifest so any pair can be rebuilt bit-exactly later.
struct PairSeeds {
    std::uint64_t mv = 0;      // view-generation perturbations
    std::uint64_t refine = 0;  // initial noising inside refine
    std::uint64_t oracle = 0;  // denoiser hallucination fields
};

// One training example: generated (inconsistent) input views and their
// refined pseudo-ground-truth targets, sharing the rig and resolution.
struct RefinedPair {
    std::string scene_id;
    SceneSpec spec;
    PairSeeds seeds;
    MultiViewSet inputs;   // stage generated
    MultiViewSet targets;  // stage refined
};

struct DatasetBuildConfig {
    InconsistencyModel inc;
    RefineConfig refine;  // seed field ignored; per-pair seeds are derived
    OracleParams oracle;
    int schedule_T = 1000;
    ScheduleKind schedule_kind = ScheduleKind::cosine_vp;
    int resolution = 64;
    double rig_extent = 1.2;
    std::uint64_t seed = 1;  // root for all derived per-pair seeds
};

std::uint64_t dataset_config_hash(const DatasetBuildConfig& cfg);

// Builds the pair for one scene: condition = GT front render, inputs from the
// generation oracle, reconstruction through the base model, rig re-render,
// partial-strength refinement against the oracle denoiser.
RefinedPair build_pair(const SceneSpec& spec, const PairSeeds& seeds,
                       const DatasetBuildConfig& cfg, const recon::ReconstructorParams& base);

// Builds every scene's pair, persists them under out_dir (one directory per
// scene with input/target PNGs and a manifest), and returns the pairs as
// re-loaded from disk so training consumes exactly what was persisted.
// Scenes already on disk with a matching manifest are not rebuilt, so an
// interrupted build resumes where it stopped.
std::vector<RefinedPair> build_refined_dataset(const std::vector<SceneSpec>& specs,
                                               const DatasetBuildConfig& cfg,
                                               const recon::ReconstructorParams& base,
                                               const std::string& out_dir);

std::vector<RefinedPair> load_refined_dataset(const std::string& dir);

// Rebuilds every pair of a persisted dataset from its recorded manifest seeds
// and byte-compares the regenerated PNGs with the stored ones. Returns true
// when everything replays bit-exactly.
bool verify_dataset_replay(const std::string& dir, const DatasetBuildConfig& cfg,
                           const recon::ReconstructorParams& base);

}  // namespace mvb::pipeline
