#include "pipeline/train.hpp"

#include <cmath>
#include <fstream>

#include "core/error.hpp"
#include "grad/render_op.hpp"
#include "recon/checkpoint.hpp"

namespace mvb::pipeline {

namespace {

constexpr Vec3 kWhite{1.0, 1.0, 1.0};

struct StepLogger {
    std::ofstream file;
    TrainReport report;

    explicit StepLogger(const std::string& path) {
        if (!path.empty()) {
            file.open(path, std::ios::trunc);
            if (!file) fail_data("cannot open training log for writing: " + path);
            file << "step,loss,mse,perceptual\n";
        }
    }

    void log(int step, const LossTerms& terms) {
        StepLog row;
        row.step = step;
        row.loss = terms.total.value();
        row.mse = terms.mse.value();
        row.perceptual = terms.perceptual.value();
        report.steps.push_back(row);
        if (file.is_open())
            file << row.step << "," << row.loss << "," << row.mse << "," << row.perceptual << "\n";
    }

    TrainReport finish() {
        const auto& rows = report.steps;
        auto mean_range = [&rows](size_t first, size_t last) {
            double acc = 0;
            for (size_t i = first; i < last; ++i) acc += rows[i].loss;
            return last > first ? acc / static_cast<double>(last - first) : 0.0;
        };
        report.early_loss = mean_range(0, std::min<size_t>(10, rows.size()));
        report.late_loss = mean_range(rows.size() > 50 ? rows.size() - 50 : 0, rows.size());
        return std::move(report);
    }
};

// One optimization step: forward to splat rows, render the chosen target
// views, apply the loss, backprop, Adam.
LossTerms run_step(const MultiViewSet& inputs, const MultiViewSet& targets,
                   const recon::ReconstructorParams& model, const recon::LoraParams* lora,
                   const std::vector<size_t>& view_ids, const LossSpec& loss_spec,
                   std::vector<grad::Tensor>& opt_params, grad::AdamState& opt_state,
                   const grad::AdamConfig& adam) {
    grad::Tensor rows = recon::forward_rows(inputs, model, lora);
    const int res = targets.views[0].width;
    std::vector<grad::Tensor> rendered;
    std::vector<const Image*> tgt;
    for (size_t v : view_ids) {
        rendered.push_back(grad::render_op(rows, targets.poses[v], res, kWhite));
        tgt.push_back(&targets.views[v]);
    }
    LossTerms terms = loss_terms(rendered, tgt, loss_spec);
    grad::backward(terms.total);
    grad::adam_step(opt_params, opt_state, adam);
    return terms;
}

std::vector<size_t> pick_views(ViewSampling mode, size_t n_views, Rng& rng) {
    if (mode == ViewSampling::all) {
        std::vector<size_t> all(n_views);
        for (size_t v = 0; v < n_views; ++v) all[v] = v;
        return all;
    }
    return {static_cast<size_t>(rng.next_below(n_views))};
}

}  // namespace

TrainReport pretrain_base(recon::ReconstructorParams& params, const std::vector<SceneSpec>& pool,
                          int resolution, double rig_extent, const TrainConfig& cfg) {
    if (pool.empty()) fail_param("pretrain_base: empty scene pool");
    validate_loss_spec(cfg.loss);
    if (cfg.steps < 0) fail_param("pretrain_base: negative step count");

    // Oracle-consistent data: inputs and supervision are the exact renders.
    const CanonicalRig rig = make_canonical_rig(rig_extent);
    std::vector<MultiViewSet> sets;
    sets.reserve(pool.size());
    for (const SceneSpec& spec : pool)
        sets.push_back(render_rig_views(generate_scene(spec), rig, resolution));

    recon::set_trainable(params, true);
    std::vector<grad::Tensor> opt_params = recon::base_param_list(params);
    grad::AdamState state;
    state.init(opt_params);
    Rng rng(cfg.seed);
    StepLogger logger(cfg.log_path);

    for (int step = 0; step < cfg.steps; ++step) {
        const MultiViewSet& mvs = sets[rng.next_below(sets.size())];
        std::vector<size_t> views = pick_views(cfg.view_sampling, mvs.views.size(), rng);
        LossTerms terms = run_step(mvs, mvs, params, nullptr, views, cfg.loss, opt_params, state,
                                   cfg.adam);
        if (!std::isfinite(terms.total.value()))
            fail_numeric("pretrain_base: non-finite loss at step " + std::to_string(step) +
                         " (seed " + std::to_string(cfg.seed) + ")");
        logger.log(step, terms);
    }
    recon::set_trainable(params, false);
    return logger.finish();
}

TrainReport train_boost(const std::vector<RefinedPair>& dataset, recon::ReconstructorParams& base,
                        recon::LoraParams& lora, const TrainConfig& cfg) {
    if (dataset.empty()) fail_param("train_boost: empty dataset");
    validate_loss_spec(cfg.loss);
    if (cfg.steps < 0) fail_param("train_boost: negative step count");
    for (const RefinedPair& pair : dataset) {
        if (pair.inputs.views.size() != pair.targets.views.size())
            fail_param("train_boost: pair " + pair.scene_id + " has mismatched view counts");
        if (!pair.inputs.views[0].same_shape(pair.targets.views[0]))
            fail_param("train_boost: pair " + pair.scene_id + " mixes resolutions");
    }

    const std::uint64_t digest_before = recon::params_digest(base);
    recon::set_trainable(base, false);
    recon::set_trainable(lora, true);
    std::vector<grad::Tensor> opt_params = recon::lora_param_list(lora);
    grad::AdamState state;
    state.init(opt_params);
    Rng rng(cfg.seed);
    StepLogger logger(cfg.log_path);

    for (int step = 0; step < cfg.steps; ++step) {
        const RefinedPair& pair = dataset[rng.next_below(dataset.size())];
        std::vector<size_t> views = pick_views(cfg.view_sampling, pair.targets.views.size(), rng);
        LossTerms terms = run_step(pair.inputs, pair.targets, base, &lora, views, cfg.loss,
                                   opt_params, state, cfg.adam);
        if (!std::isfinite(terms.total.value()))
            fail_numeric("train_boost: non-finite loss at step " + std::to_string(step) +
                         ", pair " + pair.scene_id + " (train seed " + std::to_string(cfg.seed) +
                         ", pair seeds mv=" + std::to_string(pair.seeds.mv) +
                         " refine=" + std::to_string(pair.seeds.refine) +
                         " oracle=" + std::to_string(pair.seeds.oracle) + ")");
        logger.log(step, terms);
    }

    if (recon::params_digest(base) != digest_before)
        fail_numeric("train_boost: frozen base parameters changed during training");
    return logger.finish();
}

}  // namespace mvb::pipeline
