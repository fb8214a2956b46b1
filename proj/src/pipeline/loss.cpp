#include "pipeline/loss.hpp"

#include <cmath>

#include "core/error.hpp"
#include "metrics/perceptual.hpp"

namespace mvb::pipeline {

void validate_loss_spec(const LossSpec& spec) {
    if (!(spec.mse_weight >= 0.0) || !(spec.perceptual_weight >= 0.0))
        fail_param("loss: weights must be non-negative");
    if (spec.mse_weight == 0.0 && spec.perceptual_weight == 0.0)
        fail_param("loss: at least one weight must be positive");
    if (spec.perceptual_weight > 0.0 && spec.perceptual_resolution < 20)
        fail_param("loss: perceptual resolution too small");
}

LossTerms loss_terms(const std::vector<Tensor>& rendered, const std::vector<const Image*>& targets,
                     const LossSpec& spec) {
    validate_loss_spec(spec);
    if (rendered.empty() || rendered.size() != targets.size())
        fail_param("loss: rendered/target view counts differ");

    const double inv_n = 1.0 / static_cast<double>(rendered.size());
    Tensor mse_acc, perc_acc;
    for (size_t v = 0; v < rendered.size(); ++v) {
        const Image& tgt = *targets[v];
        if (tgt.width != tgt.height) fail_param("loss: target views must be square");
        const auto& sh = rendered[v].shape();
        if (sh.size() != 3 || sh[0] != tgt.height || sh[1] != tgt.width || sh[2] != 3)
            fail_param("loss: rendered/target resolution mismatch");
        Tensor tgt_t = image_to_tensor(tgt);
        Tensor m = grad::mse(rendered[v], tgt_t);
        mse_acc = mse_acc.defined() ? grad::add(mse_acc, m) : m;
        if (spec.perceptual_weight > 0.0) {
            Tensor pv = perceptual_graph(rendered[v], tgt_t, spec.perceptual_resolution);
            perc_acc = perc_acc.defined() ? grad::add(perc_acc, pv) : pv;
        }
    }

    LossTerms out;
    out.mse = grad::scale(mse_acc, inv_n);
    out.perceptual = spec.perceptual_weight > 0.0 ? grad::scale(perc_acc, inv_n)
                                                  : Tensor::scalar(0.0);
    Tensor total = grad::scale(out.mse, spec.mse_weight);
    if (spec.perceptual_weight > 0.0)
        total = grad::add(total, grad::scale(out.perceptual, spec.perceptual_weight));
    out.total = total;
    return out;
}

LossTerms loss_terms(const MultiViewSet& rendered, const MultiViewSet& targets,
                     const LossSpec& spec) {
    if (rendered.views.size() != targets.views.size() ||
        rendered.poses.size() != targets.poses.size() ||
        rendered.views.size() != rendered.poses.size())
        fail_param("loss: view sets differ in size");
    for (size_t v = 0; v < rendered.poses.size(); ++v) {
        const CameraPose& a = rendered.poses[v];
        const CameraPose& b = targets.poses[v];
        if (std::fabs(a.azimuth_deg - b.azimuth_deg) > 1e-9 ||
            std::fabs(a.elevation_deg - b.elevation_deg) > 1e-9 ||
            std::fabs(a.ortho_half_extent - b.ortho_half_extent) > 1e-9)
            fail_param("loss: view sets use different rigs");
        if (!rendered.views[v].same_shape(targets.views[v]))
            fail_param("loss: rendered/target resolution mismatch");
    }
    std::vector<Tensor> r;
    std::vector<const Image*> t;
    for (size_t v = 0; v < rendered.views.size(); ++v) {
        r.push_back(image_to_tensor(rendered.views[v]));
        t.push_back(&targets.views[v]);
    }
    return loss_terms(r, t, spec);
}

double loss_value(const MultiViewSet& rendered, const MultiViewSet& targets, const LossSpec& spec) {
    return loss_terms(rendered, targets, spec).total.value();
}

}  // namespace mvb::pipeline
