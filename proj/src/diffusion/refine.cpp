#include "diffusion/refine.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace mvb {

MultiViewSet refine(const MultiViewSet& renders, const Image& condition, const RefineConfig& cfg,
                    const NoiseSchedule& sched, Denoiser& denoiser) {
    if (!(cfg.strength >= 0.0 && cfg.strength <= 1.0)) fail_param("refine: strength outside [0,1]");
    if (cfg.strength > 0.0 && cfg.steps < 1) fail_param("refine: steps must be >= 1");
    if (renders.views.empty()) fail_param("refine: empty view set");
    for (const Image& v : renders.views)
        if (!v.same_shape(renders.views[0])) fail_param("refine: views differ in resolution");
    if (!condition.same_shape(renders.views[0]))
        fail_param("refine: condition resolution does not match the views");

    int t0 = strength_to_timestep(cfg.strength, sched.T);
    if (t0 == 0) return renders;  // nothing to do; identity by contract

    // Linearly spaced sub-timesteps t0 -> 0. Rounding can collide for small
    // t0; deduplicate and keep only positive steps (the final hop to 0 is the
    // plain x0 prediction).
    std::vector<int> taus;
    for (int k = 0; k < cfg.steps; k++) {
        int tau = static_cast<int>(std::lround(static_cast<double>(t0) * (cfg.steps - k) / cfg.steps));
        if (tau > 0 && (taus.empty() || tau < taus.back())) taus.push_back(tau);
    }
    // lround walks down from t0; ensure the first entry really is t0.
    if (taus.empty() || taus.front() != t0) taus.insert(taus.begin(), t0);

    Rng rng(cfg.seed);
    MultiViewSet x = renders;
    x.stage = MultiViewSet::Stage::noised;
    for (size_t v = 0; v < x.views.size(); v++) {
        Rng stream = rng.child("noise", v);
        x.views[v] = add_noise(x.views[v], t0, sched, stream);
    }

    for (size_t k = 0; k < taus.size(); k++) {
        int tau = taus[k];
        int next = k + 1 < taus.size() ? taus[k + 1] : 0;
        MultiViewSet x0 = denoiser.denoise(x, condition, tau, sched);
        if (x0.views.size() != x.views.size()) fail_param("denoiser changed the view count");
        if (next == 0) {
            x.views = std::move(x0.views);
            break;
        }
        double a_t = sched.alpha[tau], s_t = sched.sigma[tau];
        double a_n = sched.alpha[next], s_n = sched.sigma[next];
        for (size_t v = 0; v < x.views.size(); v++) {
            Image& xv = x.views[v];
            const Image& pv = x0.views[v];
            for (size_t i = 0; i < xv.data.size(); i++) {
                double eps = (xv.data[i] - a_t * pv.data[i]) / s_t;
                xv.data[i] = a_n * pv.data[i] + s_n * eps;
            }
        }
    }

    MultiViewSet out = std::move(x);
    out.stage = MultiViewSet::Stage::refined;
    out.condition = condition;
    for (Image& v : out.views)
        for (double& val : v.data) val = std::clamp(val, 0.0, 1.0);
    return out;
}

}  // namespace mvb
