#include "oracle/denoiser.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"
#include "oracle/field.hpp"

namespace mvb {

OracleDenoiser::OracleDenoiser(MultiViewSet gt_views, OracleParams params, uint64_t seed)
    : gt_(std::move(gt_views)), params_(std::move(params)), seed_(seed) {
    if (params_.eta < 0 || params_.kappa < 0) fail_param("oracle denoiser: eta/kappa must be >= 0");
    if (params_.knee <= 0 || params_.knee >= 1) fail_param("oracle denoiser: knee must be in (0,1)");
    if (gt_.views.empty()) fail_param("oracle denoiser: empty ground-truth view set");
}

double OracleDenoiser::prior_weight(int t, const NoiseSchedule& sched) const {
    if (t == sched.T) return 1.0;
    return sched.sigma[t] * sched.sigma[t];
}

double OracleDenoiser::hallucination_amp(int t, const NoiseSchedule& sched) const {
    const double frac = static_cast<double>(t) / sched.T;
    const double ramp = std::max(0.0, (frac - params_.knee) / (1.0 - params_.knee));
    return params_.eta * (prior_weight(t, sched) + params_.kappa * ramp);
}

MultiViewSet OracleDenoiser::denoise(const MultiViewSet& noised, const Image&, int t,
                                     const NoiseSchedule& sched) {
    if (t < 1 || t > sched.T) fail_param("oracle denoiser: t must be in [1, T]");
    if (noised.views.size() != gt_.views.size())
        fail_param("oracle denoiser: view count does not match ground truth");
    const double g = prior_weight(t, sched);
    const double amp = hallucination_amp(t, sched);
    const double alpha = sched.alpha[t];
    const uint64_t call = calls_++;

    MultiViewSet out = noised;
    for (size_t v = 0; v < noised.views.size(); ++v) {
        const Image& xv = noised.views[v];
        const Image& gv = gt_.views[v];
        if (xv.width != gv.width || xv.height != gv.height)
            fail_param("oracle denoiser: view shape does not match ground truth");
        Image& ov = out.views[v];
        const int res = xv.width;

        if (params_.eta == 0.0) {
            for (size_t i = 0; i < xv.data.size(); ++i) {
                const double sig = std::clamp(xv.data[i] / alpha, 0.0, 1.0);
                ov.data[i] = (1.0 - g) * sig + g * gv.data[i];
            }
            continue;
        }
        Rng frng = Rng(seed_).child("hallucinate", call).child("view", v);
        const int family = static_cast<int>(v % kFieldFamilies);
        SmoothField2D hr(frng, family), hg(frng, family), hb(frng, family);
        for (int y = 0; y < xv.height; ++y) {
            const double vv = (y + 0.5) / xv.height;
            for (int x = 0; x < res; ++x) {
                const double uu = (x + 0.5) / res;
                const double h[3] = {amp * hr.sample(uu, vv), amp * hg.sample(uu, vv),
                                     amp * hb.sample(uu, vv)};
                for (int c = 0; c < 3; ++c) {
                    const size_t i = (static_cast<size_t>(y) * res + x) * 3 + c;
                    const double sig = std::clamp(xv.data[i] / alpha, 0.0, 1.0);
                    ov.data[i] = (1.0 - g) * sig + g * (gv.data[i] + h[c]);
                }
            }
        }
    }
    return out;
}

}  // namespace mvb
