#pragma once

#include <cstdint>

#include "core/rng.hpp"
#include "diffusion/refine.hpp"

namespace mvb {

struct OracleParams {
    // hallucination amplitude scale; 0 makes the oracle exact at high t
    double eta = 0.05;
    // extra amplitude ramped in past knee*T, modeling the loss of grounding
    // when refinement starts from (nearly) pure noise
    double kappa = 2.0;
    double knee = 0.96;
};

// Denoiser oracle built from the ground-truth views. Blends signal and prior:
//   x0_hat = (1 - g) * clip(x_t / alpha_t) + g * (gt + h),   g = sigma_t^2
// (g forced to exactly 1 at t = T, matching the intent of the VP limit, which
// the schedule's alpha clamp would otherwise miss by 1e-8). h is a smooth
// per-view, per-call field with amplitude eta * (g + kappa * ramp(t)), where
// ramp rises linearly from knee*T to T. Small t trusts the (consistent)
// signal; large t trusts the (accurate but view-inconsistent) prior.
class OracleDenoiser : public Denoiser {
public:
    OracleDenoiser(MultiViewSet gt_views, OracleParams params, uint64_t seed);

    MultiViewSet denoise(const MultiViewSet& noised, const Image& condition, int t,
                         const NoiseSchedule& sched) override;

    double prior_weight(int t, const NoiseSchedule& sched) const;
    double hallucination_amp(int t, const NoiseSchedule& sched) const;

private:
    MultiViewSet gt_;
    OracleParams params_;
    uint64_t seed_;
    uint64_t calls_ = 0;
};

}  // namespace mvb
