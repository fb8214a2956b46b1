#pragma once

#include "core/multiview.hpp"
#include "diffusion/schedule.hpp"

namespace mvb {

// Joint multi-view denoiser interface: given all noised views at timestep t
// and the conditioning image, predict the clean views (pixels in [0,1]).
// Implementations may hold internal rng state; calls happen from a single
// coordinating thread.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual MultiViewSet denoise(const MultiViewSet& noised, const Image& condition, int t,
                                 const NoiseSchedule& sched) = 0;
};

struct RefineConfig {
    double strength = 0.95;  // fraction of the forward process to apply
    int steps = 1;           // reverse iterations from t = round(strength*T) to 0
    uint64_t seed = 0;       // noise stream for the initial corruption
};

// Partial-strength refinement: noise every view to t = round(strength * T),
// then walk back to 0 over `steps` deterministic posterior-mean iterations
// (linearly spaced sub-timesteps), calling the denoiser once per iteration
// with all views jointly. strength = 0 returns the input set unchanged,
// bit-for-bit. Output views are clipped to [0,1] and tagged `refined`.
MultiViewSet refine(const MultiViewSet& renders, const Image& condition, const RefineConfig& cfg,
                    const NoiseSchedule& sched, Denoiser& denoiser);

}  // namespace mvb
