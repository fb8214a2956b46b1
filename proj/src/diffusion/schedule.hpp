#pragma once

#include <string>
#include <vector>

#include "core/image.hpp"
#include "core/rng.hpp"

namespace mvb {

// Variance-preserving noise schedule over discrete timesteps 0..T:
// alpha[0] = 1, sigma[0] = 0, alpha strictly decreasing, sigma strictly
// increasing, alpha^2 + sigma^2 = 1 at every step. A noised image at step t is
// alpha[t] * x + sigma[t] * eps.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> alpha;  // T + 1 entries
    std::vector<double> sigma;
};

enum class ScheduleKind { linear_vp, cosine_vp };

ScheduleKind schedule_kind_from_string(const std::string& name);

// cosine_vp: alpha[t] = cos((t/T) * pi/2), clamped to >= 1e-4 so the terminal
// step keeps a sliver of signal scale. linear_vp: the classic linear-beta
// schedule (beta from 1e-4 to 0.02), alpha[t] = sqrt(prod(1 - beta)).
NoiseSchedule build_schedule(int T, ScheduleKind kind);

// round(strength * T), clamped to [0, T]. strength must be in [0, 1].
int strength_to_timestep(double strength, int T);

// alpha[t] x + sigma[t] eps with fresh standard normals from rng. Output is
// intentionally unclipped; t = 0 returns the input bit-for-bit (no rng draw).
Image add_noise(const Image& x, int t, const NoiseSchedule& sched, Rng& rng);

}  // namespace mvb
