#include "diffusion/schedule.hpp"

#include <cmath>

#include "core/error.hpp"

namespace mvb {

ScheduleKind schedule_kind_from_string(const std::string& name) {
    if (name == "linear_vp") return ScheduleKind::linear_vp;
    if (name == "cosine_vp") return ScheduleKind::cosine_vp;
    fail_config("unknown schedule kind: " + name);
}

NoiseSchedule build_schedule(int T, ScheduleKind kind) {
    if (T < 1) fail_param("schedule needs T >= 1");
    NoiseSchedule s;
    s.T = T;
    s.alpha.resize(T + 1);
    s.sigma.resize(T + 1);
    constexpr double kHalfPi = 1.57079632679489661923;
    if (kind == ScheduleKind::cosine_vp) {
        for (int t = 0; t <= T; t++) {
            double a = std::cos(kHalfPi * t / T);
            s.alpha[t] = std::max(a, 1e-4);
        }
    } else {
        double log_acc = 0.0;
        s.alpha[0] = 1.0;
        for (int t = 1; t <= T; t++) {
            double beta = 1e-4 + (0.02 - 1e-4) * (t - 1) / std::max(1, T - 1);
            log_acc += std::log1p(-beta);
            s.alpha[t] = std::exp(0.5 * log_acc);
        }
    }
    for (int t = 0; t <= T; t++) s.sigma[t] = std::sqrt(1.0 - s.alpha[t] * s.alpha[t]);
    return s;
}

int strength_to_timestep(double strength, int T) {
    if (!(strength >= 0.0 && strength <= 1.0)) fail_param("strength must be in [0,1]");
    long t = std::lround(strength * T);
    if (t < 0) t = 0;
    if (t > T) t = T;
    return static_cast<int>(t);
}

Image add_noise(const Image& x, int t, const NoiseSchedule& sched, Rng& rng) {
    if (t < 0 || t > sched.T) fail_param("add_noise: timestep out of range");
    if (t == 0) return x;
    Image out = x;
    double a = sched.alpha[t], s = sched.sigma[t];
    for (double& v : out.data) v = a * v + s * rng.normal();
    return out;
}

}  // namespace mvb
