#include "grad/adam.hpp"

#include <cmath>

#include "core/error.hpp"

namespace mvb::grad {

void AdamState::init(const std::vector<Tensor>& params) {
    step = 0;
    m.clear();
    v.clear();
    for (const Tensor& p : params) {
        m.emplace_back(p.size(), 0.0);
        v.emplace_back(p.size(), 0.0);
    }
}

void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamConfig& cfg) {
    if (state.m.size() != params.size())
        fail_param("adam_step: state was initialized for a different param list");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (size_t p = 0; p < params.size(); ++p) {
        Tensor& t = params[p];
        auto& g = t.grad();
        auto& x = t.data();
        auto& mp = state.m[p];
        auto& vp = state.v[p];
        if (mp.size() != x.size()) fail_param("adam_step: param size changed since init");
        for (size_t i = 0; i < x.size(); ++i) {
            mp[i] = cfg.beta1 * mp[i] + (1.0 - cfg.beta1) * g[i];
            vp[i] = cfg.beta2 * vp[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = mp[i] / bc1;
            const double vhat = vp[i] / bc2;
            x[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

}  // namespace mvb::grad
