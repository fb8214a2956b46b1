#include "grad/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace mvb::grad {

GradCheckReport grad_check(const std::function<Tensor()>& build_loss,
                           std::vector<Tensor> params,
                           double h,
                           size_t per_param,
                           Rng* rng) {
    Tensor loss = build_loss();
    backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (Tensor& p : params) analytic.push_back(p.grad());

    GradCheckReport rep;
    for (size_t p = 0; p < params.size(); ++p) {
        auto& x = params[p].data();
        std::vector<size_t> idx;
        if (per_param == 0 || x.size() <= per_param) {
            idx.resize(x.size());
            for (size_t i = 0; i < x.size(); ++i) idx[i] = i;
        } else {
            if (!rng) fail_param("grad_check: sampling requested without an rng");
            for (size_t i = 0; i < per_param; ++i)
                idx.push_back(static_cast<size_t>(rng->next_below(static_cast<uint64_t>(x.size()))));
        }
        for (size_t i : idx) {
            const double saved = x[i];
            x[i] = saved + h;
            const double up = build_loss().value();
            x[i] = saved - h;
            const double dn = build_loss().value();
            x[i] = saved;
            const double numeric = (up - dn) / (2.0 * h);
            const double a = analytic[p][i];
            const double abs_err = std::fabs(a - numeric);
            const double rel = abs_err / std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
            rep.max_rel_err = std::max(rep.max_rel_err, rel);
            rep.checked += 1;
        }
    }
    return rep;
}

}  // namespace mvb::grad
