#pragma once

#include "modex/nn/params.hpp"

#include <cmath>
#include <cstdint>

namespace modex::nn {

struct AdamWHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
};

template <class S>
struct AdamWState {
    ParamSet<S> m, v;
    std::int64_t step = 0;
};

/// Adam with decoupled weight decay:
/// theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta).
template <class S>
void adamw_update(ParamSet<S>& params, const ParamSet<S>& grads, AdamWState<S>& state, const AdamWHyper& h) {
    require(params.size() == grads.size(), "gradient layout does not match parameters");
    if (state.m.size() != params.size()) {
        state.m = params.zeros_like();
        state.v = params.zeros_like();
        state.step = 0;
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i].data;
        const auto& g = grads[i].data;
        require(p.size() == g.size(), "gradient shape mismatch for " + params[i].name);
        auto& m = state.m[i].data;
        auto& v = state.v[i].data;
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double gj = static_cast<double>(g[j]);
            const double mj = h.beta1 * static_cast<double>(m[j]) + (1.0 - h.beta1) * gj;
            const double vj = h.beta2 * static_cast<double>(v[j]) + (1.0 - h.beta2) * gj * gj;
            m[j] = static_cast<S>(mj);
            v[j] = static_cast<S>(vj);
            const double mhat = mj / bc1;
            const double vhat = vj / bc2;
            const double pj = static_cast<double>(p[j]);
            p[j] = static_cast<S>(pj - h.lr * (mhat / (std::sqrt(vhat) + h.eps) + h.weight_decay * pj));
        }
    }
}

struct TrainConfig {
    std::size_t block_len = 1024;
    std::size_t warmup_len = 1024;
    AdamWHyper optimizer;
    std::uint64_t seed = 0;

    void validate() const {
        require(block_len > 0 && warmup_len > 0, "block and warmup lengths must be positive");
        require(optimizer.lr >= 0.0 && optimizer.eps > 0.0, "invalid optimizer hyperparameters");
    }
};

} // namespace modex::nn
