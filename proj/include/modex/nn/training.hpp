#pragma once

#include "modex/nn/lfonet.hpp"
#include "modex/nn/lstm_fx.hpp"

#include <functional>
#include <numeric>

namespace modex::nn {

struct LfoNetFitOptions {
    std::size_t steps = 100;
    std::size_t batch_size = 8;
    double spec_augment = 0.0; // mask fraction; 0 disables
    LossWeights loss;
    TrainConfig train;
    std::function<void(std::size_t step, double loss)> on_step;
};

/// Mini-batch training over `data`. Batches walk a fresh permutation each
/// epoch; the permutation and any SpecAugment masks come from `train.seed`.
template <class S>
std::vector<double> lfonet_fit(LfoNet<S>& net, std::span<const LfoNetExample> data, const LfoNetFitOptions& opt,
                               AdamWState<S>& state) {
    require(!data.empty(), "no training examples");
    require(opt.batch_size >= 1, "batch size must be positive");
    opt.train.validate();
    Rng rng(opt.train.seed);
    std::vector<std::size_t> order(data.size());
    std::size_t cursor = order.size();
    std::vector<double> losses;
    losses.reserve(opt.steps);
    std::vector<LfoNetExample> batch;
    for (std::size_t step = 0; step < opt.steps; ++step) {
        batch.clear();
        while (batch.size() < std::min(opt.batch_size, data.size())) {
            if (cursor == order.size()) {
                std::iota(order.begin(), order.end(), std::size_t{0});
                for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
                cursor = 0;
            }
            const auto& ex = data[order[cursor++]];
            batch.push_back(opt.spec_augment > 0.0 ? LfoNetExample{spec_augment(ex.spec, opt.spec_augment, rng), ex.target}
                                                   : ex);
        }
        const double loss = lfonet_train_step(net, std::span<const LfoNetExample>(batch), opt.loss, state, opt.train);
        losses.push_back(loss);
        if (opt.on_step) opt.on_step(step, loss);
    }
    return losses;
}

/// Runs TBPTT passes over one sequence until `steps` optimizer steps have been
/// taken. The hidden state resets at the start of every pass.
template <class S>
std::vector<double> lstmfx_fit(LstmFx<S>& net, ConstSpan<S> dry, ConstSpan<S> wet, ConstSpan<S> lfo,
                               const TrainConfig& cfg, AdamWState<S>& state, std::size_t steps,
                               const std::function<void(std::size_t step, double loss)>& on_step = {}) {
    std::vector<double> losses;
    losses.reserve(steps);
    while (losses.size() < steps) {
        const auto pass = lstmfx_train_tbptt(net, dry, wet, lfo, cfg, state, steps - losses.size());
        require(!pass.empty(), "sequence too short for one TBPTT block");
        for (double l : pass) {
            if (on_step) on_step(losses.size(), l);
            losses.push_back(l);
        }
    }
    return losses;
}

} // namespace modex::nn
