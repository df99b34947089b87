#pragma once

#include "modex/features.hpp"
#include "modex/lfo.hpp"
#include "modex/metrics.hpp"
#include "modex/nn/layers.hpp"
#include "modex/nn/optim.hpp"
#include "modex/nn/params.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace modex::nn {

struct LfoNetConfig {
    std::size_t n_blocks = 6;
    std::size_t channels = 64;
    std::size_t kernel_freq = 5;
    std::size_t kernel_time = 13;
    std::size_t freq_pool = 2;
    std::size_t dilation_base = 2;
    std::size_t in_channels = 2;
    std::size_t n_mels = 256;

    void validate() const {
        require(n_blocks >= 1 && channels >= 1 && in_channels >= 1, "LFO-net needs at least one block and channel");
        require(kernel_freq % 2 == 1 && kernel_time % 2 == 1, "LFO-net kernels must have odd extent");
        require(freq_pool >= 1 && dilation_base >= 1, "invalid pool or dilation factor");
        std::size_t div = 1;
        for (std::size_t i = 0; i < n_blocks; ++i) div *= freq_pool;
        require(n_mels % div == 0 && n_mels / div >= 1, "Mel bins must be divisible by pool^blocks");
    }

    std::size_t dilation(std::size_t block) const {
        std::size_t d = 1;
        for (std::size_t i = 0; i < block; ++i) d *= dilation_base;
        return d;
    }

    std::size_t output_freq() const {
        std::size_t f = n_mels;
        for (std::size_t i = 0; i < n_blocks; ++i) f /= freq_pool;
        return f;
    }

    std::size_t head_inputs() const { return channels * output_freq(); }

    /// Temporal receptive field in frames: 1 + (kernel_time - 1) * sum of dilations.
    std::size_t receptive_field() const {
        std::size_t sum = 0;
        for (std::size_t i = 0; i < n_blocks; ++i) sum += dilation(i);
        return 1 + (kernel_time - 1) * sum;
    }

    ConvShape conv_shape(std::size_t block) const {
        return {block == 0 ? in_channels : channels, channels, kernel_freq, kernel_time, dilation(block)};
    }

    bool operator==(const LfoNetConfig&) const = default;
};

/// Per block: norm.scale, norm.shift, conv.weight, conv.bias, prelu.slope.
/// Then head.weight and head.bias.
template <class S>
struct LfoNet {
    LfoNetConfig cfg;
    ParamSet<S> params;

    static constexpr std::size_t kPerBlock = 5;
    static std::size_t norm_scale(std::size_t b) { return kPerBlock * b; }
    static std::size_t norm_shift(std::size_t b) { return kPerBlock * b + 1; }
    static std::size_t conv_weight(std::size_t b) { return kPerBlock * b + 2; }
    static std::size_t conv_bias(std::size_t b) { return kPerBlock * b + 3; }
    static std::size_t prelu_slope(std::size_t b) { return kPerBlock * b + 4; }
    std::size_t head_weight() const { return kPerBlock * cfg.n_blocks; }
    std::size_t head_bias() const { return kPerBlock * cfg.n_blocks + 1; }

    std::span<const S> p(std::size_t i) const { return params[i].data; }
};

/// Parameter layout for `cfg` with every tensor zeroed.
template <class S>
ParamSet<S> lfonet_layout(const LfoNetConfig& cfg) {
    cfg.validate();
    ParamSet<S> ps;
    for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
        const auto cs = cfg.conv_shape(b);
        const std::string pre = "block" + std::to_string(b) + ".";
        ps.tensors.emplace_back(pre + "norm.scale", std::vector<std::size_t>{cs.in_channels});
        ps.tensors.emplace_back(pre + "norm.shift", std::vector<std::size_t>{cs.in_channels});
        ps.tensors.emplace_back(pre + "conv.weight", std::vector<std::size_t>{cs.out_channels, cs.in_channels, cs.kernel_freq, cs.kernel_time});
        ps.tensors.emplace_back(pre + "conv.bias", std::vector<std::size_t>{cs.out_channels});
        ps.tensors.emplace_back(pre + "prelu.slope", std::vector<std::size_t>{cs.out_channels});
    }
    ps.tensors.emplace_back("head.weight", std::vector<std::size_t>{1, cfg.head_inputs()});
    ps.tensors.emplace_back("head.bias", std::vector<std::size_t>{1});
    return ps;
}

template <class S>
LfoNet<S> lfonet_init(const LfoNetConfig& cfg, Rng& rng) {
    LfoNet<S> net{cfg, lfonet_layout<S>(cfg)};
    for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
        const auto cs = cfg.conv_shape(b);
        std::fill(net.params[LfoNet<S>::norm_scale(b)].data.begin(), net.params[LfoNet<S>::norm_scale(b)].data.end(), S(1));
        const auto fan_in = static_cast<double>(cs.in_channels * cs.kernel_freq * cs.kernel_time);
        fill_uniform(net.params[LfoNet<S>::conv_weight(b)], 1.0 / std::sqrt(fan_in), rng);
        std::fill(net.params[LfoNet<S>::prelu_slope(b)].data.begin(), net.params[LfoNet<S>::prelu_slope(b)].data.end(), S(0.25));
    }
    fill_uniform(net.params[net.head_weight()], 1.0 / std::sqrt(static_cast<double>(cfg.head_inputs())), rng);
    return net;
}

template <class S>
FeatureMap<S> to_feature_map(const MelSpec& spec) {
    FeatureMap<S> x(spec.channels, spec.n_mels, spec.frames);
    for (std::size_t i = 0; i < spec.data.size(); ++i) x.data[i] = static_cast<S>(spec.data[i]);
    return x;
}

template <class S>
struct LfoNetCache {
    struct Block {
        FeatureMap<S> input;
        LayerNormCache<S> norm;
        FeatureMap<S> normed;
        std::vector<std::uint32_t> argmax;
        FeatureMap<S> pooled;
    };
    std::vector<Block> blocks;
    FeatureMap<S> features; // output of the last block
    std::vector<S> output;  // per-frame modulation estimate
};

struct LfoNetOutput {
    ModSignal mod;                              // frame rate, values in (0, 1)
    std::vector<std::vector<double>> latents;   // per frame, channel means over frequency
};

template <class S>
S logistic(S x) {
    using std::exp;
    // Saturated logits would round to exactly 0 or 1; keep the open interval.
    const S lo = std::numeric_limits<S>::min();
    const S hi = S(1) - std::numeric_limits<S>::epsilon() / S(2);
    return std::clamp(S(1) / (S(1) + exp(-x)), lo, hi);
}

/// Runs the network; fills `cache` for a subsequent backward pass when given.
template <class S>
std::vector<S> lfonet_run(const LfoNet<S>& net, FeatureMap<S> x, LfoNetCache<S>* cache) {
    const auto& cfg = net.cfg;
    require(x.channels == cfg.in_channels && x.freq == cfg.n_mels, "spectrogram shape does not match LFO-net config");
    require(x.time >= 1, "spectrogram has no frames");
    if (cache) cache->blocks.assign(cfg.n_blocks, {});
    for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
        using N = LfoNet<S>;
        LayerNormCache<S>* nc = cache ? &cache->blocks[b].norm : nullptr;
        auto normed = layer_norm_forward(x, net.p(N::norm_scale(b)), net.p(N::norm_shift(b)), nc);
        auto conv = conv2d_forward(normed, cfg.conv_shape(b), net.p(N::conv_weight(b)), net.p(N::conv_bias(b)));
        std::vector<std::uint32_t>* am = cache ? &cache->blocks[b].argmax : nullptr;
        auto pooled = maxpool_freq_forward(conv, cfg.freq_pool, am);
        auto act = prelu_forward(pooled, net.p(N::prelu_slope(b)));
        if (cache) {
            cache->blocks[b].input = std::move(x);
            cache->blocks[b].normed = std::move(normed);
            cache->blocks[b].pooled = std::move(pooled);
        }
        x = std::move(act);
    }
    const auto w = net.p(net.head_weight());
    const S bias = net.p(net.head_bias())[0];
    std::vector<S> out(x.time, bias);
    for (std::size_t c = 0; c < x.channels; ++c)
        for (std::size_t f = 0; f < x.freq; ++f) {
            const S wk = w[c * x.freq + f];
            const S* row = x.row(c, f);
            for (std::size_t t = 0; t < x.time; ++t) out[t] += wk * row[t];
        }
    for (auto& v : out) v = logistic(v);
    if (cache) {
        cache->features = std::move(x);
        cache->output = out;
    }
    return out;
}

/// Backward pass from dL/d(output); accumulates into `grad`.
template <class S>
void lfonet_backward(const LfoNet<S>& net, const LfoNetCache<S>& cache, ConstSpan<S> dout, ParamSet<S>& grad) {
    using N = LfoNet<S>;
    const auto& cfg = net.cfg;
    const auto& feat = cache.features;
    const std::size_t T = feat.time;
    std::vector<S> dlogit(T);
    for (std::size_t t = 0; t < T; ++t) dlogit[t] = dout[t] * cache.output[t] * (S(1) - cache.output[t]);

    const auto w = net.p(net.head_weight());
    auto& dw = grad[net.head_weight()].data;
    for (std::size_t t = 0; t < T; ++t) grad[net.head_bias()].data[0] += dlogit[t];
    FeatureMap<S> g(feat.channels, feat.freq, T);
    for (std::size_t c = 0; c < feat.channels; ++c)
        for (std::size_t f = 0; f < feat.freq; ++f) {
            const std::size_t k = c * feat.freq + f;
            const S* row = feat.row(c, f);
            S* grow = g.row(c, f);
            S acc = S(0);
            for (std::size_t t = 0; t < T; ++t) {
                acc += dlogit[t] * row[t];
                grow[t] = w[k] * dlogit[t];
            }
            dw[k] += acc;
        }

    for (std::size_t bi = cfg.n_blocks; bi-- > 0;) {
        const auto& blk = cache.blocks[bi];
        auto dpool = prelu_backward(g, blk.pooled, net.p(N::prelu_slope(bi)), std::span<S>(grad[N::prelu_slope(bi)].data));
        auto dconv = maxpool_freq_backward(dpool, cfg.freq_pool, blk.argmax);
        const bool need_input = bi > 0;
        auto dnormed = conv2d_backward(dconv, blk.normed, cfg.conv_shape(bi), net.p(N::conv_weight(bi)),
                                       std::span<S>(grad[N::conv_weight(bi)].data),
                                       std::span<S>(grad[N::conv_bias(bi)].data), true);
        g = layer_norm_backward(dnormed, blk.norm, net.p(N::norm_scale(bi)), std::span<S>(grad[N::norm_scale(bi)].data),
                                std::span<S>(grad[N::norm_shift(bi)].data), need_input);
    }
}

template <class S>
LfoNetOutput lfonet_forward(const LfoNet<S>& net, const MelSpec& spec) {
    require(spec.channels == net.cfg.in_channels && spec.n_mels == net.cfg.n_mels,
            "spectrogram shape does not match LFO-net config");
    LfoNetCache<S> cache;
    const auto out = lfonet_run(net, to_feature_map<S>(spec), &cache);
    LfoNetOutput r;
    r.mod.rate_hz = frame_rate();
    r.mod.values.assign(out.begin(), out.end());
    const auto& feat = cache.features;
    r.latents.assign(feat.time, std::vector<double>(feat.channels, 0.0));
    for (std::size_t c = 0; c < feat.channels; ++c)
        for (std::size_t f = 0; f < feat.freq; ++f) {
            const S* row = feat.row(c, f);
            for (std::size_t t = 0; t < feat.time; ++t) r.latents[t][c] += static_cast<double>(row[t]) / static_cast<double>(feat.freq);
        }
    return r;
}

/// Mean of the last block's activations over frequency and time, per channel.
template <class S>
std::vector<double> lfonet_latent(const LfoNet<S>& net, const MelSpec& spec) {
    const auto r = lfonet_forward(net, spec);
    std::vector<double> z(net.cfg.channels, 0.0);
    for (const auto& frame : r.latents)
        for (std::size_t c = 0; c < z.size(); ++c) z[c] += frame[c];
    for (auto& v : z) v /= static_cast<double>(r.latents.size());
    return z;
}

/// Loss of one example and its gradient, accumulated into `grad` with weight `scale`.
template <class S>
double lfonet_loss_and_grad(const LfoNet<S>& net, const MelSpec& spec, std::span<const double> target,
                            const LossWeights& lw, ParamSet<S>& grad, double scale = 1.0) {
    require(target.size() == spec.frames, "target length must equal spectrogram frames");
    LfoNetCache<S> cache;
    const auto out = lfonet_run(net, to_feature_map<S>(spec), &cache);
    const std::vector<double> est(out.begin(), out.end());
    const double loss = mod_loss(target, est, lw);
    const auto g = mod_loss_grad(target, est, lw);
    std::vector<S> dout(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) dout[i] = static_cast<S>(g[i] * scale);
    lfonet_backward(net, cache, dout, grad);
    return loss;
}

struct LfoNetExample {
    MelSpec spec;
    std::vector<double> target;
};

/// One optimizer step on the mean loss over `batch`. Returns the mean loss.
template <class S>
double lfonet_train_step(LfoNet<S>& net, std::span<const LfoNetExample> batch, const LossWeights& lw,
                         AdamWState<S>& opt, const TrainConfig& cfg) {
    require(!batch.empty(), "empty training batch");
    auto grad = net.params.zeros_like();
    double total = 0.0;
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const auto& ex : batch) total += lfonet_loss_and_grad(net, ex.spec, ex.target, lw, grad, scale);
    const double loss = total * scale;
    if (!std::isfinite(loss)) throw DivergenceError("LFO-net loss is not finite");
    adamw_update(net.params, grad, opt, cfg.optimizer);
    return loss;
}

} // namespace modex::nn
