#pragma once

#include "modex/metrics.hpp"
#include "modex/nn/optim.hpp"
#include "modex/nn/params.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace modex::nn {

struct LstmFxConfig {
    std::size_t hidden = 64;
    std::size_t inputs = 2; // dry audio, LFO

    void validate() const {
        require(hidden >= 1, "LSTM hidden size must be positive");
        require(inputs == 2, "LSTM effect model takes exactly two inputs");
    }
    bool operator==(const LstmFxConfig&) const = default;
};

/// Single-layer LSTM (gate order i, f, g, o) followed by a linear head whose
/// output is added to the dry sample and squashed by tanh.
template <class S>
struct LstmFx {
    LstmFxConfig cfg;
    ParamSet<S> params;

    static constexpr std::size_t kWeightIh = 0, kWeightHh = 1, kBias = 2, kHeadWeight = 3, kHeadBias = 4;
};

template <class S>
struct LstmState {
    std::vector<S> h, c;

    static LstmState zeros(std::size_t hidden) { return {std::vector<S>(hidden, S(0)), std::vector<S>(hidden, S(0))}; }
    bool operator==(const LstmState&) const = default;
};

template <class S>
ParamSet<S> lstmfx_layout(const LstmFxConfig& cfg) {
    cfg.validate();
    const std::size_t g = 4 * cfg.hidden;
    ParamSet<S> ps;
    ps.tensors.emplace_back("lstm.weight_ih", std::vector<std::size_t>{g, cfg.inputs});
    ps.tensors.emplace_back("lstm.weight_hh", std::vector<std::size_t>{g, cfg.hidden});
    ps.tensors.emplace_back("lstm.bias", std::vector<std::size_t>{g});
    ps.tensors.emplace_back("head.weight", std::vector<std::size_t>{1, cfg.hidden});
    ps.tensors.emplace_back("head.bias", std::vector<std::size_t>{1});
    return ps;
}

template <class S>
LstmFx<S> lstmfx_init(const LstmFxConfig& cfg, Rng& rng) {
    LstmFx<S> net{cfg, lstmfx_layout<S>(cfg)};
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
    for (auto& t : net.params.tensors) fill_uniform(t, bound, rng);
    return net;
}

namespace detail {

template <class S>
S sigmoid(S x) {
    using std::exp;
    return S(1) / (S(1) + exp(-x));
}

/// Per-step values kept for backpropagation.
template <class S>
struct LstmStep {
    std::vector<S> gates; // activated i, f, g, o
    std::vector<S> c, h, c_prev, h_prev;
    S x0, x1, y;
};

template <class S>
void lstm_cell(const LstmFx<S>& net, S x0, S x1, LstmState<S>& st, std::vector<S>& gates) {
    using std::tanh;
    const std::size_t H = net.cfg.hidden;
    const auto& wih = net.params[LstmFx<S>::kWeightIh].data;
    const auto& whh = net.params[LstmFx<S>::kWeightHh].data;
    const auto& b = net.params[LstmFx<S>::kBias].data;
    gates.resize(4 * H);
    for (std::size_t r = 0; r < 4 * H; ++r) {
        S a = b[r] + wih[r * 2] * x0 + wih[r * 2 + 1] * x1;
        const S* wr = &whh[r * H];
        for (std::size_t k = 0; k < H; ++k) a += wr[k] * st.h[k];
        gates[r] = a;
    }
    for (std::size_t k = 0; k < H; ++k) {
        const S i = sigmoid(gates[k]);
        const S f = sigmoid(gates[H + k]);
        const S g = tanh(gates[2 * H + k]);
        const S o = sigmoid(gates[3 * H + k]);
        gates[k] = i;
        gates[H + k] = f;
        gates[2 * H + k] = g;
        gates[3 * H + k] = o;
        st.c[k] = f * st.c[k] + i * g;
        st.h[k] = o * tanh(st.c[k]);
    }
}

template <class S>
S lstm_head(const LstmFx<S>& net, const std::vector<S>& h, S x0) {
    using std::tanh;
    const auto& w = net.params[LstmFx<S>::kHeadWeight].data;
    S d = net.params[LstmFx<S>::kHeadBias].data[0];
    for (std::size_t k = 0; k < h.size(); ++k) d += w[k] * h[k];
    return tanh(x0 + d);
}

} // namespace detail

/// Causal sample-by-sample processing. `state` is read as the initial state and
/// left holding the final state, so chunks can be streamed.
template <class S>
std::vector<S> lstmfx_forward(const LstmFx<S>& net, ConstSpan<S> x, ConstSpan<S> lfo, LstmState<S>& state) {
    require(x.size() == lfo.size(), "audio and LFO lengths must match");
    require(net.params.size() == 5, "LSTM parameter layout mismatch");
    if (state.h.size() != net.cfg.hidden) state = LstmState<S>::zeros(net.cfg.hidden);
    std::vector<S> y(x.size());
    std::vector<S> gates;
    for (std::size_t n = 0; n < x.size(); ++n) {
        detail::lstm_cell(net, x[n], lfo[n], state, gates);
        y[n] = detail::lstm_head(net, state.h, x[n]);
    }
    return y;
}

/// L1 loss of one block started from `initial` (treated as a constant) and its
/// exact gradient, accumulated into `grad`. Leaves the final state in `final_state`.
template <class S>
double lstmfx_block_grad(const LstmFx<S>& net, const LstmState<S>& initial, ConstSpan<S> x,
                         ConstSpan<S> lfo, ConstSpan<S> target, ParamSet<S>& grad,
                         LstmState<S>* final_state = nullptr) {
    using std::tanh;
    require(x.size() == lfo.size() && x.size() == target.size() && !x.empty(), "block lengths must match");
    const std::size_t H = net.cfg.hidden, N = x.size();
    std::vector<detail::LstmStep<S>> steps(N);
    LstmState<S> st = initial;
    if (st.h.size() != H) st = LstmState<S>::zeros(H);
    for (std::size_t n = 0; n < N; ++n) {
        auto& s = steps[n];
        s.h_prev = st.h;
        s.c_prev = st.c;
        detail::lstm_cell(net, x[n], lfo[n], st, s.gates);
        s.c = st.c;
        s.h = st.h;
        s.x0 = x[n];
        s.x1 = lfo[n];
        s.y = detail::lstm_head(net, st.h, x[n]);
    }
    if (final_state) *final_state = st;

    double loss = 0.0;
    for (std::size_t n = 0; n < N; ++n) loss += std::abs(static_cast<double>(steps[n].y - target[n]));
    loss /= static_cast<double>(N);

    const auto& whh = net.params[LstmFx<S>::kWeightHh].data;
    const auto& wout = net.params[LstmFx<S>::kHeadWeight].data;
    auto& gwih = grad[LstmFx<S>::kWeightIh].data;
    auto& gwhh = grad[LstmFx<S>::kWeightHh].data;
    auto& gb = grad[LstmFx<S>::kBias].data;
    auto& gwout = grad[LstmFx<S>::kHeadWeight].data;
    auto& gbout = grad[LstmFx<S>::kHeadBias].data;

    std::vector<S> dh_next(H, S(0)), dc_next(H, S(0)), da(4 * H), dh(H);
    const S inv_n = S(1) / static_cast<S>(N);
    for (std::size_t n = N; n-- > 0;) {
        const auto& s = steps[n];
        const S diff = s.y - target[n];
        const S dy = diff > S(0) ? inv_n : (diff < S(0) ? -inv_n : S(0));
        const S dpre = dy * (S(1) - s.y * s.y); // through tanh(x + delta)
        gbout[0] += dpre;
        for (std::size_t k = 0; k < H; ++k) {
            gwout[k] += dpre * s.h[k];
            dh[k] = dpre * wout[k] + dh_next[k];
        }
        for (std::size_t k = 0; k < H; ++k) {
            const S i = s.gates[k], f = s.gates[H + k], g = s.gates[2 * H + k], o = s.gates[3 * H + k];
            const S tc = tanh(s.c[k]);
            const S dc = dh[k] * o * (S(1) - tc * tc) + dc_next[k];
            da[k] = dc * g * i * (S(1) - i);
            da[H + k] = dc * s.c_prev[k] * f * (S(1) - f);
            da[2 * H + k] = dc * i * (S(1) - g * g);
            da[3 * H + k] = dh[k] * tc * o * (S(1) - o);
            dc_next[k] = dc * f;
        }
        std::fill(dh_next.begin(), dh_next.end(), S(0));
        for (std::size_t r = 0; r < 4 * H; ++r) {
            const S d = da[r];
            gb[r] += d;
            gwih[r * 2] += d * s.x0;
            gwih[r * 2 + 1] += d * s.x1;
            const S* wr = &whh[r * H];
            S* gr = &gwhh[r * H];
            for (std::size_t k = 0; k < H; ++k) {
                gr[k] += d * s.h_prev[k];
                dh_next[k] += d * wr[k];
            }
        }
    }
    return loss;
}

/// Gradient of TBPTT step `k`: starting from `carried` (the state at sample
/// k*block_len), re-runs the warmup_len samples before the loss block without
/// gradient, then returns the block's L1 loss and accumulates its truncated
/// gradient into `grad`. `next_carry` receives the state at (k+1)*block_len.
template <class S>
double lstmfx_tbptt_step_grad(const LstmFx<S>& net, const LstmState<S>& carried, ConstSpan<S> dry, ConstSpan<S> wet,
                              ConstSpan<S> lfo, const TrainConfig& cfg, std::size_t k, ParamSet<S>& grad,
                              LstmState<S>* next_carry = nullptr) {
    const std::size_t W = cfg.warmup_len, B = cfg.block_len;
    const std::size_t start = k * B, block_start = start + W, carry_at = (k + 1) * B;
    require(block_start + B <= dry.size(), "TBPTT step runs past the end of the sequence");
    LstmState<S> st = carried;
    if (st.h.size() != net.cfg.hidden) st = LstmState<S>::zeros(net.cfg.hidden);
    LstmState<S> next = st;
    std::vector<S> gates;
    for (std::size_t n = start; n < block_start; ++n) {
        detail::lstm_cell(net, dry[n], lfo[n], st, gates);
        if (n + 1 == carry_at) next = st;
    }
    if (next_carry && carry_at > block_start) {
        // Carry point lies inside the loss block (warmup shorter than a block).
        next = st;
        for (std::size_t n = block_start; n < carry_at; ++n) detail::lstm_cell(net, dry[n], lfo[n], next, gates);
    }
    if (next_carry) *next_carry = next;
    return lstmfx_block_grad(net, st, dry.subspan(block_start, B), lfo.subspan(block_start, B),
                             wet.subspan(block_start, B), grad);
}

/// Truncated BPTT over one sequence. For every loss block the preceding
/// warmup_len samples are re-run without gradient from the carried state; the
/// loss covers exactly block_len samples; gradients stop at the block's initial
/// state. The state starts at zero for each call. Returns the per-block losses.
template <class S>
std::vector<double> lstmfx_train_tbptt(LstmFx<S>& net, ConstSpan<S> dry, ConstSpan<S> wet, ConstSpan<S> lfo,
                                       const TrainConfig& cfg, AdamWState<S>& opt,
                                       std::size_t max_blocks = SIZE_MAX) {
    cfg.validate();
    require(dry.size() == wet.size() && dry.size() == lfo.size(), "dry, wet and LFO lengths must match");
    const std::size_t W = cfg.warmup_len, B = cfg.block_len;
    require(dry.size() >= W + B, "sequence shorter than warmup plus one block");
    const std::size_t n_blocks = std::min((dry.size() - W) / B, max_blocks);

    std::vector<double> losses;
    losses.reserve(n_blocks);
    auto carried = LstmState<S>::zeros(net.cfg.hidden);
    for (std::size_t k = 0; k < n_blocks; ++k) {
        auto grad = net.params.zeros_like();
        LstmState<S> next;
        const double loss = lstmfx_tbptt_step_grad(net, carried, dry, wet, lfo, cfg, k, grad, &next);
        if (!std::isfinite(loss)) throw DivergenceError("LSTM loss is not finite");
        adamw_update(net.params, grad, opt, cfg.optimizer);
        losses.push_back(loss);
        carried = std::move(next);
    }
    return losses;
}

} // namespace modex::nn
