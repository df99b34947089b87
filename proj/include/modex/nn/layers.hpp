#pragma once

// Forward/backward kernels for the extraction CNN. Feature maps are
// channels x freq x time with time innermost.

#include "modex/core.hpp"
#include "modex/nn/params.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace modex::nn {

template <class S>
struct FeatureMap {
    std::size_t channels = 0, freq = 0, time = 0;
    std::vector<S> data;

    FeatureMap() = default;
    FeatureMap(std::size_t c, std::size_t f, std::size_t t, S fill = S(0))
        : channels(c), freq(f), time(t), data(c * f * t, fill) {}

    S* row(std::size_t c, std::size_t f) { return data.data() + (c * freq + f) * time; }
    const S* row(std::size_t c, std::size_t f) const { return data.data() + (c * freq + f) * time; }
    S* plane(std::size_t c) { return data.data() + c * freq * time; }
    const S* plane(std::size_t c) const { return data.data() + c * freq * time; }
    std::size_t plane_size() const { return freq * time; }
};

// ---------------------------------------------------------------------------
// Layer norm over the freq-time plane of each channel, with per-channel affine.

inline constexpr double kLayerNormEps = 1e-5;

template <class S>
struct LayerNormCache {
    FeatureMap<S> xhat;
    std::vector<S> inv_std;
};

template <class S>
FeatureMap<S> layer_norm_forward(const FeatureMap<S>& x, ConstSpan<S> scale, ConstSpan<S> shift,
                                 LayerNormCache<S>* cache) {
    FeatureMap<S> y(x.channels, x.freq, x.time);
    if (cache) {
        cache->xhat = FeatureMap<S>(x.channels, x.freq, x.time);
        cache->inv_std.assign(x.channels, S(0));
    }
    const std::size_t m = x.plane_size();
    for (std::size_t c = 0; c < x.channels; ++c) {
        const S* in = x.plane(c);
        S mean = S(0);
        for (std::size_t i = 0; i < m; ++i) mean += in[i];
        mean /= static_cast<S>(m);
        S var = S(0);
        for (std::size_t i = 0; i < m; ++i) var += (in[i] - mean) * (in[i] - mean);
        var /= static_cast<S>(m);
        const S inv = S(1) / std::sqrt(var + static_cast<S>(kLayerNormEps));
        S* out = y.plane(c);
        S* xh = cache ? cache->xhat.plane(c) : nullptr;
        for (std::size_t i = 0; i < m; ++i) {
            const S h = (in[i] - mean) * inv;
            if (xh) xh[i] = h;
            out[i] = scale[c] * h + shift[c];
        }
        if (cache) cache->inv_std[c] = inv;
    }
    return y;
}

/// Accumulates parameter gradients; returns dL/dx when `want_input_grad`.
template <class S>
FeatureMap<S> layer_norm_backward(const FeatureMap<S>& dy, const LayerNormCache<S>& cache, ConstSpan<S> scale,
                                  MutSpan<S> dscale, MutSpan<S> dshift, bool want_input_grad) {
    FeatureMap<S> dx;
    if (want_input_grad) dx = FeatureMap<S>(dy.channels, dy.freq, dy.time);
    const std::size_t m = dy.plane_size();
    const S inv_m = S(1) / static_cast<S>(m);
    for (std::size_t c = 0; c < dy.channels; ++c) {
        const S* g = dy.plane(c);
        const S* xh = cache.xhat.plane(c);
        S sum_g = S(0), sum_gx = S(0);
        for (std::size_t i = 0; i < m; ++i) {
            sum_g += g[i];
            sum_gx += g[i] * xh[i];
        }
        dscale[c] += sum_gx;
        dshift[c] += sum_g;
        if (!want_input_grad) continue;
        // dxhat = g * scale; dx = inv/M * (M dxhat - sum dxhat - xhat * sum(dxhat xhat))
        const S k = scale[c] * cache.inv_std[c];
        S* out = dx.plane(c);
        for (std::size_t i = 0; i < m; ++i) out[i] = k * (g[i] - inv_m * sum_g - xh[i] * inv_m * sum_gx);
    }
    return dx;
}

// ---------------------------------------------------------------------------
// 2-D convolution, "same" zero padding, dilation along time only.

struct ConvShape {
    std::size_t in_channels, out_channels, kernel_freq, kernel_time, dilation;

    std::size_t weight_index(std::size_t o, std::size_t i, std::size_t kf, std::size_t kt) const {
        return ((o * in_channels + i) * kernel_freq + kf) * kernel_time + kt;
    }
};

namespace detail {

template <class S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Rows of a feature map at one frequency bin, one row per channel.
template <class S>
Eigen::Map<RowMat<S>, 0, Eigen::OuterStride<>> freq_slice(FeatureMap<S>& m, std::size_t f) {
    return {m.row(0, f), static_cast<Eigen::Index>(m.channels), static_cast<Eigen::Index>(m.time),
            Eigen::OuterStride<>(static_cast<Eigen::Index>(m.freq * m.time))};
}

template <class S>
Eigen::Map<const RowMat<S>, 0, Eigen::OuterStride<>> freq_slice(const FeatureMap<S>& m, std::size_t f) {
    return {m.row(0, f), static_cast<Eigen::Index>(m.channels), static_cast<Eigen::Index>(m.time),
            Eigen::OuterStride<>(static_cast<Eigen::Index>(m.freq * m.time))};
}

// Walks the (in channel, kf, kt) taps feeding output bin `f`, in weight order.
// `fn(row, fi, off, t0, t1)` gets the tap's row in the unrolled matrix, its
// input bin (or -1 when it falls in the padding) and the valid output window.
template <class Fn>
void for_each_tap(const ConvShape& cs, std::size_t freq, std::size_t time, std::size_t f, Fn&& fn) {
    const auto pf = static_cast<std::ptrdiff_t>(cs.kernel_freq / 2);
    const auto pt = static_cast<std::ptrdiff_t>(cs.kernel_time / 2);
    const auto F = static_cast<std::ptrdiff_t>(freq);
    const auto T = static_cast<std::ptrdiff_t>(time);
    std::size_t row = 0;
    for (std::size_t i = 0; i < cs.in_channels; ++i)
        for (std::size_t kf = 0; kf < cs.kernel_freq; ++kf) {
            const std::ptrdiff_t fi = static_cast<std::ptrdiff_t>(f + kf) - pf;
            const bool inside = fi >= 0 && fi < F;
            for (std::size_t kt = 0; kt < cs.kernel_time; ++kt, ++row) {
                const std::ptrdiff_t off =
                    (static_cast<std::ptrdiff_t>(kt) - pt) * static_cast<std::ptrdiff_t>(cs.dilation);
                const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -off);
                const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(T, T - off);
                fn(row, i, inside && t0 < t1 ? fi : -1, off, t0, t1);
            }
        }
}

// im2col for one output frequency bin: (in * kf * kt) x time.
template <class S>
void unroll(const FeatureMap<S>& x, const ConvShape& cs, std::size_t f, RowMat<S>& col) {
    col.setZero(static_cast<Eigen::Index>(cs.in_channels * cs.kernel_freq * cs.kernel_time),
                static_cast<Eigen::Index>(x.time));
    for_each_tap(cs, x.freq, x.time, f,
                 [&](std::size_t row, std::size_t i, std::ptrdiff_t fi, std::ptrdiff_t off, std::ptrdiff_t t0,
                     std::ptrdiff_t t1) {
                     if (fi < 0) return;
                     const S* in = x.row(i, static_cast<std::size_t>(fi)) + off;
                     S* out = col.row(static_cast<Eigen::Index>(row)).data();
                     std::copy(in + t0, in + t1, out + t0);
                 });
}

} // namespace detail

template <class S>
FeatureMap<S> conv2d_forward(const FeatureMap<S>& x, const ConvShape& cs, ConstSpan<S> weight,
                             ConstSpan<S> bias) {
    require(x.channels == cs.in_channels, "convolution input channel mismatch");
    FeatureMap<S> y(cs.out_channels, x.freq, x.time);
    const auto K = static_cast<Eigen::Index>(cs.in_channels * cs.kernel_freq * cs.kernel_time);
    const Eigen::Map<const detail::RowMat<S>> w(weight.data(), static_cast<Eigen::Index>(cs.out_channels), K);
    const Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> b(bias.data(),
                                                                   static_cast<Eigen::Index>(cs.out_channels));
    detail::RowMat<S> col;
    for (std::size_t f = 0; f < x.freq; ++f) {
        detail::unroll(x, cs, f, col);
        auto out = detail::freq_slice(y, f);
        out.noalias() = w * col;
        out.colwise() += b;
    }
    return y;
}

template <class S>
FeatureMap<S> conv2d_backward(const FeatureMap<S>& dy, const FeatureMap<S>& x, const ConvShape& cs,
                              ConstSpan<S> weight, MutSpan<S> dweight, MutSpan<S> dbias,
                              bool want_input_grad) {
    FeatureMap<S> dx;
    if (want_input_grad) dx = FeatureMap<S>(x.channels, x.freq, x.time);
    for (std::size_t o = 0; o < cs.out_channels; ++o) {
        const S* g = dy.plane(o);
        S acc = S(0);
        for (std::size_t k = 0; k < dy.plane_size(); ++k) acc += g[k];
        dbias[o] += acc;
    }
    const auto O = static_cast<Eigen::Index>(cs.out_channels);
    const auto K = static_cast<Eigen::Index>(cs.in_channels * cs.kernel_freq * cs.kernel_time);
    const Eigen::Map<const detail::RowMat<S>> w(weight.data(), O, K);
    Eigen::Map<detail::RowMat<S>> dw(dweight.data(), O, K);
    detail::RowMat<S> col, dcol;
    for (std::size_t f = 0; f < x.freq; ++f) {
        const auto g = detail::freq_slice(dy, f);
        detail::unroll(x, cs, f, col);
        dw.noalias() += g * col.transpose();
        if (!want_input_grad) continue;
        dcol.noalias() = w.transpose() * g;
        detail::for_each_tap(cs, x.freq, x.time, f,
                             [&](std::size_t row, std::size_t i, std::ptrdiff_t fi, std::ptrdiff_t off,
                                 std::ptrdiff_t t0, std::ptrdiff_t t1) {
                                 if (fi < 0) return;
                                 S* din = dx.row(i, static_cast<std::size_t>(fi)) + off;
                                 const S* src = dcol.row(static_cast<Eigen::Index>(row)).data();
                                 for (std::ptrdiff_t t = t0; t < t1; ++t) din[t] += src[t];
                             });
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Max pooling along frequency only.

template <class S>
FeatureMap<S> maxpool_freq_forward(const FeatureMap<S>& x, std::size_t pool, std::vector<std::uint32_t>* argmax) {
    require(pool >= 1 && x.freq % pool == 0, "frequency bins must be divisible by the pool size");
    FeatureMap<S> y(x.channels, x.freq / pool, x.time);
    if (argmax) argmax->assign(y.data.size(), 0);
    for (std::size_t c = 0; c < x.channels; ++c)
        for (std::size_t f = 0; f < y.freq; ++f) {
            S* out = y.row(c, f);
            std::uint32_t* am = argmax ? argmax->data() + (c * y.freq + f) * y.time : nullptr;
            const S* first = x.row(c, f * pool);
            std::copy(first, first + x.time, out);
            for (std::size_t p = 1; p < pool; ++p) {
                const S* in = x.row(c, f * pool + p);
                for (std::size_t t = 0; t < x.time; ++t)
                    if (in[t] > out[t]) {
                        out[t] = in[t];
                        if (am) am[t] = static_cast<std::uint32_t>(p);
                    }
            }
        }
    return y;
}

template <class S>
FeatureMap<S> maxpool_freq_backward(const FeatureMap<S>& dy, std::size_t pool, const std::vector<std::uint32_t>& argmax) {
    FeatureMap<S> dx(dy.channels, dy.freq * pool, dy.time);
    for (std::size_t c = 0; c < dy.channels; ++c)
        for (std::size_t f = 0; f < dy.freq; ++f) {
            const S* g = dy.row(c, f);
            const std::uint32_t* am = argmax.data() + (c * dy.freq + f) * dy.time;
            for (std::size_t t = 0; t < dy.time; ++t) dx.row(c, f * pool + am[t])[t] += g[t];
        }
    return dx;
}

// ---------------------------------------------------------------------------
// PReLU with one slope per channel.

template <class S>
FeatureMap<S> prelu_forward(const FeatureMap<S>& x, ConstSpan<S> slope) {
    FeatureMap<S> y = x;
    for (std::size_t c = 0; c < x.channels; ++c) {
        S* p = y.plane(c);
        for (std::size_t i = 0; i < x.plane_size(); ++i)
            if (p[i] < S(0)) p[i] *= slope[c];
    }
    return y;
}

template <class S>
FeatureMap<S> prelu_backward(const FeatureMap<S>& dy, const FeatureMap<S>& x, ConstSpan<S> slope,
                             MutSpan<S> dslope) {
    FeatureMap<S> dx = dy;
    for (std::size_t c = 0; c < x.channels; ++c) {
        const S* in = x.plane(c);
        S* g = dx.plane(c);
        S acc = S(0);
        for (std::size_t i = 0; i < x.plane_size(); ++i)
            if (in[i] < S(0)) {
                acc += g[i] * in[i];
                g[i] *= slope[c];
            }
        dslope[c] += acc;
    }
    return dx;
}

} // namespace modex::nn
