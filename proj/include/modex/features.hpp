#pragma once

#include "modex/core.hpp"
#include "modex/fft.hpp"
#include "modex/rng.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

namespace modex {

struct MelParams {
    double fs_hz = kSampleRate;
    std::size_t n_fft = 1024;
    std::size_t hop = 256;
    std::size_t n_mels = 256;
    double log_eps = 1e-7;
};

/// Frames produced for `n_samples` of audio under centered framing.
inline std::size_t frames_for(std::size_t n_samples, std::size_t hop = 256) {
    return 1 + n_samples / hop;
}

inline double frame_rate(const MelParams& p = {}) { return p.fs_hz / static_cast<double>(p.hop); }

/// channels x n_mels x frames, time innermost.
struct MelSpec {
    std::size_t channels = 0;
    std::size_t n_mels = 0;
    std::size_t frames = 0;
    std::vector<double> data;

    MelSpec() = default;
    MelSpec(std::size_t c, std::size_t m, std::size_t t, double fill = 0.0)
        : channels(c), n_mels(m), frames(t), data(c * m * t, fill) {}

    double& at(std::size_t c, std::size_t m, std::size_t t) { return data[(c * n_mels + m) * frames + t]; }
    double at(std::size_t c, std::size_t m, std::size_t t) const { return data[(c * n_mels + m) * frames + t]; }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular Mel filterbank, n_mels x (n_fft/2 + 1), row-major.
///
/// Filters are evaluated at FFT bin centers; at 256 filters over 513 bins the
/// lowest filters are narrower than a bin and may be empty.
struct MelFilterbank {
    std::size_t n_mels = 0;
    std::size_t n_bins = 0;
    std::vector<double> weights;
    std::vector<double> center_hz;

    double at(std::size_t m, std::size_t k) const { return weights[m * n_bins + k]; }
};

inline MelFilterbank mel_filterbank(std::size_t n_fft, std::size_t n_mels, double fs_hz) {
    require(n_mels >= 1, "need at least one Mel filter");
    require(n_fft >= 2 && fs_hz > 0.0, "invalid FFT size or sample rate");
    const std::size_t n_bins = n_fft / 2 + 1;
    require(n_mels < n_bins, "more Mel filters than FFT bins");

    MelFilterbank fb;
    fb.n_mels = n_mels;
    fb.n_bins = n_bins;
    fb.weights.assign(n_mels * n_bins, 0.0);
    fb.center_hz.resize(n_mels);

    const double mel_max = hz_to_mel(fs_hz / 2.0);
    std::vector<double> edges(n_mels + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
        edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(n_mels + 1));

    for (std::size_t m = 0; m < n_mels; ++m) {
        const double lo = edges[m], c = edges[m + 1], hi = edges[m + 2];
        fb.center_hz[m] = c;
        for (std::size_t k = 0; k < n_bins; ++k) {
            const double f = static_cast<double>(k) * fs_hz / static_cast<double>(n_fft);
            const double w = std::min((f - lo) / (c - lo), (hi - f) / (hi - c));
            fb.weights[m * n_bins + k] = std::max(0.0, w);
        }
    }
    return fb;
}

inline std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
    return w;
}

/// Log-Mel power spectrogram of one channel, n_mels x frames, time innermost.
inline std::vector<double> log_mel_channel(std::span<const double> x, const MelParams& p,
                                           const MelFilterbank& fb) {
    const std::size_t n = x.size();
    const std::size_t pad = p.n_fft / 2;
    const std::size_t frames = frames_for(n, p.hop);
    const bool reflect = n > pad;
    auto sample = [&](std::ptrdiff_t j) -> double {
        const auto sn = static_cast<std::ptrdiff_t>(n);
        if (j >= 0 && j < sn) return x[static_cast<std::size_t>(j)];
        if (!reflect) return 0.0;
        if (j < 0) return x[static_cast<std::size_t>(-j)];
        return x[static_cast<std::size_t>(2 * (sn - 1) - j)];
    };

    const Fft fft(p.n_fft);
    const auto window = hann_window(p.n_fft);
    std::vector<std::complex<double>> buf(p.n_fft);
    std::vector<double> power(fb.n_bins);
    std::vector<double> out(fb.n_mels * frames);

    for (std::size_t t = 0; t < frames; ++t) {
        const auto start = static_cast<std::ptrdiff_t>(t * p.hop) - static_cast<std::ptrdiff_t>(pad);
        for (std::size_t i = 0; i < p.n_fft; ++i)
            buf[i] = {sample(start + static_cast<std::ptrdiff_t>(i)) * window[i], 0.0};
        fft.forward(buf);
        for (std::size_t k = 0; k < fb.n_bins; ++k) power[k] = std::norm(buf[k]);
        for (std::size_t m = 0; m < fb.n_mels; ++m) {
            const double* w = &fb.weights[m * fb.n_bins];
            double acc = 0.0;
            for (std::size_t k = 0; k < fb.n_bins; ++k) acc += w[k] * power[k];
            out[m * frames + t] = std::log(acc + p.log_eps);
        }
    }
    return out;
}

/// Two-channel (dry, wet) log-Mel spectrogram.
inline MelSpec mel_spectrogram(std::span<const double> dry, std::span<const double> wet,
                               const MelParams& p = {}) {
    require(dry.size() == wet.size(), "dry and wet audio must have equal length");
    const auto fb = mel_filterbank(p.n_fft, p.n_mels, p.fs_hz);
    MelSpec spec(2, p.n_mels, frames_for(dry.size(), p.hop));
    const auto a = log_mel_channel(dry, p, fb);
    const auto b = log_mel_channel(wet, p, fb);
    std::copy(a.begin(), a.end(), spec.data.begin());
    std::copy(b.begin(), b.end(), spec.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
    return spec;
}

struct MaskBands {
    std::size_t freq_start = 0, freq_width = 0;
    std::size_t time_start = 0, time_width = 0;
};

inline MaskBands draw_masks(std::size_t n_mels, std::size_t frames, double fraction, Rng& rng) {
    require(fraction >= 0.0 && fraction <= 1.0, "mask fraction must lie in [0, 1]");
    MaskBands m;
    const auto max_f = static_cast<std::int64_t>(std::floor(fraction * static_cast<double>(n_mels)));
    const auto max_t = static_cast<std::int64_t>(std::floor(fraction * static_cast<double>(frames)));
    m.freq_width = static_cast<std::size_t>(rng.integer(0, max_f));
    m.freq_start = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(n_mels - m.freq_width)));
    m.time_width = static_cast<std::size_t>(rng.integer(0, max_t));
    m.time_start = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(frames - m.time_width)));
    return m;
}

/// Sets the masked bands of every channel to the log floor.
inline MelSpec apply_masks(MelSpec spec, const MaskBands& m, double log_eps = 1e-7) {
    const double floor_value = std::log(log_eps);
    for (std::size_t c = 0; c < spec.channels; ++c) {
        for (std::size_t f = 0; f < spec.n_mels; ++f) {
            const bool fmask = f >= m.freq_start && f < m.freq_start + m.freq_width;
            for (std::size_t t = 0; t < spec.frames; ++t) {
                const bool tmask = t >= m.time_start && t < m.time_start + m.time_width;
                if (fmask || tmask) spec.at(c, f, t) = floor_value;
            }
        }
    }
    return spec;
}

inline MelSpec spec_augment(MelSpec spec, double fraction, Rng& rng, MaskBands* drawn = nullptr) {
    const auto m = draw_masks(spec.n_mels, spec.frames, fraction, rng);
    if (drawn) *drawn = m;
    return apply_masks(std::move(spec), m);
}

} // namespace modex
