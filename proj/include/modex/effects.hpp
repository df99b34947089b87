#pragma once

#include "modex/core.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace modex {

/// Coefficient `a` of the first-order all-pass H(z) = (a + z^-1) / (1 + a z^-1),
/// whose phase passes -90 degrees at fc.
inline double allpass1_coeff(double fc_hz, double fs_hz) {
    require(fs_hz > 0.0, "sample rate must be positive");
    require(fc_hz > 0.0 && fc_hz < 0.5 * fs_hz, "all-pass break frequency must lie in (0, fs/2)");
    const double t = std::tan(std::numbers::pi * fc_hz / fs_hz);
    return (t - 1.0) / (t + 1.0);
}

struct PhaserParams {
    double center_freq_hz = 440.0;
    double feedback = 0.25;
    double depth = 1.0;
    double mix = 1.0;
    int n_stages = 6;
    double sweep_octaves = 1.0;

    void validate() const {
        require(center_freq_hz >= 70.0 && center_freq_hz <= 18000.0, "phaser center frequency must lie in [70, 18000] Hz");
        require(std::abs(feedback) < 1.0, "phaser feedback must satisfy |feedback| < 1");
        require(depth >= 0.0 && depth <= 1.0, "phaser depth must lie in [0, 1]");
        require(mix >= 0.0 && mix <= 1.0, "phaser mix must lie in [0, 1]");
        require(n_stages > 0 && n_stages % 2 == 0, "phaser stage count must be a positive even number");
        require(sweep_octaves > 0.0, "phaser sweep must be positive");
    }
};

struct DelayModParams {
    double min_delay_ms = 1.0;
    double width_ms = 4.0;
    double feedback = 0.25;
    double depth = 1.0;
    double mix = 1.0;

    void validate() const {
        require(min_delay_ms >= 0.0, "minimum delay must be non-negative");
        require(width_ms >= 0.0, "delay width must be non-negative");
        require(std::abs(feedback) < 1.0, "delay feedback must satisfy |feedback| < 1");
        require(depth >= 0.0 && depth <= 1.0, "delay depth must lie in [0, 1]");
        require(mix >= 0.0 && mix <= 1.0, "delay mix must lie in [0, 1]");
    }
};

namespace detail {

inline void check_block(std::span<const double> x, std::span<const double> mod) {
    require(x.size() == mod.size(), "modulation length must equal block length");
}

inline void check_finite(std::span<const double> x) {
    for (double v : x)
        if (!std::isfinite(v)) throw NumericError("non-finite input sample");
}

} // namespace detail

/// Cascade of first-order all-passes with swept break frequency, fed back and
/// mixed against the dry path.
class Phaser {
public:
    explicit Phaser(PhaserParams p, double fs_hz = kSampleRate) : p_(p), fs_(fs_hz) {
        p_.validate();
        require(fs_hz > 0.0, "sample rate must be positive");
        x1_.assign(static_cast<std::size_t>(p_.n_stages), 0.0);
        y1_.assign(static_cast<std::size_t>(p_.n_stages), 0.0);
    }

    const PhaserParams& params() const { return p_; }

    double break_frequency(double mod) const {
        const double fc = p_.center_freq_hz * std::exp2(p_.sweep_octaves * (2.0 * mod - 1.0));
        return std::clamp(fc, 20.0, 0.45 * fs_);
    }

    void process(std::span<const double> x, std::span<const double> mod, std::span<double> y) {
        detail::check_block(x, mod);
        require(y.size() == x.size(), "output block size mismatch");
        detail::check_finite(x);
        const auto stages = x1_.size();
        for (std::size_t n = 0; n < x.size(); ++n) {
            const double a = allpass1_coeff(break_frequency(mod[n]), fs_);
            double u = x[n] + p_.feedback * fb_;
            for (std::size_t s = 0; s < stages; ++s) {
                const double out = a * u + x1_[s] - a * y1_[s];
                x1_[s] = u;
                y1_[s] = out;
                u = out;
            }
            fb_ = u;
            y[n] = x[n] + p_.mix * p_.depth * u; // (1-mix) x + mix (x + depth u)
        }
    }

    Audio process(std::span<const double> x, std::span<const double> mod) {
        Audio y(x.size());
        process(x, mod, y);
        return y;
    }

    void reset() {
        std::fill(x1_.begin(), x1_.end(), 0.0);
        std::fill(y1_.begin(), y1_.end(), 0.0);
        fb_ = 0.0;
    }

private:
    PhaserParams p_;
    double fs_;
    std::vector<double> x1_, y1_;
    double fb_ = 0.0;
};

/// Single-voice modulated delay line shared by flanger and chorus.
///
/// The delay line stores x(n) + feedback * w(n); w(n) is read at a fractional
/// offset of tau(n) samples with linear interpolation.
class ModulatedDelay {
public:
    static constexpr std::size_t kDefaultCapacity = 4096;

    explicit ModulatedDelay(DelayModParams p, double fs_hz = kSampleRate,
                            std::size_t capacity = kDefaultCapacity)
        : p_(p), fs_(fs_hz), buf_(capacity, 0.0) {
        p_.validate();
        require(fs_hz > 0.0, "sample rate must be positive");
        require(capacity >= 4, "delay buffer capacity too small");
        const double max_tau = (p_.min_delay_ms + p_.width_ms) * fs_ / 1000.0;
        require(max_tau <= static_cast<double>(capacity) - 2.0,
                "delay range exceeds buffer capacity (" + std::to_string(max_tau) + " samples)");
    }

    const DelayModParams& params() const { return p_; }

    double delay_samples(double mod) const { return (p_.min_delay_ms + p_.width_ms * mod) * fs_ / 1000.0; }

    void process(std::span<const double> x, std::span<const double> mod, std::span<double> y) {
        detail::check_block(x, mod);
        require(y.size() == x.size(), "output block size mismatch");
        detail::check_finite(x);
        const std::size_t cap = buf_.size();
        for (std::size_t n = 0; n < x.size(); ++n) {
            const double tau = delay_samples(mod[n]);
            if (!(tau >= 0.0) || tau > static_cast<double>(cap) - 2.0)
                throw ParameterError("delay of " + std::to_string(tau) + " samples exceeds buffer capacity");
            const auto whole = static_cast<std::size_t>(tau);
            const double f = tau - static_cast<double>(whole);
            double w;
            if (whole == 0) {
                // The read straddles the sample being written this step; solve
                // w = (1-f)(x + fb w) + f b1 for w.
                const double b1 = buf_[(pos_ + cap - 1) % cap];
                w = ((1.0 - f) * x[n] + f * b1) / (1.0 - (1.0 - f) * p_.feedback);
            } else {
                const double b0 = buf_[(pos_ + cap - whole) % cap];
                const double b1 = buf_[(pos_ + cap - whole - 1) % cap];
                w = (1.0 - f) * b0 + f * b1;
            }
            buf_[pos_] = x[n] + p_.feedback * w;
            pos_ = (pos_ + 1) % cap;
            y[n] = x[n] + p_.mix * p_.depth * w;
        }
    }

    Audio process(std::span<const double> x, std::span<const double> mod) {
        Audio y(x.size());
        process(x, mod, y);
        return y;
    }

    void reset() {
        std::fill(buf_.begin(), buf_.end(), 0.0);
        pos_ = 0;
    }

private:
    DelayModParams p_;
    double fs_;
    std::vector<double> buf_;
    std::size_t pos_ = 0;
};

inline Audio process_phaser(std::span<const double> x, std::span<const double> mod, Phaser& state) {
    return state.process(x, mod);
}

inline Audio process_delay_mod(std::span<const double> x, std::span<const double> mod, ModulatedDelay& state) {
    return state.process(x, mod);
}

} // namespace modex
