#pragma once

#include "modex/core.hpp"
#include "modex/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace modex {

enum class LfoShape { cosine, triangle, rect_cosine, inv_rect_cosine, saw, inv_saw };

inline constexpr std::array<LfoShape, 6> kAllShapes = {
    LfoShape::cosine, LfoShape::triangle, LfoShape::rect_cosine,
    LfoShape::inv_rect_cosine, LfoShape::saw, LfoShape::inv_saw};

inline constexpr std::array<LfoShape, 4> kSymmetricShapes = {
    LfoShape::cosine, LfoShape::triangle, LfoShape::rect_cosine, LfoShape::inv_rect_cosine};

inline std::string_view to_string(LfoShape s) {
    switch (s) {
    case LfoShape::cosine: return "cosine";
    case LfoShape::triangle: return "triangle";
    case LfoShape::rect_cosine: return "rect_cosine";
    case LfoShape::inv_rect_cosine: return "inv_rect_cosine";
    case LfoShape::saw: return "saw";
    case LfoShape::inv_saw: return "inv_saw";
    }
    return "?";
}

inline LfoShape shape_from_string(std::string_view name) {
    for (auto s : kAllShapes)
        if (to_string(s) == name) return s;
    throw ParameterError("unknown LFO shape '" + std::string(name) + "'");
}

/// Unipolar value of one period of `shape` at cycle position theta in [0, 1).
///
/// theta = 0 is a cycle boundary. Saw shapes are left-continuous there: the
/// value at the reset is the limit from the previous cycle, so every shape
/// satisfies f(0) = f(1^-).
inline double shape_value(LfoShape shape, double theta) {
    switch (shape) {
    case LfoShape::cosine: return 0.5 + 0.5 * std::cos(kTwoPi * theta);
    case LfoShape::triangle: return 1.0 - std::abs(2.0 * theta - 1.0);
    case LfoShape::rect_cosine: return std::abs(std::cos(std::numbers::pi * theta));
    case LfoShape::inv_rect_cosine: return 1.0 - std::abs(std::cos(std::numbers::pi * theta));
    case LfoShape::saw: return theta == 0.0 ? 1.0 : theta;
    case LfoShape::inv_saw: return theta == 0.0 ? 0.0 : 1.0 - theta;
    }
    return 0.0;
}

struct LfoConfig {
    LfoShape shape = LfoShape::cosine;
    double rate_hz = 1.0;
    double phase = 0.0; // radians, wrapped into [0, 2pi)
    double duration_s = 2.0;

    void validate() const {
        require(rate_hz > 0.0 && std::isfinite(rate_hz), "LFO rate must be positive");
        require(duration_s > 0.0 && std::isfinite(duration_s), "LFO duration must be positive");
        require(std::isfinite(phase), "LFO phase must be finite");
    }

    double wrapped_phase() const {
        double p = std::fmod(phase, kTwoPi);
        if (p < 0.0) p += kTwoPi;
        return p;
    }
};

/// Unipolar modulation signal sampled at `rate_hz` (frames or samples per second).
struct ModSignal {
    std::vector<double> values;
    double rate_hz = 1.0;
    std::optional<LfoConfig> meta;

    std::size_t size() const { return values.size(); }
    double duration_s() const { return static_cast<double>(values.size()) / rate_hz; }
    double operator[](std::size_t i) const { return values[i]; }

    bool in_unit_range() const {
        return std::all_of(values.begin(), values.end(),
                           [](double v) { return v >= 0.0 && v <= 1.0; });
    }
};

namespace detail {

inline void check_out_rate(double out_rate_hz) {
    require(out_rate_hz > 0.0 && std::isfinite(out_rate_hz), "output rate must be positive");
}

inline double frac(double x) { return x - std::floor(x); }

} // namespace detail

/// Renders a periodic LFO: value(t) = shape(frac(rate*t + phase/2pi)).
inline ModSignal render_periodic(const LfoConfig& config, double out_rate_hz) {
    config.validate();
    detail::check_out_rate(out_rate_hz);
    const std::size_t n = samples_for_duration(config.duration_s, out_rate_hz);
    const double offset = config.wrapped_phase() / kTwoPi;
    ModSignal out{std::vector<double>(n), out_rate_hz, config};
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / out_rate_hz;
        out.values[k] = shape_value(config.shape, detail::frac(config.rate_hz * t + offset));
    }
    return out;
}

/// Quasiperiodic LFO: each cycle of the base shape is stretched in time by a
/// factor drawn uniformly from [stretch_lo, stretch_hi]. The first cycle starts
/// at the configured phase, so it is a partial cycle unless phase is zero.
inline ModSignal make_quasiperiodic(const LfoConfig& config, double stretch_lo, double stretch_hi,
                                    Rng& rng, double out_rate_hz,
                                    std::vector<double>* stretches = nullptr) {
    config.validate();
    detail::check_out_rate(out_rate_hz);
    require(stretch_lo >= 1.0, "stretch_lo must be >= 1");
    require(stretch_lo <= stretch_hi, "stretch_lo must not exceed stretch_hi");
    if (stretches) stretches->clear();

    if (stretch_lo == 1.0 && stretch_hi == 1.0) {
        // Degenerate band: every cycle has its nominal length.
        auto out = render_periodic(config, out_rate_hz);
        if (stretches)
            stretches->assign(samples_for_duration(config.duration_s, config.rate_hz) + 1, 1.0);
        return out;
    }

    const std::size_t n = samples_for_duration(config.duration_s, out_rate_hz);
    const double theta0 = config.wrapped_phase() / kTwoPi;
    ModSignal out{std::vector<double>(n), out_rate_hz, config};

    // Cycle k spans [start, end) in seconds; the first cycle covers theta in [theta0, 1).
    std::size_t k = 0;
    double stretch = rng.uniform(stretch_lo, stretch_hi);
    if (stretches) stretches->push_back(stretch);
    double start = -theta0 * stretch / config.rate_hz;
    double end = start + stretch / config.rate_hz;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / out_rate_hz;
        while (t > end) {
            ++k;
            stretch = rng.uniform(stretch_lo, stretch_hi);
            if (stretches) stretches->push_back(stretch);
            start = end;
            end = start + stretch / config.rate_hz;
        }
        // t == end is the left-continuous cycle boundary: theta = 1^- maps to shape(0).
        double theta = std::max(0.0, (t - start) * config.rate_hz / stretch);
        if (theta >= 1.0) theta = 0.0;
        out.values[i] = shape_value(config.shape, theta);
    }
    return out;
}

/// Combined LFO: every cycle of a zero-phase periodic LFO at `rate_hz` takes its
/// shape independently and uniformly from `pool`.
inline ModSignal make_combined(std::span<const LfoShape> pool, double rate_hz, Rng& rng,
                               double out_rate_hz, double duration_s,
                               std::vector<LfoShape>* cycle_shapes = nullptr) {
    require(!pool.empty(), "combined LFO shape pool must not be empty");
    LfoConfig cfg{pool.front(), rate_hz, 0.0, duration_s};
    cfg.validate();
    detail::check_out_rate(out_rate_hz);

    const std::size_t n = samples_for_duration(duration_s, out_rate_hz);
    const std::size_t n_cycles = std::max<std::size_t>(1, samples_for_duration(duration_s, rate_hz));
    std::vector<LfoShape> shapes(n_cycles);
    for (auto& s : shapes) s = pool[rng.index(pool.size())];

    ModSignal out{std::vector<double>(n), out_rate_hz, cfg};
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / out_rate_hz;
        const double x = rate_hz * t + 0.0;
        const double cycle = std::floor(x);
        const double theta = x - cycle;
        auto k = std::min(static_cast<std::size_t>(cycle), n_cycles - 1);
        // A sample landing exactly on a boundary closes the previous cycle.
        if (theta == 0.0 && k > 0) --k;
        out.values[i] = shape_value(shapes[k], theta);
    }
    if (cycle_shapes) *cycle_shapes = std::move(shapes);
    return out;
}

/// Segment index per sample, incrementing after every local extremum (change of
/// monotone direction). Flat runs inherit the current segment.
inline std::vector<std::size_t> monotone_segments(std::span<const double> v) {
    std::vector<std::size_t> seg(v.size(), 0);
    std::size_t id = 0;
    int dir = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        const double d = v[i] - v[i - 1];
        const int nd = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
        if (nd != 0 && dir != 0 && nd != dir) ++id;
        if (nd != 0) dir = nd;
        seg[i] = id;
    }
    // The extremum sample itself closes the previous segment; its value is 0 or 1
    // for valid inputs so the choice of exponent there is immaterial.
    return seg;
}

/// Distorts a unipolar LFO by raising each monotone segment to its own exponent,
/// drawn log-uniformly from [exp_lo, exp_hi].
inline ModSignal make_distorted(const ModSignal& base, double exp_lo, double exp_hi, Rng& rng,
                                std::vector<double>* exponents = nullptr) {
    require(exp_lo > 0.0 && exp_hi > 0.0, "distortion exponents must be positive");
    require(exp_lo <= exp_hi, "exp_lo must not exceed exp_hi");
    require(base.in_unit_range(), "distortion base must lie in [0, 1]");

    const auto seg = monotone_segments(base.values);
    const std::size_t n_seg = seg.empty() ? 0 : seg.back() + 1;
    std::vector<double> e(n_seg);
    for (auto& x : e) x = (exp_lo == exp_hi) ? exp_lo : rng.log_uniform(exp_lo, exp_hi);

    ModSignal out = base;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = std::pow(base.values[i], e[seg[i]]);
    if (exponents) *exponents = std::move(e);
    return out;
}

/// Linear-interpolation resampling. Output sample j sits at time j / target_rate;
/// by default the output stops at the last input instant. With `length` set the
/// output has exactly that many samples and holds the final value past the end.
inline ModSignal resample_mod(const ModSignal& signal, double target_rate_hz,
                              std::optional<std::size_t> length = std::nullopt) {
    require(!signal.values.empty(), "cannot resample an empty signal");
    detail::check_out_rate(target_rate_hz);
    const auto& v = signal.values;
    const std::size_t last = v.size() - 1;
    const double ratio = signal.rate_hz / target_rate_hz;

    std::size_t n = length.value_or(0);
    if (!length) {
        const double span = static_cast<double>(last) / ratio;
        n = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
    }
    ModSignal out{std::vector<double>(n), target_rate_hz, signal.meta};
    for (std::size_t j = 0; j < n; ++j) {
        double pos = static_cast<double>(j) * signal.rate_hz / target_rate_hz;
        const double nearest = std::round(pos);
        if (std::abs(pos - nearest) < 1e-9) pos = nearest;
        if (pos >= static_cast<double>(last)) {
            out.values[j] = v[last];
            continue;
        }
        const auto i = static_cast<std::size_t>(pos);
        const double f = pos - static_cast<double>(i);
        out.values[j] = f == 0.0 ? v[i] : v[i] + f * (v[i + 1] - v[i]);
    }
    return out;
}

} // namespace modex
