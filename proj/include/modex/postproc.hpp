#pragma once

#include "modex/lfo.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace modex {

/// Centered moving average over order+1 taps with replicate padding. Odd orders
/// give an even window that leans one sample toward the past.
inline ModSignal smooth_ma(const ModSignal& s, int order) {
    require(order >= 0, "moving-average order must be non-negative");
    const auto window = static_cast<std::size_t>(order) + 1;
    require(s.size() >= window, "signal shorter than the moving-average window");
    const auto past = static_cast<std::ptrdiff_t>((order + 1) / 2);
    const auto future = static_cast<std::ptrdiff_t>(order / 2);
    const auto n = static_cast<std::ptrdiff_t>(s.size());

    ModSignal out = s;
    // Clamp guards against rounding pushing a mean of in-range values outside.
    const auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::ptrdiff_t k = i - past; k <= i + future; ++k)
            acc += s.values[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, n - 1))];
        out.values[static_cast<std::size_t>(i)] = std::clamp(acc / static_cast<double>(window), *lo, *hi);
    }
    return out;
}

enum class ExtremumKind { peak, trough };

struct Extremum {
    std::size_t index;
    ExtremumKind kind;
};

/// Interior local extrema. Plateaus report their midpoint; runs touching either
/// endpoint are excluded.
inline std::vector<Extremum> find_extrema(std::span<const double> v) {
    std::vector<Extremum> out;
    if (v.size() < 3) return out;
    struct Run {
        std::size_t first, last;
        double value;
    };
    std::vector<Run> runs;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!runs.empty() && v[i] == runs.back().value)
            runs.back().last = i;
        else
            runs.push_back({i, i, v[i]});
    }
    for (std::size_t r = 1; r + 1 < runs.size(); ++r) {
        const double prev = runs[r - 1].value, cur = runs[r].value, next = runs[r + 1].value;
        const std::size_t mid = (runs[r].first + runs[r].last) / 2;
        if (cur > prev && cur > next)
            out.push_back({mid, ExtremumKind::peak});
        else if (cur < prev && cur < next)
            out.push_back({mid, ExtremumKind::trough});
    }
    return out;
}

inline std::vector<Extremum> find_extrema(const ModSignal& s) { return find_extrema(std::span<const double>(s.values)); }

/// Rescales every section between consecutive extrema so troughs land on 0 and
/// peaks on 1. The partial sections before the first and after the last
/// extremum reuse the scale of their neighboring full section, so a signal
/// that starts mid-cycle is not forced to full range at its edges.
inline ModSignal stretch_unit_range(const ModSignal& s) {
    const auto ext = find_extrema(s);
    if (ext.empty()) throw ValidityError("cannot stretch a signal without extrema");
    const auto& v = s.values;
    ModSignal out = s;

    auto remap = [&](std::size_t from, std::size_t to, double lo, double hi) {
        for (std::size_t i = from; i <= to; ++i) {
            const double r = hi > lo ? (v[i] - lo) / (hi - lo) : 0.5;
            out.values[i] = std::clamp(r, 0.0, 1.0);
        }
    };
    auto section_scale = [&](std::size_t a, std::size_t b) {
        return std::pair{std::min(v[ext[a].index], v[ext[b].index]), std::max(v[ext[a].index], v[ext[b].index])};
    };

    if (ext.size() == 1) {
        // Only one extremum: each side is scaled between it and that side's far endpoint.
        const auto e = ext[0];
        const double ve = v[e.index];
        const bool peak = e.kind == ExtremumKind::peak;
        const double left_end = peak ? *std::min_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(e.index) + 1)
                                     : *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(e.index) + 1);
        const double right_end = peak ? *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(e.index), v.end())
                                      : *std::max_element(v.begin() + static_cast<std::ptrdiff_t>(e.index), v.end());
        remap(0, e.index, std::min(ve, left_end), std::max(ve, left_end));
        remap(e.index, v.size() - 1, std::min(ve, right_end), std::max(ve, right_end));
    } else {
        auto [lo0, hi0] = section_scale(0, 1);
        remap(0, ext[0].index, lo0, hi0);
        for (std::size_t k = 0; k + 1 < ext.size(); ++k) {
            auto [lo, hi] = section_scale(k, k + 1);
            remap(ext[k].index, ext[k + 1].index, lo, hi);
        }
        auto [lo1, hi1] = section_scale(ext.size() - 2, ext.size() - 1);
        remap(ext.back().index, v.size() - 1, lo1, hi1);
    }
    for (const auto& e : ext) out.values[e.index] = e.kind == ExtremumKind::peak ? 1.0 : 0.0;
    return out;
}

struct ValidityPolicy {
    double max_extrema_per_s = 7.0;
    double min_extrema_spacing_s = 0.12;
    bool require_extremum = true;
};

struct Validity {
    bool valid = true;
    std::string reason;
    explicit operator bool() const { return valid; }
};

inline Validity is_valid_mod(const ModSignal& s, const ValidityPolicy& policy = {}) {
    const auto ext = find_extrema(s);
    if (ext.empty()) {
        if (policy.require_extremum) return {false, "no extrema"};
        return {true, ""};
    }
    const double per_s = static_cast<double>(ext.size()) / s.duration_s();
    if (per_s > policy.max_extrema_per_s)
        return {false, "too many extrema (" + std::to_string(per_s) + " per second)"};
    std::optional<std::size_t> last_peak, last_trough;
    for (const auto& e : ext) {
        auto& last = e.kind == ExtremumKind::peak ? last_peak : last_trough;
        if (last) {
            const double gap = static_cast<double>(e.index - *last) / s.rate_hz;
            if (gap < policy.min_extrema_spacing_s)
                return {false, std::string(e.kind == ExtremumKind::peak ? "peaks" : "troughs") +
                                   " too close together (" + std::to_string(gap) + " s)"};
        }
        last = e.index;
    }
    return {true, ""};
}

/// Smooth, optionally stretch, then judge validity. Stretching is skipped when
/// the smoothed signal has no extrema.
struct PostprocResult {
    ModSignal signal;
    Validity validity;
};

inline PostprocResult postprocess(const ModSignal& s, int order = 4, bool stretch = true,
                                  const ValidityPolicy& policy = {}) {
    auto smoothed = smooth_ma(s, order);
    if (stretch && !find_extrema(smoothed).empty()) smoothed = stretch_unit_range(smoothed);
    auto validity = is_valid_mod(smoothed, policy);
    return {std::move(smoothed), std::move(validity)};
}

} // namespace modex
