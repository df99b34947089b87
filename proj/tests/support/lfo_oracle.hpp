#pragma once

// Independent LFO references: shapes written out from their definitions and
// helpers that take rendered signals apart cycle by cycle.

#include "modex/lfo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace oracle::lfo {

using namespace modex;

// Reference shapes written out from their definitions, one period on [0, 1].
// Saw shapes are evaluated from the left at the cycle boundary.
inline double ref_shape(LfoShape s, double th) {
    const double pi = std::numbers::pi;
    switch (s) {
    case LfoShape::cosine: return (1.0 + std::cos(2.0 * pi * th)) / 2.0;
    case LfoShape::triangle: return th < 0.5 ? 2.0 * th : 2.0 - 2.0 * th;
    case LfoShape::rect_cosine: return std::fabs(std::cos(pi * th));
    case LfoShape::inv_rect_cosine: return 1.0 - std::fabs(std::cos(pi * th));
    case LfoShape::saw: return th;
    case LfoShape::inv_saw: return 1.0 - th;
    }
    return -1.0;
}

// Sub-sample maxima positions (seconds) of values near 1 via parabolic fit.
inline std::vector<double> peak_times(const ModSignal& s, double min_value = 0.999) {
    std::vector<double> out;
    const auto& v = s.values;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        if (v[i] >= min_value && v[i] > v[i - 1] && v[i] >= v[i + 1]) {
            const double den = v[i - 1] - 2.0 * v[i] + v[i + 1];
            const double off = den != 0.0 ? 0.5 * (v[i - 1] - v[i + 1]) / den : 0.0;
            out.push_back((static_cast<double>(i) + off) / s.rate_hz);
        }
    }
    return out;
}

// Assigns each sample to a cycle (a sample exactly on a boundary closes the
// previous one) and returns the worst deviation of cycle k from shape `s`.
inline double cycle_deviation(const ModSignal& sig, double rate, std::size_t k, LfoShape s) {
    double worst = 0.0;
    for (std::size_t i = 0; i < sig.size(); ++i) {
        const double x = rate * static_cast<double>(i) / sig.rate_hz;
        double cycle = std::floor(x);
        double th = x - cycle;
        if (th == 0.0) {
            // Boundary samples take the left limit; the very first sample has no
            // previous cycle but follows the same f(0) = f(1^-) convention.
            if (cycle > 0.0) cycle -= 1.0;
            th = 1.0;
        }
        if (static_cast<std::size_t>(cycle) != k) continue;
        worst = std::max(worst, std::fabs(sig[i] - ref_shape(s, th)));
    }
    return worst;
}

} // namespace oracle::lfo
