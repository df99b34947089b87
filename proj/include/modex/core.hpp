#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace modex {

// Error taxonomy shared by every module.
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Audio = std::vector<double>;

inline constexpr double kSampleRate = 44100.0;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Number of samples covering `duration_s` at `rate_hz`, rounding up so that
// 2 s at the spectrogram frame rate gives the same count as frames_for(88200).
inline std::size_t samples_for_duration(double duration_s, double rate_hz) {
    const double x = duration_s * rate_hz;
    return static_cast<std::size_t>(std::ceil(x - 1e-9));
}

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ParameterError(what);
}

} // namespace modex
