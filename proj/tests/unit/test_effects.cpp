#include "catch_amalgamated.hpp"

#include "modex/effects.hpp"
#include "modex/fft.hpp"
#include "modex/rng.hpp"

#include <cmath>
#include <complex>
#include <numbers>

using namespace modex;
using Catch::Approx;

namespace {

Audio sine(double freq, std::size_t n, double amp = 1.0, double fs = kSampleRate) {
    Audio x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(kTwoPi * freq * static_cast<double>(i) / fs);
    return x;
}

Audio noise(std::size_t n, std::uint64_t seed, double amp = 1.0) {
    Rng rng(seed);
    Audio x(n);
    for (auto& v : x) v = rng.uniform(-amp, amp);
    return x;
}

std::vector<double> magnitude(const Audio& h) {
    Fft fft(h.size());
    std::vector<std::complex<double>> a(h.begin(), h.end());
    fft.forward(a);
    std::vector<double> m(h.size() / 2 + 1);
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = std::abs(a[k]);
    return m;
}

double peak_abs(std::span<const double> x) {
    double p = 0.0;
    for (double v : x) p = std::max(p, std::fabs(v));
    return p;
}

} // namespace

TEST_CASE("all-pass coefficient", "[effects]") {
    REQUIRE(allpass1_coeff(kSampleRate / 4.0, kSampleRate) == Approx(0.0).margin(1e-15));
    REQUIRE(allpass1_coeff(1e-6, kSampleRate) == Approx(-1.0).margin(1e-9));
    const double t = std::tan(std::numbers::pi / 8.0);
    REQUIRE(allpass1_coeff(kSampleRate / 8.0, kSampleRate) == Approx((t - 1.0) / (t + 1.0)).margin(1e-15));
    REQUIRE(allpass1_coeff(kSampleRate / 8.0, kSampleRate) == Approx(-0.4142).margin(1e-4));
    REQUIRE_THROWS_AS(allpass1_coeff(0.0, kSampleRate), ParameterError);
    REQUIRE_THROWS_AS(allpass1_coeff(kSampleRate / 2.0, kSampleRate), ParameterError);
}

TEST_CASE("all-pass coefficient gives -90 degrees at the break frequency", "[effects]") {
    for (double fc : {100.0, 1000.0, 5000.0, 15000.0}) {
        const double a = allpass1_coeff(fc, kSampleRate);
        const std::complex<double> z1 = std::polar(1.0, -kTwoPi * fc / kSampleRate);
        const auto h = (a + z1) / (1.0 + a * z1);
        REQUIRE(std::abs(h) == Approx(1.0).margin(1e-12));
        REQUIRE(std::arg(h) == Approx(-std::numbers::pi / 2.0).margin(1e-9));
    }
}

TEST_CASE("phaser with zero depth passes the input through exactly", "[effects]") {
    PhaserParams p;
    p.depth = 0.0;
    p.mix = 0.6;
    p.feedback = 0.5;
    Phaser ph(p);
    const auto x = noise(4096, 1);
    const auto mod = noise(4096, 2, 0.5);
    Audio m(mod.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.5 + mod[i];
    REQUIRE(ph.process(x, m) == x);
}

TEST_CASE("phaser DC fixed point", "[effects]") {
    PhaserParams p;
    p.feedback = 0.25;
    for (double mod : {0.0, 0.3, 1.0}) {
        Phaser ph(p);
        const Audio x(44100, 1.0);
        const Audio m(x.size(), mod);
        const auto y = ph.process(x, m);
        REQUIRE(y.back() == Approx(1.0 + 1.0 / (1.0 - 0.25)).margin(1e-9));
        REQUIRE(y.back() == Approx(2.3333).margin(1e-4));
    }
}

TEST_CASE("six-stage phaser at constant break frequency has three notches", "[effects]") {
    PhaserParams p;
    p.feedback = 0.0;
    Phaser ph(p);
    Audio imp(1 << 16, 0.0);
    imp[0] = 1.0;
    const auto h = ph.process(imp, Audio(imp.size(), 0.5));
    const auto mag = magnitude(h);
    int notches = 0;
    for (std::size_t k = 1; k + 1 < mag.size(); ++k)
        if (mag[k] < mag[k - 1] && mag[k] <= mag[k + 1] && mag[k] < 0.05) ++notches;
    REQUIRE(notches == 3);
}

TEST_CASE("all-pass chain has unit magnitude", "[effects][property]") {
    for (double fc : {70.0, 440.0, 5000.0, 18000.0}) {
        PhaserParams p;
        p.center_freq_hz = fc;
        p.feedback = 0.0;
        Phaser ph(p);
        Audio imp(1 << 15, 0.0);
        imp[0] = 1.0;
        auto y = ph.process(imp, Audio(imp.size(), 0.5));
        for (std::size_t i = 0; i < y.size(); ++i) y[i] -= imp[i]; // keep the chain output only
        for (double m : magnitude(y)) REQUIRE(std::fabs(20.0 * std::log10(m)) < 0.1);
    }
}

TEST_CASE("phaser break frequency follows the log sweep and is clamped", "[effects]") {
    PhaserParams p;
    p.center_freq_hz = 1000.0;
    Phaser ph(p);
    REQUIRE(ph.break_frequency(0.5) == Approx(1000.0));
    REQUIRE(ph.break_frequency(1.0) == Approx(2000.0));
    REQUIRE(ph.break_frequency(0.0) == Approx(500.0));
    p.center_freq_hz = 18000.0;
    p.sweep_octaves = 2.0;
    REQUIRE(Phaser(p).break_frequency(1.0) == Approx(0.45 * kSampleRate));
    p.center_freq_hz = 70.0;
    REQUIRE(Phaser(p).break_frequency(0.0) == Approx(20.0));
}

TEST_CASE("phaser at constant break frequency is linear", "[effects][property]") {
    PhaserParams p;
    p.feedback = 0.6;
    p.mix = 0.7;
    p.depth = 0.8;
    const auto a = noise(8192, 3), b = noise(8192, 4);
    const Audio m(a.size(), 0.37);
    Audio ab(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) ab[i] = 2.0 * a[i] - 0.5 * b[i];
    const auto ya = Phaser(p).process(a, m), yb = Phaser(p).process(b, m), yab = Phaser(p).process(ab, m);
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(yab[i] == Approx(2.0 * ya[i] - 0.5 * yb[i]).margin(1e-9));
}

TEST_CASE("flanger impulse taps", "[effects]") {
    DelayModParams p;
    p.min_delay_ms = 1.0;
    p.width_ms = 0.0;
    p.feedback = 0.0;
    ModulatedDelay d(p);
    Audio imp(128, 0.0);
    imp[0] = 1.0;
    const auto y = d.process(imp, Audio(imp.size(), 0.0));
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double want = i == 0 ? 1.0 : i == 44 ? 0.9 : i == 45 ? 0.1 : 0.0;
        REQUIRE(y[i] == Approx(want).margin(1e-12));
    }
}

TEST_CASE("delay with zero depth passes the input through exactly", "[effects]") {
    DelayModParams p;
    p.depth = 0.0;
    p.mix = 0.3;
    p.feedback = 0.7;
    const auto x = noise(4096, 5);
    REQUIRE(ModulatedDelay(p).process(x, Audio(x.size(), 0.4)) == x);
}

TEST_CASE("comb null at half the inverse delay", "[effects]") {
    // A whole number of samples keeps interpolation out of the null.
    for (double tau_samples : {50.0, 100.0, 441.0}) {
        DelayModParams p;
        p.min_delay_ms = tau_samples * 1000.0 / kSampleRate;
        p.width_ms = 0.0;
        p.feedback = 0.0;
        const double f = kSampleRate / (2.0 * tau_samples);
        const auto x = sine(f, 20000);
        const auto y = ModulatedDelay(p).process(x, Audio(x.size(), 0.0));
        const double amp = peak_abs(std::span<const double>(y).subspan(5000));
        REQUIRE(amp < 0.01);
        REQUIRE(20.0 * std::log10(amp) < -40.0);
    }
}

TEST_CASE("delay line reads the sample being written when the delay is below one sample", "[effects]") {
    DelayModParams p;
    p.min_delay_ms = 0.0;
    p.width_ms = 0.0;
    p.feedback = 0.0;
    const auto x = noise(256, 6);
    const auto y = ModulatedDelay(p).process(x, Audio(x.size(), 0.0));
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(y[i] == Approx(2.0 * x[i]).margin(1e-15));
}

TEST_CASE("reset restores a fresh state", "[effects]") {
    const auto x = noise(3000, 7);
    const auto m = Audio(x.size(), 0.25);
    DelayModParams dp;
    dp.feedback = 0.5;
    ModulatedDelay d(dp);
    d.reset();
    const auto first = d.process(x, m);
    const auto second_no_reset = d.process(x, m);
    d.reset();
    const auto second = d.process(x, m);
    REQUIRE(first == second);
    REQUIRE(first != second_no_reset);

    PhaserParams pp;
    pp.feedback = 0.5;
    Phaser ph(pp);
    ph.reset();
    const auto a = ph.process(x, m);
    const auto b = ph.process(x, m);
    ph.reset();
    REQUIRE(ph.process(x, m) == a);
    REQUIRE(a != b);
}

TEST_CASE("block size does not change the output stream", "[effects][property]") {
    const auto x = noise(1 << 14, 8);
    Audio m(x.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.5 + 0.5 * std::sin(static_cast<double>(i) * 1e-3);

    auto blocked = [&](auto fx, std::size_t block) {
        Audio y(x.size());
        for (std::size_t s = 0; s < x.size(); s += block) {
            const auto n = std::min(block, x.size() - s);
            fx.process(std::span<const double>(x).subspan(s, n), std::span<const double>(m).subspan(s, n),
                       std::span<double>(y).subspan(s, n));
        }
        return y;
    };
    DelayModParams dp;
    dp.feedback = 0.6;
    REQUIRE(blocked(ModulatedDelay(dp), 64) == blocked(ModulatedDelay(dp), 4096));
    PhaserParams pp;
    pp.feedback = 0.6;
    REQUIRE(blocked(Phaser(pp), 64) == blocked(Phaser(pp), 4096));
}

TEST_CASE("flanger and chorus share one engine", "[effects]") {
    DelayModParams flanger{1.0, 4.0, 0.25, 1.0, 1.0};
    DelayModParams chorus{20.0, 10.0, 0.25, 1.0, 1.0};
    const auto x = noise(4096, 9);
    Audio m(x.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.5 + 0.5 * std::cos(static_cast<double>(i) * 2e-3);
    // Chorus settings moved into the flanger range yield the flanger output.
    chorus.min_delay_ms = flanger.min_delay_ms;
    chorus.width_ms = flanger.width_ms;
    REQUIRE(process_delay_mod(x, m, *std::make_unique<ModulatedDelay>(flanger)) ==
            process_delay_mod(x, m, *std::make_unique<ModulatedDelay>(chorus)));
}

TEST_CASE("feedback paths stay bounded over a million samples", "[effects][property]") {
    const std::size_t n = 1'000'000;
    const auto x = noise(n, 10);
    Audio m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = 0.5 + 0.5 * std::sin(kTwoPi * 2.7 * static_cast<double>(i) / kSampleRate);

    DelayModParams dp{0.5, 10.0, 0.7, 1.0, 1.0};
    const auto yd = ModulatedDelay(dp).process(x, m);
    REQUIRE(peak_abs(yd) < 1.0 + 1.0 / (1.0 - 0.7) + 1e-9);

    PhaserParams pp{1000.0, 0.7, 1.0, 1.0, 6, 2.0};
    const auto yp = Phaser(pp).process(x, m);
    REQUIRE(std::isfinite(peak_abs(yp)));
    REQUIRE(peak_abs(yp) < 100.0);
}

TEST_CASE("effect parameter and input validation", "[effects]") {
    PhaserParams bad;
    bad.n_stages = 5;
    REQUIRE_THROWS_AS(Phaser(bad), ParameterError);
    bad = {};
    bad.center_freq_hz = 50.0;
    REQUIRE_THROWS_AS(Phaser(bad), ParameterError);
    bad = {};
    bad.feedback = 1.0;
    REQUIRE_THROWS_AS(Phaser(bad), ParameterError);

    DelayModParams dp;
    dp.min_delay_ms = 90.0;
    REQUIRE_THROWS_AS(ModulatedDelay(dp), ParameterError);
    REQUIRE_NOTHROW(ModulatedDelay(dp, kSampleRate, 8192));
    dp = {};
    dp.feedback = -1.0;
    REQUIRE_THROWS_AS(ModulatedDelay(dp), ParameterError);

    ModulatedDelay d{DelayModParams{}};
    REQUIRE_THROWS_AS(d.process(Audio(10, 0.0), Audio(9, 0.0)), ParameterError);
    // Modulation far outside [0, 1] pushes the read past the buffer.
    REQUIRE_THROWS_AS(d.process(Audio(10, 0.0), Audio(10, 1e4)), ParameterError);
    Audio with_nan(10, 0.0);
    with_nan[3] = std::nan("");
    REQUIRE_THROWS_AS(d.process(with_nan, Audio(10, 0.0)), NumericError);
    Phaser ph{PhaserParams{}};
    REQUIRE_THROWS_AS(ph.process(with_nan, Audio(10, 0.0)), NumericError);
}
