#include "catch_amalgamated.hpp"

#include "modex/features.hpp"
#include "modex/metrics.hpp"
#include "modex/postproc.hpp"

#include <cmath>

using namespace modex;
using Catch::Approx;

namespace {

ModSignal sig(std::vector<double> v, double rate = frame_rate()) { return {std::move(v), rate, std::nullopt}; }

ModSignal noisy_cosine(std::uint64_t seed, double rate_hz = 1.3, double noise = 0.05) {
    Rng rng(seed);
    auto s = render_periodic({LfoShape::cosine, rate_hz, rng.uniform(0.0, kTwoPi), 2.0}, frame_rate());
    for (auto& v : s.values) v = std::clamp(0.1 + 0.8 * v + rng.uniform(-noise, noise), 0.0, 1.0);
    return s;
}

} // namespace

TEST_CASE("moving average examples", "[postproc]") {
    const auto c = smooth_ma(sig(std::vector<double>(50, 0.3)), 4);
    for (double v : c.values) REQUIRE(v == Approx(0.3).margin(1e-15));

    std::vector<double> imp(21, 0.0);
    imp[10] = 1.0;
    const auto s = smooth_ma(sig(imp), 4);
    for (std::size_t i = 0; i < imp.size(); ++i) REQUIRE(s[i] == Approx(i >= 8 && i <= 12 ? 0.2 : 0.0).margin(1e-15));

    std::vector<double> ramp(101);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i) / 100.0;
    const auto r = smooth_ma(sig(ramp), 4);
    for (std::size_t i = 2; i + 2 < ramp.size(); ++i) REQUIRE(r[i] == Approx(ramp[i]).margin(1e-12));
}

TEST_CASE("odd moving-average orders lean toward the past", "[postproc]") {
    std::vector<double> v{0.0, 0.2, 0.4, 0.9, 0.1, 0.5};
    const auto s = smooth_ma(sig(v), 1);
    for (std::size_t i = 1; i < v.size(); ++i) REQUIRE(s[i] == Approx((v[i - 1] + v[i]) / 2.0));
    const auto s3 = smooth_ma(sig(v), 3);
    REQUIRE(s3[2] == Approx((v[0] + v[1] + v[2] + v[3]) / 4.0));
    REQUIRE(smooth_ma(sig(v), 0).values == v);
}

TEST_CASE("moving average rejects short signals and negative orders", "[postproc]") {
    REQUIRE_THROWS_AS(smooth_ma(sig({0.1, 0.2, 0.3}), 4), ParameterError);
    REQUIRE_THROWS_AS(smooth_ma(sig({0.1, 0.2, 0.3}), -1), ParameterError);
}

TEST_CASE("moving average never widens the value range", "[postproc][property]") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        std::vector<double> v(100);
        for (auto& x : v) x = rng.uniform(0.2, 0.7);
        for (int order : {1, 2, 4, 8}) {
            const auto s = smooth_ma(sig(v), order);
            REQUIRE(*std::min_element(s.values.begin(), s.values.end()) >= *std::min_element(v.begin(), v.end()));
            REQUIRE(*std::max_element(s.values.begin(), s.values.end()) <= *std::max_element(v.begin(), v.end()));
        }
    }
}

TEST_CASE("extrema of a 1 Hz triangle", "[postproc]") {
    const auto tri = render_periodic({LfoShape::triangle, 1.0, 0.0, 2.0}, frame_rate());
    REQUIRE(tri.size() == 345);
    const auto ext = find_extrema(tri);
    REQUIRE(ext.size() == 3);
    REQUIRE(ext[0].kind == ExtremumKind::peak);
    REQUIRE(std::abs(static_cast<double>(ext[0].index) - 86.0) <= 1.0);
    REQUIRE(ext[1].kind == ExtremumKind::trough);
    REQUIRE(std::abs(static_cast<double>(ext[1].index) - 172.0) <= 1.0);
    REQUIRE(ext[2].kind == ExtremumKind::peak);
    REQUIRE(std::abs(static_cast<double>(ext[2].index) - 259.0) <= 1.0);
}

TEST_CASE("monotone and constant signals have no extrema", "[postproc]") {
    std::vector<double> ramp(50);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i) / 49.0;
    REQUIRE(find_extrema(sig(ramp)).empty());
    REQUIRE(find_extrema(sig(std::vector<double>(50, 0.4))).empty());
    REQUIRE(find_extrema(sig({0.1, 0.5})).empty());
}

TEST_CASE("plateau extrema report their midpoint", "[postproc]") {
    const auto ext = find_extrema(sig({0.0, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.0, 0.2}));
    REQUIRE(ext.size() == 2);
    REQUIRE(ext[0].index == 4);
    REQUIRE(ext[0].kind == ExtremumKind::peak);
    REQUIRE(ext[1].index == 8);
    // Endpoint plateaus are not extrema.
    REQUIRE(find_extrema(sig({1.0, 1.0, 0.5, 0.0, 0.5})).size() == 1);
}

TEST_CASE("extrema kinds alternate", "[postproc][property]") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        std::vector<double> v(200);
        for (auto& x : v) x = static_cast<double>(rng.integer(0, 5)) / 5.0; // many ties
        const auto ext = find_extrema(sig(v));
        for (std::size_t i = 1; i < ext.size(); ++i) {
            REQUIRE(ext[i].kind != ext[i - 1].kind);
            REQUIRE(ext[i].index > ext[i - 1].index);
        }
    }
}

TEST_CASE("stretching a full-range triangle changes nothing", "[postproc]") {
    const auto tri = render_periodic({LfoShape::triangle, 1.0, 0.0, 2.0}, 100.0);
    const auto s = stretch_unit_range(tri);
    for (std::size_t i = 0; i < tri.size(); ++i) REQUIRE(s[i] == Approx(tri[i]).margin(1e-12));
}

TEST_CASE("stretching a compressed triangle restores full range", "[postproc]") {
    const auto tri = render_periodic({LfoShape::triangle, 1.0, 0.0, 2.0}, 100.0);
    ModSignal squeezed = tri;
    for (auto& v : squeezed.values) v = 0.2 + 0.6 * v;
    const auto s = stretch_unit_range(squeezed);
    for (std::size_t i = 0; i < tri.size(); ++i) REQUIRE(s[i] == Approx(tri[i]).margin(1e-12));
}

TEST_CASE("after smoothing and stretching every extremum is exactly 0 or 1", "[postproc][property]") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto s = stretch_unit_range(smooth_ma(noisy_cosine(seed), 4));
        REQUIRE(s.in_unit_range());
        for (const auto& e : find_extrema(s)) REQUIRE(s[e.index] == (e.kind == ExtremumKind::peak ? 1.0 : 0.0));
    }
}

TEST_CASE("stretching is idempotent and keeps sections monotone", "[postproc][property]") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto smoothed = smooth_ma(noisy_cosine(seed, 0.5 + 0.05 * static_cast<double>(seed)), 4);
        const auto once = stretch_unit_range(smoothed);
        const auto twice = stretch_unit_range(once);
        for (std::size_t i = 0; i < once.size(); ++i) REQUIRE(twice[i] == Approx(once[i]).margin(1e-12));
        for (std::size_t i = 1; i < once.size(); ++i) {
            const double a = smoothed[i] - smoothed[i - 1], b = once[i] - once[i - 1];
            REQUIRE(a * b >= 0.0);
        }
    }
    REQUIRE_THROWS_AS(stretch_unit_range(sig(std::vector<double>(20, 0.5))), ValidityError);
}

TEST_CASE("validity rules", "[postproc]") {
    const auto slow = render_periodic({LfoShape::triangle, 2.0, 0.0, 2.0}, frame_rate());
    REQUIRE(is_valid_mod(slow).valid);
    const auto fast = render_periodic({LfoShape::triangle, 10.0, 0.0, 2.0}, frame_rate());
    const auto v = is_valid_mod(fast);
    REQUIRE_FALSE(v.valid);
    REQUIRE(v.reason.find("too many extrema") != std::string::npos);
    const auto flat = is_valid_mod(sig(std::vector<double>(345, 0.5)));
    REQUIRE_FALSE(flat.valid);
    REQUIRE(flat.reason == "no extrema");
    REQUIRE(is_valid_mod(sig(std::vector<double>(345, 0.5)), {7.0, 0.12, false}).valid);

    // Two peaks 0.05 s apart in an otherwise slow signal.
    auto close = render_periodic({LfoShape::cosine, 0.5, 0.0, 4.0}, 100.0);
    close.values[100] = 1.0;
    close.values[101] = 0.9;
    close.values[102] = 0.99;
    close.values[103] = 0.9;
    close.values[104] = 0.99;
    close.values[105] = 0.9;
    const auto c = is_valid_mod(close);
    REQUIRE_FALSE(c.valid);
    REQUIRE(c.reason.find("too close") != std::string::npos);
}

TEST_CASE("clean periodic LFOs in the training range pass the pipeline", "[postproc][property]") {
    Rng rng(4);
    for (auto shape : kAllShapes)
        for (int trial = 0; trial < 20; ++trial) {
            const LfoConfig cfg{shape, rng.uniform(0.5, 3.0), rng.uniform(0.0, kTwoPi), 2.0 + rng.uniform(0.0, 2.0)};
            const auto r = postprocess(render_periodic(cfg, frame_rate()));
            INFO(to_string(shape) << " rate " << cfg.rate_hz << " phase " << cfg.phase);
            REQUIRE(r.validity.valid);
        }
}

TEST_CASE("the pipeline barely distorts clean 1 Hz shapes", "[postproc]") {
    for (auto shape : kAllShapes) {
        Rng rng(static_cast<std::uint64_t>(shape));
        for (int trial = 0; trial < 10; ++trial) {
            const auto s = render_periodic({shape, 1.0, rng.uniform(0.0, kTwoPi), 2.0}, frame_rate());
            const auto p = postprocess(s);
            INFO(to_string(shape));
            REQUIRE(l1_error(s.values, p.signal.values) < 0.02);
        }
    }
}
