#pragma once

// ModSignal file format: `<stem>.f32` holds the values as raw little-endian
// float32, `<stem>.json` is a sidecar with rate and LFO metadata.

#include "modex/lfo.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace modex {

namespace detail {

inline std::uint32_t to_le(std::uint32_t x) {
    if constexpr (std::endian::native == std::endian::big)
        return ((x & 0xffu) << 24) | ((x & 0xff00u) << 8) | ((x >> 8) & 0xff00u) | (x >> 24);
    return x;
}

inline void write_f32_le(std::ostream& os, std::span<const float> data) {
    for (float f : data) {
        const std::uint32_t u = to_le(std::bit_cast<std::uint32_t>(f));
        os.write(reinterpret_cast<const char*>(&u), 4);
    }
}

inline std::vector<float> read_f32_le(std::istream& is, std::size_t count) {
    std::vector<float> out(count);
    for (auto& f : out) {
        std::uint32_t u = 0;
        if (!is.read(reinterpret_cast<char*>(&u), 4)) throw FormatError("truncated float32 payload");
        f = std::bit_cast<float>(to_le(u));
    }
    return out;
}

inline std::filesystem::path with_ext(std::filesystem::path stem, const char* ext) {
    if (stem.extension() == ".f32" || stem.extension() == ".json") stem.replace_extension();
    stem += ext;
    return stem;
}

} // namespace detail

inline void write_mod_signal(const std::filesystem::path& stem, const ModSignal& s) {
    std::vector<float> f(s.values.begin(), s.values.end());
    {
        std::ofstream os(detail::with_ext(stem, ".f32"), std::ios::binary);
        if (!os) throw FormatError("cannot open " + detail::with_ext(stem, ".f32").string());
        detail::write_f32_le(os, f);
    }
    nlohmann::json j;
    j["rate_hz"] = s.rate_hz;
    j["n"] = s.values.size();
    if (s.meta) {
        j["shape"] = std::string(to_string(s.meta->shape));
        j["lfo_rate_hz"] = s.meta->rate_hz;
        j["phase"] = s.meta->phase;
    } else {
        j["shape"] = nullptr;
        j["lfo_rate_hz"] = nullptr;
        j["phase"] = nullptr;
    }
    std::ofstream js(detail::with_ext(stem, ".json"));
    if (!js) throw FormatError("cannot open " + detail::with_ext(stem, ".json").string());
    js << j.dump(2) << '\n';
}

inline ModSignal read_mod_signal(const std::filesystem::path& stem) {
    const auto json_path = detail::with_ext(stem, ".json");
    std::ifstream js(json_path);
    if (!js) throw FormatError("cannot open " + json_path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(js);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(json_path.string() + ": " + e.what());
    }
    if (!j.contains("rate_hz") || !j.contains("n")) throw FormatError(json_path.string() + ": missing rate_hz or n");

    ModSignal s;
    s.rate_hz = j["rate_hz"].get<double>();
    const auto n = j["n"].get<std::size_t>();
    std::ifstream is(detail::with_ext(stem, ".f32"), std::ios::binary);
    if (!is) throw FormatError("cannot open " + detail::with_ext(stem, ".f32").string());
    const auto f = detail::read_f32_le(is, n);
    s.values.assign(f.begin(), f.end());
    if (j.contains("shape") && j["shape"].is_string()) {
        LfoConfig cfg;
        cfg.shape = shape_from_string(j["shape"].get<std::string>());
        if (j.contains("lfo_rate_hz") && j["lfo_rate_hz"].is_number()) cfg.rate_hz = j["lfo_rate_hz"].get<double>();
        if (j.contains("phase") && j["phase"].is_number()) cfg.phase = j["phase"].get<double>();
        cfg.duration_s = s.duration_s();
        s.meta = cfg;
    }
    return s;
}

} // namespace modex
