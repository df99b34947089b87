#pragma once

#include "modex/core.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace modex {

namespace detail {

inline std::uint32_t read_u32(const std::string& b, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + static_cast<std::size_t>(i)])) << (8 * i);
    return v;
}

inline std::uint16_t read_u16(const std::string& b, std::size_t at) {
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                      (static_cast<unsigned char>(b[at + 1]) << 8));
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_u16(std::ostream& os, std::uint16_t v) {
    os.put(static_cast<char>(v & 0xffu));
    os.put(static_cast<char>(v >> 8));
}

} // namespace detail

/// Reads a mono WAV at `expected_rate` (16-bit PCM or 32-bit float).
inline Audio read_wav(const std::filesystem::path& path, double expected_rate = kSampleRate) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    const std::string b = ss.str();
    const auto where = path.string() + ": ";
    if (b.size() < 12 || b.compare(0, 4, "RIFF") != 0 || b.compare(8, 4, "WAVE") != 0)
        throw FormatError(where + "not a RIFF/WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    std::size_t pos = 12;
    while (pos + 8 <= b.size()) {
        const std::string id = b.substr(pos, 4);
        const std::uint32_t size = detail::read_u32(b, pos + 4);
        const std::size_t body = pos + 8;
        if (body + size > b.size() && id != "data") throw FormatError(where + "truncated '" + id + "' chunk");
        if (id == "fmt ") {
            if (size < 16) throw FormatError(where + "short fmt chunk");
            format = detail::read_u16(b, body);
            channels = detail::read_u16(b, body + 2);
            rate = detail::read_u32(b, body + 4);
            bits = detail::read_u16(b, body + 14);
            if (format == 0xFFFE) {
                if (size < 26) throw FormatError(where + "short extensible fmt chunk");
                format = detail::read_u16(b, body + 24);
            }
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) throw FormatError(where + "data chunk before fmt chunk");
            if (channels != 1)
                throw FormatError(where + "expected mono audio, found " + std::to_string(channels) + " channels");
            if (static_cast<double>(rate) != expected_rate)
                throw FormatError(where + "expected " + std::to_string(static_cast<long>(expected_rate)) +
                                  " Hz, found " + std::to_string(rate) + " Hz");
            const std::size_t avail = std::min<std::size_t>(size, b.size() - body);
            Audio out;
            if (format == 1 && bits == 16) {
                out.resize(avail / 2);
                for (std::size_t i = 0; i < out.size(); ++i)
                    out[i] = static_cast<double>(static_cast<std::int16_t>(detail::read_u16(b, body + 2 * i))) / 32768.0;
            } else if (format == 3 && bits == 32) {
                out.resize(avail / 4);
                for (std::size_t i = 0; i < out.size(); ++i)
                    out[i] = static_cast<double>(std::bit_cast<float>(detail::read_u32(b, body + 4 * i)));
            } else {
                throw FormatError(where + "unsupported encoding (format " + std::to_string(format) + ", " +
                                  std::to_string(bits) + " bits); need 16-bit PCM or 32-bit float");
            }
            return out;
        }
        pos = body + size + (size & 1u);
    }
    throw FormatError(where + "no data chunk");
}

/// Writes mono 32-bit float WAV.
inline void write_wav(const std::filesystem::path& path, std::span<const double> audio, double rate = kSampleRate) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    const auto data_bytes = static_cast<std::uint32_t>(audio.size() * 4);
    os.write("RIFF", 4);
    detail::put_u32(os, 36 + data_bytes);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    detail::put_u32(os, 16);
    detail::put_u16(os, 3);
    detail::put_u16(os, 1);
    detail::put_u32(os, static_cast<std::uint32_t>(rate));
    detail::put_u32(os, static_cast<std::uint32_t>(rate) * 4);
    detail::put_u16(os, 4);
    detail::put_u16(os, 32);
    os.write("data", 4);
    detail::put_u32(os, data_bytes);
    for (double v : audio) detail::put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    if (!os) throw FormatError("failed writing " + path.string());
}

} // namespace modex
