#pragma once

// Weights file layout:
//   u64 little-endian  header length H
//   H bytes            JSON header: model kind, config, and for every tensor
//                      its shape, dtype and [begin, end) byte range in the payload
//   payload            raw little-endian float32 values

#include "modex/mod_io.hpp"
#include "modex/nn/lfonet.hpp"
#include "modex/nn/lstm_fx.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

namespace modex::nn {

struct RawWeights {
    std::string model;
    nlohmann::ordered_json config;
    ParamSet<float> params;
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
}

template <class S>
void write_weights(const std::filesystem::path& path, const std::string& model, const nlohmann::ordered_json& config,
                   const ParamSet<S>& params) {
    nlohmann::ordered_json header;
    header["format"] = "modex-weights";
    header["version"] = 1;
    header["model"] = model;
    header["config"] = config;
    nlohmann::ordered_json tensors = nlohmann::ordered_json::object();
    std::size_t offset = 0;
    for (const auto& t : params.tensors) {
        const std::size_t nbytes = 4 * t.size();
        tensors[t.name] = {{"dtype", "float32"}, {"shape", t.shape}, {"offsets", {offset, offset + nbytes}}};
        offset += nbytes;
    }
    header["tensors"] = tensors;
    const std::string text = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    std::uint64_t len = text.size();
    for (int b = 0; b < 8; ++b) os.put(static_cast<char>((len >> (8 * b)) & 0xffu));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : params.tensors) {
        std::vector<float> f(t.data.size());
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(t.data[i]);
        modex::detail::write_f32_le(os, f);
    }
    if (!os) throw FormatError("failed writing " + path.string());
}

inline RawWeights read_weights(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    const std::string bytes = ss.str();
    if (bytes.size() < 8) throw FormatError(path.string() + ": truncated weights header");
    std::uint64_t len = 0;
    for (int b = 0; b < 8; ++b) len |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[static_cast<std::size_t>(b)])) << (8 * b);
    if (len > bytes.size() - 8) throw FormatError(path.string() + ": truncated weights header");

    nlohmann::ordered_json header;
    try {
        header = nlohmann::ordered_json::parse(bytes.substr(8, len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": malformed weights header: " + e.what());
    }
    if (header.value("format", "") != "modex-weights") throw FormatError(path.string() + ": not a modex weights file");

    RawWeights raw;
    try {
        raw.model = header.at("model").get<std::string>();
        raw.config = header.at("config");
        const std::size_t payload_start = 8 + len;
        const std::size_t payload_size = bytes.size() - payload_start;
        for (const auto& [name, desc] : header.at("tensors").items()) {
            if (desc.at("dtype").get<std::string>() != "float32")
                throw FormatError(path.string() + ": tensor '" + name + "' has unsupported dtype");
            Tensor<float> t(name, desc.at("shape").get<std::vector<std::size_t>>());
            const auto begin = desc.at("offsets").at(0).get<std::size_t>();
            const auto end = desc.at("offsets").at(1).get<std::size_t>();
            if (end < begin || end - begin != 4 * t.size())
                throw FormatError(path.string() + ": tensor '" + name + "' byte range does not match its shape");
            if (end > payload_size) throw FormatError(path.string() + ": truncated payload in tensor '" + name + "'");
            std::istringstream sub(bytes.substr(payload_start + begin, end - begin));
            t.data = modex::detail::read_f32_le(sub, t.size());
            raw.params.tensors.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": malformed weights header: " + e.what());
    }
    return raw;
}

/// Checks names and shapes against `expected`, in order.
template <class S>
void check_layout(const ParamSet<float>& got, const ParamSet<S>& expected) {
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const auto& e = expected[i];
        const auto* g = got.find(e.name);
        if (!g) throw FormatError("weights file is missing tensor '" + e.name + "'");
        if (g->shape != e.shape)
            throw FormatError("tensor '" + e.name + "' has shape " + shape_string(g->shape) + ", expected " +
                              shape_string(e.shape));
    }
    if (got.size() != expected.size()) throw FormatError("weights file has unexpected extra tensors");
}

inline nlohmann::ordered_json to_json(const LfoNetConfig& c) {
    return {{"n_blocks", c.n_blocks}, {"channels", c.channels}, {"kernel_freq", c.kernel_freq},
            {"kernel_time", c.kernel_time}, {"freq_pool", c.freq_pool}, {"dilation_base", c.dilation_base},
            {"in_channels", c.in_channels}, {"n_mels", c.n_mels}};
}

inline LfoNetConfig lfonet_config_from_json(const nlohmann::ordered_json& j) {
    LfoNetConfig c;
    c.n_blocks = j.at("n_blocks").get<std::size_t>();
    c.channels = j.at("channels").get<std::size_t>();
    c.kernel_freq = j.at("kernel_freq").get<std::size_t>();
    c.kernel_time = j.at("kernel_time").get<std::size_t>();
    c.freq_pool = j.at("freq_pool").get<std::size_t>();
    c.dilation_base = j.at("dilation_base").get<std::size_t>();
    c.in_channels = j.at("in_channels").get<std::size_t>();
    c.n_mels = j.at("n_mels").get<std::size_t>();
    return c;
}

inline nlohmann::ordered_json to_json(const LstmFxConfig& c) { return {{"hidden", c.hidden}, {"inputs", c.inputs}}; }

template <class S>
void write_lfonet(const std::filesystem::path& path, const LfoNet<S>& net) {
    write_weights(path, "lfonet", to_json(net.cfg), net.params);
}

template <class S>
void write_lstmfx(const std::filesystem::path& path, const LstmFx<S>& net) {
    write_weights(path, "lstm_fx", to_json(net.cfg), net.params);
}

namespace detail {

template <class S>
ParamSet<S> reorder_like(const ParamSet<float>& got, const ParamSet<S>& layout) {
    ParamSet<S> out = layout;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto* g = got.find(layout[i].name);
        for (std::size_t k = 0; k < g->size(); ++k) out[i][k] = static_cast<S>(g->data[k]);
    }
    return out;
}

} // namespace detail

/// Loads LFO-net weights. With `expected` set, the file must match that config.
template <class S>
LfoNet<S> read_lfonet(const std::filesystem::path& path, std::optional<LfoNetConfig> expected = std::nullopt) {
    const auto raw = read_weights(path);
    if (raw.model != "lfonet") throw FormatError(path.string() + ": expected an lfonet weights file, got " + raw.model);
    LfoNetConfig cfg;
    try {
        cfg = expected.value_or(lfonet_config_from_json(raw.config));
        cfg.validate();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad lfonet config: " + e.what());
    } catch (const ParameterError& e) {
        throw FormatError(path.string() + ": bad lfonet config: " + e.what());
    }
    const auto layout = lfonet_layout<S>(cfg);
    check_layout(raw.params, layout);
    return LfoNet<S>{cfg, detail::reorder_like(raw.params, layout)};
}

template <class S>
LstmFx<S> read_lstmfx(const std::filesystem::path& path, std::optional<LstmFxConfig> expected = std::nullopt) {
    const auto raw = read_weights(path);
    if (raw.model != "lstm_fx") throw FormatError(path.string() + ": expected an lstm_fx weights file, got " + raw.model);
    LstmFxConfig cfg;
    try {
        if (expected) {
            cfg = *expected;
        } else {
            cfg.hidden = raw.config.at("hidden").get<std::size_t>();
            cfg.inputs = raw.config.at("inputs").get<std::size_t>();
        }
        cfg.validate();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad lstm_fx config: " + e.what());
    } catch (const ParameterError& e) {
        throw FormatError(path.string() + ": bad lstm_fx config: " + e.what());
    }
    const auto layout = lstmfx_layout<S>(cfg);
    check_layout(raw.params, layout);
    return LstmFx<S>{cfg, detail::reorder_like(raw.params, layout)};
}

} // namespace modex::nn
