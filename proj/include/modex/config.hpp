#pragma once

// Config file schema (JSON). Every section and key is optional; unknown keys
// are rejected.
//
// {
//   "dataset":   { "source_dir", "out_dir", "chunk_s", "fs", "configuration": "fixed"|"varying",
//                  "effects": ["phaser","flanger","chorus"], "family", "count", "seed",
//                  "silence_threshold_dbfs", "peak_normalize", "threads" },
//   "train":     { "block_len", "warmup_len", "seed",
//                  "optimizer": { "lr", "beta1", "beta2", "eps", "weight_decay" } },
//   "lfonet":    { "n_blocks", "channels", "kernel_freq", "kernel_time", "freq_pool",
//                  "dilation_base", "in_channels", "n_mels" },
//   "lstm":      { "hidden" }
// }

#include "modex/dataset.hpp"
#include "modex/nn/lfonet.hpp"
#include "modex/nn/lstm_fx.hpp"
#include "modex/nn/optim.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <initializer_list>

namespace modex {

struct AppConfig {
    GenConfig dataset;
    nn::TrainConfig train;
    nn::LfoNetConfig lfonet;
    nn::LstmFxConfig lstm;
};

namespace detail {

inline void check_keys(const nlohmann::json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) throw ParameterError("config: '" + std::string(where) + "' must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ParameterError("config: unknown key '" + key + "' in '" + std::string(where) + "'");
    }
}

template <class T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace detail

inline AppConfig parse_config(const nlohmann::json& j) {
    using detail::get_if;
    AppConfig c;
    try {
        detail::check_keys(j, "<root>", {"dataset", "train", "lfonet", "lstm"});
        if (j.contains("dataset")) {
            const auto& d = j["dataset"];
            detail::check_keys(d, "dataset",
                               {"source_dir", "out_dir", "chunk_s", "fs", "configuration", "effects", "family", "count",
                                "seed", "silence_threshold_dbfs", "peak_normalize", "threads"});
            auto& g = c.dataset;
            if (d.contains("source_dir")) g.source_dir = d["source_dir"].get<std::string>();
            if (d.contains("out_dir")) g.out_dir = d["out_dir"].get<std::string>();
            get_if(d, "chunk_s", g.chunk_s);
            get_if(d, "fs", g.fs);
            if (d.contains("configuration")) g.configuration = ranges_from_string(d["configuration"].get<std::string>());
            if (d.contains("effects")) {
                g.effects.clear();
                for (const auto& e : d["effects"]) g.effects.push_back(effect_from_string(e.get<std::string>()));
            }
            if (d.contains("family")) g.family = family_from_string(d["family"].get<std::string>());
            get_if(d, "count", g.count);
            get_if(d, "seed", g.seed);
            get_if(d, "silence_threshold_dbfs", g.silence_threshold_dbfs);
            get_if(d, "peak_normalize", g.peak_normalize);
            get_if(d, "threads", g.threads);
            g.validate();
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            detail::check_keys(t, "train", {"block_len", "warmup_len", "seed", "optimizer"});
            get_if(t, "block_len", c.train.block_len);
            get_if(t, "warmup_len", c.train.warmup_len);
            get_if(t, "seed", c.train.seed);
            if (t.contains("optimizer")) {
                const auto& o = t["optimizer"];
                detail::check_keys(o, "train.optimizer", {"lr", "beta1", "beta2", "eps", "weight_decay"});
                get_if(o, "lr", c.train.optimizer.lr);
                get_if(o, "beta1", c.train.optimizer.beta1);
                get_if(o, "beta2", c.train.optimizer.beta2);
                get_if(o, "eps", c.train.optimizer.eps);
                get_if(o, "weight_decay", c.train.optimizer.weight_decay);
            }
            c.train.validate();
        }
        if (j.contains("lfonet")) {
            const auto& n = j["lfonet"];
            detail::check_keys(n, "lfonet",
                               {"n_blocks", "channels", "kernel_freq", "kernel_time", "freq_pool", "dilation_base",
                                "in_channels", "n_mels"});
            auto& l = c.lfonet;
            get_if(n, "n_blocks", l.n_blocks);
            get_if(n, "channels", l.channels);
            get_if(n, "kernel_freq", l.kernel_freq);
            get_if(n, "kernel_time", l.kernel_time);
            get_if(n, "freq_pool", l.freq_pool);
            get_if(n, "dilation_base", l.dilation_base);
            get_if(n, "in_channels", l.in_channels);
            get_if(n, "n_mels", l.n_mels);
            l.validate();
        }
        if (j.contains("lstm")) {
            detail::check_keys(j["lstm"], "lstm", {"hidden"});
            get_if(j["lstm"], "hidden", c.lstm.hidden);
            c.lstm.validate();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("config: ") + e.what());
    }
    return c;
}

inline AppConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("config " + path.string() + ": " + e.what());
    }
    return parse_config(j);
}

} // namespace modex
