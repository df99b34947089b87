#pragma once

#include "modex/effects.hpp"
#include "modex/features.hpp"
#include "modex/lfo.hpp"
#include "modex/mod_io.hpp"
#include "modex/wav.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <variant>

namespace modex {

enum class EffectKind { phaser, flanger, chorus };
enum class ParamRanges { fixed, varying };
enum class LfoFamily { periodic, quasiperiodic, combined_all, combined_symmetric, distorted };

inline std::string_view to_string(EffectKind e) {
    switch (e) {
    case EffectKind::phaser: return "phaser";
    case EffectKind::flanger: return "flanger";
    case EffectKind::chorus: return "chorus";
    }
    return "?";
}

inline std::string_view to_string(ParamRanges r) { return r == ParamRanges::fixed ? "fixed" : "varying"; }

inline std::string_view to_string(LfoFamily f) {
    switch (f) {
    case LfoFamily::periodic: return "periodic";
    case LfoFamily::quasiperiodic: return "quasiperiodic";
    case LfoFamily::combined_all: return "combined-all";
    case LfoFamily::combined_symmetric: return "combined-symmetric";
    case LfoFamily::distorted: return "distorted";
    }
    return "?";
}

template <class E, std::size_t N>
E enum_from_string(std::string_view name, const std::array<E, N>& all, const char* what) {
    for (auto e : all)
        if (to_string(e) == name) return e;
    throw ParameterError("unknown " + std::string(what) + " '" + std::string(name) + "'");
}

inline EffectKind effect_from_string(std::string_view s) {
    return enum_from_string(s, std::array{EffectKind::phaser, EffectKind::flanger, EffectKind::chorus}, "effect");
}
inline ParamRanges ranges_from_string(std::string_view s) {
    return enum_from_string(s, std::array{ParamRanges::fixed, ParamRanges::varying}, "configuration");
}
inline LfoFamily family_from_string(std::string_view s) {
    return enum_from_string(s, std::array{LfoFamily::periodic, LfoFamily::quasiperiodic, LfoFamily::combined_all,
                                          LfoFamily::combined_symmetric, LfoFamily::distorted},
                            "LFO family");
}

using EffectParams = std::variant<PhaserParams, DelayModParams>;

/// Effect parameters from the fixed/varying evaluation rows.
inline EffectParams draw_effect_params(EffectKind effect, ParamRanges ranges, Rng& rng) {
    const bool fixed = ranges == ParamRanges::fixed;
    if (effect == EffectKind::phaser) {
        PhaserParams p;
        p.center_freq_hz = fixed ? 440.0 : rng.uniform(70.0, 18000.0);
        p.feedback = fixed ? 0.25 : rng.uniform(0.0, 0.7);
        p.depth = fixed ? 1.0 : rng.uniform(0.25, 1.0);
        p.mix = 1.0;
        return p;
    }
    DelayModParams p;
    if (effect == EffectKind::flanger) {
        p.min_delay_ms = fixed ? 1.0 : rng.uniform(0.0, 1.0);
        p.width_ms = fixed ? 4.0 : rng.uniform(2.5, 10.0);
    } else {
        p.min_delay_ms = fixed ? 20.0 : rng.uniform(11.0, 30.0);
        p.width_ms = fixed ? 10.0 : rng.uniform(2.5, 10.0);
    }
    p.feedback = fixed ? 0.25 : rng.uniform(0.0, 0.7);
    p.depth = fixed ? 1.0 : rng.uniform(0.25, 1.0);
    p.mix = 1.0;
    return p;
}

inline Audio apply_effect(const EffectParams& params, std::span<const double> x, std::span<const double> mod,
                          double fs = kSampleRate) {
    return std::visit(
        [&](const auto& p) -> Audio {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, PhaserParams>) {
                Phaser fx(p, fs);
                return fx.process(x, mod);
            } else {
                ModulatedDelay fx(p, fs);
                return fx.process(x, mod);
            }
        },
        params);
}

inline nlohmann::json to_json(const EffectParams& params) {
    return std::visit(
        [](const auto& p) -> nlohmann::json {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, PhaserParams>) {
                return {{"center_freq_hz", p.center_freq_hz}, {"feedback", p.feedback}, {"depth", p.depth},
                        {"mix", p.mix}, {"n_stages", p.n_stages}, {"sweep_octaves", p.sweep_octaves}};
            } else {
                return {{"min_delay_ms", p.min_delay_ms}, {"width_ms", p.width_ms}, {"feedback", p.feedback},
                        {"depth", p.depth}, {"mix", p.mix}};
            }
        },
        params);
}

inline double rms_dbfs(std::span<const double> x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    const double rms = x.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(x.size()));
    return rms > 0.0 ? 20.0 * std::log10(rms) : -std::numeric_limits<double>::infinity();
}

/// A uniformly placed chunk whose RMS exceeds `threshold_dbfs`.
inline Audio chunk_nonsilent(std::span<const double> audio, std::size_t chunk_len, double threshold_dbfs, Rng& rng,
                             std::size_t* offset = nullptr, int max_tries = 100) {
    require(chunk_len > 0 && audio.size() >= chunk_len, "audio shorter than the requested chunk");
    for (int attempt = 0; attempt < max_tries; ++attempt) {
        const auto start = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(audio.size() - chunk_len)));
        const auto chunk = audio.subspan(start, chunk_len);
        if (rms_dbfs(chunk) > threshold_dbfs) {
            if (offset) *offset = start;
            return Audio(chunk.begin(), chunk.end());
        }
    }
    throw DataError("no non-silent chunk found after " + std::to_string(max_tries) + " attempts");
}

/// Scales to unit peak. All-zero input is returned unchanged and flagged.
inline Audio peak_normalize(std::span<const double> x, bool* was_silent = nullptr) {
    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    if (was_silent) *was_silent = peak == 0.0;
    Audio out(x.begin(), x.end());
    if (peak == 0.0) return out;
    for (auto& v : out) v /= peak;
    return out;
}

struct GenConfig {
    std::filesystem::path source_dir;
    std::filesystem::path out_dir = "dataset";
    double chunk_s = 2.0;
    double fs = kSampleRate;
    ParamRanges configuration = ParamRanges::fixed;
    std::vector<EffectKind> effects = {EffectKind::phaser, EffectKind::flanger, EffectKind::chorus};
    LfoFamily family = LfoFamily::periodic;
    std::size_t count = 16;
    std::uint64_t seed = 0;
    double silence_threshold_dbfs = -48.0;
    bool peak_normalize = false;
    std::size_t threads = 1;

    void validate() const {
        require(count > 0, "dataset count must be positive");
        require(chunk_s > 0.0, "chunk length must be positive");
        require(fs > 0.0, "sample rate must be positive");
        require(!effects.empty(), "at least one effect must be enabled");
        require(threads >= 1, "thread count must be positive");
    }
};

struct SourceFile {
    std::string name;
    Audio audio;
};

/// Every readable mono WAV in `dir` at least `min_len` samples long, sorted by name.
inline std::vector<SourceFile> load_sources(const std::filesystem::path& dir, std::size_t min_len, double fs) {
    if (!std::filesystem::is_directory(dir)) throw DataError("source directory not found: " + dir.string());
    std::vector<std::filesystem::path> paths;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (e.is_regular_file() && ext == ".wav") paths.push_back(e.path());
    }
    std::sort(paths.begin(), paths.end());
    std::vector<SourceFile> out;
    for (const auto& p : paths) {
        auto audio = read_wav(p, fs);
        if (audio.size() >= min_len) out.push_back({p.filename().string(), std::move(audio)});
    }
    if (out.empty()) throw DataError("no usable WAV files (>= " + std::to_string(min_len) + " samples) in " + dir.string());
    return out;
}

struct DatasetItem {
    std::string id;
    std::size_t index = 0;
    Audio dry, wet;
    ModSignal lfo_audio;  // audio rate, drives the effect
    ModSignal lfo;        // frame rate, supervision target
    EffectKind effect = EffectKind::flanger;
    EffectParams params;
    nlohmann::json record;
};

inline std::string item_id(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "item%06zu", index);
    return buf;
}

/// Draws the LFO for one item at audio rate and records every drawn value.
inline ModSignal draw_lfo(LfoFamily family, bool cosine_only, double duration_s, double fs, Rng& rng,
                          nlohmann::json& rec) {
    LfoConfig cfg;
    cfg.rate_hz = rng.uniform(0.5, 3.0);
    cfg.phase = rng.uniform(0.0, kTwoPi);
    cfg.shape = cosine_only ? LfoShape::cosine : kAllShapes[rng.index(kAllShapes.size())];
    cfg.duration_s = duration_s;
    rec["family"] = std::string(to_string(family));
    rec["rate_hz"] = cfg.rate_hz;
    rec["phase"] = cfg.phase;
    switch (family) {
    case LfoFamily::periodic:
        rec["shape"] = std::string(to_string(cfg.shape));
        return render_periodic(cfg, fs);
    case LfoFamily::quasiperiodic: {
        std::vector<double> stretches;
        auto s = make_quasiperiodic(cfg, 1.10, 4.0 / 3.0, rng, fs, &stretches);
        rec["shape"] = std::string(to_string(cfg.shape));
        rec["stretches"] = stretches;
        return s;
    }
    case LfoFamily::combined_all:
    case LfoFamily::combined_symmetric: {
        std::vector<LfoShape> shapes;
        ModSignal s = family == LfoFamily::combined_all
                          ? make_combined(kAllShapes, cfg.rate_hz, rng, fs, duration_s, &shapes)
                          : make_combined(kSymmetricShapes, cfg.rate_hz, rng, fs, duration_s, &shapes);
        rec["phase"] = 0.0;
        rec["shape"] = nullptr;
        std::vector<std::string> names;
        for (auto sh : shapes) names.emplace_back(to_string(sh));
        rec["cycle_shapes"] = names;
        s.meta.reset(); // no single shape describes the signal
        return s;
    }
    case LfoFamily::distorted: {
        std::vector<double> exps;
        auto s = make_distorted(render_periodic(cfg, fs), 1.0 / 3.0, 3.0, rng, &exps);
        rec["shape"] = std::string(to_string(cfg.shape));
        rec["exponents"] = exps;
        return s;
    }
    }
    return {};
}

/// Builds item `index` in memory. Each item draws from its own stream derived
/// from (seed, index), so items can be produced in any order or in parallel.
inline DatasetItem make_item(const GenConfig& cfg, const std::vector<SourceFile>& sources, std::size_t index) {
    Rng rng = Rng::derive(cfg.seed, index);
    const auto chunk_len = static_cast<std::size_t>(std::llround(cfg.chunk_s * cfg.fs));
    DatasetItem item;
    item.index = index;
    item.id = item_id(index);

    const auto& src = sources[rng.index(sources.size())];
    std::size_t offset = 0;
    item.dry = chunk_nonsilent(src.audio, chunk_len, cfg.silence_threshold_dbfs, rng, &offset);
    if (cfg.peak_normalize) item.dry = peak_normalize(item.dry);

    item.effect = cfg.effects[rng.index(cfg.effects.size())];
    nlohmann::json lfo_rec;
    item.lfo_audio = draw_lfo(cfg.family, item.effect == EffectKind::phaser, cfg.chunk_s, cfg.fs, rng, lfo_rec);
    item.lfo_audio.values.resize(chunk_len, item.lfo_audio.values.empty() ? 0.0 : item.lfo_audio.values.back());
    item.params = draw_effect_params(item.effect, cfg.configuration, rng);
    item.wet = apply_effect(item.params, item.dry, item.lfo_audio.values, cfg.fs);

    const double fr = cfg.fs / 256.0;
    item.lfo = resample_mod(item.lfo_audio, fr, frames_for(chunk_len));
    item.lfo.meta = item.lfo_audio.meta;

    item.record = {{"id", item.id},
                   {"index", index},
                   {"seed", cfg.seed},
                   {"source", src.name},
                   {"offset", offset},
                   {"n_samples", chunk_len},
                   {"n_frames", item.lfo.size()},
                   {"frame_rate_hz", fr},
                   {"effect", std::string(to_string(item.effect))},
                   {"configuration", std::string(to_string(cfg.configuration))},
                   {"peak_normalized", cfg.peak_normalize},
                   {"lfo", lfo_rec},
                   {"params", to_json(item.params)},
                   {"files", {{"dry", item.id + "_dry.wav"}, {"wet", item.id + "_wet.wav"}, {"lfo", item.id + "_lfo.f32"}}}};
    return item;
}

inline void write_item(const std::filesystem::path& out_dir, const DatasetItem& item, double fs) {
    write_wav(out_dir / (item.id + "_dry.wav"), item.dry, fs);
    write_wav(out_dir / (item.id + "_wet.wav"), item.wet, fs);
    write_mod_signal(out_dir / (item.id + "_lfo"), item.lfo);
}

struct GenSummary {
    std::size_t written = 0;
    std::size_t failed = 0;
    std::filesystem::path manifest;
};

/// Generates `cfg.count` items into `cfg.out_dir` plus `manifest.jsonl`, one
/// JSON object per item in index order. Failed items are recorded with an
/// "error" field and generation continues.
inline GenSummary gen_dataset(const GenConfig& cfg) {
    cfg.validate();
    const auto chunk_len = static_cast<std::size_t>(std::llround(cfg.chunk_s * cfg.fs));
    const auto sources = load_sources(cfg.source_dir, chunk_len, cfg.fs);
    std::filesystem::create_directories(cfg.out_dir);

    std::vector<std::string> lines(cfg.count);
    std::vector<char> ok(cfg.count, 0);
    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t i = first; i < cfg.count; i += stride) {
            try {
                const auto item = make_item(cfg, sources, i);
                write_item(cfg.out_dir, item, cfg.fs);
                lines[i] = item.record.dump();
                ok[i] = 1;
            } catch (const std::exception& e) {
                lines[i] = nlohmann::json{{"id", item_id(i)}, {"index", i}, {"seed", cfg.seed}, {"error", e.what()}}.dump();
            }
        }
    };
    const std::size_t n_threads = std::min(cfg.threads, cfg.count);
    if (n_threads <= 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work, t, n_threads);
    }

    GenSummary summary;
    summary.manifest = cfg.out_dir / "manifest.jsonl";
    std::ofstream os(summary.manifest);
    if (!os) throw FormatError("cannot write " + summary.manifest.string());
    for (std::size_t i = 0; i < cfg.count; ++i) {
        os << lines[i] << '\n';
        (ok[i] ? summary.written : summary.failed) += 1;
    }
    return summary;
}

struct ManifestEntry {
    nlohmann::json record;
    std::filesystem::path dry, wet, lfo;
};

/// Successful entries of a dataset manifest, with file paths resolved.
inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.jsonl");
    if (!is) throw FormatError("cannot open " + (dir / "manifest.jsonl").string());
    std::vector<ManifestEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("manifest line " + std::to_string(lineno) + ": " + e.what());
        }
        if (j.contains("error")) continue;
        const auto& f = j.at("files");
        out.push_back({j, dir / f.at("dry").get<std::string>(), dir / f.at("wet").get<std::string>(),
                       dir / f.at("lfo").get<std::string>()});
    }
    return out;
}

} // namespace modex
