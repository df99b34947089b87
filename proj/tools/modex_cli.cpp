// Command-line front end for the modex library.
//
// Every subcommand writes its files into --out (default "."), takes its random
// stream from --seed and reads optional defaults from --config.

#include "modex/modex.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace modex;
using nlohmann::json;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::string config;
    std::string out = ".";
    CLI::Option* seed_opt = nullptr;
    CLI::Option* out_opt = nullptr;

    AppConfig load() const {
        auto cfg = config.empty() ? AppConfig{} : load_config(config);
        if (seed_opt->count()) {
            cfg.dataset.seed = seed;
            cfg.train.seed = seed;
        }
        return cfg;
    }

    fs::path out_dir() const {
        fs::create_directories(out);
        return out;
    }
};

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

ModSignal synth_lfo(LfoFamily family, const LfoConfig& cfg, double rate, Rng& rng) {
    switch (family) {
    case LfoFamily::periodic: return render_periodic(cfg, rate);
    case LfoFamily::quasiperiodic: return make_quasiperiodic(cfg, 1.10, 4.0 / 3.0, rng, rate);
    case LfoFamily::combined_all: return make_combined(kAllShapes, cfg.rate_hz, rng, rate, cfg.duration_s);
    case LfoFamily::combined_symmetric: return make_combined(kSymmetricShapes, cfg.rate_hz, rng, rate, cfg.duration_s);
    case LfoFamily::distorted: return make_distorted(render_periodic(cfg, rate), 1.0 / 3.0, 3.0, rng);
    }
    return {};
}

json summarize(const ModSignal& s) {
    const auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
    const auto v = is_valid_mod(s);
    return {{"n", s.size()}, {"rate_hz", s.rate_hz}, {"duration_s", s.duration_s()},
            {"min", s.values.empty() ? 0.0 : *lo}, {"max", s.values.empty() ? 0.0 : *hi},
            {"extrema", find_extrema(s).size()}, {"valid", v.valid}, {"reason", v.reason}};
}

/// Stretches or trims a modulation signal onto `n` samples at `rate`.
ModSignal fit_to(const ModSignal& s, double rate, std::size_t n) {
    return s.rate_hz == rate && s.size() == n ? s : resample_mod(s, rate, n);
}

void write_losses(const fs::path& path, const std::vector<double>& losses) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write " + path.string());
    os << "step,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < losses.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, losses[i]);
        os << buf;
    }
}

std::vector<nn::LfoNetExample> load_examples(const fs::path& dir, const nn::LfoNetConfig& net_cfg,
                                             std::vector<ManifestEntry>* entries = nullptr) {
    const auto items = read_manifest(dir);
    if (items.empty()) throw DataError("dataset " + dir.string() + " has no usable items");
    MelParams mp;
    mp.n_mels = net_cfg.n_mels;
    std::vector<nn::LfoNetExample> out;
    for (const auto& it : items) {
        const auto dry = read_wav(it.dry);
        const auto wet = read_wav(it.wet);
        auto spec = mel_spectrogram(dry, wet, mp);
        const auto lfo = fit_to(read_mod_signal(it.lfo), frame_rate(mp), spec.frames);
        out.push_back({std::move(spec), lfo.values});
    }
    if (entries) *entries = items;
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"modex: LFO synthesis, modulation effects, LFO extraction and effect modelling"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    g.seed_opt = app.add_option("--seed", g.seed, "Random seed");
    app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
    g.out_opt = app.add_option("--out", g.out, "Output directory");
    // Reject a bad config file up front, whichever subcommand runs.
    app.parse_complete_callback([&] {
        if (!g.config.empty()) (void)load_config(g.config);
    });

    // render
    auto* render = app.add_subcommand("render", "Apply one effect to a WAV file");
    std::string r_in, r_effect = "flanger", r_lfo, r_shape = "cosine";
    double r_rate = 1.0, r_phase = 0.0;
    PhaserParams r_ph;
    DelayModParams r_dm;
    render->add_option("--in", r_in, "Dry mono WAV")->required()->check(CLI::ExistingFile);
    render->add_option("--effect", r_effect, "phaser, flanger or chorus");
    render->add_option("--lfo", r_lfo, "Modulation signal stem (.f32 + .json); overrides --shape/--rate/--phase");
    render->add_option("--shape", r_shape, "LFO shape");
    render->add_option("--rate", r_rate, "LFO rate in Hz");
    render->add_option("--phase", r_phase, "LFO phase in radians");
    render->add_option("--center", r_ph.center_freq_hz, "Phaser center frequency (Hz)");
    render->add_option("--stages", r_ph.n_stages, "Phaser all-pass stages");
    render->add_option("--sweep", r_ph.sweep_octaves, "Phaser sweep half-width (octaves)");
    double r_feedback = 0.25, r_depth = 1.0, r_mix = 1.0;
    render->add_option("--feedback", r_feedback, "Feedback");
    render->add_option("--depth", r_depth, "Modulation depth");
    render->add_option("--mix", r_mix, "Wet mix");
    auto* o_min = render->add_option("--min-delay", r_dm.min_delay_ms, "Minimum delay (ms)");
    auto* o_width = render->add_option("--width", r_dm.width_ms, "Delay sweep width (ms)");
    render->callback([&] {
        const auto effect = effect_from_string(r_effect);
        const auto dry = read_wav(r_in);
        ModSignal lfo;
        if (!r_lfo.empty()) {
            lfo = fit_to(read_mod_signal(r_lfo), kSampleRate, dry.size());
        } else {
            LfoConfig c{shape_from_string(r_shape), r_rate, r_phase, static_cast<double>(dry.size()) / kSampleRate};
            lfo = render_periodic(c, kSampleRate);
            lfo.values.resize(dry.size(), lfo.values.back());
        }
        EffectParams params;
        if (effect == EffectKind::phaser) {
            r_ph.feedback = r_feedback, r_ph.depth = r_depth, r_ph.mix = r_mix;
            params = r_ph;
        } else {
            if (effect == EffectKind::chorus) {
                if (!o_min->count()) r_dm.min_delay_ms = 20.0;
                if (!o_width->count()) r_dm.width_ms = 10.0;
            }
            r_dm.feedback = r_feedback, r_dm.depth = r_depth, r_dm.mix = r_mix;
            params = r_dm;
        }
        const auto wet = apply_effect(params, dry, lfo.values);
        const auto path = g.out_dir() / "wet.wav";
        write_wav(path, wet);
        print({{"effect", r_effect}, {"params", to_json(params)}, {"wet", path.string()}});
    });

    // lfo
    auto* lfo = app.add_subcommand("lfo", "Synthesize or inspect a modulation signal");
    std::string l_shape = "cosine", l_family = "periodic", l_name = "lfo", l_inspect;
    double l_rate = 1.0, l_phase = 0.0, l_duration = 2.0, l_out_rate = frame_rate();
    lfo->add_option("--shape", l_shape, "cosine, triangle, rect_cosine, inv_rect_cosine, saw, inv_saw");
    lfo->add_option("--family", l_family, "periodic, quasiperiodic, combined-all, combined-symmetric, distorted");
    lfo->add_option("--rate", l_rate, "LFO rate in Hz");
    lfo->add_option("--phase", l_phase, "Phase in radians");
    lfo->add_option("--duration", l_duration, "Duration in seconds");
    lfo->add_option("--sample-rate", l_out_rate, "Output rate (default: spectrogram frame rate)");
    lfo->add_option("--name", l_name, "Output stem inside --out");
    lfo->add_option("--inspect", l_inspect, "Print a summary of an existing signal instead");
    lfo->callback([&] {
        if (!l_inspect.empty()) {
            print(summarize(read_mod_signal(l_inspect)));
            return;
        }
        Rng rng(g.seed);
        const LfoConfig c{shape_from_string(l_shape), l_rate, l_phase, l_duration};
        const auto s = synth_lfo(family_from_string(l_family), c, l_out_rate, rng);
        write_mod_signal(g.out_dir() / l_name, s);
        print(summarize(s));
    });

    // gen-dataset
    auto* gen = app.add_subcommand("gen-dataset", "Generate a dry/wet/LFO dataset");
    std::string d_source, d_config, d_family;
    std::vector<std::string> d_effects;
    std::size_t d_count = 0, d_threads = 0;
    bool d_peak = false;
    double d_threshold = 0.0;
    auto* o_source = gen->add_option("--source", d_source, "Directory of mono 44.1 kHz WAV files");
    auto* o_count = gen->add_option("--count", d_count, "Number of items");
    auto* o_effects = gen->add_option("--effect", d_effects, "Effects to draw from (repeatable)");
    auto* o_conf = gen->add_option("--configuration", d_config, "fixed or varying parameter ranges");
    auto* o_family = gen->add_option("--family", d_family, "LFO family");
    auto* o_threads = gen->add_option("--threads", d_threads, "Worker threads");
    auto* o_thresh = gen->add_option("--silence-threshold", d_threshold, "Chunk RMS threshold (dBFS)");
    gen->add_flag("--peak-normalize", d_peak, "Peak-normalize dry chunks");
    gen->callback([&] {
        auto cfg = g.load().dataset;
        if (o_source->count()) cfg.source_dir = d_source;
        if (o_count->count()) cfg.count = d_count;
        if (o_effects->count()) {
            cfg.effects.clear();
            for (const auto& e : d_effects) cfg.effects.push_back(effect_from_string(e));
        }
        if (o_conf->count()) cfg.configuration = ranges_from_string(d_config);
        if (o_family->count()) cfg.family = family_from_string(d_family);
        if (o_threads->count()) cfg.threads = d_threads;
        if (o_thresh->count()) cfg.silence_threshold_dbfs = d_threshold;
        if (d_peak) cfg.peak_normalize = true;
        if (g.out_opt->count() || g.config.empty()) cfg.out_dir = g.out;
        if (cfg.source_dir.empty()) throw ParameterError("gen-dataset needs --source or dataset.source_dir");
        const auto summary = gen_dataset(cfg);
        print({{"written", summary.written}, {"failed", summary.failed}, {"manifest", summary.manifest.string()}});
        if (summary.written == 0) throw DataError("no items were generated");
    });

    // extract
    auto* extract = app.add_subcommand("extract", "Estimate the LFO of a dry/wet pair with LFO-net");
    std::string e_weights, e_dry, e_wet;
    int e_order = 4;
    bool e_no_stretch = false;
    extract->add_option("--weights", e_weights, "LFO-net weights file")->required()->check(CLI::ExistingFile);
    extract->add_option("--dry", e_dry, "Dry WAV")->required()->check(CLI::ExistingFile);
    extract->add_option("--wet", e_wet, "Wet WAV")->required()->check(CLI::ExistingFile);
    extract->add_option("--order", e_order, "Moving-average order for post-processing");
    extract->add_flag("--no-stretch", e_no_stretch, "Skip range stretching");
    extract->callback([&] {
        const auto net = nn::read_lfonet<float>(e_weights);
        MelParams mp;
        mp.n_mels = net.cfg.n_mels;
        const auto spec = mel_spectrogram(read_wav(e_dry), read_wav(e_wet), mp);
        const auto est = nn::lfonet_forward(net, spec);
        const auto dir = g.out_dir();
        write_mod_signal(dir / "extracted", est.mod);
        const auto pp = postprocess(est.mod, e_order, !e_no_stretch);
        write_mod_signal(dir / "extracted_pp", pp.signal);
        print({{"raw", summarize(est.mod)}, {"postprocessed", summarize(pp.signal)}});
    });

    // postproc
    auto* post = app.add_subcommand("postproc", "Smooth, stretch and validate a modulation signal");
    std::string p_in, p_name = "postprocessed";
    int p_order = 4;
    bool p_no_stretch = false;
    post->add_option("--in", p_in, "Input stem")->required();
    post->add_option("--order", p_order, "Moving-average order");
    post->add_option("--name", p_name, "Output stem inside --out");
    post->add_flag("--no-stretch", p_no_stretch, "Skip range stretching");
    post->callback([&] {
        const auto r = postprocess(read_mod_signal(p_in), p_order, !p_no_stretch);
        write_mod_signal(g.out_dir() / p_name, r.signal);
        print(summarize(r.signal));
    });

    // eval
    auto* eval = app.add_subcommand("eval", "Compare an estimated modulation signal with the truth");
    std::string v_truth, v_pred, v_ref_audio, v_est_audio;
    eval->add_option("--truth", v_truth, "Ground-truth modulation stem");
    eval->add_option("--pred", v_pred, "Estimated modulation stem");
    eval->add_option("--ref-audio", v_ref_audio, "Reference WAV for ESR")->check(CLI::ExistingFile);
    eval->add_option("--est-audio", v_est_audio, "Estimated WAV for ESR")->check(CLI::ExistingFile);
    eval->callback([&] {
        json j = json::object();
        if (!v_truth.empty() || !v_pred.empty()) {
            if (v_truth.empty() || v_pred.empty()) throw ParameterError("--truth and --pred go together");
            const auto truth = read_mod_signal(v_truth);
            const auto pred = fit_to(read_mod_signal(v_pred), truth.rate_hz, truth.size());
            const double l1 = l1_error(truth.values, pred.values);
            j["l1"] = l1;
            j["l1_percent"] = 100.0 * l1;
            j["valid"] = static_cast<bool>(is_valid_mod(pred));
            if (truth.size() >= 5) j["mod_loss"] = mod_loss(truth.values, pred.values);
        }
        if (!v_ref_audio.empty() || !v_est_audio.empty()) {
            if (v_ref_audio.empty() || v_est_audio.empty()) throw ParameterError("--ref-audio and --est-audio go together");
            const auto y = read_wav(v_ref_audio), y_hat = read_wav(v_est_audio);
            j["esr"] = esr(y, y_hat);
            j["audio_l1"] = l1_error(y, y_hat);
        }
        if (j.empty()) throw ParameterError("eval needs --truth/--pred and/or --ref-audio/--est-audio");
        print(j);
    });

    // baseline
    auto* base = app.add_subcommand("baseline", "Monte-Carlo L1 of the human-guess baseline");
    std::size_t b_trials = 1000;
    std::string b_shape = "all";
    double b_duration = 2.0, b_phase_err = 0.5, b_rate_err = 0.25;
    base->add_option("--trials", b_trials, "Trials per shape");
    base->add_option("--shape", b_shape, "Shape or 'all'");
    base->add_option("--duration", b_duration, "Signal length in seconds");
    base->add_option("--phase-err", b_phase_err, "Max phase error as a fraction of half a period");
    base->add_option("--rate-err", b_rate_err, "Max relative rate error");
    base->callback([&] {
        std::vector<LfoShape> shapes;
        if (b_shape == "all") shapes.assign(kAllShapes.begin(), kAllShapes.end());
        else shapes.push_back(shape_from_string(b_shape));
        json j = json::object();
        for (auto shape : shapes) {
            Rng rng(g.seed);
            double total = 0.0;
            for (std::size_t t = 0; t < b_trials; ++t) {
                const LfoConfig truth{shape, rng.uniform(0.5, 3.0), rng.uniform(0.0, kTwoPi), b_duration};
                const auto s = render_periodic(truth, frame_rate());
                const auto guess = baseline_mod(truth, {shape, b_phase_err, b_rate_err}, rng, frame_rate());
                total += l1_error(s.values, guess.values);
            }
            j[std::string(to_string(shape))] = total / static_cast<double>(b_trials);
        }
        print(j);
    });

    // train-lfonet
    auto* tl = app.add_subcommand("train-lfonet", "Train LFO-net on a generated dataset");
    std::string t_data, t_init;
    std::size_t t_steps = 100, t_batch = 8;
    double t_aug = 0.0;
    tl->add_option("--data", t_data, "Dataset directory (with manifest.jsonl)")->required();
    tl->add_option("--steps", t_steps, "Optimizer steps");
    tl->add_option("--batch", t_batch, "Batch size");
    tl->add_option("--spec-augment", t_aug, "SpecAugment mask fraction (0 disables)");
    tl->add_option("--init", t_init, "Start from these weights");
    tl->callback([&] {
        const auto cfg = g.load();
        const auto data = load_examples(t_data, cfg.lfonet);
        Rng rng(cfg.train.seed);
        auto net = t_init.empty() ? nn::lfonet_init<float>(cfg.lfonet, rng) : nn::read_lfonet<float>(t_init, cfg.lfonet);
        nn::LfoNetFitOptions opt;
        opt.steps = t_steps;
        opt.batch_size = t_batch;
        opt.spec_augment = t_aug;
        opt.train = cfg.train;
        opt.on_step = [](std::size_t step, double loss) { std::fprintf(stderr, "step %zu loss %.6f\n", step, loss); };
        nn::AdamWState<float> state;
        const auto losses = nn::lfonet_fit(net, std::span<const nn::LfoNetExample>(data), opt, state);
        const auto dir = g.out_dir();
        nn::write_lfonet(dir / "lfonet.weights", net);
        write_losses(dir / "lfonet_losses.csv", losses);
        print({{"items", data.size()}, {"steps", losses.size()}, {"final_loss", losses.empty() ? 0.0 : losses.back()},
               {"weights", (dir / "lfonet.weights").string()}});
    });

    // train-fx
    auto* tf = app.add_subcommand("train-fx", "Train the LSTM effect model on one dry/wet/LFO triple");
    std::string f_dry, f_wet, f_lfo, f_init;
    std::size_t f_steps = 3000;
    tf->add_option("--dry", f_dry, "Dry WAV")->required()->check(CLI::ExistingFile);
    tf->add_option("--wet", f_wet, "Wet WAV")->required()->check(CLI::ExistingFile);
    tf->add_option("--lfo", f_lfo, "Modulation stem (any rate; interpolated to audio rate)")->required();
    tf->add_option("--steps", f_steps, "TBPTT steps");
    tf->add_option("--init", f_init, "Start from these weights");
    tf->callback([&] {
        const auto cfg = g.load();
        const auto dry64 = read_wav(f_dry);
        const auto wet64 = read_wav(f_wet);
        if (dry64.size() != wet64.size()) throw DataError("dry and wet lengths differ");
        const auto lfo64 = fit_to(read_mod_signal(f_lfo), kSampleRate, dry64.size()).values;
        const std::vector<float> dry(dry64.begin(), dry64.end()), wet(wet64.begin(), wet64.end()),
            lfo_f(lfo64.begin(), lfo64.end());
        Rng rng(cfg.train.seed);
        auto net = f_init.empty() ? nn::lstmfx_init<float>(cfg.lstm, rng) : nn::read_lstmfx<float>(f_init, cfg.lstm);
        nn::AdamWState<float> state;
        const auto losses = nn::lstmfx_fit(net, std::span<const float>(dry), std::span<const float>(wet),
                                           std::span<const float>(lfo_f), cfg.train, state, f_steps,
                                           [](std::size_t s, double l) {
                                               if (s % 100 == 0) std::fprintf(stderr, "step %zu loss %.6f\n", s, l);
                                           });
        const auto dir = g.out_dir();
        nn::write_lstmfx(dir / "lstm_fx.weights", net);
        write_losses(dir / "lstm_fx_losses.csv", losses);
        print({{"steps", losses.size()}, {"initial_loss", losses.front()}, {"final_loss", losses.back()},
               {"weights", (dir / "lstm_fx.weights").string()}});
    });

    // pca
    auto* pca = app.add_subcommand("pca", "Project averaged LFO-net latents of a dataset onto two components");
    std::string c_weights, c_data;
    pca->add_option("--weights", c_weights, "LFO-net weights file")->required()->check(CLI::ExistingFile);
    pca->add_option("--data", c_data, "Dataset directory")->required();
    pca->callback([&] {
        const auto net = nn::read_lfonet<float>(c_weights);
        std::vector<ManifestEntry> entries;
        const auto data = load_examples(c_data, net.cfg, &entries);
        std::vector<std::vector<double>> latents;
        for (const auto& ex : data) latents.push_back(nn::lfonet_latent(net, ex.spec));
        const auto r = pca2(latents);
        const auto path = g.out_dir() / "pca.csv";
        std::ofstream os(path);
        os << "id,effect,pc1,pc2\n";
        char buf[64];
        for (std::size_t i = 0; i < entries.size(); ++i) {
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", r.coords[i][0], r.coords[i][1]);
            os << entries[i].record.at("id").get<std::string>() << ',' << entries[i].record.at("effect").get<std::string>()
               << buf;
        }
        print({{"items", entries.size()}, {"explained_variance", r.explained_variance}, {"csv", path.string()}});
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ParameterError& e) {
        std::cerr << "parameter error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
