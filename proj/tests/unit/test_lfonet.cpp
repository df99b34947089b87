#include "catch_amalgamated.hpp"

#include "oracles.hpp"

#include "modex/nn/lfonet.hpp"

#include <cmath>

using namespace modex;
using namespace modex::nn;

namespace {

MelSpec random_spec(std::size_t n_mels, std::size_t frames, Rng& rng) {
    MelSpec s(2, n_mels, frames);
    for (auto& v : s.data) v = rng.uniform(-12.0, 2.0);
    return s;
}

LfoNetConfig tiny(std::size_t blocks, std::size_t channels, std::size_t mels) {
    LfoNetConfig c;
    c.n_blocks = blocks;
    c.channels = channels;
    c.n_mels = mels;
    return c;
}

std::vector<double> cosine_target(std::size_t frames, double cycles) {
    std::vector<double> t(frames);
    for (std::size_t i = 0; i < frames; ++i)
        t[i] = 0.5 + 0.45 * std::cos(kTwoPi * cycles * static_cast<double>(i) / static_cast<double>(frames));
    return t;
}

// Randomizes every tensor, including the ones that start at constants, so the
// gradient check exercises them away from special values.
void randomize(LfoNet<double>& net, Rng& rng) {
    for (auto& t : net.params.tensors)
        for (auto& v : t.data) v = rng.uniform(-0.5, 0.5);
    for (std::size_t b = 0; b < net.cfg.n_blocks; ++b)
        for (auto& v : net.params[LfoNet<double>::norm_scale(b)].data) v = rng.uniform(0.5, 1.5);
}

} // namespace

TEST_CASE("default LFO-net parameter count", "[lfonet]") {
    const LfoNetConfig cfg;
    // Closed form: norm scale/shift per input channel, conv weights and bias,
    // PReLU slopes per output channel, then a 256 -> 1 head.
    const std::size_t block0 = 2 * 2 + (64 * 2 * 5 * 13 + 64) + 64;
    const std::size_t block_n = 2 * 64 + (64 * 64 * 5 * 13 + 64) + 64;
    const std::size_t expected = block0 + 5 * block_n + 64 * 4 + 1;
    const auto ps = lfonet_layout<double>(cfg);
    REQUIRE(ps.count() == expected);
    REQUIRE(ps.count() == 1341189);
    REQUIRE(ps.count() >= 1250000);
    REQUIRE(ps.count() <= 1400000);
    REQUIRE(cfg.receptive_field() == 757);
    REQUIRE(cfg.output_freq() == 4);
    REQUIRE(cfg.head_inputs() == 256);
}

TEST_CASE("LFO-net init is deterministic and follows the init scheme", "[lfonet]") {
    const auto cfg = tiny(3, 8, 32);
    Rng a(5), b(5);
    const auto n1 = lfonet_init<double>(cfg, a), n2 = lfonet_init<double>(cfg, b);
    for (std::size_t i = 0; i < n1.params.size(); ++i) REQUIRE(n1.params[i].data == n2.params[i].data);
    using N = LfoNet<double>;
    for (std::size_t blk = 0; blk < cfg.n_blocks; ++blk) {
        for (double v : n1.params[N::norm_scale(blk)].data) REQUIRE(v == 1.0);
        for (double v : n1.params[N::norm_shift(blk)].data) REQUIRE(v == 0.0);
        for (double v : n1.params[N::conv_bias(blk)].data) REQUIRE(v == 0.0);
        for (double v : n1.params[N::prelu_slope(blk)].data) REQUIRE(v == 0.25);
        const auto cs = cfg.conv_shape(blk);
        const double bound = 1.0 / std::sqrt(static_cast<double>(cs.in_channels * 5 * 13));
        for (double v : n1.params[N::conv_weight(blk)].data) {
            REQUIRE(std::isfinite(v));
            REQUIRE(std::abs(v) <= bound);
        }
    }
    Rng z(0);
    for (const auto& t : lfonet_init<double>(cfg, z).params.tensors)
        for (double v : t.data) REQUIRE(std::isfinite(v));
    REQUIRE_THROWS_AS(lfonet_init<double>(tiny(3, 8, 20), a), ParameterError);
}

TEST_CASE("LFO-net keeps the frame count and stays in the open unit interval", "[lfonet][property]") {
    Rng rng(1);
    const auto cfg = tiny(2, 4, 16);
    auto net = lfonet_init<double>(cfg, rng);
    for (std::size_t frames : {1u, 2u, 7u, 64u, 345u}) {
        const auto spec = random_spec(16, frames, rng);
        const auto out = lfonet_forward(net, spec);
        REQUIRE(out.mod.size() == frames);
        REQUIRE(out.latents.size() == frames);
        REQUIRE(out.latents[0].size() == 4);
        for (double v : out.mod.values) {
            REQUIRE(v > 0.0);
            REQUIRE(v < 1.0);
        }
    }
    const auto s1 = random_spec(16, 50, rng), s2 = random_spec(16, 100, rng);
    REQUIRE(lfonet_forward(net, s2).mod.size() == 2 * lfonet_forward(net, s1).mod.size());

    // Saturating weights still give values strictly inside (0, 1).
    for (auto& v : net.params[net.head_weight()].data) v *= 1e4;
    net.params[net.head_bias()].data[0] = 500.0;
    for (double v : lfonet_forward(net, s1).mod.values) {
        REQUIRE(v > 0.0);
        REQUIRE(v < 1.0);
    }
    auto fnet = lfonet_init<float>(cfg, rng);
    fnet.params[fnet.head_bias()].data[0] = -500.0f;
    for (double v : lfonet_forward(fnet, s1).mod.values) {
        REQUIRE(v > 0.0);
        REQUIRE(v < 1.0);
    }
}

TEST_CASE("LFO-net rejects spectrograms of the wrong shape", "[lfonet]") {
    Rng rng(2);
    const auto net = lfonet_init<double>(tiny(2, 4, 16), rng);
    REQUIRE_THROWS_AS(lfonet_forward(net, random_spec(32, 10, rng)), ParameterError);
    REQUIRE_THROWS_AS(lfonet_forward(net, MelSpec(1, 16, 10)), ParameterError);
}

TEST_CASE("the convolution stack's temporal reach equals the receptive field", "[lfonet]") {
    // Layer norm couples every frame through its statistics, so locality is
    // checked on the conv/pool/PReLU chain with the default time geometry.
    auto cfg = tiny(6, 2, 64);
    Rng rng(3);
    const auto net = lfonet_init<double>(cfg, rng);
    const std::size_t frames = frames_for(8 * 44100); // 8-s input
    const std::size_t half = (cfg.receptive_field() - 1) / 2;
    REQUIRE(half == 378);

    auto run = [&](FeatureMap<double> x) {
        using N = LfoNet<double>;
        for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
            auto conv = conv2d_forward(x, cfg.conv_shape(b), net.p(N::conv_weight(b)), net.p(N::conv_bias(b)));
            x = prelu_forward(maxpool_freq_forward<double>(conv, cfg.freq_pool, nullptr), net.p(N::prelu_slope(b)));
        }
        return x;
    };
    const auto spec = random_spec(64, frames, rng);
    auto x = to_feature_map<double>(spec);
    const auto base = run(x);
    const std::size_t s = 600;
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t f = 0; f < 64; ++f) x.row(c, f)[s] += 3.0;
    const auto moved = run(x);

    std::size_t reach = 0;
    for (std::size_t t = 0; t < frames; ++t) {
        bool changed = false;
        for (std::size_t c = 0; c < base.channels; ++c)
            for (std::size_t f = 0; f < base.freq; ++f) changed |= base.row(c, f)[t] != moved.row(c, f)[t];
        const std::size_t dist = t > s ? t - s : s - t;
        if (changed) reach = std::max(reach, dist);
        if (dist > half) REQUIRE_FALSE(changed);
    }
    REQUIRE(reach == half);
}

TEST_CASE("latents of a palindromic spectrogram are reversal invariant", "[lfonet]") {
    Rng rng(4);
    const auto net = lfonet_init<double>(tiny(2, 4, 16), rng);
    auto spec = random_spec(16, 41, rng);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t m = 0; m < 16; ++m)
            for (std::size_t t = 0; t < 20; ++t) spec.at(c, m, 40 - t) = spec.at(c, m, t);
    MelSpec rev = spec;
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t m = 0; m < 16; ++m)
            for (std::size_t t = 0; t < 41; ++t) rev.at(c, m, t) = spec.at(c, m, 40 - t);
    REQUIRE(lfonet_latent(net, spec) == lfonet_latent(net, rev));
}

TEST_CASE("latent of silence is reproducible", "[lfonet]") {
    Rng rng(5);
    const auto net = lfonet_init<double>(tiny(2, 4, 16), rng);
    MelSpec silence(2, 16, 100);
    std::fill(silence.data.begin(), silence.data.end(), std::log(1e-7));
    const auto a = lfonet_latent(net, silence), b = lfonet_latent(net, silence);
    REQUIRE(a == b);
    for (double v : a) REQUIRE(std::isfinite(v));
}

TEST_CASE("latent of a duplicated input matches the single input", "[lfonet]") {
    Rng rng(6);
    const auto net = lfonet_init<double>(tiny(2, 4, 16), rng);
    // A time-periodic spectrogram makes the join seamless; only edge padding differs.
    const std::size_t period = 50, frames = 4000;
    const auto cell = random_spec(16, period, rng);
    MelSpec x(2, 16, frames), xx(2, 16, 2 * frames);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t m = 0; m < 16; ++m) {
            for (std::size_t t = 0; t < frames; ++t) x.at(c, m, t) = cell.at(c, m, t % period);
            for (std::size_t t = 0; t < 2 * frames; ++t) xx.at(c, m, t) = cell.at(c, m, t % period);
        }
    const auto a = lfonet_latent(net, x), b = lfonet_latent(net, xx);
    for (std::size_t c = 0; c < a.size(); ++c) REQUIRE(std::abs(a[c] - b[c]) < 1e-3);
}

TEST_CASE("LFO-net gradients match finite differences on tiny configs", "[lfonet][gradient]") {
    for (const auto& cfg : {tiny(1, 4, 8), tiny(2, 3, 8)}) {
        Rng rng(7 + cfg.n_blocks);
        auto net = lfonet_init<double>(cfg, rng);
        randomize(net, rng);
        const auto spec = random_spec(8, 24, rng);
        auto target = cosine_target(24, 1.3);
        const LossWeights lw;
        auto grad = net.params.zeros_like();
        lfonet_loss_and_grad(net, spec, target, lw, grad);
        for (std::size_t i = 0; i < net.params.size(); ++i) {
            auto& theta = net.params[i].data;
            const auto rep = oracle::fd_compare(theta, grad[i].data, [&] {
                const auto out = lfonet_forward(net, spec);
                return mod_loss(target, out.mod.values, lw);
            });
            INFO(cfg.n_blocks << " block(s), tensor " << net.params[i].name << ": rel err " << rep.worst << " at "
                              << rep.worst_index << " (" << rep.analytic << " vs " << rep.numeric << ")");
            REQUIRE(rep.worst < 1e-4);
        }
    }
}

TEST_CASE("a training step with zero learning rate changes nothing", "[lfonet]") {
    Rng rng(9);
    auto net = lfonet_init<double>(tiny(2, 4, 16), rng);
    const auto before = net.params;
    const std::vector<LfoNetExample> batch{{random_spec(16, 30, rng), cosine_target(30, 1.0)}};
    AdamWState<double> st;
    TrainConfig tc;
    tc.optimizer.lr = 0.0;
    const double loss = lfonet_train_step(net, std::span<const LfoNetExample>(batch), LossWeights{}, st, tc);
    REQUIRE(std::isfinite(loss));
    for (std::size_t i = 0; i < net.params.size(); ++i) REQUIRE(net.params[i].data == before[i].data);
}

TEST_CASE("non-finite loss raises a divergence error", "[lfonet]") {
    Rng rng(10);
    auto net = lfonet_init<double>(tiny(1, 4, 8), rng);
    net.params[net.head_bias()].data[0] = std::numeric_limits<double>::quiet_NaN();
    const std::vector<LfoNetExample> batch{{random_spec(8, 20, rng), cosine_target(20, 1.0)}};
    AdamWState<double> st;
    REQUIRE_THROWS_AS(lfonet_train_step(net, std::span<const LfoNetExample>(batch), LossWeights{}, st, TrainConfig{}),
                      DivergenceError);
}

TEST_CASE("training is deterministic per seed", "[lfonet][property]") {
    auto run = [] {
        Rng rng(11);
        auto net = lfonet_init<float>(tiny(2, 4, 16), rng);
        const std::vector<LfoNetExample> batch{{random_spec(16, 40, rng), cosine_target(40, 1.0)},
                                               {random_spec(16, 40, rng), cosine_target(40, 2.0)}};
        AdamWState<float> st;
        std::vector<double> losses;
        for (int i = 0; i < 5; ++i)
            losses.push_back(lfonet_train_step(net, std::span<const LfoNetExample>(batch), LossWeights{}, st, TrainConfig{}));
        return std::make_pair(losses, net.params[0].data);
    };
    REQUIRE(run() == run());
}

TEST_CASE("a reduced LFO-net overfits a single example", "[lfonet][training]") {
    Rng rng(12);
    auto net = lfonet_init<double>(tiny(2, 8, 32), rng);
    const std::vector<LfoNetExample> batch{{random_spec(32, 100, rng), cosine_target(100, 2.0)}};
    AdamWState<double> st;
    std::vector<double> losses;
    for (int i = 0; i < 500; ++i)
        losses.push_back(lfonet_train_step(net, std::span<const LfoNetExample>(batch), LossWeights{}, st, TrainConfig{}));
    INFO("initial " << losses.front() << ", final " << losses.back());
    REQUIRE(losses.back() < 0.1 * losses.front());
}
