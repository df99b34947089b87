#pragma once

#include "modex/lfo.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace modex {

inline double l1_error(std::span<const double> s, std::span<const double> s_hat) {
    require(s.size() == s_hat.size(), "L1 error needs equal-length sequences");
    require(!s.empty(), "L1 error needs at least one sample");
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) acc += std::abs(s[i] - s_hat[i]);
    return acc / static_cast<double>(s.size());
}

/// Central difference over interior points: out[k] = (s[k+2] - s[k]) / 2.
inline std::vector<double> central_diff(std::span<const double> s) {
    require(s.size() >= 3, "central difference needs at least 3 samples");
    std::vector<double> out(s.size() - 2);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = (s[k + 2] - s[k]) / 2.0;
    return out;
}

struct LossWeights {
    double alpha = 1.0;
    double beta = 5.0;
    double gamma = 10.0;
};

/// L1 on the signal plus L1 on its first and second central differences.
inline double mod_loss(std::span<const double> s, std::span<const double> s_hat, const LossWeights& w = {}) {
    require(s.size() == s_hat.size(), "modulation loss needs equal-length sequences");
    require(s.size() >= 5, "modulation loss needs at least 5 samples");
    const auto d1 = central_diff(s), d1h = central_diff(s_hat);
    const auto d2 = central_diff(d1), d2h = central_diff(d1h);
    return w.alpha * l1_error(s, s_hat) + w.beta * l1_error(d1, d1h) + w.gamma * l1_error(d2, d2h);
}

/// Gradient of mod_loss with respect to s_hat (sign(0) taken as 0).
inline std::vector<double> mod_loss_grad(std::span<const double> s, std::span<const double> s_hat,
                                         const LossWeights& w = {}) {
    require(s.size() == s_hat.size(), "modulation loss needs equal-length sequences");
    require(s.size() >= 5, "modulation loss needs at least 5 samples");
    const std::size_t n = s.size();
    auto sign = [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); };
    // Adjoint of central_diff: scatter g[k] into positions k (-1/2) and k+2 (+1/2).
    auto diff_adjoint = [](std::span<const double> g) {
        std::vector<double> out(g.size() + 2, 0.0);
        for (std::size_t k = 0; k < g.size(); ++k) {
            out[k] -= 0.5 * g[k];
            out[k + 2] += 0.5 * g[k];
        }
        return out;
    };
    const auto d1 = central_diff(s), d1h = central_diff(s_hat);
    const auto d2 = central_diff(d1), d2h = central_diff(d1h);

    std::vector<double> g2(n - 4);
    for (std::size_t k = 0; k < g2.size(); ++k) g2[k] = w.gamma * sign(d2h[k] - d2[k]) / static_cast<double>(n - 4);
    std::vector<double> g1 = diff_adjoint(g2);
    for (std::size_t k = 0; k < g1.size(); ++k) g1[k] += w.beta * sign(d1h[k] - d1[k]) / static_cast<double>(n - 2);
    std::vector<double> g = diff_adjoint(g1);
    for (std::size_t k = 0; k < n; ++k) g[k] += w.alpha * sign(s_hat[k] - s[k]) / static_cast<double>(n);
    return g;
}

/// Error-to-signal ratio sum((y - y_hat)^2) / sum(y^2).
inline double esr(std::span<const double> y, std::span<const double> y_hat) {
    require(y.size() == y_hat.size(), "ESR needs equal-length sequences");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        num += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
        den += y[i] * y[i];
    }
    if (!(den > 0.0)) throw NumericError("ESR undefined for an all-zero reference");
    return num / den;
}

/// Human-guess baseline: right shape, bounded random phase and rate errors.
///
/// `max_phase_err` is a fraction of the largest possible phase distance (half
/// a period), so 0.5 allows offsets up to a quarter period either way.
/// `max_rate_err` is a symmetric multiplicative error on the rate.
struct BaselineSpec {
    LfoShape shape = LfoShape::cosine;
    double max_phase_err = 0.5;
    double max_rate_err = 0.25;
};

inline ModSignal baseline_mod(const LfoConfig& truth, const BaselineSpec& spec, Rng& rng, double out_rate_hz) {
    truth.validate();
    require(spec.max_phase_err >= 0.0 && spec.max_phase_err <= 1.0, "max phase error must lie in [0, 1]");
    require(spec.max_rate_err >= 0.0 && spec.max_rate_err <= 1.0, "max rate error must lie in [0, 1]");
    LfoConfig guess = truth;
    guess.shape = spec.shape;
    guess.phase = truth.phase + rng.uniform(-1.0, 1.0) * spec.max_phase_err * std::numbers::pi;
    guess.rate_hz = truth.rate_hz * (1.0 + rng.uniform(-1.0, 1.0) * spec.max_rate_err);
    if (guess.rate_hz <= 0.0) guess.rate_hz = truth.rate_hz;
    return render_periodic(guess, out_rate_hz);
}

struct Pca2Result {
    std::vector<std::array<double, 2>> coords;
    std::array<double, 2> explained_variance{};
    std::array<std::vector<double>, 2> axes;
};

/// Projects mean-centered vectors onto the top two eigenvectors of their sample
/// covariance. Each axis is signed so its largest-magnitude component is positive.
inline Pca2Result pca2(const std::vector<std::vector<double>>& latents) {
    require(latents.size() >= 3, "PCA needs at least 3 vectors");
    const std::size_t n = latents.size(), d = latents.front().size();
    require(d >= 2, "PCA needs at least 2 dimensions");
    Eigen::MatrixXd x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        require(latents[i].size() == d, "PCA vectors must share one dimension");
        for (std::size_t j = 0; j < d; ++j) x(i, j) = latents[i][j];
    }
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
    const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    // Eigenvalues come back ascending.
    Pca2Result r;
    for (int a = 0; a < 2; ++a) {
        const auto col = static_cast<Eigen::Index>(d) - 1 - a;
        Eigen::VectorXd axis = solver.eigenvectors().col(col);
        Eigen::Index imax = 0;
        axis.cwiseAbs().maxCoeff(&imax);
        if (axis(imax) < 0.0) axis = -axis;
        r.explained_variance[static_cast<std::size_t>(a)] = std::max(0.0, solver.eigenvalues()(col));
        r.axes[static_cast<std::size_t>(a)].assign(axis.data(), axis.data() + axis.size());
        const Eigen::VectorXd proj = x * axis;
        if (a == 0) r.coords.resize(n);
        for (std::size_t i = 0; i < n; ++i) r.coords[i][static_cast<std::size_t>(a)] = proj(static_cast<Eigen::Index>(i));
    }
    return r;
}

} // namespace modex
