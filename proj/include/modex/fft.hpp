#pragma once

#include "modex/core.hpp"

#include <complex>
#include <vector>

namespace modex {

/// In-place iterative radix-2 FFT for power-of-two sizes, with a precomputed
/// twiddle table so repeated transforms of the same size are cheap.
class Fft {
public:
    explicit Fft(std::size_t n) : n_(n), twiddle_(n / 2), rev_(n) {
        require(n >= 2 && (n & (n - 1)) == 0, "FFT size must be a power of two");
        for (std::size_t k = 0; k < n / 2; ++k)
            twiddle_[k] = std::polar(1.0, -kTwoPi * static_cast<double>(k) / static_cast<double>(n));
        std::size_t bits = 0;
        while ((std::size_t{1} << bits) < n) ++bits;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < bits; ++b)
                if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
            rev_[i] = r;
        }
    }

    std::size_t size() const { return n_; }

    void forward(std::vector<std::complex<double>>& a) const {
        require(a.size() == n_, "FFT buffer size mismatch");
        for (std::size_t i = 0; i < n_; ++i)
            if (i < rev_[i]) std::swap(a[i], a[rev_[i]]);
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            const std::size_t half = len / 2;
            const std::size_t step = n_ / len;
            for (std::size_t i = 0; i < n_; i += len) {
                for (std::size_t j = 0; j < half; ++j) {
                    const auto u = a[i + j];
                    const auto v = a[i + j + half] * twiddle_[j * step];
                    a[i + j] = u + v;
                    a[i + j + half] = u - v;
                }
            }
        }
    }

private:
    std::size_t n_;
    std::vector<std::complex<double>> twiddle_;
    std::vector<std::size_t> rev_;
};

} // namespace modex
