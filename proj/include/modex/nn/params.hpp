#pragma once

#include "modex/core.hpp"
#include "modex/rng.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace modex::nn {

// Span parameters that take their scalar type from another argument, so
// vectors convert implicitly at call sites.
template <class S>
using ConstSpan = std::type_identity_t<std::span<const S>>;
template <class S>
using MutSpan = std::type_identity_t<std::span<S>>;

template <class S>
struct Tensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<S> data;

    Tensor() = default;
    Tensor(std::string n, std::vector<std::size_t> sh, S fill = S(0))
        : name(std::move(n)), shape(std::move(sh)), data(element_count(shape), fill) {}

    static std::size_t element_count(const std::vector<std::size_t>& sh) {
        return std::accumulate(sh.begin(), sh.end(), std::size_t{1}, std::multiplies<>());
    }

    std::size_t size() const { return data.size(); }
    S& operator[](std::size_t i) { return data[i]; }
    const S& operator[](std::size_t i) const { return data[i]; }
};

/// Ordered collection of named tensors; gradients and optimizer moments reuse
/// the same layout as the weights they belong to.
template <class S>
struct ParamSet {
    std::vector<Tensor<S>> tensors;

    std::size_t count() const {
        std::size_t n = 0;
        for (const auto& t : tensors) n += t.size();
        return n;
    }

    Tensor<S>& operator[](std::size_t i) { return tensors[i]; }
    const Tensor<S>& operator[](std::size_t i) const { return tensors[i]; }
    std::size_t size() const { return tensors.size(); }

    const Tensor<S>* find(const std::string& name) const {
        for (const auto& t : tensors)
            if (t.name == name) return &t;
        return nullptr;
    }

    ParamSet zeros_like() const {
        ParamSet z;
        z.tensors.reserve(tensors.size());
        for (const auto& t : tensors) z.tensors.emplace_back(t.name, t.shape, S(0));
        return z;
    }

    void fill(S value) {
        for (auto& t : tensors) std::fill(t.data.begin(), t.data.end(), value);
    }

    void add_scaled(const ParamSet& other, S scale) {
        for (std::size_t i = 0; i < tensors.size(); ++i)
            for (std::size_t j = 0; j < tensors[i].size(); ++j) tensors[i][j] += scale * other[i][j];
    }

    template <class T>
    ParamSet<T> cast() const {
        ParamSet<T> out;
        for (const auto& t : tensors) {
            Tensor<T> c;
            c.name = t.name;
            c.shape = t.shape;
            c.data.reserve(t.size());
            for (const auto& v : t.data) c.data.push_back(static_cast<T>(v));
            out.tensors.push_back(std::move(c));
        }
        return out;
    }
};

template <class S>
void fill_uniform(Tensor<S>& t, double bound, Rng& rng) {
    for (auto& v : t.data) v = static_cast<S>(rng.uniform(-bound, bound));
}

} // namespace modex::nn
