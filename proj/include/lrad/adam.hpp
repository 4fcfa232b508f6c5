#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include "lrad/tensor.hpp"

namespace lrad {

struct AdamConfig {
    double learning_rate = 0.002;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::vector<Tensor<T>> first_moment, second_moment;
};

/// One bias-corrected Adam update of `params` in place. Moments are created
/// on the first call and must keep matching shapes afterwards.
template <typename T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>> grads, AdamState<T>& state) {
    if (params.size() != grads.size())
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
    if (state.step == 0 && state.first_moment.empty()) {
        for (auto* p : params) {
            state.first_moment.emplace_back(p->shape());
            state.second_moment.emplace_back(p->shape());
        }
    }
    if (state.first_moment.size() != params.size())
        throw ShapeError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                         " parameters, got " + std::to_string(params.size()));
    for (std::size_t k = 0; k < params.size(); ++k) {
        require_shape(grads[k].shape(), params[k]->shape(), "adam_step gradient");
        require_shape(state.first_moment[k].shape(), params[k]->shape(), "adam_step moment");
    }

    ++state.step;
    const auto& c = state.config;
    const double t = static_cast<double>(state.step);
    const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
    const T correction1 = static_cast<T>(1.0 - std::pow(c.beta1, t));
    const T correction2 = static_cast<T>(1.0 - std::pow(c.beta2, t));
    const T lr = static_cast<T>(c.learning_rate), eps = static_cast<T>(c.eps);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = *params[k];
        auto& m = state.first_moment[k];
        auto& v = state.second_moment[k];
        const auto& g = grads[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (T{1} - b1) * g[i];
            v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
            const T mhat = m[i] / correction1;
            const T vhat = v[i] / correction2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

}  // namespace lrad
