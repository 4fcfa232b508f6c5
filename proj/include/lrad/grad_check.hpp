#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "lrad/autodiff.hpp"

namespace lrad {

/// A differentiable op under test: builds its output on the tape from input leaves.
using DiffOp = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_element = 0;
    double analytic = 0.0, numeric = 0.0;
};

namespace detail {

inline Tensor<double> head_weights(const Shape& s, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    Tensor<double> w(s);
    for (auto& v : w.values()) v = u(rng);
    return w;
}

}  // namespace detail

/// Compares reverse-mode gradients of head(op(inputs)) = sum_i c_i * y_i
/// against central differences. The fixed positive weights c_i keep
/// normalizing ops (whose plain sum is constant) observable.
inline GradCheckReport grad_check(const DiffOp& op, const std::vector<Tensor<double>>& inputs, double eps = 1e-6,
                                  unsigned head_seed = 17) {
    auto evaluate = [&](const std::vector<Tensor<double>>& xs, std::vector<Tensor<double>>* grads) {
        Tape<double> tape;
        std::vector<Var> vars;
        for (const auto& x : xs) vars.push_back(tape.variable(x));
        Var out = op(tape, vars);
        const auto& y = tape.value(out);
        const auto weights = detail::head_weights(y.shape(), head_seed);
        const double head = dot(weights, y);
        if (grads) {
            tape.backward(out, weights);
            grads->clear();
            for (auto v : vars) grads->push_back(tape.grad(v));
        }
        return head;
    };

    std::vector<Tensor<double>> analytic;
    evaluate(inputs, &analytic);

    GradCheckReport report;
    auto xs = inputs;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        Tensor<double> numeric(xs[k].shape());
        for (std::size_t i = 0; i < xs[k].size(); ++i) {
            const double orig = xs[k][i];
            xs[k][i] = orig + eps;
            const double fp = evaluate(xs, nullptr);
            xs[k][i] = orig - eps;
            const double fm = evaluate(xs, nullptr);
            xs[k][i] = orig;
            numeric[i] = (fp - fm) / (2 * eps);
        }
        double scale = 0.0;
        for (auto v : numeric.values()) scale = std::max(scale, std::abs(v));
        const double floor = std::max(1e-3 * scale, 1e-10);
        for (std::size_t i = 0; i < numeric.size(); ++i) {
            const double a = analytic[k][i], n = numeric[i];
            const double rel = std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
            if (rel > report.max_rel_error) report = {rel, k, i, a, n};
        }
    }
    return report;
}

}  // namespace lrad
