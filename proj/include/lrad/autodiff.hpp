#pragma once

// Reverse-mode differentiation over a recorded forward order. Each op pushes
// its output together with a hand-written backward rule; Tape::backward walks
// the records in reverse and accumulates gradients into their inputs.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lrad/kernels.hpp"
#include "lrad/tensor.hpp"

namespace lrad {

struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
};

template <typename T>
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Tensor<T>& out_grad)>;

    /// A leaf that does not receive gradients.
    Var constant(Tensor<T> v) { return push_owned(std::move(v), false, {}); }
    /// A leaf that receives gradients.
    Var variable(Tensor<T> v) { return push_owned(std::move(v), true, {}); }
    /// A gradient-receiving leaf that refers to caller-owned storage, which
    /// must outlive the tape and stay unmodified until backward completes.
    Var parameter(const Tensor<T>& v, bool requires_grad = true) {
        nodes_.push_back(Node{std::nullopt, &v, {}, requires_grad, {}});
        return Var{nodes_.size() - 1};
    }

    /// Records an op output. `inputs` decide whether the output needs a gradient.
    Var record(Tensor<T> value, const std::vector<Var>& inputs, BackwardFn fn) {
        bool needs = false;
        for (auto in : inputs) needs = needs || requires_grad(in);
        return push_owned(std::move(value), needs, needs ? std::move(fn) : BackwardFn{});
    }

    const Tensor<T>& value(Var v) const {
        const auto& n = node(v);
        return n.external ? *n.external : *n.owned;
    }
    bool requires_grad(Var v) const { return node(v).requires_grad; }

    /// Gradient accumulated at v; zeros if nothing flowed there.
    Tensor<T> grad(Var v) const {
        const auto& n = node(v);
        return n.grad.empty() ? Tensor<T>(value(v).shape()) : n.grad;
    }

    void accumulate(Var v, const Tensor<T>& g) {
        auto& n = node(v);
        if (!n.requires_grad) return;
        require_shape(g.shape(), value(v).shape(), "gradient accumulation");
        if (n.grad.empty())
            n.grad = g;
        else
            add_inplace(n.grad, g);
    }

    /// Reverse sweep seeded with d(out)/d(out) = seed.
    void backward(Var out, Tensor<T> seed) {
        require_shape(seed.shape(), value(out).shape(), "backward seed");
        accumulate(out, seed);
        for (std::size_t i = out.id + 1; i-- > 0;) {
            auto& n = nodes_[i];
            if (!n.backward || n.grad.empty()) continue;
            auto g = std::move(n.grad);
            n.grad = Tensor<T>{};
            n.backward(*this, g);
            // Retain the gradient for inspection after the rule has consumed it.
            if (nodes_[i].grad.empty()) nodes_[i].grad = std::move(g);
        }
    }

    /// Scalar outputs seed with 1.
    void backward(Var out) { backward(out, Tensor<T>(value(out).shape(), T{1})); }

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        std::optional<Tensor<T>> owned;
        const Tensor<T>* external = nullptr;
        Tensor<T> grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    Var push_owned(Tensor<T> v, bool requires_grad, BackwardFn fn) {
        if (!v.all_finite()) throw NumericalError("non-finite value produced on tape at node " + std::to_string(nodes_.size()));
        nodes_.push_back(Node{std::move(v), nullptr, {}, requires_grad, std::move(fn)});
        return Var{nodes_.size() - 1};
    }

    Node& node(Var v) {
        if (v.id >= nodes_.size()) throw Error("invalid tape variable");
        return nodes_[v.id];
    }
    const Node& node(Var v) const {
        if (v.id >= nodes_.size()) throw Error("invalid tape variable");
        return nodes_[v.id];
    }

    std::vector<Node> nodes_;
};

// ---- differentiable ops -------------------------------------------------

template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var w, Var b, ConvGeometry g) {
    auto y = conv2d(tape.value(x), tape.value(w), tape.value(b), g);
    return tape.record(std::move(y), {x, w, b}, [x, w, b, g](Tape<T>& t, const Tensor<T>& gy) {
        auto grads = conv2d_backward(t.value(x), t.value(w), gy, g);
        t.accumulate(x, grads.input);
        t.accumulate(w, grads.weight);
        t.accumulate(b, grads.bias);
    });
}

template <typename T>
Var conv_transpose2d(Tape<T>& tape, Var x, Var w, Var b, ConvGeometry g) {
    auto y = conv_transpose2d(tape.value(x), tape.value(w), tape.value(b), g);
    return tape.record(std::move(y), {x, w, b}, [x, w, b, g](Tape<T>& t, const Tensor<T>& gy) {
        auto grads = conv_transpose2d_backward(t.value(x), t.value(w), gy, g);
        t.accumulate(x, grads.input);
        t.accumulate(w, grads.weight);
        t.accumulate(b, grads.bias);
    });
}

template <typename T>
Var batchnorm2d(Tape<T>& tape, Var x, Var gamma, Var beta, Mode mode, BatchNormStats<T>* running, T momentum,
                T eps) {
    auto cache = std::make_shared<BatchNormCache<T>>();
    auto y = batchnorm2d(tape.value(x), tape.value(gamma), tape.value(beta), mode, running, momentum, eps, cache.get());
    return tape.record(std::move(y), {x, gamma, beta}, [x, gamma, beta, mode, cache](Tape<T>& t, const Tensor<T>& gy) {
        auto grads = batchnorm2d_backward(*cache, t.value(gamma), gy, mode);
        t.accumulate(x, grads.input);
        t.accumulate(gamma, grads.gamma);
        t.accumulate(beta, grads.beta);
    });
}

template <typename T>
Var activate(Tape<T>& tape, Var x, Activation kind) {
    auto y = activate(tape.value(x), kind);
    auto out = std::make_shared<Tensor<T>>(y);
    return tape.record(std::move(y), {x}, [x, kind, out](Tape<T>& t, const Tensor<T>& gy) {
        t.accumulate(x, activate_backward(t.value(x), *out, gy, kind));
    });
}

template <typename T>
Var linear(Tape<T>& tape, Var x, Var w, Var b) {
    auto y = linear(tape.value(x), tape.value(w), tape.value(b));
    return tape.record(std::move(y), {x, w, b}, [x, w, b](Tape<T>& t, const Tensor<T>& gy) {
        auto grads = linear_backward(t.value(x), t.value(w), gy);
        t.accumulate(x, grads.input);
        t.accumulate(w, grads.weight);
        t.accumulate(b, grads.bias);
    });
}

template <typename T>
Var reshape(Tape<T>& tape, Var x, Shape s) {
    auto y = tape.value(x).reshaped(std::move(s));
    return tape.record(std::move(y), {x}, [x](Tape<T>& t, const Tensor<T>& gy) {
        t.accumulate(x, gy.reshaped(t.value(x).shape()));
    });
}

template <typename T>
Var transpose2d(Tape<T>& tape, Var x) {
    auto y = transpose2d(tape.value(x));
    return tape.record(std::move(y), {x}, [x](Tape<T>& t, const Tensor<T>& gy) { t.accumulate(x, transpose2d(gy)); });
}

/// Gradient pass-through cut: the value of x as a constant leaf.
template <typename T>
Var detach(Tape<T>& tape, Var x) {
    return tape.constant(tape.value(x));
}

/// sum_k weights[k] * scalars[k]; each input must be a single-element tensor.
template <typename T>
Var weighted_sum(Tape<T>& tape, const std::vector<Var>& scalars, const std::vector<T>& weights) {
    if (scalars.size() != weights.size()) throw ShapeError("weighted_sum: arity mismatch");
    T total{0};
    bool needs = false;
    for (std::size_t k = 0; k < scalars.size(); ++k) {
        require_shape(tape.value(scalars[k]).shape(), {1}, "weighted_sum term");
        total += weights[k] * tape.value(scalars[k])[0];
        needs = needs || tape.requires_grad(scalars[k]);
    }
    Tensor<T> y({1}, total);
    if (!needs) return tape.constant(std::move(y));
    return tape.record(std::move(y), scalars, [scalars, weights](Tape<T>& t, const Tensor<T>& gy) {
        for (std::size_t k = 0; k < scalars.size(); ++k) t.accumulate(scalars[k], Tensor<T>({1}, weights[k] * gy[0]));
    });
}

}  // namespace lrad
