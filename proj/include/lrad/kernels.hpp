#pragma once

// Forward and backward kernels on plain tensors. The tape in autodiff.hpp
// composes these; they are also usable directly for inference.

#include <cmath>
#include <cstddef>
#include <string>

#include "lrad/gemm.hpp"
#include "lrad/tensor.hpp"

namespace lrad {

struct ConvGeometry {
    std::size_t stride = 1;
    std::size_t pad = 0;
};

template <typename T>
struct ConvGrads {
    Tensor<T> input, weight, bias;
};

namespace detail {

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, ConvGeometry g, const char* what) {
    if (g.stride == 0) throw ShapeError(std::string(what) + ": stride must be positive");
    if (in + 2 * g.pad < k)
        throw ShapeError(std::string(what) + ": kernel " + std::to_string(k) + " larger than padded extent " +
                         std::to_string(in + 2 * g.pad));
    return (in + 2 * g.pad - k) / g.stride + 1;
}

// Unfolds x (N,C,H,W) into columns laid out as [(c,ki,kj)] x [(n,oh,ow)].
template <typename T>
void im2col(const T* x, std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::size_t k,
            ConvGeometry g, std::size_t oh, std::size_t ow, T* cols) {
    const std::size_t ncols = n * oh * ow;
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t ki = 0; ki < k; ++ki)
            for (std::size_t kj = 0; kj < k; ++kj) {
                T* row = cols + ((ci * k + ki) * k + kj) * ncols;
                for (std::size_t b = 0; b < n; ++b) {
                    const T* img = x + (b * c + ci) * h * w;
                    for (std::size_t oy = 0; oy < oh; ++oy) {
                        const auto iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
                        T* dst = row + (b * oh + oy) * ow;
                        if (iy < 0 || iy >= static_cast<long>(h)) {
                            for (std::size_t ox = 0; ox < ow; ++ox) dst[ox] = T{0};
                            continue;
                        }
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            const auto ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.pad);
                            dst[ox] = (ix < 0 || ix >= static_cast<long>(w)) ? T{0} : img[iy * w + ix];
                        }
                    }
                }
            }
}

// Adjoint of im2col: scatter-adds columns back into x (N,C,H,W), which must be zeroed.
template <typename T>
void col2im(const T* cols, std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::size_t k,
            ConvGeometry g, std::size_t oh, std::size_t ow, T* x) {
    const std::size_t ncols = n * oh * ow;
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t ki = 0; ki < k; ++ki)
            for (std::size_t kj = 0; kj < k; ++kj) {
                const T* row = cols + ((ci * k + ki) * k + kj) * ncols;
                for (std::size_t b = 0; b < n; ++b) {
                    T* img = x + (b * c + ci) * h * w;
                    for (std::size_t oy = 0; oy < oh; ++oy) {
                        const auto iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.pad);
                        if (iy < 0 || iy >= static_cast<long>(h)) continue;
                        const T* src = row + (b * oh + oy) * ow;
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            const auto ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.pad);
                            if (ix >= 0 && ix < static_cast<long>(w)) img[iy * w + ix] += src[ox];
                        }
                    }
                }
            }
}

// (N,C,P) <-> (C, N*P) channel-major matrices.
template <typename T>
void nchw_to_cm(const T* x, std::size_t n, std::size_t c, std::size_t p, T* out) {
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ci = 0; ci < c; ++ci)
            std::copy_n(x + (b * c + ci) * p, p, out + ci * n * p + b * p);
}

template <typename T>
void cm_to_nchw(const T* m, std::size_t n, std::size_t c, std::size_t p, T* out) {
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ci = 0; ci < c; ++ci)
            std::copy_n(m + ci * n * p + b * p, p, out + (b * c + ci) * p);
}

template <typename T>
Tensor<T> channel_sums(const Tensor<T>& g) {
    const auto n = g.dim(0), c = g.dim(1), p = g.size() / (n * c);
    Tensor<T> out({c});
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ci = 0; ci < c; ++ci) {
            const T* src = g.data() + (b * c + ci) * p;
            T s{0};
            for (std::size_t i = 0; i < p; ++i) s += src[i];
            out[ci] += s;
        }
    return out;
}

template <typename T>
void check_conv_args(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, std::size_t in_channels_axis,
                     std::size_t bias_axis, const char* what) {
    require_rank(x.shape(), 4, what);
    require_rank(w.shape(), 4, what);
    if (w.dim(2) != w.dim(3)) throw ShapeError(std::string(what) + ": kernel must be square, got " + to_string(w.shape()));
    if (x.dim(1) != w.dim(in_channels_axis))
        throw ShapeError(std::string(what) + ": input has " + std::to_string(x.dim(1)) + " channels, weight " +
                         to_string(w.shape()) + " expects " + std::to_string(w.dim(in_channels_axis)));
    require_shape(bias.shape(), {w.dim(bias_axis)}, what);
}

}  // namespace detail

/// Cross-correlation. x: (N,C,H,W), w: (O,C,K,K), bias: (O).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, ConvGeometry g) {
    detail::check_conv_args(x, w, bias, 1, 0, "conv2d");
    const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const auto o = w.dim(0), k = w.dim(2);
    const auto oh = detail::conv_out_extent(h, k, g, "conv2d"), ow = detail::conv_out_extent(wd, k, g, "conv2d");
    const auto p = oh * ow, ckk = c * k * k;
    std::vector<T> cols(ckk * n * p);
    detail::im2col(x.data(), n, c, h, wd, k, g, oh, ow, cols.data());
    std::vector<T> out_cm(o * n * p);
    gemm<T>(false, false, o, n * p, ckk, T{1}, w.data(), ckk, cols.data(), n * p, T{0}, out_cm.data(), n * p);
    Tensor<T> y({n, o, oh, ow});
    detail::cm_to_nchw(out_cm.data(), n, o, p, y.data());
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t oi = 0; oi < o; ++oi) {
            T* dst = y.data() + (b * o + oi) * p;
            for (std::size_t i = 0; i < p; ++i) dst[i] += bias[oi];
        }
    return y;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, ConvGeometry g) {
    const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const auto o = w.dim(0), k = w.dim(2);
    const auto oh = gy.dim(2), ow = gy.dim(3), p = oh * ow, ckk = c * k * k;
    std::vector<T> cols(ckk * n * p);
    detail::im2col(x.data(), n, c, h, wd, k, g, oh, ow, cols.data());
    std::vector<T> gy_cm(o * n * p);
    detail::nchw_to_cm(gy.data(), n, o, p, gy_cm.data());

    ConvGrads<T> out{Tensor<T>(x.shape()), Tensor<T>(w.shape()), detail::channel_sums(gy)};
    gemm<T>(false, true, o, ckk, n * p, T{1}, gy_cm.data(), n * p, cols.data(), n * p, T{0}, out.weight.data(), ckk);
    gemm<T>(true, false, ckk, n * p, o, T{1}, w.data(), ckk, gy_cm.data(), n * p, T{0}, cols.data(), n * p);
    detail::col2im(cols.data(), n, c, h, wd, k, g, oh, ow, out.input.data());
    return out;
}

/// Transposed convolution, the adjoint of conv2d. x: (N,Cin,H,W), w: (Cin,Cout,K,K), bias: (Cout).
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, ConvGeometry g) {
    detail::check_conv_args(x, w, bias, 0, 1, "conv_transpose2d");
    const auto n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const auto cout = w.dim(1), k = w.dim(2);
    if (g.stride == 0) throw ShapeError("conv_transpose2d: stride must be positive");
    if ((h - 1) * g.stride + k < 2 * g.pad + 1 || (wd - 1) * g.stride + k < 2 * g.pad + 1)
        throw ShapeError("conv_transpose2d: padding " + std::to_string(g.pad) + " leaves no output for input " +
                         to_string(x.shape()));
    const auto oh = (h - 1) * g.stride + k - 2 * g.pad, ow = (wd - 1) * g.stride + k - 2 * g.pad;
    const auto p = h * wd, ckk = cout * k * k;
    std::vector<T> x_cm(cin * n * p);
    detail::nchw_to_cm(x.data(), n, cin, p, x_cm.data());
    std::vector<T> cols(ckk * n * p);
    gemm<T>(true, false, ckk, n * p, cin, T{1}, w.data(), ckk, x_cm.data(), n * p, T{0}, cols.data(), n * p);
    Tensor<T> y({n, cout, oh, ow});
    detail::col2im(cols.data(), n, cout, oh, ow, k, g, h, wd, y.data());
    const auto op = oh * ow;
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t co = 0; co < cout; ++co) {
            T* dst = y.data() + (b * cout + co) * op;
            for (std::size_t i = 0; i < op; ++i) dst[i] += bias[co];
        }
    return y;
}

template <typename T>
ConvGrads<T> conv_transpose2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, ConvGeometry g) {
    const auto n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const auto cout = w.dim(1), k = w.dim(2);
    const auto oh = gy.dim(2), ow = gy.dim(3), p = h * wd, ckk = cout * k * k;
    std::vector<T> cols(ckk * n * p);
    detail::im2col(gy.data(), n, cout, oh, ow, k, g, h, wd, cols.data());
    std::vector<T> x_cm(cin * n * p);
    detail::nchw_to_cm(x.data(), n, cin, p, x_cm.data());

    ConvGrads<T> out{Tensor<T>(x.shape()), Tensor<T>(w.shape()), detail::channel_sums(gy)};
    std::vector<T> gx_cm(cin * n * p);
    gemm<T>(false, false, cin, n * p, ckk, T{1}, w.data(), ckk, cols.data(), n * p, T{0}, gx_cm.data(), n * p);
    detail::cm_to_nchw(gx_cm.data(), n, cin, p, out.input.data());
    gemm<T>(false, true, cin, ckk, n * p, T{1}, x_cm.data(), n * p, cols.data(), n * p, T{0}, out.weight.data(), ckk);
    return out;
}

enum class Mode { train, eval };

template <typename T>
struct BatchNormStats {
    Tensor<T> mean, var;
};

/// Saved per-channel statistics needed by the backward pass.
template <typename T>
struct BatchNormCache {
    Tensor<T> xhat;
    std::vector<T> inv_std;
};

/// Per-channel batch normalization over N x H x W. In train mode, batch
/// statistics are used and `running` (if non-null) is updated with `momentum`.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, Mode mode,
                      BatchNormStats<T>* running, T momentum, T eps, BatchNormCache<T>* cache = nullptr) {
    if (x.rank() != 4 && x.rank() != 2) throw ShapeError("batchnorm2d: expected (N,C,H,W) or (N,C), got " + to_string(x.shape()));
    const auto n = x.dim(0), c = x.dim(1), p = x.size() / (n * c);
    require_shape(gamma.shape(), {c}, "batchnorm2d gamma");
    require_shape(beta.shape(), {c}, "batchnorm2d beta");
    Tensor<T> y(x.shape());
    std::vector<T> inv_std(c);
    if (mode == Mode::train) {
        if (n < 2) throw ShapeError("batchnorm2d: train mode needs batch size >= 2, got " + std::to_string(n));
        const auto m = static_cast<T>(n * p);
        for (std::size_t ci = 0; ci < c; ++ci) {
            T mean{0};
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t i = 0; i < p; ++i) mean += x[(b * c + ci) * p + i];
            mean /= m;
            T var{0};
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t i = 0; i < p; ++i) {
                    const T d = x[(b * c + ci) * p + i] - mean;
                    var += d * d;
                }
            var /= m;
            inv_std[ci] = T{1} / std::sqrt(var + eps);
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t i = 0; i < p; ++i) {
                    const auto idx = (b * c + ci) * p + i;
                    y[idx] = (x[idx] - mean) * inv_std[ci];
                }
            if (running) {
                running->mean[ci] = (T{1} - momentum) * running->mean[ci] + momentum * mean;
                running->var[ci] = (T{1} - momentum) * running->var[ci] + momentum * var * m / (m - T{1});
            }
        }
    } else {
        if (!running) throw ShapeError("batchnorm2d: eval mode requires running statistics");
        for (std::size_t ci = 0; ci < c; ++ci) {
            inv_std[ci] = T{1} / std::sqrt(running->var[ci] + eps);
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t i = 0; i < p; ++i) {
                    const auto idx = (b * c + ci) * p + i;
                    y[idx] = (x[idx] - running->mean[ci]) * inv_std[ci];
                }
        }
    }
    if (cache) cache->xhat = y;
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t i = 0; i < p; ++i) {
                auto& v = y[(b * c + ci) * p + i];
                v = gamma[ci] * v + beta[ci];
            }
    if (cache) cache->inv_std = std::move(inv_std);
    return y;
}

template <typename T>
struct BatchNormGrads {
    Tensor<T> input, gamma, beta;
};

template <typename T>
BatchNormGrads<T> batchnorm2d_backward(const BatchNormCache<T>& cache, const Tensor<T>& gamma, const Tensor<T>& gy,
                                       Mode mode) {
    const auto n = gy.dim(0), c = gy.dim(1), p = gy.size() / (n * c);
    const auto m = static_cast<T>(n * p);
    BatchNormGrads<T> g{Tensor<T>(gy.shape()), Tensor<T>({c}), Tensor<T>({c})};
    for (std::size_t ci = 0; ci < c; ++ci) {
        T sum_gy{0}, sum_gy_xhat{0};
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < p; ++i) {
                const auto idx = (b * c + ci) * p + i;
                sum_gy += gy[idx];
                sum_gy_xhat += gy[idx] * cache.xhat[idx];
            }
        g.beta[ci] = sum_gy;
        g.gamma[ci] = sum_gy_xhat;
        const T scale = gamma[ci] * cache.inv_std[ci];
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < p; ++i) {
                const auto idx = (b * c + ci) * p + i;
                g.input[idx] = mode == Mode::train
                                   ? scale * (gy[idx] - sum_gy / m - cache.xhat[idx] * sum_gy_xhat / m)
                                   : scale * gy[idx];
            }
    }
    return g;
}

enum class Activation { relu, leaky_relu, tanh, sigmoid };

inline constexpr double kLeakySlope = 0.2;

inline const char* name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
    }
    return "?";
}

template <typename T>
Tensor<T> activate(const Tensor<T>& x, Activation kind) {
    Tensor<T> y(x.shape());
    const T slope = static_cast<T>(kLeakySlope);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T v = x[i];
        switch (kind) {
            case Activation::relu: y[i] = v > T{0} ? v : T{0}; break;
            case Activation::leaky_relu: y[i] = v > T{0} ? v : slope * v; break;
            case Activation::tanh: y[i] = std::tanh(v); break;
            case Activation::sigmoid: y[i] = T{1} / (T{1} + std::exp(-v)); break;
        }
    }
    return y;
}

/// Gradient of an activation given its input x and output y.
template <typename T>
Tensor<T> activate_backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& gy, Activation kind) {
    Tensor<T> gx(x.shape());
    const T slope = static_cast<T>(kLeakySlope);
    for (std::size_t i = 0; i < x.size(); ++i) {
        T d{};
        switch (kind) {
            case Activation::relu: d = x[i] > T{0} ? T{1} : T{0}; break;
            case Activation::leaky_relu: d = x[i] > T{0} ? T{1} : slope; break;
            case Activation::tanh: d = T{1} - y[i] * y[i]; break;
            case Activation::sigmoid: d = y[i] * (T{1} - y[i]); break;
        }
        gx[i] = gy[i] * d;
    }
    return gx;
}

/// x: (B,N), w: (M,N), bias: (M) -> x * w^T + bias.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
    require_rank(x.shape(), 2, "linear input");
    require_rank(w.shape(), 2, "linear weight");
    if (x.dim(1) != w.dim(1))
        throw ShapeError("linear: input " + to_string(x.shape()) + " incompatible with weight " + to_string(w.shape()));
    require_shape(bias.shape(), {w.dim(0)}, "linear bias");
    const auto b = x.dim(0), n = x.dim(1), m = w.dim(0);
    Tensor<T> y({b, m});
    for (std::size_t r = 0; r < b; ++r) std::copy_n(bias.data(), m, y.data() + r * m);
    gemm<T>(false, true, b, m, n, T{1}, x.data(), n, w.data(), n, T{1}, y.data(), m);
    return y;
}

template <typename T>
ConvGrads<T> linear_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy) {
    const auto b = x.dim(0), n = x.dim(1), m = w.dim(0);
    ConvGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(w.shape()), Tensor<T>({m})};
    gemm<T>(false, false, b, n, m, T{1}, gy.data(), m, w.data(), n, T{0}, g.input.data(), n);
    gemm<T>(true, false, m, n, b, T{1}, gy.data(), m, x.data(), n, T{0}, g.weight.data(), n);
    for (std::size_t r = 0; r < b; ++r)
        for (std::size_t j = 0; j < m; ++j) g.bias[j] += gy[r * m + j];
    return g;
}

}  // namespace lrad
