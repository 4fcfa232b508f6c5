#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lrad/autodiff.hpp"

namespace lrad {

/// DCGAN-style topology shared by all four sub-networks.
struct NetworkSpec {
    std::size_t channels = 1;
    std::size_t image_size = 32;
    std::size_t latent_dim = 100;
    std::size_t base_width = 64;
    std::size_t stages = 4;  // stride-2 downsampling blocks; 3 for 16x16 images
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
    double init_std = 0.02;

    /// Spatial extent left after the strided stack; the head convolution uses it as its kernel.
    std::size_t head_kernel() const { return image_size >> stages; }

    void validate() const {
        if (channels == 0) throw ConfigError("network: channels must be positive");
        if (stages == 0 || stages > 8) throw ConfigError("network: stages must be in [1, 8]");
        if (image_size == 0 || image_size % (std::size_t{1} << stages) != 0)
            throw ConfigError("network: image size " + std::to_string(image_size) + " is not divisible by 2^" +
                              std::to_string(stages));
        if (latent_dim < 4) throw ConfigError("network: latent dimension must be at least 4");
        if (base_width == 0) throw ConfigError("network: base width must be positive");
    }
};

struct LayerDesc {
    enum class Kind { conv, conv_transpose } kind = Kind::conv;
    std::size_t in_channels = 0, out_channels = 0, kernel = 0;
    ConvGeometry geometry;
    bool batchnorm = false;
    std::optional<Activation> activation;
};

template <typename T>
struct LayerParams {
    Tensor<T> weight, bias;
    Tensor<T> gamma, beta;     // empty without batch-norm
    BatchNormStats<T> running;  // empty without batch-norm
};

template <typename T>
struct NamedTensor {
    std::string name;
    Tensor<T>* tensor;
};

enum class Role { encoder, decoder, aux_encoder, discriminator };

inline const char* name(Role r) {
    switch (r) {
        case Role::encoder: return "encoder";
        case Role::decoder: return "decoder";
        case Role::aux_encoder: return "aux_encoder";
        case Role::discriminator: return "discriminator";
    }
    return "?";
}

/// How a forward pass treats batch-norm and parameters.
struct ForwardOptions {
    Mode mode = Mode::eval;
    bool update_running_stats = false;
    bool parameter_grads = false;
};

template <typename T>
class Network {
public:
    Network() = default;
    Network(std::string name, std::vector<LayerDesc> layers) : name_(std::move(name)), layers_(std::move(layers)) {
        for (const auto& l : layers_) {
            LayerParams<T> p;
            if (l.kind == LayerDesc::Kind::conv)
                p.weight = Tensor<T>({l.out_channels, l.in_channels, l.kernel, l.kernel});
            else
                p.weight = Tensor<T>({l.in_channels, l.out_channels, l.kernel, l.kernel});
            p.bias = Tensor<T>({l.out_channels});
            if (l.batchnorm) {
                p.gamma = Tensor<T>({l.out_channels}, T{1});
                p.beta = Tensor<T>({l.out_channels});
                p.running = {Tensor<T>({l.out_channels}), Tensor<T>({l.out_channels}, T{1})};
            }
            params_.push_back(std::move(p));
        }
    }

    const std::string& name() const noexcept { return name_; }
    const std::vector<LayerDesc>& layers() const noexcept { return layers_; }
    std::vector<LayerParams<T>>& params() noexcept { return params_; }
    const std::vector<LayerParams<T>>& params() const noexcept { return params_; }

    /// Trainable tensors in a fixed order.
    std::vector<Tensor<T>*> trainable() {
        std::vector<Tensor<T>*> out;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            out.push_back(&params_[i].weight);
            out.push_back(&params_[i].bias);
            if (layers_[i].batchnorm) {
                out.push_back(&params_[i].gamma);
                out.push_back(&params_[i].beta);
            }
        }
        return out;
    }

    /// Every stored tensor (trainable and running statistics) with a unique name.
    std::vector<NamedTensor<T>> named_tensors() {
        std::vector<NamedTensor<T>> out;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto prefix = name_ + "." + std::to_string(i) + ".";
            out.push_back({prefix + "weight", &params_[i].weight});
            out.push_back({prefix + "bias", &params_[i].bias});
            if (layers_[i].batchnorm) {
                out.push_back({prefix + "bn.gamma", &params_[i].gamma});
                out.push_back({prefix + "bn.beta", &params_[i].beta});
                out.push_back({prefix + "bn.running_mean", &params_[i].running.mean});
                out.push_back({prefix + "bn.running_var", &params_[i].running.var});
            }
        }
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            n += params_[i].weight.size() + params_[i].bias.size();
            if (layers_[i].batchnorm) n += params_[i].gamma.size() + params_[i].beta.size();
        }
        return n;
    }

    void initialize(std::mt19937_64& rng, double std_dev) {
        std::normal_distribution<double> weight_dist(0.0, std_dev), gamma_dist(1.0, std_dev);
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            for (auto& v : params_[i].weight.values()) v = static_cast<T>(weight_dist(rng));
            params_[i].bias.fill(T{0});
            if (layers_[i].batchnorm) {
                for (auto& v : params_[i].gamma.values()) v = static_cast<T>(gamma_dist(rng));
                params_[i].beta.fill(T{0});
                params_[i].running.mean.fill(T{0});
                params_[i].running.var.fill(T{1});
            }
        }
    }

    /// Runs the layer stack on `x` (N,C,H,W). When `param_vars` is given it
    /// receives the tape variables of trainable() in the same order.
    Var forward(Tape<T>& tape, Var x, const ForwardOptions& opt, T bn_momentum, T bn_eps,
                std::vector<Var>* param_vars = nullptr) {
        const auto& in = tape.value(x).shape();
        if (in.size() != 4 || in[1] != layers_.front().in_channels)
            throw ShapeError(name_ + ": input shape " + to_string(in) + " does not match " +
                             std::to_string(layers_.front().in_channels) + " input channels");
        Var h = x;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto& l = layers_[i];
            auto& p = params_[i];
            Var w = tape.parameter(p.weight, opt.parameter_grads);
            Var b = tape.parameter(p.bias, opt.parameter_grads);
            if (param_vars) {
                param_vars->push_back(w);
                param_vars->push_back(b);
            }
            h = l.kind == LayerDesc::Kind::conv ? conv2d(tape, h, w, b, l.geometry)
                                                : conv_transpose2d(tape, h, w, b, l.geometry);
            if (l.batchnorm) {
                Var g = tape.parameter(p.gamma, opt.parameter_grads);
                Var be = tape.parameter(p.beta, opt.parameter_grads);
                if (param_vars) {
                    param_vars->push_back(g);
                    param_vars->push_back(be);
                }
                auto* running = (opt.mode == Mode::eval || opt.update_running_stats) ? &p.running : nullptr;
                h = batchnorm2d(tape, h, g, be, opt.mode, running, bn_momentum, bn_eps);
            }
            if (l.activation) h = activate(tape, h, *l.activation);
        }
        return h;
    }

private:
    std::string name_;
    std::vector<LayerDesc> layers_;
    std::vector<LayerParams<T>> params_;
};

namespace detail {

// Strided stack C -> w -> 2w -> ... then a head conv down to 1x1 with `out` channels.
inline std::vector<LayerDesc> encoder_layers(const NetworkSpec& s, std::size_t out, std::optional<Activation> head) {
    std::vector<LayerDesc> layers;
    std::size_t in = s.channels, width = s.base_width;
    for (std::size_t i = 0; i < s.stages; ++i) {
        layers.push_back({LayerDesc::Kind::conv, in, width, 4, {2, 1}, i > 0, Activation::leaky_relu});
        in = width;
        width *= 2;
    }
    layers.push_back({LayerDesc::Kind::conv, in, out, s.head_kernel(), {1, 0}, false, head});
    return layers;
}

inline std::vector<LayerDesc> decoder_layers(const NetworkSpec& s) {
    std::vector<LayerDesc> layers;
    std::size_t width = s.base_width << (s.stages - 1);
    layers.push_back({LayerDesc::Kind::conv_transpose, s.latent_dim, width, s.head_kernel(), {1, 0}, true,
                      Activation::relu});
    for (std::size_t i = 0; i + 1 < s.stages; ++i) {
        layers.push_back({LayerDesc::Kind::conv_transpose, width, width / 2, 4, {2, 1}, true, Activation::relu});
        width /= 2;
    }
    layers.push_back({LayerDesc::Kind::conv_transpose, width, s.channels, 4, {2, 1}, false, Activation::tanh});
    return layers;
}

}  // namespace detail

/// Generator encoder and decoder, auxiliary encoder, discriminator.
template <typename T>
struct NetworkState {
    NetworkSpec spec;
    Network<T> encoder, decoder, aux_encoder, discriminator;

    Network<T>& network(Role r) {
        switch (r) {
            case Role::encoder: return encoder;
            case Role::decoder: return decoder;
            case Role::aux_encoder: return aux_encoder;
            case Role::discriminator: return discriminator;
        }
        throw Error("unknown network role");
    }

    std::vector<NamedTensor<T>> named_tensors() {
        std::vector<NamedTensor<T>> out;
        for (auto* n : {&encoder, &decoder, &aux_encoder, &discriminator}) {
            auto part = n->named_tensors();
            out.insert(out.end(), part.begin(), part.end());
        }
        return out;
    }

    T bn_momentum() const { return static_cast<T>(spec.bn_momentum); }
    T bn_eps() const { return static_cast<T>(spec.bn_eps); }
};

/// Fresh networks with N(0, init_std) weights drawn from one seeded stream.
template <typename T>
NetworkState<T> build_networks(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    NetworkState<T> s{spec,
                      Network<T>("encoder", detail::encoder_layers(spec, spec.latent_dim, std::nullopt)),
                      Network<T>("decoder", detail::decoder_layers(spec)),
                      Network<T>("aux_encoder", detail::encoder_layers(spec, spec.latent_dim, std::nullopt)),
                      Network<T>("discriminator", detail::encoder_layers(spec, 1, Activation::sigmoid))};
    std::mt19937_64 rng(seed);
    for (auto* n : {&s.encoder, &s.decoder, &s.aux_encoder, &s.discriminator}) n->initialize(rng, spec.init_std);
    return s;
}

/// Copies every stored tensor of `from` into `to`; topologies must match.
template <typename T>
void copy_parameters(const Network<T>& from, Network<T>& to) {
    if (from.layers().size() != to.layers().size()) throw ShapeError("copy_parameters: layer count mismatch");
    for (std::size_t i = 0; i < from.params().size(); ++i) {
        const auto& a = from.params()[i];
        auto& b = to.params()[i];
        require_shape(a.weight.shape(), b.weight.shape(), "copy_parameters");
        b = a;
    }
}

// ---- tape-level building blocks -------------------------------------------

template <typename T>
void require_image_shape(const NetworkSpec& s, const Shape& x, const char* what) {
    if (x.size() != 4 || x[1] != s.channels || x[2] != s.image_size || x[3] != s.image_size)
        throw ShapeError(std::string(what) + ": expected (B," + std::to_string(s.channels) + "," +
                         std::to_string(s.image_size) + "," + std::to_string(s.image_size) + "), got " + to_string(x));
}

/// Ge: (B,C,H,W) -> (B,d)
template <typename T>
Var encode(Tape<T>& tape, NetworkState<T>& s, Network<T>& enc, Var x, const ForwardOptions& opt,
           std::vector<Var>* param_vars = nullptr) {
    require_image_shape<T>(s.spec, tape.value(x).shape(), enc.name().c_str());
    const auto batch = tape.value(x).dim(0);
    Var h = enc.forward(tape, x, opt, s.bn_momentum(), s.bn_eps(), param_vars);
    return reshape(tape, h, {batch, s.spec.latent_dim});
}

/// Gd: (B,d) -> (B,C,H,W)
template <typename T>
Var decode(Tape<T>& tape, NetworkState<T>& s, Var z, const ForwardOptions& opt, std::vector<Var>* param_vars = nullptr) {
    const auto& zs = tape.value(z).shape();
    if (zs.size() != 2 || zs[1] != s.spec.latent_dim)
        throw ShapeError("decoder: expected (B," + std::to_string(s.spec.latent_dim) + "), got " + to_string(zs));
    Var h = reshape(tape, z, {zs[0], zs[1], 1, 1});
    return s.decoder.forward(tape, h, opt, s.bn_momentum(), s.bn_eps(), param_vars);
}

/// D: (B,C,H,W) -> (B,1) probabilities.
template <typename T>
Var discriminate(Tape<T>& tape, NetworkState<T>& s, Var x, const ForwardOptions& opt,
                 std::vector<Var>* param_vars = nullptr) {
    require_image_shape<T>(s.spec, tape.value(x).shape(), "discriminator");
    const auto batch = tape.value(x).dim(0);
    Var h = s.discriminator.forward(tape, x, opt, s.bn_momentum(), s.bn_eps(), param_vars);
    return reshape(tape, h, {batch, 1});
}

// ---- eval-mode convenience ----------------------------------------------

template <typename T>
struct GeneratorOutput {
    Tensor<T> z, reconstruction;
};

/// z = Ge(x), x' = Gd(z). Eval mode never mutates the state.
template <typename T>
GeneratorOutput<T> forward_generator(NetworkState<T>& s, const Tensor<T>& x, Mode mode = Mode::eval) {
    Tape<T> tape;
    const ForwardOptions opt{mode, false, false};
    Var z = encode(tape, s, s.encoder, tape.constant(x), opt);
    Var xr = decode(tape, s, z, opt);
    return {tape.value(z), tape.value(xr)};
}

/// z' = Ge'(x')
template <typename T>
Tensor<T> forward_aux(NetworkState<T>& s, const Tensor<T>& xr, Mode mode = Mode::eval) {
    Tape<T> tape;
    return tape.value(encode(tape, s, s.aux_encoder, tape.constant(xr), {mode, false, false}));
}

template <typename T>
Tensor<T> forward_discriminator(NetworkState<T>& s, const Tensor<T>& x, Mode mode = Mode::eval) {
    Tape<T> tape;
    return tape.value(discriminate(tape, s, tape.constant(x), {mode, false, false}));
}

}  // namespace lrad
