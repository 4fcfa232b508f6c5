#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "lrad/adam.hpp"
#include "lrad/datasets.hpp"
#include "lrad/losses.hpp"
#include "lrad/networks.hpp"

namespace lrad {

enum class Precision { f32, f64 };

inline const char* name(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    AdamConfig adam{};  // learning rate 0.002, beta1 0.5, beta2 0.999
    LossWeights weights{};
    RankBudget rank{};
    std::uint64_t seed = 7;
    Precision precision = Precision::f32;
    std::size_t checkpoint_interval = 0;  // epochs between checkpoints, 0 = only the caller's final save

    void validate() const {
        if (batch_size < 2) throw ConfigError("batch size must be at least 2");
        if (!(adam.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
        if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
            throw ConfigError("Adam betas must lie in [0, 1)");
        for (double w : {weights.irec, weights.adv, weights.zrec, weights.rank})
            if (!std::isfinite(w) || w < 0.0) throw ConfigError("loss weights must be finite and non-negative");
    }
};

struct TrainHistory {
    std::vector<LossBreakdown> iterations;
    std::vector<double> epoch_seconds;
    std::uint64_t seed = 0;
    TrainConfig config;
};

/// Per-epoch progress: (epoch index, mean breakdown over the epoch).
using EpochCallback = std::function<void(std::size_t, const LossBreakdown&)>;

namespace detail {

template <typename T>
Tensor<T> gather_batch(const LabeledImages& data, const std::vector<std::size_t>& order, std::size_t first,
                       std::size_t count) {
    const auto per = data.sample_elements();
    Shape s = data.images.shape();
    s[0] = count;
    Tensor<T> batch(s);
    for (std::size_t k = 0; k < count; ++k) {
        const float* src = data.images.data() + order[first + k] * per;
        for (std::size_t i = 0; i < per; ++i) batch[k * per + i] = static_cast<T>(src[i]);
    }
    return batch;
}

inline std::string describe(const LossBreakdown& b) {
    std::ostringstream os;
    os << "irec=" << b.irec << " adv_g=" << b.adv_g << " adv_d=" << b.adv_d << " zrec=" << b.zrec
       << " rank=" << b.rank << " total=" << b.total;
    return os.str();
}

}  // namespace detail

/// Optimizer state for the two players.
template <typename T>
struct Optimizers {
    AdamState<T> discriminator, generator;
};

template <typename T>
std::vector<Tensor<T>*> generator_parameters(NetworkState<T>& s) {
    std::vector<Tensor<T>*> out;
    for (auto* n : {&s.encoder, &s.decoder, &s.aux_encoder}) {
        auto p = n->trainable();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

/// One alternating update on a batch: discriminator on adv_d, then encoder,
/// decoder and auxiliary encoder jointly on the weighted generator total.
template <typename T>
LossBreakdown train_step(NetworkState<T>& s, Optimizers<T>& opt, const Tensor<T>& batch, const TrainConfig& cfg) {
    const ForwardOptions train_grads{Mode::train, true, true};

    // (1) generator and auxiliary encoder forward.
    Tape<T> gen;
    std::vector<Var> enc_vars, dec_vars, aux_vars;
    Var x = gen.constant(batch);
    Var z = encode(gen, s, s.encoder, x, train_grads, &enc_vars);
    Var xr = decode(gen, s, z, train_grads, &dec_vars);
    Var zr = encode(gen, s, s.aux_encoder, xr, train_grads, &aux_vars);

    // (2) discriminator update on real vs. reconstructed images.
    Tape<T> disc;
    std::vector<Var> d_vars;
    Var d_real = discriminate(disc, s, disc.constant(batch), train_grads, &d_vars);
    std::vector<Var> unused;
    Var d_fake = discriminate(disc, s, disc.constant(gen.value(xr)), train_grads, &unused);
    Var adv_d = loss_adv_d(disc, d_real, d_fake);
    disc.backward(adv_d);
    {
        auto params = s.discriminator.trainable();
        std::vector<Tensor<T>> grads;
        for (std::size_t k = 0; k < params.size(); ++k) {
            Tensor<T> g = disc.grad(d_vars[k]);
            add_inplace(g, disc.grad(unused[k]));
            grads.push_back(std::move(g));
        }
        adam_step<T>(params, grads, opt.discriminator);
    }

    // (3) generator-side update against the refreshed discriminator.
    Var d_gen = discriminate(gen, s, xr, ForwardOptions{Mode::train, false, false});
    Var irec = loss_irec(gen, x, xr);
    Var adv_g = loss_adv_g(gen, d_gen);
    Var zrec = loss_zrec(gen, z, zr);
    Var rank = loss_rank(gen, transpose2d(gen, z), cfg.rank);
    const auto& w = cfg.weights;
    Var total = weighted_sum<T>(gen, {irec, adv_g, zrec, rank},
                                {static_cast<T>(w.irec), static_cast<T>(w.adv), static_cast<T>(w.zrec),
                                 static_cast<T>(w.rank)});
    gen.backward(total);
    {
        auto params = generator_parameters(s);
        std::vector<Tensor<T>> grads;
        for (const auto* vars : {&enc_vars, &dec_vars, &aux_vars})
            for (auto v : *vars) grads.push_back(gen.grad(v));
        adam_step<T>(params, grads, opt.generator);
    }

    const LossComponents c{gen.value(irec)[0], gen.value(adv_g)[0], gen.value(zrec)[0], gen.value(rank)[0],
                           disc.value(adv_d)[0]};
    return loss_total(c, w);
}

/// Alternating adversarial training on the normal-only training set.
/// Epoch order is reshuffled from (seed, epoch); partial batches are dropped.
template <typename T>
TrainHistory train(NetworkState<T>& state, const TrainConfig& cfg, const LabeledImages& train_normals,
                   const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (train_normals.size() == 0) throw DataError("train: the normal training set is empty");
    train_normals.validate();
    if (train_normals.size() < cfg.batch_size)
        throw DataError("train: " + std::to_string(train_normals.size()) + " training samples cannot fill one batch of " +
                        std::to_string(cfg.batch_size));
    cfg.rank.validate(state.spec.latent_dim, cfg.batch_size);

    TrainHistory history;
    history.seed = cfg.seed;
    history.config = cfg;
    Optimizers<T> opt;
    opt.discriminator.config = cfg.adam;
    opt.generator.config = cfg.adam;

    const auto batches = train_normals.size() / cfg.batch_size;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        const auto order = seeded_permutation(train_normals.size(), cfg.seed * 0x9E3779B97F4A7C15ull + epoch);
        LossBreakdown mean{};
        for (std::size_t b = 0; b < batches; ++b) {
            const auto batch = detail::gather_batch<T>(train_normals, order, b * cfg.batch_size, cfg.batch_size);
            LossBreakdown step;
            try {
                step = train_step(state, opt, batch, cfg);
            } catch (const NumericalError& e) {
                const auto last = history.iterations.empty() ? LossBreakdown{} : history.iterations.back();
                throw NumericalError("training diverged at iteration " + std::to_string(history.iterations.size()) +
                                     " (epoch " + std::to_string(epoch) + "): " + e.what() +
                                     "; previous losses " + detail::describe(last));
            }
            history.iterations.push_back(step);
            mean.irec += step.irec / batches;
            mean.adv_g += step.adv_g / batches;
            mean.adv_d += step.adv_d / batches;
            mean.zrec += step.zrec / batches;
            mean.rank += step.rank / batches;
            mean.total += step.total / batches;
        }
        history.epoch_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        if (on_epoch) on_epoch(epoch, mean);
    }
    return history;
}

}  // namespace lrad
