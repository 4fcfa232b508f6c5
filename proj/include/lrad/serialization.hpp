#pragma once

// JSON forms of the configuration types. Unknown keys are rejected so that
// typos in config files surface as errors instead of silent defaults.

#include <set>
#include <string>

#include "json.hpp"
#include "lrad/trainer.hpp"

namespace lrad {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (const auto& [key, _] : j.items())
        if (!known.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename V>
void read_opt(const json& j, const char* key, V& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<V>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

}  // namespace detail

inline json to_json(const NetworkSpec& s) {
    return {{"channels", s.channels},     {"image_size", s.image_size},   {"latent_dim", s.latent_dim},
            {"base_width", s.base_width}, {"stages", s.stages},           {"bn_momentum", s.bn_momentum},
            {"bn_eps", s.bn_eps},         {"init_std", s.init_std}};
}

inline NetworkSpec network_spec_from_json(const json& j, NetworkSpec s = {}) {
    const std::string where = "network";
    detail::reject_unknown(j, {"channels", "image_size", "latent_dim", "base_width", "stages", "bn_momentum", "bn_eps",
                               "init_std"},
                           where);
    detail::read_opt(j, "channels", s.channels, where);
    detail::read_opt(j, "image_size", s.image_size, where);
    detail::read_opt(j, "latent_dim", s.latent_dim, where);
    detail::read_opt(j, "base_width", s.base_width, where);
    detail::read_opt(j, "stages", s.stages, where);
    detail::read_opt(j, "bn_momentum", s.bn_momentum, where);
    detail::read_opt(j, "bn_eps", s.bn_eps, where);
    detail::read_opt(j, "init_std", s.init_std, where);
    return s;
}

inline json to_json(const LossWeights& w) {
    return {{"irec", w.irec}, {"adv", w.adv}, {"zrec", w.zrec}, {"rank", w.rank}};
}

inline json to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.adam.learning_rate},
            {"beta1", c.adam.beta1},
            {"beta2", c.adam.beta2},
            {"adam_eps", c.adam.eps},
            {"weights", to_json(c.weights)},
            {"rank", c.rank.r},
            {"seed", c.seed},
            {"precision", name(c.precision)},
            {"checkpoint_interval", c.checkpoint_interval}};
}

inline Precision precision_from_string(const std::string& s) {
    if (s == "f32" || s == "float32") return Precision::f32;
    if (s == "f64" || s == "float64") return Precision::f64;
    throw ConfigError("precision must be f32 or f64, got '" + s + "'");
}

inline TrainConfig train_config_from_json(const json& j, TrainConfig c = {}) {
    const std::string where = "train";
    detail::reject_unknown(j, {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "adam_eps", "weights", "rank",
                               "seed", "precision", "checkpoint_interval"},
                           where);
    detail::read_opt(j, "epochs", c.epochs, where);
    detail::read_opt(j, "batch_size", c.batch_size, where);
    detail::read_opt(j, "learning_rate", c.adam.learning_rate, where);
    detail::read_opt(j, "beta1", c.adam.beta1, where);
    detail::read_opt(j, "beta2", c.adam.beta2, where);
    detail::read_opt(j, "adam_eps", c.adam.eps, where);
    detail::read_opt(j, "rank", c.rank.r, where);
    detail::read_opt(j, "seed", c.seed, where);
    detail::read_opt(j, "checkpoint_interval", c.checkpoint_interval, where);
    if (j.contains("precision")) c.precision = precision_from_string(j.at("precision").get<std::string>());
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        detail::reject_unknown(w, {"irec", "adv", "zrec", "rank"}, "train.weights");
        detail::read_opt(w, "irec", c.weights.irec, "train.weights");
        detail::read_opt(w, "adv", c.weights.adv, "train.weights");
        detail::read_opt(w, "zrec", c.weights.zrec, "train.weights");
        detail::read_opt(w, "rank", c.weights.rank, "train.weights");
    }
    return c;
}

}  // namespace lrad
