#pragma once

// Batch command-line surface: argument/config resolution and run dispatch.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lrad/checkpoint.hpp"
#include "lrad/csv.hpp"
#include "lrad/eval.hpp"
#include "lrad/gemm.hpp"
#include "lrad/image_io.hpp"
#include "lrad/serialization.hpp"
#include "lrad/synth.hpp"

namespace lrad::cli {

enum ExitCode { kOk = 0, kFailure = 1, kConfigError = 2, kDataError = 3, kNumericalError = 4 };

struct DatasetConfig {
    std::string kind = "synth";  // mnist | cifar10 | dir | synth
    std::string images, labels, dir;
    std::size_t channels = 1;  // dir datasets only
    Normalization normalization = Normalization::tanh_range;
    SynthSpec synth{};
};

struct RunConfig {
    std::string command;
    DatasetConfig data;
    int held_class = 1;
    Polarity polarity = Polarity::class_is_anomaly;
    double train_fraction = 0.8;
    NetworkSpec network{};
    TrainConfig train{};
    std::filesystem::path out = "lrad_run";
    std::string checkpoint;
    bool deterministic = false;
    std::vector<Variant> variants{Variant::irec_adv, Variant::irec_adv_rank, Variant::irec_adv_zrec, Variant::full};
    std::size_t projection_dims = 3;
};

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"train", "score", "eval", "ablate", "synth"};
    return c;
}

inline const char* name(Polarity p) {
    return p == Polarity::class_is_anomaly ? "class-is-anomaly" : "class-is-normal";
}

inline Polarity polarity_from_string(const std::string& s) {
    if (s == "class-is-anomaly" || s == "class_is_anomaly") return Polarity::class_is_anomaly;
    if (s == "class-is-normal" || s == "class_is_normal") return Polarity::class_is_normal;
    throw ConfigError("polarity must be class-is-anomaly or class-is-normal, got '" + s + "'");
}

inline const char* name(Normalization n) { return n == Normalization::tanh_range ? "tanh_range" : "zscore"; }

inline Normalization normalization_from_string(const std::string& s) {
    if (s == "tanh_range" || s == "tanh-range") return Normalization::tanh_range;
    if (s == "zscore") return Normalization::zscore;
    throw ConfigError("normalization must be tanh_range or zscore, got '" + s + "'");
}

// ---- JSON form ------------------------------------------------------------

inline json to_json(const SynthSpec& s) {
    return {{"image_size", s.image_size},   {"normal_count", s.normal_count},
            {"anomaly_count", s.anomaly_count}, {"radius_min", s.radius_min},
            {"radius_max", s.radius_max},   {"background", s.background},
            {"disk", s.disk},               {"stripe_contrast", s.stripe_contrast},
            {"patch_size", s.patch_size},   {"stripe_period", s.stripe_period},
            {"noise", s.noise},             {"seed", s.seed}};
}

inline SynthSpec synth_from_json(const json& j, SynthSpec s) {
    const std::string w = "data.synth";
    detail::reject_unknown(j, {"image_size", "normal_count", "anomaly_count", "radius_min", "radius_max", "background",
                               "disk", "stripe_contrast", "patch_size", "stripe_period", "noise", "seed"},
                           w);
    detail::read_opt(j, "image_size", s.image_size, w);
    detail::read_opt(j, "normal_count", s.normal_count, w);
    detail::read_opt(j, "anomaly_count", s.anomaly_count, w);
    detail::read_opt(j, "radius_min", s.radius_min, w);
    detail::read_opt(j, "radius_max", s.radius_max, w);
    detail::read_opt(j, "background", s.background, w);
    detail::read_opt(j, "disk", s.disk, w);
    detail::read_opt(j, "stripe_contrast", s.stripe_contrast, w);
    detail::read_opt(j, "patch_size", s.patch_size, w);
    detail::read_opt(j, "stripe_period", s.stripe_period, w);
    detail::read_opt(j, "noise", s.noise, w);
    detail::read_opt(j, "seed", s.seed, w);
    return s;
}

inline json to_json(const RunConfig& c) {
    json variants = json::array();
    for (auto v : c.variants) variants.push_back(name(v));
    return {{"command", c.command},
            {"data",
             {{"kind", c.data.kind},
              {"images", c.data.images},
              {"labels", c.data.labels},
              {"dir", c.data.dir},
              {"channels", c.data.channels},
              {"normalization", name(c.data.normalization)},
              {"synth", to_json(c.data.synth)}}},
            {"held_class", c.held_class},
            {"polarity", name(c.polarity)},
            {"train_fraction", c.train_fraction},
            {"network", to_json(c.network)},
            {"train", to_json(c.train)},
            {"out", c.out.string()},
            {"checkpoint", c.checkpoint},
            {"deterministic", c.deterministic},
            {"variants", variants},
            {"projection_dims", c.projection_dims}};
}

inline void apply_json(const json& j, RunConfig& c) {
    const std::string w = "config";
    detail::reject_unknown(j, {"command", "data", "held_class", "polarity", "train_fraction", "network", "train", "out",
                               "checkpoint", "deterministic", "variants", "projection_dims"},
                           w);
    detail::read_opt(j, "held_class", c.held_class, w);
    detail::read_opt(j, "train_fraction", c.train_fraction, w);
    detail::read_opt(j, "checkpoint", c.checkpoint, w);
    detail::read_opt(j, "deterministic", c.deterministic, w);
    detail::read_opt(j, "projection_dims", c.projection_dims, w);
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    if (j.contains("polarity")) c.polarity = polarity_from_string(j.at("polarity").get<std::string>());
    if (j.contains("network")) c.network = network_spec_from_json(j.at("network"), c.network);
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
    if (j.contains("variants")) {
        c.variants.clear();
        for (const auto& v : j.at("variants")) c.variants.push_back(variant_from_string(v.get<std::string>()));
    }
    if (j.contains("data")) {
        const auto& d = j.at("data");
        detail::reject_unknown(d, {"kind", "images", "labels", "dir", "channels", "normalization", "synth"}, "config.data");
        detail::read_opt(d, "kind", c.data.kind, "config.data");
        detail::read_opt(d, "images", c.data.images, "config.data");
        detail::read_opt(d, "labels", c.data.labels, "config.data");
        detail::read_opt(d, "dir", c.data.dir, "config.data");
        detail::read_opt(d, "channels", c.data.channels, "config.data");
        if (d.contains("normalization"))
            c.data.normalization = normalization_from_string(d.at("normalization").get<std::string>());
        if (d.contains("synth")) c.data.synth = synth_from_json(d.at("synth"), c.data.synth);
    }
}

// ---- parsing ---------------------------------------------------------------

inline std::vector<double> parse_weights(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("--weights: '" + item + "' is not a number");
        }
    }
    if (out.size() != 4) throw ConfigError("--weights expects four comma-separated values wi,wa,wz,wr");
    return out;
}

/// Number of classes a dataset kind can hold, when known without reading it.
inline std::optional<std::size_t> class_count(const DatasetConfig& d) {
    if (d.kind == "mnist" || d.kind == "cifar10") return 10;
    if (d.kind == "synth") return 2;
    if (d.kind == "dir" && std::filesystem::is_directory(d.dir)) {
        std::size_t n = 0;
        bool loose = false;
        for (const auto& e : std::filesystem::directory_iterator(d.dir)) {
            if (e.is_directory()) ++n;
            else if (e.is_regular_file()) loose = true;
        }
        return n + (loose ? 1 : 0);
    }
    return std::nullopt;
}

inline void validate(RunConfig& c) {
    if (std::find(commands().begin(), commands().end(), c.command) == commands().end())
        throw ConfigError("unknown command '" + c.command + "' (expected train, score, eval, ablate or synth)");
    const auto& d = c.data;
    auto require_file = [](const std::string& p, const char* flag) {
        if (p.empty()) throw ConfigError(std::string(flag) + " is required for this dataset");
        if (!std::filesystem::exists(p)) throw ConfigError(std::string(flag) + ": path '" + p + "' does not exist");
    };
    if (d.kind == "mnist") {
        require_file(d.images, "--images");
        require_file(d.labels, "--labels");
        c.network.channels = 1;
    } else if (d.kind == "cifar10") {
        require_file(d.dir.empty() ? d.images : d.dir, "--dir");
        c.network.channels = 3;
    } else if (d.kind == "dir") {
        require_file(d.dir, "--dir");
        if (d.channels != 1 && d.channels != 3) throw ConfigError("data.channels must be 1 or 3");
        c.network.channels = d.channels;
    } else if (d.kind == "synth") {
        c.data.synth.image_size = c.network.image_size;
        c.data.synth.validate();
        c.network.channels = 1;
    } else {
        throw ConfigError("--data must be one of mnist, cifar10, dir, synth (got '" + d.kind + "')");
    }
    if (c.command != "synth") {
        if (const auto n = class_count(c.data); n && (c.held_class < 0 || static_cast<std::size_t>(c.held_class) >= *n))
            throw ConfigError("--held-class " + std::to_string(c.held_class) + " is out of range for a " +
                              std::to_string(*n) + "-class dataset");
        if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0))
            throw ConfigError("train_fraction must lie in (0, 1)");
    }
    c.network.validate();
    c.train.validate();
    c.train.rank.validate(c.network.latent_dim, c.train.batch_size);
    if (c.command == "score" && c.checkpoint.empty()) throw ConfigError("score requires --checkpoint");
    if ((c.command == "score" || c.command == "eval") && !c.checkpoint.empty() && !std::filesystem::exists(c.checkpoint))
        throw ConfigError("--checkpoint: path '" + c.checkpoint + "' does not exist");
    if (c.projection_dims == 0 || c.projection_dims > c.network.latent_dim)
        throw ConfigError("projection_dims must lie in [1, latent_dim]");
    if (c.variants.empty()) throw ConfigError("at least one ablation variant is required");
    std::error_code ec;
    std::filesystem::create_directories(c.out, ec);
    if (ec || !std::filesystem::is_directory(c.out))
        throw ConfigError("--out: cannot create directory '" + c.out.string() + "'");
}

/// Resolves flags over an optional JSON config file over defaults, validates,
/// and writes `<out>/resolved_config.json`.
inline RunConfig parse_and_validate(int argc, const char* const* argv) {
    CLI::App app{"Low-rank latent adversarial anomaly detection", "lrad"};
    app.set_help_flag("-h,--help");
    std::string command, config_file, data_kind, images, labels, dir, polarity, weights, precision, normalization,
        out, checkpoint, variants;
    int held_class = 0;
    std::size_t epochs = 0, batch = 0, latent = 0, rank = 0, base_width = 0, channels = 0;
    double lr = 0, train_fraction = 0;
    std::uint64_t seed = 0;
    bool deterministic = false;

    app.add_option("command", command, "train | score | eval | ablate | synth")->required();
    app.add_option("--config", config_file, "JSON config file; flags take precedence");
    app.add_option("--data", data_kind, "mnist | cifar10 | dir | synth");
    app.add_option("--images", images, "IDX image file");
    app.add_option("--labels", labels, "IDX label file");
    app.add_option("--dir", dir, "CIFAR-10 batch directory or <root>/<label>/<file> image directory");
    app.add_option("--channels", channels, "channels for image directories (1 or 3)");
    app.add_option("--normalize", normalization, "tanh_range | zscore");
    app.add_option("--held-class", held_class, "class id singled out by the one-class protocol");
    app.add_option("--polarity", polarity, "class-is-anomaly | class-is-normal");
    app.add_option("--train-fraction", train_fraction, "share of normal samples used for training");
    app.add_option("--epochs", epochs);
    app.add_option("--batch", batch);
    app.add_option("--lr", lr);
    app.add_option("--latent-dim", latent);
    app.add_option("--base-width", base_width, "channel width of the first convolution");
    app.add_option("--rank", rank, "target rank of the latent batch matrix");
    app.add_option("--weights", weights, "wi,wa,wz,wr");
    app.add_option("--precision", precision, "f32 | f64");
    app.add_option("--seed", seed);
    app.add_option("--out", out, "output directory");
    app.add_option("--checkpoint", checkpoint, "checkpoint to write (train) or read (score, eval)");
    app.add_option("--variants", variants, "comma-separated ablation variants");
    app.add_flag("--deterministic", deterministic, "single worker thread, bitwise-reproducible output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        std::exit(kOk);
    } catch (const CLI::ParseError& e) {
        throw ConfigError(e.what());
    }

    RunConfig c;
    if (!config_file.empty()) {
        std::ifstream in(config_file);
        if (!in) throw ConfigError("--config: cannot read '" + config_file + "'");
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError("--config: " + std::string(e.what()));
        }
        apply_json(j, c);
    }
    c.command = command;
    auto given = [&](const char* flag) { return app.count(flag) > 0; };
    if (given("--data")) c.data.kind = data_kind;
    if (given("--images")) c.data.images = images;
    if (given("--labels")) c.data.labels = labels;
    if (given("--dir")) c.data.dir = dir;
    if (given("--channels")) c.data.channels = channels;
    if (given("--normalize")) c.data.normalization = normalization_from_string(normalization);
    if (given("--held-class")) c.held_class = held_class;
    if (given("--polarity")) c.polarity = polarity_from_string(polarity);
    if (given("--train-fraction")) c.train_fraction = train_fraction;
    if (given("--epochs")) c.train.epochs = epochs;
    if (given("--batch")) c.train.batch_size = batch;
    if (given("--lr")) c.train.adam.learning_rate = lr;
    if (given("--latent-dim")) c.network.latent_dim = latent;
    if (given("--base-width")) c.network.base_width = base_width;
    if (given("--rank")) c.train.rank.r = rank;
    if (given("--precision")) c.train.precision = precision_from_string(precision);
    if (given("--seed")) {
        c.train.seed = seed;
        c.data.synth.seed = seed;
    }
    if (given("--out")) c.out = out;
    if (given("--checkpoint")) c.checkpoint = checkpoint;
    if (given("--deterministic")) c.deterministic = deterministic;
    if (given("--weights")) {
        const auto w = parse_weights(weights);
        c.train.weights = {w[0], w[1], w[2], w[3]};
    }
    if (given("--variants")) {
        c.variants.clear();
        std::stringstream ss(variants);
        std::string item;
        while (std::getline(ss, item, ',')) c.variants.push_back(variant_from_string(item));
    }

    validate(c);
    std::ofstream(c.out / "resolved_config.json") << to_json(c).dump(2) << '\n';
    return c;
}

// ---- running ---------------------------------------------------------------

inline LabeledImages load_dataset(const RunConfig& c) {
    const auto& d = c.data;
    LabeledImages data;
    if (d.kind == "mnist") {
        data = pad_to(read_idx(d.images, d.labels), c.network.image_size);
    } else if (d.kind == "cifar10") {
        data = read_cifar10(d.dir.empty() ? d.images : d.dir);
    } else if (d.kind == "dir") {
        data = read_image_dir(d.dir, d.channels, c.network.image_size);
    } else {
        data = synth_generate(d.synth);
    }
    if (data.height() != c.network.image_size || data.width() != c.network.image_size)
        throw DataError("dataset images are " + std::to_string(data.height()) + "x" + std::to_string(data.width()) +
                        " but the network expects " + std::to_string(c.network.image_size));
    // Readers already deliver the [-1, 1] range; only zscore needs a pass.
    if (d.normalization == Normalization::zscore) data = normalize(std::move(data), Normalization::zscore);
    return data;
}

inline void configure_threads(const RunConfig& c) {
    int threads = 0;
    if (const char* env = std::getenv("LRAD_THREADS")) threads = std::atoi(env);
    if (c.deterministic) threads = 1;
    if (threads > 0) set_worker_threads(threads);
}

inline void log_epoch(const std::string& tag, std::size_t epoch, const LossBreakdown& b) {
    std::cerr << tag << "epoch " << epoch + 1 << ": irec=" << b.irec << " adv_g=" << b.adv_g << " adv_d=" << b.adv_d
              << " zrec=" << b.zrec << " rank=" << b.rank << " total=" << b.total << '\n';
}

template <typename T>
int run_typed(const RunConfig& c, std::ostream& out) {
    const auto& dir = c.out;
    if (c.command == "synth") {
        auto data = synth_generate(c.data.synth);
        write_idx(data, dir / "synth-images-idx3-ubyte", dir / "synth-labels-idx1-ubyte");
        out << "wrote " << data.size() << " samples to " << (dir / "synth-images-idx3-ubyte").string() << '\n';
        return kOk;
    }

    const auto data = load_dataset(c);
    const auto split = one_class_split(data, c.held_class, c.polarity, c.train_fraction, c.train.seed);

    if (c.command == "train") {
        auto state = build_networks<T>(c.network, c.train.seed);
        const auto ckpt = c.checkpoint.empty() ? dir / "model.lrad" : std::filesystem::path(c.checkpoint);
        TrainHistory partial;
        auto history = train(state, c.train, split.train_normals, [&](std::size_t epoch, const LossBreakdown& b) {
            log_epoch("", epoch, b);
            if (c.train.checkpoint_interval && (epoch + 1) % c.train.checkpoint_interval == 0 && epoch + 1 < c.train.epochs) {
                partial.config = c.train;
                partial.seed = c.train.seed;
                save_checkpoint(state, partial, dir / ("model-epoch" + std::to_string(epoch + 1) + ".lrad"));
            }
        });
        save_checkpoint(state, history, ckpt);
        write_history_csv(history, dir / "history.csv");
        out << "trained " << history.iterations.size() << " iterations; checkpoint " << ckpt.string() << '\n';
        return kOk;
    }

    if (c.command == "ablate") {
        const auto rows = run_ablation<T>(c.network, c.train, split, c.variants,
                                          [](Variant v, std::size_t e, const LossBreakdown& b) {
                                              log_epoch(std::string("[") + name(v) + "] ", e, b);
                                          });
        write_ablation_csv(rows, dir / "ablation.csv");
        for (const auto& r : rows)
            out << name(r.variant) << " (" << name(r.score) << " score): AUC " << format_number(r.auc) << '\n';
        return kOk;
    }

    // score / eval
    NetworkState<T> state = c.checkpoint.empty() ? build_networks<T>(c.network, c.train.seed)
                                                 : load_checkpoint<T>(c.checkpoint).state;
    if (state.spec.channels != data.channels() || state.spec.image_size != data.height())
        throw DataError("checkpoint network does not match the dataset's image shape");
    const auto records = score_dataset(state, split.test, split.test_anomaly_flags);
    write_scores_csv(records, dir / "scores.csv");
    const double auc_latent = auc(records, ScoreKind::latent);
    const double auc_pixel = auc(records, ScoreKind::pixel);
    if (c.command == "eval") {
        write_roc_csv(roc_points(scores_of(records, ScoreKind::latent), flags_of(records)), dir / "roc.csv");
        write_latent_csv(latent_projection(state, split.test, split.test_anomaly_flags, c.projection_dims),
                         dir / "latent3d.csv");
        std::ofstream summary(dir / "eval_summary.csv", std::ios::binary);
        summary << "metric,value\nauc_latent," << format_number(auc_latent) << "\nauc_pixel," << format_number(auc_pixel)
                << '\n';
    }
    out << "AUC latent " << format_number(auc_latent) << '\n' << "AUC pixel " << format_number(auc_pixel) << '\n';
    return kOk;
}

inline Precision run_precision(const RunConfig& c) {
    if ((c.command == "score" || c.command == "eval") && !c.checkpoint.empty())
        return read_checkpoint_header(c.checkpoint).precision;
    return c.train.precision;
}

/// Executes a validated configuration; module errors map onto exit codes.
inline int run(const RunConfig& c, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    try {
        configure_threads(c);
        return run_precision(c) == Precision::f32 ? run_typed<float>(c, out) : run_typed<double>(c, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kNumericalError;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const ShapeError& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
}

/// parse_and_validate + run with exit-code mapping, as used by main().
inline int main(int argc, const char* const* argv) {
    RunConfig c;
    try {
        c = parse_and_validate(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    return run(c);
}

}  // namespace lrad::cli
