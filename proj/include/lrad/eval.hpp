#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "lrad/datasets.hpp"
#include "lrad/networks.hpp"
#include "lrad/svd.hpp"
#include "lrad/trainer.hpp"

namespace lrad {

struct ScoreRecord {
    std::string id;
    bool anomaly = false;
    double latent = 0.0;
    double pixel = 0.0;
};

/// Produces x' from (x, z); the default runs the decoder.
template <typename T>
using Reconstructor = std::function<Tensor<T>(const Tensor<T>& x, const Tensor<T>& z)>;

namespace detail {

template <typename T>
Tensor<T> reconstruct_with(NetworkState<T>& s, const Tensor<T>& x, const Tensor<T>& z, const Reconstructor<T>& fn) {
    if (fn) return fn(x, z);
    Tape<T> tape;
    return tape.value(decode(tape, s, tape.constant(z), {Mode::eval, false, false}));
}

template <typename T>
std::vector<double> row_l2(const Tensor<T>& a, const Tensor<T>& b) {
    require_shape(b.shape(), a.shape(), "latent score");
    const auto n = a.dim(0), d = a.size() / n;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = double(a[i * d + j]) - double(b[i * d + j]);
            acc += diff * diff;
        }
        out[i] = std::sqrt(acc);
    }
    return out;
}

template <typename T>
std::vector<double> row_mean_abs(const Tensor<T>& a, const Tensor<T>& b) {
    require_shape(b.shape(), a.shape(), "pixel score");
    const auto n = a.dim(0), d = a.size() / n;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += std::abs(double(a[i * d + j]) - double(b[i * d + j]));
        out[i] = acc / double(d);
    }
    return out;
}

}  // namespace detail

/// ||Ge(x) - Ge'(Gd(Ge(x)))||_2 per sample, eval mode.
template <typename T>
std::vector<double> score_latent(NetworkState<T>& s, const Tensor<T>& x, const Reconstructor<T>& reconstruct = {}) {
    require_image_shape<T>(s.spec, x.shape(), "score_latent");
    Tape<T> tape;
    const Tensor<T> z = tape.value(encode(tape, s, s.encoder, tape.constant(x), {Mode::eval, false, false}));
    const auto xr = detail::reconstruct_with(s, x, z, reconstruct);
    return detail::row_l2(z, forward_aux(s, xr));
}

/// Mean absolute error between x and Gd(Ge(x)) per sample, eval mode.
template <typename T>
std::vector<double> score_pixel(NetworkState<T>& s, const Tensor<T>& x, const Reconstructor<T>& reconstruct = {}) {
    require_image_shape<T>(s.spec, x.shape(), "score_pixel");
    Tape<T> tape;
    const Tensor<T> z = tape.value(encode(tape, s, s.encoder, tape.constant(x), {Mode::eval, false, false}));
    return detail::row_mean_abs(x, detail::reconstruct_with(s, x, z, reconstruct));
}

inline constexpr std::size_t kScoringChunk = 64;

/// Both scores for every sample, evaluated in fixed-size chunks.
template <typename T>
std::vector<ScoreRecord> score_dataset(NetworkState<T>& s, const LabeledImages& data, const std::vector<bool>& flags) {
    data.validate();
    if (flags.size() != data.size()) throw DataError("score_dataset: flag count does not match sample count");
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<ScoreRecord> out;
    out.reserve(data.size());
    for (std::size_t first = 0; first < data.size(); first += kScoringChunk) {
        const auto count = std::min(kScoringChunk, data.size() - first);
        const auto x = detail::gather_batch<T>(data, order, first, count);
        Tape<T> tape;
        const Tensor<T> z = tape.value(encode(tape, s, s.encoder, tape.constant(x), {Mode::eval, false, false}));
        const auto xr = detail::reconstruct_with<T>(s, x, z, {});
        const auto latent = detail::row_l2(z, forward_aux(s, xr));
        const auto pixel = detail::row_mean_abs(x, xr);
        for (std::size_t k = 0; k < count; ++k)
            out.push_back({data.ids[first + k], flags[first + k], latent[k], pixel[k]});
    }
    return out;
}

/// Min-max scaling onto [0, 1].
inline std::vector<double> normalize_scores(const std::vector<double>& scores) {
    if (scores.size() < 2) throw NumericalError("normalize_scores: need at least two scores");
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    if (!(*hi > *lo)) throw NumericalError("normalize_scores: all scores are equal (degenerate detector)");
    const double min = *lo, range = *hi - *lo;
    std::vector<double> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - min) / range;
    return out;
}

namespace detail {

inline void require_both_classes(const std::vector<double>& scores, const std::vector<bool>& flags, const char* what) {
    if (scores.size() != flags.size()) throw DataError(std::string(what) + ": score and flag counts differ");
    const auto pos = std::count(flags.begin(), flags.end(), true);
    if (pos == 0 || pos == static_cast<long>(flags.size()))
        throw DataError(std::string(what) + ": both normal and anomalous samples are required");
    for (double s : scores)
        if (!std::isfinite(s)) throw NumericalError(std::string(what) + ": non-finite score");
}

}  // namespace detail

/// Mann-Whitney AUC with average ranks for ties: P(anomaly outscores normal), ties count half.
inline double auc(const std::vector<double>& scores, const std::vector<bool>& anomaly) {
    detail::require_both_classes(scores, anomaly, "auc");
    const auto n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;  // over anomalies, ranks doubled to stay integral
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double doubled_rank = static_cast<double>(i + 1 + j);  // 2 * mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (anomaly[order[k]]) {
                rank_sum += doubled_rank;
                ++n_pos;
            }
        i = j;
    }
    const double n1 = static_cast<double>(n_pos), n0 = static_cast<double>(n - n_pos);
    const double u_doubled = rank_sum - n1 * (n1 + 1.0);
    return u_doubled / (2.0 * n1 * n0);
}

enum class ScoreKind { latent, pixel };

inline const char* name(ScoreKind k) { return k == ScoreKind::latent ? "latent" : "pixel"; }

inline std::vector<double> scores_of(const std::vector<ScoreRecord>& r, ScoreKind kind) {
    std::vector<double> out;
    for (const auto& x : r) out.push_back(kind == ScoreKind::latent ? x.latent : x.pixel);
    return out;
}

inline std::vector<bool> flags_of(const std::vector<ScoreRecord>& r) {
    std::vector<bool> out;
    for (const auto& x : r) out.push_back(x.anomaly);
    return out;
}

inline double auc(const std::vector<ScoreRecord>& records, ScoreKind kind) {
    return auc(scores_of(records, kind), flags_of(records));
}

struct RocPoint {
    double fpr, tpr, threshold;
};

struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

/// ROC with one point per distinct score (descending); starts at (0,0) with
/// an infinite threshold and ends at (1,1). `auc` is the trapezoidal area.
inline RocCurve roc_points(const std::vector<double>& scores, const std::vector<bool>& anomaly) {
    detail::require_both_classes(scores, anomaly, "roc_points");
    const auto n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
    const double n_pos = static_cast<double>(std::count(anomaly.begin(), anomaly.end(), true));
    const double n_neg = static_cast<double>(n) - n_pos;

    RocCurve c;
    c.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            (anomaly[order[j]] ? tp : fp) += 1;
            ++j;
        }
        c.points.push_back({double(fp) / n_neg, double(tp) / n_pos, scores[order[i]]});
        i = j;
    }
    // Sum of trapezoids in count space, normalized once.
    double area = 0.0;
    std::size_t prev_tp = 0, prev_fp = 0;
    tp = fp = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            (anomaly[order[j]] ? tp : fp) += 1;
            ++j;
        }
        area += double(fp - prev_fp) * double(tp + prev_tp);
        prev_tp = tp;
        prev_fp = fp;
        i = j;
    }
    c.auc = area / (2.0 * n_pos * n_neg);
    return c;
}

// ---- latent projection --------------------------------------------------

struct LatentProjection {
    Tensor<double> coords;  // (N, k)
    std::vector<bool> flags;
    std::vector<std::string> ids;
};

/// Centers a (N,d) code matrix and projects it on its top-k right singular directions.
inline Tensor<double> project_top_k(const Tensor<double>& codes, std::size_t k) {
    require_rank(codes.shape(), 2, "latent_projection");
    const auto n = codes.dim(0), d = codes.dim(1);
    if (k == 0 || k > d) throw ConfigError("latent_projection: k=" + std::to_string(k) + " must lie in [1, " +
                                           std::to_string(d) + "]");
    if (k > n) throw DataError("latent_projection: need at least k=" + std::to_string(k) + " samples");
    Tensor<double> centered = codes;
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += codes[i * d + j];
        mean /= double(n);
        for (std::size_t i = 0; i < n; ++i) centered[i * d + j] -= mean;
    }
    const auto spec = svd(centered);
    const auto r = spec.S.size();
    Tensor<double> out({n, k});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < k; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) acc += centered[i * d + j] * spec.V[j * r + c];
            out[i * k + c] = acc;
        }
    return out;
}

template <typename T>
LatentProjection latent_projection(NetworkState<T>& s, const LabeledImages& data, const std::vector<bool>& flags,
                                   std::size_t k = 3) {
    data.validate();
    if (k == 0 || k > s.spec.latent_dim)
        throw ConfigError("latent_projection: k=" + std::to_string(k) + " exceeds latent dimension " +
                          std::to_string(s.spec.latent_dim));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto d = s.spec.latent_dim;
    Tensor<double> codes({data.size(), d});
    for (std::size_t first = 0; first < data.size(); first += kScoringChunk) {
        const auto count = std::min(kScoringChunk, data.size() - first);
        Tape<T> tape;
        const auto& z = tape.value(encode(tape, s, s.encoder, tape.constant(detail::gather_batch<T>(data, order, first, count)),
                                          {Mode::eval, false, false}));
        for (std::size_t i = 0; i < count * d; ++i) codes[first * d + i] = static_cast<double>(z[i]);
    }
    return {project_top_k(codes, k), flags, data.ids};
}

// ---- ablation -----------------------------------------------------------

enum class Variant { irec_adv, irec_adv_rank, irec_adv_zrec, full };

inline const char* name(Variant v) {
    switch (v) {
        case Variant::irec_adv: return "irec+adv";
        case Variant::irec_adv_rank: return "irec+adv+rank";
        case Variant::irec_adv_zrec: return "irec+adv+zrec";
        case Variant::full: return "full";
    }
    return "?";
}

inline Variant variant_from_string(const std::string& s) {
    for (auto v : {Variant::irec_adv, Variant::irec_adv_rank, Variant::irec_adv_zrec, Variant::full})
        if (s == name(v)) return v;
    throw ConfigError("unknown ablation variant '" + s + "' (expected irec+adv, irec+adv+rank, irec+adv+zrec, full)");
}

/// Loss weights with the variant's missing terms switched off.
inline LossWeights variant_weights(Variant v, LossWeights w) {
    if (v == Variant::irec_adv || v == Variant::irec_adv_zrec) w.rank = 0.0;
    if (v == Variant::irec_adv || v == Variant::irec_adv_rank) w.zrec = 0.0;
    return w;
}

/// Variants without the latent reconstruction term never train Ge', so they are scored on pixels.
inline ScoreKind variant_score_kind(Variant v) {
    return (v == Variant::irec_adv || v == Variant::irec_adv_rank) ? ScoreKind::pixel : ScoreKind::latent;
}

struct AblationRow {
    Variant variant;
    ScoreKind score;
    double auc;
};

template <typename T>
std::vector<AblationRow> run_ablation(const NetworkSpec& spec, const TrainConfig& config, const OneClassSplit& split,
                                      const std::vector<Variant>& variants,
                                      const std::function<void(Variant, std::size_t, const LossBreakdown&)>& on_epoch = {}) {
    std::vector<AblationRow> rows;
    for (auto v : variants) {
        auto cfg = config;
        cfg.weights = variant_weights(v, config.weights);
        auto state = build_networks<T>(spec, config.seed);
        EpochCallback cb;
        if (on_epoch) cb = [&](std::size_t e, const LossBreakdown& b) { on_epoch(v, e, b); };
        train(state, cfg, split.train_normals, cb);
        const auto records = score_dataset(state, split.test, split.test_anomaly_flags);
        const auto kind = variant_score_kind(v);
        rows.push_back({v, kind, auc(records, kind)});
    }
    return rows;
}

}  // namespace lrad
