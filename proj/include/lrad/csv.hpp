#pragma once

// Plot-ready CSV artifacts. Numbers use the shortest round-trip form, '.' decimal.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lrad/eval.hpp"
#include "lrad/trainer.hpp"

namespace lrad {

inline std::string format_number(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

namespace detail {

inline std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

}  // namespace detail

inline void write_history_csv(const TrainHistory& h, const std::filesystem::path& path) {
    auto out = detail::open_csv(path);
    out << "iteration,irec,adv_g,adv_d,zrec,rank,total\n";
    for (std::size_t i = 0; i < h.iterations.size(); ++i) {
        const auto& b = h.iterations[i];
        out << i << ',' << format_number(b.irec) << ',' << format_number(b.adv_g) << ',' << format_number(b.adv_d)
            << ',' << format_number(b.zrec) << ',' << format_number(b.rank) << ',' << format_number(b.total) << '\n';
    }
}

inline void write_scores_csv(const std::vector<ScoreRecord>& records, const std::filesystem::path& path) {
    auto out = detail::open_csv(path);
    out << "id,anomaly_flag,score_latent,score_pixel\n";
    for (const auto& r : records)
        out << r.id << ',' << (r.anomaly ? 1 : 0) << ',' << format_number(r.latent) << ',' << format_number(r.pixel)
            << '\n';
}

inline void write_roc_csv(const RocCurve& roc, const std::filesystem::path& path) {
    auto out = detail::open_csv(path);
    out << "fpr,tpr,threshold\n";
    for (const auto& p : roc.points)
        out << format_number(p.fpr) << ',' << format_number(p.tpr) << ',' << format_number(p.threshold) << '\n';
}

inline void write_latent_csv(const LatentProjection& proj, const std::filesystem::path& path) {
    auto out = detail::open_csv(path);
    const auto k = proj.coords.dim(1);
    out << "id,anomaly_flag";
    for (std::size_t c = 0; c < k; ++c) out << ",c" << c + 1;
    out << '\n';
    for (std::size_t i = 0; i < proj.ids.size(); ++i) {
        out << proj.ids[i] << ',' << (proj.flags[i] ? 1 : 0);
        for (std::size_t c = 0; c < k; ++c) out << ',' << format_number(proj.coords[i * k + c]);
        out << '\n';
    }
}

inline void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& path) {
    auto out = detail::open_csv(path);
    out << "variant,auc\n";
    for (const auto& r : rows) out << name(r.variant) << ',' << format_number(r.auc) << '\n';
}

}  // namespace lrad
