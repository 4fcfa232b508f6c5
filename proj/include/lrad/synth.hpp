#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "lrad/datasets.hpp"

namespace lrad {

/// Desk-scale one-class dataset: noisy filled disks are normal; the same
/// kind of disk with a high-frequency horizontal stripe patch is anomalous.
struct SynthSpec {
    std::size_t image_size = 32;
    std::size_t normal_count = 2200;
    std::size_t anomaly_count = 200;
    double radius_min = 5.0;
    double radius_max = 11.0;
    float background = -0.8f;
    float disk = 0.2f;
    float stripe_contrast = 0.6f;  // added to every pixel on a bright stripe row
    std::size_t patch_size = 10;
    std::size_t stripe_period = 2;
    float noise = 0.05f;  // uniform in [-noise, noise]
    std::uint64_t seed = 7;
    int normal_label = 0;
    int anomaly_label = 1;

    void validate() const {
        if (image_size < 8) throw ConfigError("synth: image_size must be at least 8");
        if (normal_count == 0 && anomaly_count == 0) throw ConfigError("synth: no samples requested");
        if (!(radius_min > 0.0 && radius_min <= radius_max) || 2.0 * std::ceil(radius_max) + 1.0 > double(image_size))
            throw ConfigError("synth: radius range does not fit the image");
        if (patch_size == 0 || patch_size > image_size) throw ConfigError("synth: patch_size out of range");
        if (stripe_period < 2) throw ConfigError("synth: stripe_period must be at least 2");
        if (noise < 0.0f) throw ConfigError("synth: noise must be non-negative");
    }
};

/// Number of pixels brightened by one stripe patch.
inline std::size_t stripe_pixel_count(const SynthSpec& s) {
    std::size_t rows = 0;
    for (std::size_t r = 0; r < s.patch_size; ++r) rows += (r % s.stripe_period) < s.stripe_period / 2;
    return rows * s.patch_size;
}

/// Exact increase of an image's mean intensity caused by the stripe patch (noise-free).
inline double stripe_mean_shift(const SynthSpec& s) {
    return static_cast<double>(stripe_pixel_count(s)) * s.stripe_contrast /
           static_cast<double>(s.image_size * s.image_size);
}

namespace detail {

inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(hi - lo + 1));
}

}  // namespace detail

/// Normals first, then anomalies; ids are "synth-<index>".
inline LabeledImages synth_generate(const SynthSpec& spec) {
    spec.validate();
    const auto n = spec.normal_count + spec.anomaly_count, side = spec.image_size;
    LabeledImages out{Tensor<float>({n, 1, side, side}), std::vector<int>(n), std::vector<std::string>(n)};
    std::mt19937_64 rng(spec.seed);
    for (std::size_t i = 0; i < n; ++i) {
        const bool anomaly = i >= spec.normal_count;
        float* img = out.images.data() + i * side * side;
        const double r = spec.radius_min + (spec.radius_max - spec.radius_min) * detail::unit_uniform(rng);
        const auto margin = static_cast<std::size_t>(std::ceil(r));
        const auto cx = detail::uniform_index(rng, margin, side - 1 - margin);
        const auto cy = detail::uniform_index(rng, margin, side - 1 - margin);
        for (std::size_t y = 0; y < side; ++y)
            for (std::size_t x = 0; x < side; ++x) {
                const double dx = double(x) - double(cx), dy = double(y) - double(cy);
                img[y * side + x] = dx * dx + dy * dy <= r * r ? spec.disk : spec.background;
            }
        if (anomaly) {
            const auto px = detail::uniform_index(rng, 0, side - spec.patch_size);
            const auto py = detail::uniform_index(rng, 0, side - spec.patch_size);
            for (std::size_t y = 0; y < spec.patch_size; ++y) {
                if ((y % spec.stripe_period) >= spec.stripe_period / 2) continue;
                for (std::size_t x = 0; x < spec.patch_size; ++x) img[(py + y) * side + px + x] += spec.stripe_contrast;
            }
        }
        if (spec.noise > 0.0f)
            for (std::size_t k = 0; k < side * side; ++k)
                img[k] += static_cast<float>((2.0 * detail::unit_uniform(rng) - 1.0) * spec.noise);
        out.labels[i] = anomaly ? spec.anomaly_label : spec.normal_label;
        out.ids[i] = "synth-" + std::to_string(i);
    }
    return out;
}

}  // namespace lrad
