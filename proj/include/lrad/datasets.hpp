#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "lrad/tensor.hpp"

namespace lrad {

/// N images (N,C,H,W) with a class id and a stable identifier per sample.
struct LabeledImages {
    Tensor<float> images;
    std::vector<int> labels;
    std::vector<std::string> ids;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t channels() const { return images.dim(1); }
    std::size_t height() const { return images.dim(2); }
    std::size_t width() const { return images.dim(3); }
    std::size_t sample_elements() const { return images.size() / std::max<std::size_t>(size(), 1); }

    void validate() const {
        require_rank(images.shape(), 4, "LabeledImages");
        if (images.dim(0) != labels.size() || ids.size() != labels.size())
            throw DataError("LabeledImages: " + std::to_string(images.dim(0)) + " images, " +
                            std::to_string(labels.size()) + " labels, " + std::to_string(ids.size()) + " ids");
    }

    std::set<int> classes() const { return {labels.begin(), labels.end()}; }

    /// Samples at `indices`, in that order.
    LabeledImages subset(const std::vector<std::size_t>& indices) const {
        if (indices.empty()) throw DataError("LabeledImages::subset: empty selection");
        const auto per = sample_elements();
        Shape s = images.shape();
        s[0] = indices.size();
        LabeledImages out{Tensor<float>(s), {}, {}};
        for (std::size_t k = 0; k < indices.size(); ++k) {
            const auto i = indices[k];
            std::copy_n(images.data() + i * per, per, out.images.data() + k * per);
            out.labels.push_back(labels[i]);
            out.ids.push_back(ids[i]);
        }
        return out;
    }
};

/// Concatenates sample-compatible datasets.
inline LabeledImages concatenate(const std::vector<LabeledImages>& parts) {
    if (parts.empty()) throw DataError("concatenate: nothing to join");
    Shape s = parts.front().images.shape();
    std::size_t n = 0;
    for (const auto& p : parts) {
        Shape ps = p.images.shape();
        ps[0] = s[0];
        if (ps != s) throw DataError("concatenate: incompatible sample shapes");
        n += p.size();
    }
    s[0] = n;
    LabeledImages out{Tensor<float>(s), {}, {}};
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.images.values().begin(), p.images.values().end(), out.images.data() + off);
        off += p.images.size();
        out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
        out.ids.insert(out.ids.end(), p.ids.begin(), p.ids.end());
    }
    return out;
}

// ---- byte <-> [-1, 1] ---------------------------------------------------

inline float byte_to_unit(std::uint8_t b) { return static_cast<float>(b) / 127.5f - 1.0f; }

inline std::uint8_t unit_to_byte(float v) {
    const float b = std::round((v + 1.0f) * 127.5f);
    return static_cast<std::uint8_t>(std::clamp(b, 0.0f, 255.0f));
}

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off, const std::filesystem::path& path) {
    if (off + 4 > b.size())
        throw DataError(path.string() + ": truncated header at offset " + std::to_string(off) + " (file has " +
                        std::to_string(b.size()) + " bytes)");
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
           std::uint32_t{b[off + 3]};
}

inline void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

inline std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08X", v);
    return buf;
}

}  // namespace detail

// ---- IDX ----------------------------------------------------------------

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// IDX image/label pair (the MNIST distribution format). Pixels scaled to [-1, 1].
inline LabeledImages read_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    const auto img = detail::read_file(images_path);
    const auto lab = detail::read_file(labels_path);

    if (auto m = detail::read_be32(img, 0, images_path); m != kIdxImageMagic)
        throw DataError(images_path.string() + ": bad IDX image magic " + detail::hex32(m) + " at offset 0 (expected " +
                        detail::hex32(kIdxImageMagic) + ")");
    if (auto m = detail::read_be32(lab, 0, labels_path); m != kIdxLabelMagic)
        throw DataError(labels_path.string() + ": bad IDX label magic " + detail::hex32(m) + " at offset 0 (expected " +
                        detail::hex32(kIdxLabelMagic) + ")");

    const std::size_t n = detail::read_be32(img, 4, images_path);
    const std::size_t rows = detail::read_be32(img, 8, images_path);
    const std::size_t cols = detail::read_be32(img, 12, images_path);
    const std::size_t n_labels = detail::read_be32(lab, 4, labels_path);
    if (n != n_labels)
        throw DataError("IDX count mismatch: " + images_path.string() + " has " + std::to_string(n) + " images, " +
                        labels_path.string() + " has " + std::to_string(n_labels) + " labels");
    if (n == 0 || rows == 0 || cols == 0) throw DataError(images_path.string() + ": empty IDX image file");

    const std::size_t per = rows * cols;
    if (img.size() != 16 + n * per)
        throw DataError(images_path.string() + ": truncated IDX payload, expected " + std::to_string(16 + n * per) +
                        " bytes, got " + std::to_string(img.size()));
    if (lab.size() != 8 + n)
        throw DataError(labels_path.string() + ": truncated IDX payload, expected " + std::to_string(8 + n) +
                        " bytes, got " + std::to_string(lab.size()));

    LabeledImages out{Tensor<float>({n, 1, rows, cols}), std::vector<int>(n), std::vector<std::string>(n)};
    for (std::size_t i = 0; i < n * per; ++i) out.images[i] = byte_to_unit(img[16 + i]);
    for (std::size_t i = 0; i < n; ++i) {
        out.labels[i] = lab[8 + i];
        out.ids[i] = std::to_string(i);
    }
    return out;
}

/// Writes single-channel images as an IDX pair; pixel values are quantized to bytes.
inline void write_idx(const LabeledImages& data, const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path) {
    data.validate();
    if (data.channels() != 1) throw DataError("write_idx: IDX images must be single-channel");
    std::vector<std::uint8_t> img, lab;
    detail::put_be32(img, kIdxImageMagic);
    detail::put_be32(img, static_cast<std::uint32_t>(data.size()));
    detail::put_be32(img, static_cast<std::uint32_t>(data.height()));
    detail::put_be32(img, static_cast<std::uint32_t>(data.width()));
    for (auto v : data.images.values()) img.push_back(unit_to_byte(v));
    detail::put_be32(lab, kIdxLabelMagic);
    detail::put_be32(lab, static_cast<std::uint32_t>(data.size()));
    for (auto l : data.labels) lab.push_back(static_cast<std::uint8_t>(l));
    detail::write_file(images_path, img);
    detail::write_file(labels_path, lab);
}

// ---- CIFAR-10 -----------------------------------------------------------

inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarPixels = 3 * kCifarSide * kCifarSide;
inline constexpr std::size_t kCifarRecord = 1 + kCifarPixels;

/// One binary batch file, or every `*.bin` file of a directory in sorted order.
inline LabeledImages read_cifar10(const std::filesystem::path& path) {
    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_directory(path)) {
        for (const auto& e : std::filesystem::directory_iterator(path))
            if (e.is_regular_file() && e.path().extension() == ".bin") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw DataError(path.string() + ": no CIFAR-10 .bin batch files");
    } else {
        files.push_back(path);
    }

    std::vector<LabeledImages> parts;
    for (const auto& f : files) {
        const auto bytes = detail::read_file(f);
        if (bytes.empty() || bytes.size() % kCifarRecord != 0)
            throw DataError(f.string() + ": length " + std::to_string(bytes.size()) +
                            " is not a positive multiple of the " + std::to_string(kCifarRecord) +
                            "-byte CIFAR-10 record");
        const auto n = bytes.size() / kCifarRecord;
        LabeledImages part{Tensor<float>({n, 3, kCifarSide, kCifarSide}), std::vector<int>(n),
                           std::vector<std::string>(n)};
        const auto stem = f.stem().string();
        for (std::size_t i = 0; i < n; ++i) {
            const auto* rec = bytes.data() + i * kCifarRecord;
            part.labels[i] = rec[0];
            part.ids[i] = stem + ":" + std::to_string(i);
            for (std::size_t k = 0; k < kCifarPixels; ++k) part.images[i * kCifarPixels + k] = byte_to_unit(rec[1 + k]);
        }
        parts.push_back(std::move(part));
    }
    return parts.size() == 1 ? std::move(parts.front()) : concatenate(parts);
}

inline void write_cifar10(const LabeledImages& data, const std::filesystem::path& path) {
    data.validate();
    if (data.images.shape() != Shape{data.size(), 3, kCifarSide, kCifarSide})
        throw DataError("write_cifar10: images must be (N,3,32,32), got " + to_string(data.images.shape()));
    std::vector<std::uint8_t> bytes;
    bytes.reserve(data.size() * kCifarRecord);
    for (std::size_t i = 0; i < data.size(); ++i) {
        bytes.push_back(static_cast<std::uint8_t>(data.labels[i]));
        for (std::size_t k = 0; k < kCifarPixels; ++k) bytes.push_back(unit_to_byte(data.images[i * kCifarPixels + k]));
    }
    detail::write_file(path, bytes);
}

// ---- transforms ---------------------------------------------------------

enum class Normalization { tanh_range, zscore };

/// tanh_range maps byte-valued pixels [0, 255] onto [-1, 1] (the readers
/// already apply it); zscore standardizes each image by its own mean and
/// standard deviation.
inline LabeledImages normalize(LabeledImages data, Normalization mode, float eps = 1e-6f) {
    if (data.size() == 0) throw DataError("normalize: empty dataset");
    if (mode == Normalization::tanh_range) {
        for (auto& p : data.images.values()) p = p / 127.5f - 1.0f;
        return data;
    }
    const auto per = data.sample_elements();
    for (std::size_t i = 0; i < data.size(); ++i) {
        float* img = data.images.data() + i * per;
        double mean = 0.0;
        for (std::size_t k = 0; k < per; ++k) mean += img[k];
        mean /= static_cast<double>(per);
        double var = 0.0;
        for (std::size_t k = 0; k < per; ++k) var += (img[k] - mean) * (img[k] - mean);
        const double sd = std::sqrt(var / static_cast<double>(per));
        for (std::size_t k = 0; k < per; ++k) img[k] = static_cast<float>((img[k] - mean) / (sd + eps));
    }
    return data;
}

/// Centers each image on a `side` x `side` canvas filled with `fill`
/// (-1 is byte zero in the [-1, 1] range).
inline LabeledImages pad_to(const LabeledImages& data, std::size_t side, float fill = -1.0f) {
    const auto h = data.height(), w = data.width();
    if (h == side && w == side) return data;
    if (h > side || w > side) throw DataError("pad_to: image " + std::to_string(h) + "x" + std::to_string(w) +
                                              " larger than " + std::to_string(side));
    const auto n = data.size(), c = data.channels();
    const auto top = (side - h) / 2, left = (side - w) / 2;
    LabeledImages out{Tensor<float>({n, c, side, side}, fill), data.labels, data.ids};
    for (std::size_t i = 0; i < n * c; ++i)
        for (std::size_t y = 0; y < h; ++y)
            std::copy_n(data.images.data() + (i * h + y) * w, w, out.images.data() + (i * side + top + y) * side + left);
    return out;
}

// ---- one-class protocol -------------------------------------------------

enum class Polarity { class_is_anomaly, class_is_normal };

struct OneClassSplit {
    LabeledImages train_normals;
    LabeledImages test;
    std::vector<bool> test_anomaly_flags;
};

inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

/// Normal-only training set plus a labeled test set. The training share is
/// round(train_fraction * #normals); every anomaly lands in the test set.
inline OneClassSplit one_class_split(const LabeledImages& data, int held_class, Polarity polarity,
                                     double train_fraction, std::uint64_t seed) {
    data.validate();
    if (!data.classes().contains(held_class))
        throw DataError("one_class_split: class " + std::to_string(held_class) + " does not occur in the data");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("one_class_split: train_fraction must lie in (0, 1)");

    auto is_anomaly = [&](std::size_t i) {
        const bool held = data.labels[i] == held_class;
        return polarity == Polarity::class_is_anomaly ? held : !held;
    };
    std::vector<std::size_t> normals, anomalies;
    for (auto i : seeded_permutation(data.size(), seed)) (is_anomaly(i) ? anomalies : normals).push_back(i);
    if (normals.size() < 2) throw DataError("one_class_split: fewer than two normal samples");
    if (anomalies.empty()) throw DataError("one_class_split: no anomalous samples");

    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(normals.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, normals.size() - 1);

    std::vector<std::size_t> train(normals.begin(), normals.begin() + static_cast<long>(n_train));
    std::vector<std::size_t> test(normals.begin() + static_cast<long>(n_train), normals.end());
    test.insert(test.end(), anomalies.begin(), anomalies.end());

    OneClassSplit split{data.subset(train), data.subset(test), {}};
    for (auto i : test) split.test_anomaly_flags.push_back(is_anomaly(i));
    return split;
}

}  // namespace lrad
