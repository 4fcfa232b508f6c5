#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "lrad/datasets.hpp"

namespace lrad {

/// Interleaved 8-bit image, channel count 1 or 3.
struct ByteImage {
    std::size_t width = 0, height = 0, channels = 0;
    std::vector<std::uint8_t> pixels;
};

inline ByteImage decode_pgm(const std::vector<std::uint8_t>& bytes, const std::string& name) {
    std::size_t pos = 0;
    auto fail = [&](const std::string& why) -> ByteImage { throw DataError(name + ": undecodable PGM (" + why + ")"); };
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto number = [&]() -> std::size_t {
        skip_space();
        std::size_t v = 0, digits = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos++] - '0');
            ++digits;
        }
        if (digits == 0) throw DataError(name + ": undecodable PGM (malformed header)");
        return v;
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') return fail("missing P5 signature");
    pos = 2;
    ByteImage img;
    img.width = number();
    img.height = number();
    const auto maxval = number();
    if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 65535) return fail("bad dimensions or maxval");
    ++pos;  // single whitespace before the raster
    img.channels = 1;
    const std::size_t n = img.width * img.height;
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    if (bytes.size() < pos + n * bpp) return fail("truncated raster");
    img.pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t raw = bpp == 1 ? bytes[pos + i] : (std::size_t{bytes[pos + 2 * i]} << 8) | bytes[pos + 2 * i + 1];
        img.pixels[i] = static_cast<std::uint8_t>((raw * 255 + maxval / 2) / maxval);
    }
    return img;
}

inline std::vector<std::uint8_t> encode_pgm(const ByteImage& img) {
    if (img.channels != 1) throw DataError("encode_pgm: PGM holds single-channel images");
    const auto header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

inline ByteImage decode_png(const std::filesystem::path& path, std::size_t channels) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str()))
        throw DataError(path.string() + ": undecodable PNG (" + image.message + ")");
    image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    ByteImage out{image.width, image.height, channels, std::vector<std::uint8_t>(PNG_IMAGE_SIZE(image))};
    if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
        png_image_free(&image);
        throw DataError(path.string() + ": undecodable PNG (" + image.message + ")");
    }
    return out;
}

inline void encode_png(const ByteImage& img, const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels.data(), 0, nullptr))
        throw DataError(path.string() + ": PNG write failed (" + image.message + ")");
}

inline ByteImage convert_channels(ByteImage img, std::size_t channels) {
    if (img.channels == channels) return img;
    const auto n = img.width * img.height;
    std::vector<std::uint8_t> px(n * channels);
    for (std::size_t i = 0; i < n; ++i) {
        if (channels == 3) {
            px[3 * i] = px[3 * i + 1] = px[3 * i + 2] = img.pixels[i];
        } else {
            const auto* rgb = img.pixels.data() + 3 * i;
            px[i] = static_cast<std::uint8_t>(std::lround(0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]));
        }
    }
    img.pixels = std::move(px);
    img.channels = channels;
    return img;
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
/// Input and output are planar (C,H,W) float buffers.
inline std::vector<float> resize_bilinear(const std::vector<float>& src, std::size_t channels, std::size_t h,
                                          std::size_t w, std::size_t out_h, std::size_t out_w) {
    std::vector<float> dst(channels * out_h * out_w);
    auto coord = [](std::size_t o, std::size_t in, std::size_t out) {
        const double s = (static_cast<double>(o) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
        return std::clamp(s, 0.0, static_cast<double>(in - 1));
    };
    for (std::size_t y = 0; y < out_h; ++y) {
        const double sy = coord(y, h, out_h);
        const auto y0 = static_cast<std::size_t>(std::floor(sy));
        const auto y1 = std::min(y0 + 1, h - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t x = 0; x < out_w; ++x) {
            const double sx = coord(x, w, out_w);
            const auto x0 = static_cast<std::size_t>(std::floor(sx));
            const auto x1 = std::min(x0 + 1, w - 1);
            const double fx = sx - static_cast<double>(x0);
            for (std::size_t c = 0; c < channels; ++c) {
                const float* p = src.data() + c * h * w;
                const double top = (1 - fx) * p[y0 * w + x0] + fx * p[y0 * w + x1];
                const double bot = (1 - fx) * p[y1 * w + x0] + fx * p[y1 * w + x1];
                dst[(c * out_h + y) * out_w + x] = static_cast<float>((1 - fy) * top + fy * bot);
            }
        }
    }
    return dst;
}

namespace detail {

inline bool is_image_file(const std::filesystem::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".pgm";
}

inline ByteImage load_image(const std::filesystem::path& p, std::size_t channels) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") return decode_png(p, channels);
    return convert_channels(decode_pgm(read_file(p), p.string()), channels);
}

}  // namespace detail

/// Images under `<root>/<label>/<file>`; labels are assigned to the sorted
/// subdirectory names. Files directly under root get label 0 with a warning.
/// Returns the label names in id order through `label_names` when given.
inline LabeledImages read_image_dir(const std::filesystem::path& root, std::size_t channels, std::size_t target_size,
                                    std::vector<std::string>* label_names = nullptr) {
    if (channels != 1 && channels != 3) throw ConfigError("read_image_dir: channels must be 1 or 3");
    if (!std::filesystem::is_directory(root)) throw DataError(root.string() + ": not a directory");

    std::vector<std::filesystem::path> loose;
    std::map<std::string, std::vector<std::filesystem::path>> by_label;
    for (const auto& e : std::filesystem::directory_iterator(root)) {
        if (e.is_directory()) {
            auto& files = by_label[e.path().filename().string()];
            for (const auto& f : std::filesystem::directory_iterator(e.path()))
                if (f.is_regular_file() && detail::is_image_file(f.path())) files.push_back(f.path());
        } else if (e.is_regular_file() && detail::is_image_file(e.path())) {
            loose.push_back(e.path());
        }
    }

    std::vector<std::pair<std::filesystem::path, int>> entries;
    std::vector<std::string> names;
    if (!loose.empty()) {
        std::cerr << "warning: " << root.string() << " has " << loose.size()
                  << " unlabeled images; assigning label 0\n";
        std::sort(loose.begin(), loose.end());
        for (const auto& p : loose) entries.emplace_back(p, 0);
        names.push_back("");
    }
    int label = loose.empty() ? 0 : 1;
    for (auto& [name, files] : by_label) {
        if (files.empty()) continue;
        std::sort(files.begin(), files.end());
        names.push_back(name);
        for (const auto& p : files) entries.emplace_back(p, label);
        ++label;
    }
    if (entries.empty()) throw DataError(root.string() + ": no PNG or PGM images found");

    const auto n = entries.size(), per = channels * target_size * target_size;
    LabeledImages out{Tensor<float>({n, channels, target_size, target_size}), std::vector<int>(n),
                      std::vector<std::string>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto& [path, label] = entries[i];
        const auto img = detail::load_image(path, channels);
        std::vector<float> planar(channels * img.height * img.width);
        for (std::size_t p = 0; p < img.height * img.width; ++p)
            for (std::size_t c = 0; c < channels; ++c)
                planar[c * img.height * img.width + p] = byte_to_unit(img.pixels[p * channels + c]);
        auto resized = (img.height == target_size && img.width == target_size)
                           ? std::move(planar)
                           : resize_bilinear(planar, channels, img.height, img.width, target_size, target_size);
        std::copy(resized.begin(), resized.end(), out.images.data() + i * per);
        out.labels[i] = label;
        out.ids[i] = std::filesystem::relative(path, root).generic_string();
    }
    if (label_names) *label_names = std::move(names);
    return out;
}

}  // namespace lrad
