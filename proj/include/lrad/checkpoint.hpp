#pragma once

// Checkpoint layout (all integers little-endian):
//   "LRAD" | u32 version | u32 config length | config JSON | u32 tensor count
//   | manifest: per tensor { u32 name length | name | u8 element bytes | u32 rank | u64 extents... }
//   | payloads in manifest order, raw little-endian elements.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lrad/datasets.hpp"
#include "lrad/serialization.hpp"

namespace lrad {

inline constexpr char kCheckpointMagic[4] = {'L', 'R', 'A', 'D'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
public:
    template <typename U>
    void put(U v) {
        static_assert(std::is_trivially_copyable_v<U>);
        unsigned char raw[sizeof(U)];
        std::memcpy(raw, &v, sizeof(U));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(U));
        bytes.insert(bytes.end(), raw, raw + sizeof(U));
    }
    void put_bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const std::uint8_t*>(p);
        bytes.insert(bytes.end(), c, c + n);
    }
    std::vector<std::uint8_t> bytes;
};

class ByteReader {
public:
    ByteReader(const std::vector<std::uint8_t>& b, std::string source) : bytes_(b), source_(std::move(source)) {}

    template <typename U>
    U get() {
        need(sizeof(U));
        unsigned char raw[sizeof(U)];
        std::memcpy(raw, bytes_.data() + pos_, sizeof(U));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(U));
        pos_ += sizeof(U);
        U v;
        std::memcpy(&v, raw, sizeof(U));
        return v;
    }
    std::string get_string(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t position() const { return pos_; }
    void seek(std::size_t pos) {
        pos_ = 0;
        need(pos);
        pos_ = pos;
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size())
            throw DataError(source_ + ": truncated checkpoint header, expected at least " + std::to_string(pos_ + n) +
                            " bytes, got " + std::to_string(bytes_.size()));
    }
    const std::vector<std::uint8_t>& bytes_;
    std::string source_;
    std::size_t pos_ = 0;
};

struct ManifestEntry {
    std::string name;
    std::uint8_t element_bytes;
    Shape shape;
};

template <typename U>
void put_payload(ByteWriter& w, const Tensor<U>& t) {
    for (auto v : t.values()) w.put(v);
}

template <typename U>
Tensor<U> get_payload(ByteReader& r, const Shape& s) {
    Tensor<U> t(s);
    for (auto& v : t.values()) v = r.get<U>();
    return t;
}

inline Tensor<double> history_matrix(const TrainHistory& h) {
    Tensor<double> m({h.iterations.size(), 6});
    for (std::size_t i = 0; i < h.iterations.size(); ++i) {
        const auto& b = h.iterations[i];
        const double row[6] = {b.irec, b.adv_g, b.adv_d, b.zrec, b.rank, b.total};
        std::copy(row, row + 6, m.data() + i * 6);
    }
    return m;
}

}  // namespace detail

template <typename T>
constexpr Precision precision_of() {
    return sizeof(T) == 4 ? Precision::f32 : Precision::f64;
}

template <typename T>
void save_checkpoint(NetworkState<T>& state, const TrainHistory& history, const std::filesystem::path& path) {
    json config = {{"network", to_json(state.spec)},
                   {"train", to_json(history.config)},
                   {"seed", history.seed},
                   {"precision", name(precision_of<T>())}};
    const auto config_text = config.dump();

    std::vector<std::pair<detail::ManifestEntry, const Tensor<T>*>> net;
    for (const auto& nt : state.named_tensors())
        net.push_back({{nt.name, static_cast<std::uint8_t>(sizeof(T)), nt.tensor->shape()}, nt.tensor});
    std::vector<std::pair<detail::ManifestEntry, Tensor<double>>> extra;
    if (!history.iterations.empty()) {
        auto m = detail::history_matrix(history);
        extra.push_back({{"history.losses", 8, m.shape()}, std::move(m)});
    }
    if (!history.epoch_seconds.empty()) {
        Tensor<double> t({history.epoch_seconds.size()}, history.epoch_seconds);
        extra.push_back({{"history.epoch_seconds", 8, t.shape()}, std::move(t)});
    }

    detail::ByteWriter w;
    w.put_bytes(kCheckpointMagic, 4);
    w.put(kCheckpointVersion);
    w.put(static_cast<std::uint32_t>(config_text.size()));
    w.put_bytes(config_text.data(), config_text.size());
    w.put(static_cast<std::uint32_t>(net.size() + extra.size()));
    auto put_entry = [&](const detail::ManifestEntry& e) {
        w.put(static_cast<std::uint32_t>(e.name.size()));
        w.put_bytes(e.name.data(), e.name.size());
        w.put(e.element_bytes);
        w.put(static_cast<std::uint32_t>(e.shape.size()));
        for (auto d : e.shape) w.put(static_cast<std::uint64_t>(d));
    };
    for (const auto& [e, _] : net) put_entry(e);
    for (const auto& [e, _] : extra) put_entry(e);
    for (const auto& [_, t] : net) detail::put_payload(w, *t);
    for (const auto& [_, t] : extra) detail::put_payload(w, t);
    detail::write_file(path, w.bytes);
}

struct CheckpointHeader {
    json config;
    Precision precision;
};

namespace detail {

struct ParsedCheckpoint {
    json config;
    std::vector<ManifestEntry> manifest;
    std::size_t payload_offset;
};

inline ParsedCheckpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source) {
    ByteReader r(bytes, source);
    if (r.get_string(4) != std::string(kCheckpointMagic, 4))
        throw DataError(source + ": not a checkpoint (bad magic, expected \"LRAD\")");
    if (const auto v = r.get<std::uint32_t>(); v != kCheckpointVersion)
        throw DataError(source + ": unsupported checkpoint version " + std::to_string(v) + " (expected " +
                        std::to_string(kCheckpointVersion) + ")");
    const auto config_len = r.get<std::uint32_t>();
    ParsedCheckpoint p;
    try {
        p.config = json::parse(r.get_string(config_len));
    } catch (const json::parse_error& e) {
        throw DataError(source + ": corrupt checkpoint config: " + e.what());
    }
    const auto count = r.get<std::uint32_t>();
    std::size_t payload = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        ManifestEntry e;
        e.name = r.get_string(r.get<std::uint32_t>());
        e.element_bytes = r.get<std::uint8_t>();
        if (e.element_bytes != 4 && e.element_bytes != 8)
            throw DataError(source + ": tensor " + e.name + " has unsupported element size");
        const auto rank = r.get<std::uint32_t>();
        for (std::uint32_t k = 0; k < rank; ++k) e.shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
        payload += element_count(e.shape) * e.element_bytes;
        p.manifest.push_back(std::move(e));
    }
    p.payload_offset = r.position();
    const auto expected = p.payload_offset + payload;
    if (bytes.size() != expected)
        throw DataError(source + ": checkpoint length mismatch, expected " + std::to_string(expected) + " bytes, got " +
                        std::to_string(bytes.size()) + (bytes.size() < expected ? " (truncated)" : ""));
    return p;
}

}  // namespace detail

/// Reads only the config block and precision.
inline CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) {
    const auto bytes = detail::read_file(path);
    auto p = detail::parse_checkpoint(bytes, path.string());
    return {p.config, precision_from_string(p.config.at("precision").get<std::string>())};
}

template <typename T>
struct Checkpoint {
    NetworkState<T> state;
    TrainHistory history;
};

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
    const auto bytes = detail::read_file(path);
    const auto p = detail::parse_checkpoint(bytes, path.string());
    if (precision_from_string(p.config.at("precision").get<std::string>()) != precision_of<T>())
        throw DataError(path.string() + ": checkpoint precision is " + p.config.at("precision").get<std::string>());

    Checkpoint<T> ck{build_networks<T>(network_spec_from_json(p.config.at("network")), 0), {}};
    ck.history.config = train_config_from_json(p.config.at("train"));
    ck.history.seed = p.config.at("seed").get<std::uint64_t>();

    std::map<std::string, Tensor<T>*> slots;
    for (const auto& nt : ck.state.named_tensors()) slots[nt.name] = nt.tensor;

    detail::ByteReader r(bytes, path.string());
    r.seek(p.payload_offset);
    std::size_t filled = 0;
    for (const auto& e : p.manifest) {
        if (e.name == "history.losses" || e.name == "history.epoch_seconds") {
            const auto t = detail::get_payload<double>(r, e.shape);
            if (e.name == "history.epoch_seconds") {
                ck.history.epoch_seconds = t.values();
            } else {
                for (std::size_t row = 0; row < e.shape[0]; ++row) {
                    const double* v = t.data() + row * 6;
                    ck.history.iterations.push_back({v[0], v[1], v[2], v[3], v[4], v[5]});
                }
            }
            continue;
        }
        auto it = slots.find(e.name);
        if (it == slots.end()) throw DataError(path.string() + ": unexpected tensor " + e.name);
        if (e.shape != it->second->shape() || e.element_bytes != sizeof(T))
            throw DataError(path.string() + ": tensor " + e.name + " has shape " + to_string(e.shape) + ", expected " +
                            to_string(it->second->shape()));
        *it->second = detail::get_payload<T>(r, e.shape);
        ++filled;
    }
    if (filled != slots.size())
        throw DataError(path.string() + ": checkpoint holds " + std::to_string(filled) + " of " +
                        std::to_string(slots.size()) + " network tensors");
    return ck;
}

}  // namespace lrad
