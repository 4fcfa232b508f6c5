#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lrad {

// Error hierarchy. The CLI maps each family onto an exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct NumericalError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};

using Shape = std::vector<std::size_t>;

inline std::string to_string(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ')';
    return os.str();
}

inline std::size_t element_count(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

/// Dense row-major n-dimensional array. Value semantics; copies are deep.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
        validate_shape();
        data_.assign(element_count(shape_), fill);
    }
    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape();
        if (data_.size() != element_count(shape_))
            throw ShapeError("tensor data has " + std::to_string(data_.size()) +
                             " elements but shape " + to_string(shape_) + " needs " +
                             std::to_string(element_count(shape_)));
    }

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const {
        if (i >= shape_.size())
            throw ShapeError("axis " + std::to_string(i) + " out of range for shape " + to_string(shape_));
        return shape_[i];
    }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::vector<T>& values() noexcept { return data_; }
    const std::vector<T>& values() const noexcept { return data_; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    T& at(std::initializer_list<std::size_t> idx) { return data_[offset(idx)]; }
    const T& at(std::initializer_list<std::size_t> idx) const { return data_[offset(idx)]; }

    /// Same elements, new extents.
    Tensor reshaped(Shape s) const {
        if (element_count(s) != data_.size())
            throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(s));
        return Tensor(std::move(s), data_);
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
    }

    template <typename U>
    Tensor<U> cast() const {
        return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    void validate_shape() const {
        for (auto e : shape_)
            if (e == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape_));
    }

    std::size_t offset(std::initializer_list<std::size_t> idx) const {
        if (idx.size() != shape_.size())
            throw ShapeError("index rank " + std::to_string(idx.size()) + " does not match shape " +
                             to_string(shape_));
        std::size_t off = 0, k = 0;
        for (auto i : idx) {
            if (i >= shape_[k]) throw ShapeError("index out of range for shape " + to_string(shape_));
            off = off * shape_[k++] + i;
        }
        return off;
    }

    Shape shape_;
    std::vector<T> data_;
};

inline void require_shape(const Shape& got, const Shape& want, const char* what) {
    if (got != want)
        throw ShapeError(std::string(what) + ": expected shape " + to_string(want) + ", got " + to_string(got));
}

inline void require_rank(const Shape& got, std::size_t r, const char* what) {
    if (got.size() != r)
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(r) + ", got shape " +
                         to_string(got));
}

template <typename T>
T dot(const Tensor<T>& a, const Tensor<T>& b) {
    require_shape(b.shape(), a.shape(), "dot");
    T s{0};
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

template <typename T>
T sum(const Tensor<T>& a) {
    T s{0};
    for (auto v : a.values()) s += v;
    return s;
}

// a += b
template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
    require_shape(b.shape(), a.shape(), "add_inplace");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

/// (rows x cols) -> (cols x rows) for rank-2 tensors.
template <typename T>
Tensor<T> transpose2d(const Tensor<T>& a) {
    require_rank(a.shape(), 2, "transpose2d");
    const auto r = a.dim(0), c = a.dim(1);
    Tensor<T> out({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
    return out;
}

}  // namespace lrad
