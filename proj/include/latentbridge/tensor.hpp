#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "latentbridge/common.hpp"
#include "latentbridge/rng.hpp"

namespace lb {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ')';
    return os.str();
}

// Dense row-major N-d array. Layout for images is NCHW throughout.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), data(shape_numel(shape), T(0)) {}
    Tensor(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<int64_t>(data.size()) != shape_numel(shape))
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    }

    static Tensor zeros(Shape s) { return Tensor(std::move(s)); }

    static Tensor full(Shape s, T v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    static Tensor gaussian(Shape s, uint64_t seed, double mean = 0.0, double stddev = 1.0) {
        Tensor t(std::move(s));
        Rng rng(seed);
        for (auto& v : t.data) v = static_cast<T>(rng.normal(mean, stddev));
        return t;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    // 4-d accessor (NCHW)
    T& at(int64_t n, int64_t c, int64_t h, int64_t w) {
        return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    const T& at(int64_t n, int64_t c, int64_t h, int64_t w) const {
        return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }

    // 2-d accessor
    T& at(int64_t i, int64_t j) { return data[i * shape[1] + j]; }
    const T& at(int64_t i, int64_t j) const { return data[i * shape[1] + j]; }

    Tensor reshaped(Shape s) const {
        if (shape_numel(s) != numel())
            throw ShapeError("cannot reshape " + shape_str(shape) + " to " + shape_str(s));
        Tensor t = *this;
        t.shape = std::move(s);
        return t;
    }

    bool all_finite() const {
        for (const T& v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> t;
        t.shape = shape;
        t.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) t.data[i] = static_cast<U>(data[i]);
        return t;
    }
};

// Standard-normal draw consuming a caller-owned stream (unlike
// Tensor::gaussian, which owns a generator seeded per call).
template <typename T>
Tensor<T> draw_gaussian(Rng& rng, Shape s) {
    Tensor<T> t(std::move(s));
    for (auto& v : t.data) v = static_cast<T>(rng.normal());
    return t;
}

// Gather samples along the leading dimension: (N, ...) -> (idx.size(), ...).
template <typename T>
Tensor<T> select_batch(const Tensor<T>& t, const std::vector<int64_t>& idx) {
    if (t.ndim() < 1) throw ShapeError("select_batch: tensor has no batch dimension");
    const int64_t n = t.dim(0);
    const int64_t stride = t.numel() / std::max<int64_t>(n, 1);
    Shape s = t.shape;
    s[0] = static_cast<int64_t>(idx.size());
    Tensor<T> out(std::move(s));
    for (size_t i = 0; i < idx.size(); ++i) {
        const int64_t j = idx[i];
        if (j < 0 || j >= n)
            throw ShapeError("select_batch: index " + std::to_string(j) + " outside batch of " +
                             std::to_string(n));
        std::copy(t.data.begin() + j * stride, t.data.begin() + (j + 1) * stride,
                  out.data.begin() + static_cast<int64_t>(i) * stride);
    }
    return out;
}

template <typename T>
bool same_shape(const Tensor<T>& a, const Tensor<T>& b) {
    return a.shape == b.shape;
}

template <typename T>
void require_shape(const Tensor<T>& t, const Shape& s, const char* what) {
    if (t.shape != s)
        throw ShapeError(std::string(what) + ": expected " + shape_str(s) + ", got " +
                         shape_str(t.shape));
}

}  // namespace lb
