#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "cgt/errors.hpp"
#include "cgt/kernels.hpp"
#include "cgt/rng.hpp"

namespace cgt {

// Dense row-major tensor. `grad`, when non-empty, is a same-sized gradient
// buffer; most tensors never allocate one.
template <typename T>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<T> data;
    std::vector<T> grad;

    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> s) {
        Tensor t;
        t.shape = std::move(s);
        t.data.assign(t.shape_numel(), T(0));
        return t;
    }

    static Tensor full(std::vector<std::size_t> s, T v) {
        Tensor t = zeros(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    static Tensor scalar(T v) { return full({1}, v); }

    static Tensor from_matrix(std::initializer_list<std::initializer_list<T>> rows) {
        Tensor t;
        const std::size_t r = rows.size();
        const std::size_t c = r == 0 ? 0 : rows.begin()->size();
        t.shape = {r, c};
        t.data.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw DataError("from_matrix: ragged rows");
            t.data.insert(t.data.end(), row.begin(), row.end());
        }
        return t;
    }

    static Tensor from_vector(std::vector<T> v) {
        Tensor t;
        t.shape = {v.size()};
        t.data = std::move(v);
        return t;
    }

    static Tensor randn(std::vector<std::size_t> s, Rng& rng, double stddev) {
        Tensor t = zeros(std::move(s));
        for (auto& v : t.data) v = static_cast<T>(rng.normal(0.0, stddev));
        return t;
    }

    std::size_t shape_numel() const {
        std::size_t n = 1;
        for (std::size_t e : shape) n *= e;
        return n;
    }

    std::size_t numel() const { return data.size(); }
    bool is_matrix() const { return shape.size() == 2; }
    bool is_vector() const { return shape.size() == 1; }
    bool is_scalar() const { return numel() == 1; }
    std::size_t rows() const { return shape.size() >= 1 ? shape[0] : 0; }
    std::size_t cols() const { return shape.size() >= 2 ? shape[1] : 1; }

    T& at(std::size_t i) { return data[i]; }
    T at(std::size_t i) const { return data[i]; }
    T& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
    T at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }
    T* row_ptr(std::size_t i) { return data.data() + i * cols(); }
    const T* row_ptr(std::size_t i) const { return data.data() + i * cols(); }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }
    void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

// Row-wise softmax with max-subtraction. Input must be a finite 2-D matrix.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& m) {
    if (!m.is_matrix()) throw DataError("softmax_rows: input must be 2-D");
    if (!m.all_finite()) throw NumericError("softmax_rows: non-finite input");
    Tensor<T> out = Tensor<T>::zeros(m.shape);
    const std::size_t c = m.cols();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const T* x = m.row_ptr(i);
        T* y = out.row_ptr(i);
        const T mx = kernels::reduce_max(x, c);
        T sum = T(0);
        for (std::size_t j = 0; j < c; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        kernels::scale(y, T(1) / sum, y, c);
    }
    return out;
}

// gain * (x - mean) / sqrt(var + eps) + bias, over a single vector.
// Population variance; eps keeps the constant-vector case finite.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
    if (x.numel() != gain.numel() || x.numel() != bias.numel())
        throw DataError("layer_norm: length mismatch");
    if (!(eps > T(0))) throw DataError("layer_norm: eps must be positive");
    const std::size_t d = x.numel();
    T mean = kernels::reduce_sum(x.data.data(), d) / static_cast<T>(d);
    T var = T(0);
    for (std::size_t i = 0; i < d; ++i) {
        const T c = x.data[i] - mean;
        var += c * c;
    }
    var /= static_cast<T>(d);
    const T inv = T(1) / std::sqrt(var + eps);
    Tensor<T> out = Tensor<T>::zeros(x.shape);
    for (std::size_t i = 0; i < d; ++i)
        out.data[i] = gain.data[i] * (x.data[i] - mean) * inv + bias.data[i];
    return out;
}

} // namespace cgt
