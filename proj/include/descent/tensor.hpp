#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "descent/error.hpp"

namespace descent {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t extent : shape) n *= extent;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

// Dense row-major array of doubles. Values are treated as immutable once
// built; every operation below returns a fresh tensor.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

    Tensor(Shape shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (shape_size(shape_) != data_.size())
            throw Error("shape", "tensor data length " + std::to_string(data_.size()) +
                                     " does not match shape " + shape_str(shape_));
    }

    // 1-D convenience, used heavily in tests.
    static Tensor vec(std::initializer_list<double> values) {
        return Tensor({values.size()}, std::vector<double>(values));
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

    bool all_finite() const noexcept {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    Shape shape_;
    std::vector<double> data_;
};

enum class EwOp { add, sub, mul, div };

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b))
        throw Error("shape", std::string(where) + ": shape " + shape_str(a.shape()) +
                                 " vs " + shape_str(b.shape()));
}

// Componentwise arithmetic. Division hits every element unguarded; an exact
// zero denominator is an error here (guarded quotients live in interp.hpp).
inline Tensor elementwise(EwOp op, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "elementwise");
    Tensor out(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    const std::size_t n = a.size();
    switch (op) {
    case EwOp::add:
        for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
        break;
    case EwOp::sub:
        for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
        break;
    case EwOp::mul:
        for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
        break;
    case EwOp::div:
        for (std::size_t i = 0; i < n; ++i) {
            if (pb[i] == 0.0)
                throw Error("singular", "division by exact zero at element " + std::to_string(i));
            po[i] = pa[i] / pb[i];
        }
        break;
    }
    return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(EwOp::add, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(EwOp::sub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(EwOp::mul, a, b); }
inline Tensor div(const Tensor& a, const Tensor& b) { return elementwise(EwOp::div, a, b); }

inline Tensor scale(const Tensor& a, double k) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = k * a[i];
    return out;
}

struct MeanStd {
    double mean;
    double std;
};

// Mean and population standard deviation (divide by N). A singleton tensor
// has std 0.
inline MeanStd reduce_mean_std(const Tensor& a) {
    if (a.empty()) throw Error("shape", "reduce_mean_std: empty tensor");
    const std::size_t n = a.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += a[i];
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - mean;
        sq += d * d;
    }
    return {mean, std::sqrt(sq / static_cast<double>(n))};
}

} // namespace descent
