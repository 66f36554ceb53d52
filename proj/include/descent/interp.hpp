#pragma once

#include <array>
#include <cstddef>

#include "descent/error.hpp"
#include "descent/tensor.hpp"

namespace descent {

// Threshold below which a divided-difference denominator counts as zero.
struct GuardPolicy {
    double epsilon = 1e-8;
};

inline void validate(const GuardPolicy& guard) {
    if (!(guard.epsilon > 0.0)) throw Error("config", "guard.epsilon must be > 0");
}

// Ring buffer of the last up-to-4 gradients of one parameter tensor,
// oldest first. Pushing a fifth evicts the oldest.
class GradHistory {
public:
    static constexpr std::size_t capacity = 4;

    std::size_t count() const noexcept { return count_; }

    void push(const Tensor& grad) {
        if (count_ > 0) require_same_shape(slots_[head_], grad, "GradHistory::push");
        if (count_ < capacity) {
            slots_[(head_ + count_) % capacity] = grad;
            ++count_;
        } else {
            slots_[head_] = grad;
            head_ = (head_ + 1) % capacity;
        }
    }

    // idx 0 is the oldest stored gradient.
    const Tensor& at(std::size_t idx) const {
        if (idx >= count_) throw Error("shape", "GradHistory::at: index out of range");
        return slots_[(head_ + idx) % capacity];
    }

private:
    std::array<Tensor, capacity> slots_{};
    std::size_t head_ = 0;
    std::size_t count_ = 0;
};

// Elementwise quotient plus its guard mask: mask 1 marks elements whose
// denominator fell within epsilon of zero (value forced to 0 there).
struct Guarded {
    Tensor value;
    Tensor mask;
};

// First-order divided difference (c - b) / (b - a), elementwise.
inline Guarded dd1(const Tensor& a, const Tensor& b, const Tensor& c, GuardPolicy guard) {
    require_same_shape(a, b, "dd1");
    require_same_shape(a, c, "dd1");
    Guarded out{Tensor(a.shape()), Tensor(a.shape())};
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double den = b[i] - a[i];
        if (std::abs(den) <= guard.epsilon) {
            out.value[i] = 0.0;
            out.mask[i] = 1.0;
        } else {
            out.value[i] = (c[i] - b[i]) / den;
            out.mask[i] = 0.0;
        }
    }
    return out;
}

// Second-order divided difference (q12 - q01) / (c - a), elementwise.
// The output mask is the union of both input masks and this quotient's own
// guard, so a trip anywhere in the chain is visible to the caller.
inline Guarded dd2(const Guarded& q01, const Guarded& q12, const Tensor& a, const Tensor& c,
                   GuardPolicy guard) {
    require_same_shape(q01.value, q12.value, "dd2");
    require_same_shape(q01.value, a, "dd2");
    require_same_shape(q01.value, c, "dd2");
    Guarded out{Tensor(a.shape()), Tensor(a.shape())};
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double den = c[i] - a[i];
        if (q01.mask[i] != 0.0 || q12.mask[i] != 0.0 || std::abs(den) <= guard.epsilon) {
            out.value[i] = 0.0;
            out.mask[i] = 1.0;
        } else {
            out.value[i] = (q12.value[i] - q01.value[i]) / den;
            out.mask[i] = 0.0;
        }
    }
    return out;
}

// Predict the next gradient from the history and the current one.
//
// With fewer than 3 stored gradients the predictor is the identity map.
// With exactly 3 it is the first-order form  h0 + q01 * (g - h0).
// With 4 it adds the second-order term:      h0 + q01*(g-h0) + q2*(g-h0)*(g-h1)
// where q01, q12 are first-order quotients over consecutive history triples
// and q2 is their second-order quotient. Any element whose quotient chain
// tripped a guard falls back to the identity (that element of the output is
// the current gradient).
inline Tensor predict(const GradHistory& hist, const Tensor& grad_t, GuardPolicy guard) {
    const std::size_t count = hist.count();
    if (count > 0) require_same_shape(hist.at(0), grad_t, "predict");
    if (count < 3) return grad_t;

    const Tensor& h0 = hist.at(0);
    const Tensor& h1 = hist.at(1);
    const Tensor& h2 = hist.at(2);
    Tensor out(grad_t.shape());

    if (count == 3) {
        const Guarded q01 = dd1(h0, h1, h2, guard);
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (q01.mask[i] != 0.0) {
                out[i] = grad_t[i];
            } else {
                out[i] = h0[i] + q01.value[i] * (grad_t[i] - h0[i]);
            }
        }
        return out;
    }

    const Tensor& h3 = hist.at(3);
    const Guarded q01 = dd1(h0, h1, h2, guard);
    const Guarded q12 = dd1(h1, h2, h3, guard);
    const Guarded q2 = dd2(q01, q12, h0, h2, guard);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (q2.mask[i] != 0.0) {
            out[i] = grad_t[i];
        } else {
            const double d0 = grad_t[i] - h0[i];
            const double d1 = grad_t[i] - h1[i];
            out[i] = h0[i] + q01.value[i] * d0 + q2.value[i] * d0 * d1;
        }
    }
    return out;
}

} // namespace descent
