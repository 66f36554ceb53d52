#pragma once

#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "descent/models.hpp"

namespace descent {

namespace detail {

// Valid 5x5 convolution, activations laid out [batch, h, w, channels] with
// channels innermost, kernel [5, 5, cin, cout].
struct ConvDims {
    std::size_t h, w, cin, cout;
    std::size_t oh() const { return h - 4; }
    std::size_t ow() const { return w - 4; }
};

inline void conv5_forward(const double* in, const double* w, const double* bias, double* out,
                          std::size_t batch, ConvDims d) {
    const std::size_t oh = d.oh(), ow = d.ow();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* ib = in + b * d.h * d.w * d.cin;
        double* ob = out + b * oh * ow * d.cout;
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x) {
                double* o = ob + (y * ow + x) * d.cout;
                for (std::size_t co = 0; co < d.cout; ++co) o[co] = bias[co];
                for (std::size_t ky = 0; ky < 5; ++ky)
                    for (std::size_t kx = 0; kx < 5; ++kx) {
                        const double* ip = ib + ((y + ky) * d.w + (x + kx)) * d.cin;
                        const double* wp = w + (ky * 5 + kx) * d.cin * d.cout;
                        for (std::size_t ci = 0; ci < d.cin; ++ci) {
                            const double v = ip[ci];
                            const double* wc = wp + ci * d.cout;
                            for (std::size_t co = 0; co < d.cout; ++co) o[co] += v * wc[co];
                        }
                    }
            }
    }
}

// Accumulates kernel/bias gradients and, when din != nullptr, the input
// gradient (din must be zeroed by the caller).
inline void conv5_backward(const double* in, const double* w, const double* dout, double* dw,
                           double* db, double* din, std::size_t batch, ConvDims d) {
    const std::size_t oh = d.oh(), ow = d.ow();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* ib = in + b * d.h * d.w * d.cin;
        const double* gb = dout + b * oh * ow * d.cout;
        double* dib = din ? din + b * d.h * d.w * d.cin : nullptr;
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x) {
                const double* g = gb + (y * ow + x) * d.cout;
                for (std::size_t co = 0; co < d.cout; ++co) db[co] += g[co];
                for (std::size_t ky = 0; ky < 5; ++ky)
                    for (std::size_t kx = 0; kx < 5; ++kx) {
                        const std::size_t ioff = ((y + ky) * d.w + (x + kx)) * d.cin;
                        const double* ip = ib + ioff;
                        double* wp = dw + (ky * 5 + kx) * d.cin * d.cout;
                        for (std::size_t ci = 0; ci < d.cin; ++ci) {
                            const double v = ip[ci];
                            double* wc = wp + ci * d.cout;
                            for (std::size_t co = 0; co < d.cout; ++co) wc[co] += v * g[co];
                        }
                        if (dib) {
                            const double* wsrc = w + (ky * 5 + kx) * d.cin * d.cout;
                            double* dip = dib + ioff;
                            for (std::size_t ci = 0; ci < d.cin; ++ci) {
                                const double* wc = wsrc + ci * d.cout;
                                double acc = 0.0;
                                for (std::size_t co = 0; co < d.cout; ++co) acc += wc[co] * g[co];
                                dip[ci] += acc;
                            }
                        }
                    }
            }
    }
}

inline void avgpool2_forward(const double* in, double* out, std::size_t batch, std::size_t h,
                             std::size_t w, std::size_t ch) {
    const std::size_t oh = h / 2, ow = w / 2;
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x)
                for (std::size_t c = 0; c < ch; ++c) {
                    const std::size_t base = b * h * w * ch;
                    const double v00 = in[base + ((2 * y) * w + 2 * x) * ch + c];
                    const double v01 = in[base + ((2 * y) * w + 2 * x + 1) * ch + c];
                    const double v10 = in[base + ((2 * y + 1) * w + 2 * x) * ch + c];
                    const double v11 = in[base + ((2 * y + 1) * w + 2 * x + 1) * ch + c];
                    out[b * oh * ow * ch + (y * ow + x) * ch + c] = 0.25 * (v00 + v01 + v10 + v11);
                }
}

inline void avgpool2_backward(const double* dout, double* din, std::size_t batch, std::size_t h,
                              std::size_t w, std::size_t ch) {
    const std::size_t oh = h / 2, ow = w / 2;
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x)
                for (std::size_t c = 0; c < ch; ++c) {
                    const double g = 0.25 * dout[b * oh * ow * ch + (y * ow + x) * ch + c];
                    const std::size_t base = b * h * w * ch;
                    din[base + ((2 * y) * w + 2 * x) * ch + c] = g;
                    din[base + ((2 * y) * w + 2 * x + 1) * ch + c] = g;
                    din[base + ((2 * y + 1) * w + 2 * x) * ch + c] = g;
                    din[base + ((2 * y + 1) * w + 2 * x + 1) * ch + c] = g;
                }
}

} // namespace detail

// LeNet-5-shaped classifier for small images, native input size (no resize):
//   conv 5x5 -> 6, tanh, avgpool 2x2,
//   conv 5x5 -> 16, tanh, avgpool 2x2,
//   fc 120 tanh, fc 84 tanh, fc C softmax.
// For 32x32x3 inputs the flattened stage is the classic 16*5*5 = 400.
class SmallCnn final : public Objective {
public:
    SmallCnn(const Shape& input_shape, int classes) : classes_(classes) {
        if (input_shape.size() != 3)
            throw Error("shape", "small_cnn: input shape must be [height, width, channels]");
        if (classes < 2) throw Error("shape", "small_cnn: classes must be >= 2");
        h_ = input_shape[0];
        w_ = input_shape[1];
        cin_ = input_shape[2];
        if (h_ < 5 || w_ < 5 || cin_ == 0) throw Error("shape", "small_cnn: input too small");
        h1_ = h_ - 4;
        w1_ = w_ - 4;
        if (h1_ % 2 || w1_ % 2) throw Error("shape", "small_cnn: first pool needs even extents");
        h2_ = h1_ / 2;
        w2_ = w1_ / 2;
        if (h2_ < 5 || w2_ < 5) throw Error("shape", "small_cnn: input too small for second conv");
        h3_ = h2_ - 4;
        w3_ = w2_ - 4;
        if (h3_ % 2 || w3_ % 2) throw Error("shape", "small_cnn: second pool needs even extents");
        h4_ = h3_ / 2;
        w4_ = w3_ / 2;
        flat_ = h4_ * w4_ * 16;
    }

    std::vector<Shape> param_shapes() const override {
        const std::size_t c = static_cast<std::size_t>(classes_);
        return {{5, 5, cin_, 6}, {6},  {5, 5, 6, 16}, {16}, {flat_, 120},
                {120},           {120, 84}, {84},     {84, c}, {c}};
    }

    std::vector<Tensor> init_params(RngStream& rng) const override {
        auto shapes = param_shapes();
        std::vector<Tensor> params;
        const std::size_t fan_ins[] = {25 * cin_, 0, 25 * 6, 0, flat_, 0, 120, 0, 84, 0};
        for (std::size_t i = 0; i < shapes.size(); ++i) {
            Tensor t(shapes[i]);
            if (fan_ins[i] > 0) detail::fill_fan_in_uniform(t, fan_ins[i], rng);
            params.push_back(std::move(t));
        }
        return params;
    }

    int class_count() const override { return classes_; }

    Forward forward(const std::vector<Tensor>& params, const Batch& batch) const override {
        Cache cache;
        return run_forward(params, batch, cache);
    }

    std::vector<Tensor> backward(const std::vector<Tensor>& params,
                                 const Batch& batch) const override {
        return forward_backward(params, batch).second;
    }

    std::pair<Forward, std::vector<Tensor>> forward_backward(
        const std::vector<Tensor>& params, const Batch& batch) const override {
        Cache cache;
        Forward fwd = run_forward(params, batch, cache);
        const std::size_t B = batch.size();
        const std::size_t C = static_cast<std::size_t>(classes_);

        auto shapes = param_shapes();
        std::vector<Tensor> grads;
        for (const auto& s : shapes) grads.emplace_back(s);

        // fc stack
        Tensor dlogits = detail::ce_logit_grad(fwd.probs, batch.labels);
        Tensor dh2 = affine_backward(cache.h2, params[8], dlogits, grads[8], grads[9], B, 84, C);
        tanh_backward(dh2, cache.h2);
        Tensor dh1 = affine_backward(cache.h1b, params[6], dh2, grads[6], grads[7], B, 120, 84);
        tanh_backward(dh1, cache.h1b); // h1b holds tanh(fc1) activations
        Tensor dp2 = affine_backward(cache.flat, params[4], dh1, grads[4], grads[5], B, flat_, 120);

        // second conv block
        Tensor da2({B, h3_, w3_, 16});
        detail::avgpool2_backward(dp2.data(), da2.data(), B, h3_, w3_, 16);
        tanh_backward(da2, cache.a2);
        Tensor dp1({B, h2_, w2_, 6}, 0.0);
        detail::conv5_backward(cache.p1.data(), params[2].data(), da2.data(), grads[2].data(),
                               grads[3].data(), dp1.data(), B, {h2_, w2_, 6, 16});

        // first conv block (input gradient not needed)
        Tensor da1({B, h1_, w1_, 6});
        detail::avgpool2_backward(dp1.data(), da1.data(), B, h1_, w1_, 6);
        tanh_backward(da1, cache.a1);
        detail::conv5_backward(batch.inputs.data(), params[0].data(), da1.data(), grads[0].data(),
                               grads[1].data(), nullptr, B, {h_, w_, cin_, 6});

        return {std::move(fwd), std::move(grads)};
    }

private:
    struct Cache {
        Tensor a1;   // tanh(conv1) [B,h1,w1,6]
        Tensor p1;   // pool1       [B,h2,w2,6]
        Tensor a2;   // tanh(conv2) [B,h3,w3,16]
        Tensor p2;   // pool2       [B,h4,w4,16]
        Tensor flat; // p2 viewed as [B,flat]
        Tensor h1b;  // tanh(fc1)   [B,120]
        Tensor h2;   // tanh(fc2)   [B,84]
    };

    Forward run_forward(const std::vector<Tensor>& params, const Batch& batch,
                        Cache& cache) const {
        const std::size_t B = batch.size();
        if (B == 0) throw Error("shape", "small_cnn: empty batch");
        if (batch.inputs.size() != B * h_ * w_ * cin_)
            throw Error("shape", "small_cnn: inputs do not match " + shape_str({h_, w_, cin_}));

        cache.a1 = Tensor({B, h1_, w1_, 6});
        detail::conv5_forward(batch.inputs.data(), params[0].data(), params[1].data(),
                              cache.a1.data(), B, {h_, w_, cin_, 6});
        tanh_inplace(cache.a1);
        cache.p1 = Tensor({B, h2_, w2_, 6});
        detail::avgpool2_forward(cache.a1.data(), cache.p1.data(), B, h1_, w1_, 6);

        cache.a2 = Tensor({B, h3_, w3_, 16});
        detail::conv5_forward(cache.p1.data(), params[2].data(), params[3].data(),
                              cache.a2.data(), B, {h2_, w2_, 6, 16});
        tanh_inplace(cache.a2);
        cache.p2 = Tensor({B, h4_, w4_, 16});
        detail::avgpool2_forward(cache.a2.data(), cache.p2.data(), B, h3_, w3_, 16);
        cache.flat = Tensor({B, flat_}, std::vector<double>(cache.p2.data(),
                                                            cache.p2.data() + cache.p2.size()));

        cache.h1b = affine_forward(cache.flat, params[4], params[5], B, flat_, 120);
        tanh_inplace(cache.h1b);
        cache.h2 = affine_forward(cache.h1b, params[6], params[7], B, 120, 84);
        tanh_inplace(cache.h2);
        Tensor logits = affine_forward(cache.h2, params[8], params[9], B, 84,
                                       static_cast<std::size_t>(classes_));
        Tensor probs = detail::softmax_rows(logits);
        return {cross_entropy(probs, batch.labels), std::move(probs)};
    }

    static Tensor affine_forward(const Tensor& in, const Tensor& w, const Tensor& b,
                                 std::size_t batch, std::size_t in_n, std::size_t out_n) {
        Tensor out({batch, out_n});
        for (std::size_t s = 0; s < batch; ++s) {
            double* o = out.data() + s * out_n;
            for (std::size_t j = 0; j < out_n; ++j) o[j] = b[j];
            const double* x = in.data() + s * in_n;
            for (std::size_t i = 0; i < in_n; ++i) {
                const double v = x[i];
                if (v == 0.0) continue;
                const double* wr = w.data() + i * out_n;
                for (std::size_t j = 0; j < out_n; ++j) o[j] += v * wr[j];
            }
        }
        return out;
    }

    // Fills dw/db and returns the gradient w.r.t. the layer input.
    static Tensor affine_backward(const Tensor& in, const Tensor& w, const Tensor& dout,
                                  Tensor& dw, Tensor& db, std::size_t batch, std::size_t in_n,
                                  std::size_t out_n) {
        Tensor din({batch, in_n});
        for (std::size_t s = 0; s < batch; ++s) {
            const double* x = in.data() + s * in_n;
            const double* g = dout.data() + s * out_n;
            for (std::size_t j = 0; j < out_n; ++j) db[j] += g[j];
            for (std::size_t i = 0; i < in_n; ++i) {
                const double v = x[i];
                double* dwr = dw.data() + i * out_n;
                const double* wr = w.data() + i * out_n;
                double acc = 0.0;
                for (std::size_t j = 0; j < out_n; ++j) {
                    dwr[j] += v * g[j];
                    acc += wr[j] * g[j];
                }
                din[s * in_n + i] = acc;
            }
        }
        return din;
    }

    static void tanh_inplace(Tensor& t) {
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::tanh(t[i]);
    }

    // grad *= (1 - act^2), where act holds tanh outputs.
    static void tanh_backward(Tensor& grad, const Tensor& act) {
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= 1.0 - act[i] * act[i];
    }

    std::size_t h_ = 0, w_ = 0, cin_ = 0;
    std::size_t h1_ = 0, w1_ = 0, h2_ = 0, w2_ = 0, h3_ = 0, w3_ = 0, h4_ = 0, w4_ = 0;
    std::size_t flat_ = 0;
    int classes_;
};

inline std::unique_ptr<Objective> small_cnn(const Shape& input_shape, int classes) {
    return std::make_unique<SmallCnn>(input_shape, classes);
}

} // namespace descent
