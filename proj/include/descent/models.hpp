#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

#include "descent/error.hpp"
#include "descent/rng.hpp"
#include "descent/tensor.hpp"

namespace descent {

// One minibatch: inputs [batch, features...] plus integer class ids.
// Analytic objectives ignore both fields.
struct Batch {
    Tensor inputs;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
};

inline const Batch& empty_batch() {
    static const Batch batch{};
    return batch;
}

constexpr double kProbClamp = 1e-12; // probability floor/ceiling before logs

// Cross-entropy over normalized per-row probabilities [batch, C].
// C == 2 uses the binary form -(1/N) sum y*log(p) + (1-y)*log(1-p) with p the
// probability of class 1; C > 2 uses the categorical form -(1/N) sum log p_y.
inline double cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
    if (probs.shape().size() != 2)
        throw Error("shape", "cross_entropy: probs must be [batch, classes]");
    const std::size_t batch = probs.shape()[0];
    const std::size_t classes = probs.shape()[1];
    if (batch != labels.size())
        throw Error("shape", "cross_entropy: batch size mismatch");
    if (batch == 0) throw Error("shape", "cross_entropy: empty batch");

    auto clamp = [](double p) { return std::min(1.0 - kProbClamp, std::max(kProbClamp, p)); };

    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const int y = labels[b];
        if (y < 0 || static_cast<std::size_t>(y) >= classes)
            throw Error("label", "cross_entropy: label " + std::to_string(y) + " out of range");
        if (classes == 2) {
            const double p = clamp(probs[b * 2 + 1]);
            total += y == 1 ? std::log(p) : std::log(1.0 - p);
        } else {
            total += std::log(clamp(probs[b * classes + static_cast<std::size_t>(y)]));
        }
    }
    return -total / static_cast<double>(batch);
}

struct Forward {
    double loss = 0.0;
    Tensor probs; // [batch, C] for classifiers, empty otherwise
};

// A differentiable objective with exact hand-coded gradients. forward and
// backward are pure; backward must agree with central finite differences of
// forward.
class Objective {
public:
    virtual ~Objective() = default;

    virtual std::vector<Shape> param_shapes() const = 0;
    virtual std::vector<Tensor> init_params(RngStream& rng) const = 0;
    virtual Forward forward(const std::vector<Tensor>& params, const Batch& batch) const = 0;
    virtual std::vector<Tensor> backward(const std::vector<Tensor>& params,
                                         const Batch& batch) const = 0;

    // Loss and gradients from one pass; the default recomputes.
    virtual std::pair<Forward, std::vector<Tensor>> forward_backward(
        const std::vector<Tensor>& params, const Batch& batch) const {
        return {forward(params, batch), backward(params, batch)};
    }

    // 0 for non-classifier objectives.
    virtual int class_count() const { return 0; }
};

namespace detail {

// Row-wise stable softmax of logits [batch, C].
inline Tensor softmax_rows(const Tensor& logits) {
    const std::size_t batch = logits.shape()[0];
    const std::size_t classes = logits.shape()[1];
    Tensor probs(logits.shape());
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = logits.data() + b * classes;
        double* out = probs.data() + b * classes;
        double maxv = row[0];
        for (std::size_t c = 1; c < classes; ++c) maxv = std::max(maxv, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            out[c] = std::exp(row[c] - maxv);
            sum += out[c];
        }
        for (std::size_t c = 0; c < classes; ++c) out[c] /= sum;
    }
    return probs;
}

// d(loss)/d(logits) for softmax + cross-entropy: (p - onehot) / batch.
inline Tensor ce_logit_grad(const Tensor& probs, const std::vector<int>& labels) {
    const std::size_t batch = probs.shape()[0];
    const std::size_t classes = probs.shape()[1];
    Tensor dlogits(probs.shape());
    const double inv = 1.0 / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < classes; ++c) {
            const double onehot = static_cast<std::size_t>(labels[b]) == c ? 1.0 : 0.0;
            dlogits[b * classes + c] = (probs[b * classes + c] - onehot) * inv;
        }
    }
    return dlogits;
}

inline std::size_t argmax_row(const Tensor& probs, std::size_t row) {
    const std::size_t classes = probs.shape()[1];
    const double* p = probs.data() + row * classes;
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c)
        if (p[c] > p[best]) best = c;
    return best;
}

// Weights uniform in (-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
inline void fill_fan_in_uniform(Tensor& w, std::size_t fan_in, RngStream& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = bound * (2.0 * rng.next_uniform() - 1.0);
}

} // namespace detail

// f(x) = 0.5 * ||x||^2, gradient x. Fixed start at all-ones.
class QuadraticBowl final : public Objective {
public:
    explicit QuadraticBowl(std::size_t dim) : dim_(dim) {
        if (dim == 0) throw Error("config", "quadratic_bowl: dim must be >= 1");
    }

    std::vector<Shape> param_shapes() const override { return {{dim_}}; }

    std::vector<Tensor> init_params(RngStream&) const override {
        return {Tensor({dim_}, 1.0)};
    }

    Forward forward(const std::vector<Tensor>& params, const Batch&) const override {
        const Tensor& x = params[0];
        double loss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) loss += x[i] * x[i];
        return {0.5 * loss, Tensor()};
    }

    std::vector<Tensor> backward(const std::vector<Tensor>& params, const Batch&) const override {
        return {params[0]};
    }

private:
    std::size_t dim_;
};

// f(x, y) = (1-x)^2 + 100*(y - x^2)^2. Minimum at (1, 1); classic start
// at (-1.2, 1).
class Rosenbrock final : public Objective {
public:
    std::vector<Shape> param_shapes() const override { return {{2}}; }

    std::vector<Tensor> init_params(RngStream&) const override {
        return {Tensor({2}, {-1.2, 1.0})};
    }

    Forward forward(const std::vector<Tensor>& params, const Batch&) const override {
        const double x = params[0][0];
        const double y = params[0][1];
        const double a = 1.0 - x;
        const double b = y - x * x;
        return {a * a + 100.0 * b * b, Tensor()};
    }

    std::vector<Tensor> backward(const std::vector<Tensor>& params, const Batch&) const override {
        const double x = params[0][0];
        const double y = params[0][1];
        const double b = y - x * x;
        return {Tensor({2}, {-2.0 * (1.0 - x) - 400.0 * x * b, 200.0 * b})};
    }

private:
};

// Linear softmax classifier: logits = x W + b. Zero-initialized, so its
// first loss on any batch is log(C) exactly (up to the probability clamp).
class SoftmaxClassifier final : public Objective {
public:
    SoftmaxClassifier(std::size_t features, int classes) : features_(features), classes_(classes) {
        if (features == 0) throw Error("shape", "softmax_classifier: features must be >= 1");
        if (classes < 2) throw Error("shape", "softmax_classifier: classes must be >= 2");
    }

    std::vector<Shape> param_shapes() const override {
        return {{features_, static_cast<std::size_t>(classes_)}, {static_cast<std::size_t>(classes_)}};
    }

    std::vector<Tensor> init_params(RngStream&) const override {
        return {Tensor(param_shapes()[0]), Tensor(param_shapes()[1])};
    }

    int class_count() const override { return classes_; }

    Forward forward(const std::vector<Tensor>& params, const Batch& batch) const override {
        const Tensor probs = detail::softmax_rows(logits(params, batch));
        return {cross_entropy(probs, batch.labels), probs};
    }

    std::vector<Tensor> backward(const std::vector<Tensor>& params,
                                 const Batch& batch) const override {
        return forward_backward(params, batch).second;
    }

    std::pair<Forward, std::vector<Tensor>> forward_backward(
        const std::vector<Tensor>& params, const Batch& batch) const override {
        const Tensor probs = detail::softmax_rows(logits(params, batch));
        Forward fwd{cross_entropy(probs, batch.labels), probs};

        const Tensor dlogits = detail::ce_logit_grad(probs, batch.labels);
        const std::size_t batch_n = batch.size();
        const std::size_t C = static_cast<std::size_t>(classes_);
        Tensor dw(param_shapes()[0]);
        Tensor db(param_shapes()[1]);
        const double* x = batch.inputs.data();
        for (std::size_t b = 0; b < batch_n; ++b) {
            for (std::size_t f = 0; f < features_; ++f) {
                const double xv = x[b * features_ + f];
                if (xv == 0.0) continue;
                for (std::size_t c = 0; c < C; ++c)
                    dw[f * C + c] += xv * dlogits[b * C + c];
            }
            for (std::size_t c = 0; c < C; ++c) db[c] += dlogits[b * C + c];
        }
        return {std::move(fwd), {std::move(dw), std::move(db)}};
    }

private:
    Tensor logits(const std::vector<Tensor>& params, const Batch& batch) const {
        check_batch(batch);
        const Tensor& w = params[0];
        const Tensor& bias = params[1];
        const std::size_t batch_n = batch.size();
        const std::size_t C = static_cast<std::size_t>(classes_);
        Tensor out({batch_n, C});
        const double* x = batch.inputs.data();
        for (std::size_t b = 0; b < batch_n; ++b) {
            for (std::size_t c = 0; c < C; ++c) out[b * C + c] = bias[c];
            for (std::size_t f = 0; f < features_; ++f) {
                const double xv = x[b * features_ + f];
                if (xv == 0.0) continue;
                for (std::size_t c = 0; c < C; ++c)
                    out[b * C + c] += xv * w[f * C + c];
            }
        }
        return out;
    }

    void check_batch(const Batch& batch) const {
        if (batch.size() == 0) throw Error("shape", "softmax_classifier: empty batch");
        if (batch.inputs.size() != batch.size() * features_)
            throw Error("shape", "softmax_classifier: inputs do not match feature count");
    }

    std::size_t features_;
    int classes_;
};

// Fully connected network with tanh hidden activations and a softmax output.
// layer_sizes runs [inputs, hidden..., classes]; weights start fan-in
// uniform, biases zero.
class Mlp final : public Objective {
public:
    explicit Mlp(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
        if (sizes_.size() < 2) throw Error("shape", "mlp: need at least input and output sizes");
        for (std::size_t s : sizes_)
            if (s == 0) throw Error("shape", "mlp: zero layer size");
        if (sizes_.back() < 2) throw Error("shape", "mlp: output classes must be >= 2");
    }

    std::vector<Shape> param_shapes() const override {
        std::vector<Shape> shapes;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            shapes.push_back({sizes_[l], sizes_[l + 1]});
            shapes.push_back({sizes_[l + 1]});
        }
        return shapes;
    }

    std::vector<Tensor> init_params(RngStream& rng) const override {
        std::vector<Tensor> params;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            Tensor w({sizes_[l], sizes_[l + 1]});
            detail::fill_fan_in_uniform(w, sizes_[l], rng);
            params.push_back(std::move(w));
            params.push_back(Tensor({sizes_[l + 1]}));
        }
        return params;
    }

    int class_count() const override { return static_cast<int>(sizes_.back()); }

    Forward forward(const std::vector<Tensor>& params, const Batch& batch) const override {
        std::vector<Tensor> acts;
        return run_forward(params, batch, acts);
    }

    std::vector<Tensor> backward(const std::vector<Tensor>& params,
                                 const Batch& batch) const override {
        return forward_backward(params, batch).second;
    }

    std::pair<Forward, std::vector<Tensor>> forward_backward(
        const std::vector<Tensor>& params, const Batch& batch) const override {
        std::vector<Tensor> acts; // acts[l]: input to layer l, plus final probs
        Forward fwd = run_forward(params, batch, acts);

        const std::size_t batch_n = batch.size();
        const std::size_t layers = sizes_.size() - 1;
        std::vector<Tensor> grads(params.size());
        Tensor delta = detail::ce_logit_grad(acts.back(), batch.labels);
        for (std::size_t l = layers; l-- > 0;) {
            const Tensor& input = acts[l];
            const std::size_t in_n = sizes_[l];
            const std::size_t out_n = sizes_[l + 1];
            Tensor dw({in_n, out_n});
            Tensor db({out_n});
            for (std::size_t b = 0; b < batch_n; ++b) {
                for (std::size_t i = 0; i < in_n; ++i) {
                    const double xv = input[b * in_n + i];
                    if (xv == 0.0) continue;
                    for (std::size_t o = 0; o < out_n; ++o)
                        dw[i * out_n + o] += xv * delta[b * out_n + o];
                }
                for (std::size_t o = 0; o < out_n; ++o) db[o] += delta[b * out_n + o];
            }
            grads[2 * l] = std::move(dw);
            grads[2 * l + 1] = std::move(db);
            if (l > 0) {
                // back through the affine map, then through tanh:
                // d/dz tanh(z) = 1 - tanh(z)^2, and input holds tanh(z).
                const Tensor& w = params[2 * l];
                Tensor prev({batch_n, in_n});
                for (std::size_t b = 0; b < batch_n; ++b)
                    for (std::size_t i = 0; i < in_n; ++i) {
                        double acc = 0.0;
                        for (std::size_t o = 0; o < out_n; ++o)
                            acc += w[i * out_n + o] * delta[b * out_n + o];
                        const double a = input[b * in_n + i];
                        prev[b * in_n + i] = acc * (1.0 - a * a);
                    }
                delta = std::move(prev);
            }
        }
        return {std::move(fwd), std::move(grads)};
    }

private:
    Forward run_forward(const std::vector<Tensor>& params, const Batch& batch,
                        std::vector<Tensor>& acts) const {
        if (batch.size() == 0) throw Error("shape", "mlp: empty batch");
        if (batch.inputs.size() != batch.size() * sizes_.front())
            throw Error("shape", "mlp: inputs do not match input size");
        const std::size_t batch_n = batch.size();
        const std::size_t layers = sizes_.size() - 1;

        acts.clear();
        Tensor cur({batch_n, sizes_.front()},
                   std::vector<double>(batch.inputs.data(), batch.inputs.data() + batch.inputs.size()));
        for (std::size_t l = 0; l < layers; ++l) {
            acts.push_back(cur);
            const Tensor& w = params[2 * l];
            const Tensor& bias = params[2 * l + 1];
            const std::size_t in_n = sizes_[l];
            const std::size_t out_n = sizes_[l + 1];
            Tensor next({batch_n, out_n});
            for (std::size_t b = 0; b < batch_n; ++b) {
                for (std::size_t o = 0; o < out_n; ++o) next[b * out_n + o] = bias[o];
                for (std::size_t i = 0; i < in_n; ++i) {
                    const double xv = cur[b * in_n + i];
                    if (xv == 0.0) continue;
                    for (std::size_t o = 0; o < out_n; ++o)
                        next[b * out_n + o] += xv * w[i * out_n + o];
                }
            }
            if (l + 1 < layers)
                for (std::size_t k = 0; k < next.size(); ++k) next[k] = std::tanh(next[k]);
            cur = std::move(next);
        }
        Tensor probs = detail::softmax_rows(cur);
        acts.push_back(probs);
        return {cross_entropy(probs, batch.labels), std::move(probs)};
    }

    std::vector<std::size_t> sizes_;
};

inline std::unique_ptr<Objective> quadratic_bowl(std::size_t dim) {
    return std::make_unique<QuadraticBowl>(dim);
}

inline std::unique_ptr<Objective> rosenbrock() {
    return std::make_unique<Rosenbrock>();
}

inline std::unique_ptr<Objective> softmax_classifier(std::size_t features, int classes) {
    return std::make_unique<SoftmaxClassifier>(features, classes);
}

inline std::unique_ptr<Objective> mlp(std::vector<std::size_t> layer_sizes) {
    return std::make_unique<Mlp>(std::move(layer_sizes));
}

} // namespace descent
