#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "descent/descent.hpp"

// Property suite shared by `bench verify` and the acceptance runner. Each
// check re-derives its expected values from scratch (brute-force Newton
// tables, finite differences, closed forms) rather than calling back into
// the code under test.
namespace verify {

struct Failure {
    std::string detail;
};

inline void expect(bool ok, const std::string& detail) {
    if (!ok) throw Failure{detail};
}

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---- independent oracles -----------------------------------------------

// Recursive divided difference over nodes xs with values ys.
inline double dd_table(const std::vector<double>& xs, const std::vector<double>& ys, std::size_t i,
                       std::size_t j) {
    if (i == j) return ys[i];
    return (dd_table(xs, ys, i + 1, j) - dd_table(xs, ys, i, j - 1)) / (xs[j] - xs[i]);
}

// Predicted next gradient for scalar history (h0..h3): divided differences
// of the shift map h_k -> h_{k+1}, assembled with the oldest gradient as the
// leading term (not the standard Newton constant term; the [1,2,4,8] -> 31
// fixture pins this down).
inline double oracle_predict(double h0, double h1, double h2, double h3, double g) {
    const std::vector<double> xs = {h0, h1, h2};
    const std::vector<double> ys = {h1, h2, h3};
    return h0 + dd_table(xs, ys, 0, 1) * (g - h0) + dd_table(xs, ys, 0, 2) * (g - h0) * (g - h1);
}

// Central finite difference of the objective loss along coordinate (t, k).
inline double fd_grad(const descent::Objective& obj, std::vector<descent::Tensor> params,
                      const descent::Batch& batch, std::size_t t, std::size_t k) {
    const double x = params[t][k];
    const double h = 1e-5 * std::max(1.0, std::fabs(x));
    params[t][k] = x + h;
    const double up = obj.forward(params, batch).loss;
    params[t][k] = x - h;
    const double down = obj.forward(params, batch).loss;
    return (up - down) / (2.0 * h);
}

// ---- checks --------------------------------------------------------------

// Both published update forms, w*(g-n)+n and w*g+(1-w)*n, agree.
inline void check_update_identity() {
    descent::RngStream rng(101);
    auto pick = [&rng](double lo, double hi) { return lo + (hi - lo) * rng.next_uniform(); };
    for (int trial = 0; trial < 1000; ++trial) {
        const double w = rng.next_uniform();
        const double eta = pick(1e-5, 0.1);
        descent::Tensor x({4}), g({4}), n({4});
        for (std::size_t i = 0; i < 4; ++i) {
            x[i] = pick(-2, 2);
            g[i] = pick(-2, 2);
            n[i] = pick(-2, 2);
        }
        const descent::Tensor lhs = descent::nrsgd_update(x, g, n, eta, w);
        for (std::size_t i = 0; i < 4; ++i) {
            const double rhs = x[i] - eta * (w * g[i] + (1.0 - w) * n[i]);
            const double denom = std::max({1.0, std::fabs(lhs[i]), std::fabs(rhs)});
            expect(std::fabs(lhs[i] - rhs) <= 1e-12 * denom,
                   "trial " + std::to_string(trial) + ": " + num(lhs[i]) + " vs " + num(rhs));
        }
    }
}

// Noise forced to the gradient collapses the noisy rule onto plain SGD.
inline void check_sgd_reduction() {
    auto obj = descent::rosenbrock();
    descent::RngStream rng(7);
    std::vector<descent::Tensor> xs = obj->init_params(rng);
    std::vector<descent::Tensor> xn = xs;

    descent::OptimizerConfig base;
    base.schedule.eta0 = 1e-4;
    base.kind = descent::OptKind::sgd;
    descent::Optimizer sgd(base, obj->param_shapes());
    base.kind = descent::OptKind::nrsgd;
    descent::Optimizer noisy(base, obj->param_shapes());
    noisy.set_noise_override([](const descent::Tensor& g, descent::RngStream&) { return g; });

    const descent::Batch none;
    for (int i = 0; i < 200; ++i) {
        auto [fs, gs] = obj->forward_backward(xs, none);
        sgd.step(xs, gs);
        auto [fn, gn] = obj->forward_backward(xn, none);
        noisy.step(xn, gn);
    }
    for (std::size_t k = 0; k < xs[0].size(); ++k) {
        const double denom = std::max(1.0, std::fabs(xs[0][k]));
        expect(std::fabs(xs[0][k] - xn[0][k]) <= 1e-12 * denom,
               "coord " + std::to_string(k) + ": " + num(xs[0][k]) + " vs " + num(xn[0][k]));
    }
}

// Elementwise predictor against the brute-force Newton table.
inline void check_predictor_oracle() {
    const descent::GuardPolicy guard;
    descent::RngStream rng(909);
    auto pick = [&rng] { return -2.0 + 4.0 * rng.next_uniform(); };
    for (int trial = 0; trial < 1000; ++trial) {
        double h[4];
        bool separated = false;
        while (!separated) {
            for (double& v : h) v = pick();
            separated = true;
            for (int a = 0; a < 4 && separated; ++a)
                for (int b = a + 1; b < 4; ++b)
                    if (std::fabs(h[a] - h[b]) <= 10.0 * guard.epsilon) {
                        separated = false;
                        break;
                    }
        }
        const double g = pick();
        descent::GradHistory hist;
        for (double v : h) hist.push(descent::Tensor::scalar(v));
        const descent::Tensor got = descent::predict(hist, descent::Tensor::scalar(g), guard);
        const double want = oracle_predict(h[0], h[1], h[2], h[3], g);
        const double denom = std::max(1.0, std::fabs(want));
        expect(std::fabs(got[0] - want) <= 1e-10 * denom,
               "trial " + std::to_string(trial) + ": " + num(got[0]) + " vs " + num(want));
    }

    descent::GradHistory fixture;
    for (double v : {1.0, 2.0, 4.0, 8.0}) fixture.push(descent::Tensor::scalar(v));
    const descent::Tensor p = descent::predict(fixture, descent::Tensor::scalar(16.0), guard);
    expect(std::fabs(p[0] - 31.0) <= 1e-12, "fixture [1,2,4,8] at 16 gave " + num(p[0]));
}

// Constant-gradient stream: guards trip everywhere, parameters stay finite,
// and the predictor hands back the current gradient unchanged.
inline void check_degenerate_history() {
    const descent::Shape shape{8};
    descent::Tensor g(shape);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 0.25 * (static_cast<double>(i) + 1.0);

    descent::OptimizerConfig cfg;
    cfg.kind = descent::OptKind::iagd;
    cfg.schedule.eta0 = 1e-3;
    descent::Optimizer opt(cfg, {shape});
    std::vector<descent::Tensor> params{descent::Tensor(shape, 1.0)};
    std::vector<descent::Tensor> grads{g};
    for (int i = 0; i < 1000; ++i) {
        opt.step(params, grads);
        expect(params[0].all_finite(), "non-finite parameter at step " + std::to_string(i));
    }

    descent::GradHistory hist;
    for (int i = 0; i < 4; ++i) hist.push(g);
    descent::Tensor probe(shape);
    for (std::size_t i = 0; i < probe.size(); ++i) probe[i] = -1.5 + 0.4 * static_cast<double>(i);
    const descent::Tensor pred = descent::predict(hist, probe, cfg.guard);
    for (std::size_t i = 0; i < probe.size(); ++i)
        expect(pred[i] == probe[i], "guarded predictor altered element " + std::to_string(i));
}

// History shorter than 3 entries: update is exactly -(eta_i + eta_prev) * g.
inline void check_warmup_updates() {
    descent::OptimizerConfig cfg;
    cfg.kind = descent::OptKind::iagd;
    cfg.schedule = {0.003, 0.7, 2.0, false};
    const descent::Shape shape{6};
    descent::Optimizer opt(cfg, {shape});

    descent::RngStream rng(55);
    std::vector<descent::Tensor> params{descent::Tensor(shape)};
    for (std::size_t i = 0; i < shape[0]; ++i) params[0][i] = 2.0 * rng.next_uniform() - 1.0;

    for (long i = 0; i < 3; ++i) {
        descent::Tensor g(shape);
        for (std::size_t k = 0; k < shape[0]; ++k) g[k] = 2.0 * rng.next_uniform() - 1.0;
        const descent::Tensor before = params[0];
        std::vector<descent::Tensor> grads{g};
        opt.step(params, grads);
        const double eta_i = descent::rate(cfg.schedule, i);
        const double eta_prev = i == 0 ? cfg.schedule.eta0 : descent::rate(cfg.schedule, i - 1);
        for (std::size_t k = 0; k < shape[0]; ++k) {
            const double want = before[k] - (eta_i + eta_prev) * g[k];
            const double denom = std::max(1.0, std::fabs(want));
            expect(std::fabs(params[0][k] - want) <= 1e-14 * denom,
                   "step " + std::to_string(i) + " coord " + std::to_string(k) + ": " +
                       num(params[0][k]) + " vs " + num(want));
        }
    }
}

inline void check_schedule() {
    descent::LrSchedule d;
    expect(descent::rate(d, 0) == d.eta0, "rate(0) != eta0 under defaults");
    descent::LrSchedule s{0.001, 0.5, 1.0, false};
    expect(descent::rate(s, 0) == 0.001, "rate(0) != eta0");
    expect(std::fabs(descent::rate(s, 2) - 0.00025) <= 1e-15,
           "rate(2) = " + num(descent::rate(s, 2)));
    descent::LrSchedule m{0.05, 0.37, 3.0, false};
    double prev = descent::rate(m, 0);
    for (long i = 1; i <= 10000; ++i) {
        const double cur = descent::rate(m, i);
        expect(cur <= prev, "rate increased at i=" + std::to_string(i));
        prev = cur;
    }
}

// Sampled noise matches the gradient's own mean and spread: mean within
// 4/sqrt(n) of 3, std within 2% of 1, for the alternating 2/4 tensor.
inline void check_noise_statistics() {
    const std::size_t n = 100000;
    descent::Tensor g({n});
    for (std::size_t i = 0; i < n; ++i) g[i] = (i % 2 == 0) ? 2.0 : 4.0;
    const descent::MeanStd stats = descent::reduce_mean_std(g);
    expect(stats.mean == 3.0 && stats.std == 1.0,
           "reduce gave mean " + num(stats.mean) + " std " + num(stats.std));

    descent::RngStream rng(2027);
    const descent::Tensor draws = descent::sample_normal(rng, {n}, stats.mean, stats.std);
    const descent::MeanStd emp = descent::reduce_mean_std(draws);
    const double mean_tol = 4.0 / std::sqrt(static_cast<double>(n));
    expect(std::fabs(emp.mean - 3.0) <= mean_tol, "empirical mean " + num(emp.mean));
    expect(std::fabs(emp.std - 1.0) <= 0.02, "empirical std " + num(emp.std));
}

inline void check_gradients_for(const descent::Objective& obj, const descent::Batch& batch,
                                const std::string& label, std::uint64_t seed) {
    for (int point = 0; point < 10; ++point) {
        descent::RngStream rng(descent::RngStream::mix(seed, static_cast<std::uint64_t>(point)));
        std::vector<descent::Tensor> params = obj.init_params(rng);
        for (auto& t : params)
            for (std::size_t k = 0; k < t.size(); ++k)
                t[k] += 0.2 * (2.0 * rng.next_uniform() - 1.0);

        auto [fwd, grads] = obj.forward_backward(params, batch);
        expect(std::isfinite(fwd.loss), label + ": non-finite loss");
        for (std::size_t t = 0; t < params.size(); ++t) {
            const std::size_t size = params[t].size();
            std::vector<std::size_t> coords;
            if (size <= 24) {
                for (std::size_t k = 0; k < size; ++k) coords.push_back(k);
            } else {
                for (int k = 0; k < 12; ++k)
                    coords.push_back(static_cast<std::size_t>(rng.next_u64() % size));
            }
            for (std::size_t k : coords) {
                const double fd = fd_grad(obj, params, batch, t, k);
                const double an = grads[t][k];
                const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-2});
                expect(std::fabs(fd - an) <= 1e-5 * denom,
                       label + " point " + std::to_string(point) + " tensor " + std::to_string(t) +
                           " coord " + std::to_string(k) + ": analytic " + num(an) + " vs fd " +
                           num(fd));
            }
        }
    }
}

inline descent::Batch random_batch(const descent::Shape& input_shape, int classes,
                                   std::uint64_t seed) {
    descent::RngStream rng(seed);
    descent::Tensor inputs(input_shape);
    for (std::size_t i = 0; i < inputs.size(); ++i) inputs[i] = rng.next_uniform();
    descent::Batch batch;
    batch.inputs = std::move(inputs);
    const std::size_t n = input_shape[0];
    batch.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) batch.labels[i] = static_cast<int>(i % classes);
    return batch;
}

inline void check_gradient_checks() {
    const descent::Batch none;
    check_gradients_for(*descent::quadratic_bowl(3), none, "quadratic", 11);
    check_gradients_for(*descent::rosenbrock(), none, "rosenbrock", 12);
    check_gradients_for(*descent::softmax_classifier(5, 3), random_batch({6, 5}, 3, 13),
                        "softmax", 14);
    check_gradients_for(*descent::mlp({4, 6, 3}), random_batch({6, 4}, 3, 15), "mlp", 16);
    check_gradients_for(*descent::small_cnn({16, 16, 2}, 2), random_batch({4, 16, 16, 2}, 2, 17),
                        "cnn", 18);
}

inline void check_uniform_loss() {
    auto obj = descent::softmax_classifier(50, 10);
    descent::RngStream rng(21);
    std::vector<descent::Tensor> params = obj->init_params(rng);
    const descent::Batch batch = random_batch({32, 50}, 10, 22);
    const double loss = obj->forward(params, batch).loss;
    expect(std::fabs(loss - std::log(10.0)) <= 1e-4, "initial loss " + num(loss));
}

// ---- driver ----------------------------------------------------------------

struct Check {
    const char* name;
    void (*body)();
    double time_budget_seconds; // 0 disables the bound
};

inline const std::vector<Check>& checks() {
    static const std::vector<Check> list = {
        {"update-identity", check_update_identity, 1.0},
        {"sgd-reduction", check_sgd_reduction, 1.0},
        {"predictor-oracle", check_predictor_oracle, 1.0},
        {"degenerate-history", check_degenerate_history, 0.0},
        {"warmup-updates", check_warmup_updates, 0.0},
        {"lr-schedule", check_schedule, 0.0},
        {"noise-statistics", check_noise_statistics, 0.0},
        {"gradient-check", check_gradient_checks, 0.0},
        {"uniform-loss", check_uniform_loss, 0.0},
    };
    return list;
}

// Runs every check, prints one PASS/FAIL line each, returns failure count.
inline int run_all(std::ostream& out) {
    int failures = 0;
    for (const auto& check : checks()) {
        std::string detail;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            check.body();
        } catch (const Failure& f) {
            detail = f.detail;
        } catch (const descent::Error& e) {
            detail = std::string("error [") + e.code() + "]: " + e.what();
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double elapsed = std::chrono::duration<double>(
            std::chrono::steady_clock::now() - t0).count();
        if (detail.empty() && check.time_budget_seconds > 0.0 &&
            elapsed > check.time_budget_seconds)
            detail = "took " + std::to_string(elapsed) + "s, budget " +
                     std::to_string(check.time_budget_seconds) + "s";
        if (detail.empty()) {
            out << "PASS " << check.name << "\n";
        } else {
            out << "FAIL " << check.name << ": " << detail << "\n";
            ++failures;
        }
    }
    return failures;
}

} // namespace verify
