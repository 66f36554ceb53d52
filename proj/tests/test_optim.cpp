#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "descent/models.hpp"
#include "descent/optim.hpp"
#include "oracles.hpp"

using namespace descent;

namespace {

LrSchedule constant_rate(double eta0) { return LrSchedule{eta0, 1.0, 1.0, false}; }

OptimizerConfig base_config(OptKind kind, double eta0) {
    OptimizerConfig cfg;
    cfg.kind = kind;
    cfg.schedule = constant_rate(eta0);
    return cfg;
}

} // namespace

TEST_CASE("kind names round-trip") {
    for (OptKind k : {OptKind::sgd, OptKind::momentum, OptKind::adam, OptKind::rmsprop,
                      OptKind::nrsgd, OptKind::iagd})
        CHECK(parse_opt_kind(to_string(k)) == k);
    CHECK_THROWS_MATCHES(parse_opt_kind("adagrad"), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == "config"; }));
}

TEST_CASE("plain gradient step") {
    const Tensor out = sgd_update(Tensor::scalar(1.0), Tensor::scalar(2.0), 0.1);
    CHECK(out[0] == 0.8);

    // f(x) = x^2 from x = 1 with rate 0.4: 1 - 0.4*2 = 0.2
    Tensor x = Tensor::scalar(1.0);
    x = sgd_update(x, Tensor::scalar(2.0 * x[0]), 0.4);
    CHECK_THAT(x[0], Catch::Matchers::WithinAbs(0.2, 1e-15));

    CHECK_THROWS_MATCHES(sgd_update(Tensor::vec({1, 2}), Tensor::scalar(1.0), 0.1), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == "shape"; }));
}

TEST_CASE("noise-blended step") {
    // x - eta*(w*(g-n) + n) with x=1, eta=0.1, w=0.5, g=2, n=1: 1 - 0.15
    const Tensor out =
        nrsgd_update(Tensor::scalar(1.0), Tensor::scalar(2.0), Tensor::scalar(1.0), 0.1, 0.5);
    CHECK(out[0] == 0.85);

    // w = 1 ignores the noise entirely
    const Tensor full =
        nrsgd_update(Tensor::scalar(1.0), Tensor::scalar(2.0), Tensor::scalar(99.0), 0.1, 1.0);
    CHECK(full[0] == sgd_update(Tensor::scalar(1.0), Tensor::scalar(2.0), 0.1)[0]);
}

TEST_CASE("blend form matches the weighted-sum form") {
    RngStream rng(515);
    auto pick = [&rng] { return -5.0 + 10.0 * rng.next_uniform(); };
    for (int trial = 0; trial < 1000; ++trial) {
        const double x = pick(), g = pick(), n = pick();
        const double eta = 1e-4 + rng.next_uniform();
        const double w = rng.next_uniform();
        const double got = nrsgd_update(Tensor::scalar(x), Tensor::scalar(g),
                                        Tensor::scalar(n), eta, w)[0];
        const double want = x - eta * (w * g + (1.0 - w) * n);
        REQUIRE(std::fabs(got - want) <=
                1e-12 * std::max({1.0, std::fabs(got), std::fabs(want)}));
    }
}

TEST_CASE("noise pinned to the gradient reduces to the plain step") {
    auto obj = rosenbrock();
    RngStream init(0);

    std::vector<Tensor> xs = obj->init_params(init);
    std::vector<Tensor> xn = obj->init_params(init);

    Optimizer sgd(base_config(OptKind::sgd, 1e-4), obj->param_shapes());
    OptimizerConfig ncfg = base_config(OptKind::nrsgd, 1e-4);
    ncfg.w = 0.37;
    Optimizer nrsgd(ncfg, obj->param_shapes());
    nrsgd.set_noise_override([](const Tensor& g, RngStream&) { return g; });

    for (int i = 0; i < 200; ++i) {
        sgd.step(xs, obj->backward(xs, empty_batch()));
        nrsgd.step(xn, obj->backward(xn, empty_batch()));
        REQUIRE(xs[0][0] == xn[0][0]);
        REQUIRE(xs[0][1] == xn[0][1]);
    }
}

TEST_CASE("mean update direction blends gradient and gradient-mean") {
    // direction d = w*g + (1-w)*n with n ~ N(mean(g), std(g)), so
    // E[d] = w*(g - mean(g)) + mean(g), elementwise.
    const Tensor g = Tensor::vec({1, 2, 3, 4, 5});
    const MeanStd stats = reduce_mean_std(g);
    const double w = 0.3;
    const double eta = 0.5;
    const int n = 100000;

    OptimizerConfig cfg = base_config(OptKind::nrsgd, eta);
    cfg.w = w;
    cfg.seed = 99;
    Optimizer opt(cfg, {g.shape()});

    const Tensor x0 = Tensor::vec({0, 0, 0, 0, 0});
    std::vector<double> sum(g.size(), 0.0);
    for (int trial = 0; trial < n; ++trial) {
        std::vector<Tensor> x = {x0};
        opt.step(x, {g});
        for (std::size_t k = 0; k < g.size(); ++k) sum[k] += (x0[k] - x[0][k]) / eta;
    }
    // per-element std of d is (1-w)*std(g); allow 4 standard errors
    const double tol = 4.0 * (1.0 - w) * stats.std / std::sqrt(static_cast<double>(n));
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double want = w * (g[k] - stats.mean) + stats.mean;
        CHECK_THAT(sum[k] / n, Catch::Matchers::WithinAbs(want, tol));
    }
}

TEST_CASE("two-gradient warm-up uses the identity predictor") {
    LrSchedule sched{0.003, 0.7, 2.0, false};
    OptimizerConfig cfg = base_config(OptKind::iagd, 0.003);
    cfg.schedule = sched;
    Optimizer opt(cfg, {Shape{1}});

    std::vector<Tensor> x = {Tensor::scalar(10.0)};
    const double gs[3] = {1.0, -2.0, 0.5};
    for (long i = 0; i < 3; ++i) {
        const double before = x[0][0];
        opt.step(x, {Tensor::scalar(gs[i])});
        const double want = before - (rate(sched, i) + rate_prev(sched, i)) * gs[i];
        REQUIRE_THAT(x[0][0], Catch::Matchers::WithinRel(want, 1e-14));
    }
}

TEST_CASE("three-entry history uses the first-order predictor only") {
    OptimizerConfig cfg = base_config(OptKind::iagd, 0.01);
    Optimizer opt(cfg, {Shape{1}});
    std::vector<Tensor> x = {Tensor::scalar(0.0)};
    for (double g : {1.0, 2.0, 4.0}) opt.step(x, {Tensor::scalar(g)});

    const double before = x[0][0];
    opt.step(x, {Tensor::scalar(5.0)});
    const double pred = oracles::predict1(1, 2, 4, 5);
    CHECK(pred == 9.0);
    CHECK_THAT(x[0][0],
               Catch::Matchers::WithinRel(before - 0.01 * (5.0 + pred), 1e-14));
}

TEST_CASE("full history drives the second-order predictor") {
    OptimizerConfig cfg = base_config(OptKind::iagd, 0.001);
    Optimizer opt(cfg, {Shape{1}});
    std::vector<Tensor> x = {Tensor::scalar(1.0)};
    for (double g : {1.0, 2.0, 4.0, 8.0}) opt.step(x, {Tensor::scalar(g)});

    const double before = x[0][0];
    opt.step(x, {Tensor::scalar(16.0)});
    // predicted gradient 31, update -(0.001*16 + 0.001*31) = -0.047
    CHECK_THAT(x[0][0] - before, Catch::Matchers::WithinRel(-0.047, 1e-13));
}

TEST_CASE("constant gradient stream doubles the step") {
    OptimizerConfig cfg = base_config(OptKind::iagd, 0.05);
    Optimizer opt(cfg, {Shape{1}});
    std::vector<Tensor> x = {Tensor::scalar(3.0)};
    const Tensor g = Tensor::scalar(0.25);
    for (int i = 0; i < 10; ++i) {
        const double before = x[0][0];
        opt.step(x, {g});
        REQUIRE_THAT(x[0][0] - before, Catch::Matchers::WithinRel(-2.0 * 0.05 * 0.25, 1e-14));
        REQUIRE(std::isfinite(x[0][0]));
    }
}

TEST_CASE("alternating mode takes plain steps between combined ones") {
    LrSchedule sched{0.01, 0.8, 3.0, false};
    OptimizerConfig cfg = base_config(OptKind::iagd, 0.01);
    cfg.schedule = sched;
    cfg.iagd_every_other = true;
    Optimizer opt(cfg, {Shape{1}});

    std::vector<Tensor> x = {Tensor::scalar(0.0)};
    const double g0 = 2.0, g1 = 3.0;

    // step 0 is plain: -eta_0 * g0
    opt.step(x, {Tensor::scalar(g0)});
    REQUIRE_THAT(x[0][0], Catch::Matchers::WithinRel(-rate(sched, 0) * g0, 1e-14));

    // step 1 combines; one stored gradient means the identity predictor
    const double before = x[0][0];
    opt.step(x, {Tensor::scalar(g1)});
    const double want = before - (rate(sched, 1) + rate_prev(sched, 1)) * g1;
    REQUIRE_THAT(x[0][0], Catch::Matchers::WithinRel(want, 1e-14));

    // history grows on plain steps too: after 4 steps the predictor sees
    // the full window on step 5 (odd, combined)
    opt.step(x, {Tensor::scalar(1.0)});
    opt.step(x, {Tensor::scalar(2.0)});
    opt.step(x, {Tensor::scalar(4.0)});
    const double at5 = x[0][0];
    opt.step(x, {Tensor::scalar(8.0)});
    // history [g1, 1, 2, 4] before the push; predictor evaluated at 8
    const double pred = oracles::predict2(g1, 1.0, 2.0, 4.0, 8.0);
    const double want5 = at5 - (rate(sched, 5) * 8.0 + rate(sched, 4) * pred);
    REQUIRE_THAT(x[0][0], Catch::Matchers::WithinRel(want5, 1e-12));
}

TEST_CASE("momentum with beta zero matches the plain step") {
    RngStream rng(77);
    OptimizerConfig mcfg = base_config(OptKind::momentum, 0.02);
    mcfg.momentum.beta = 0.0;
    Optimizer mom(mcfg, {Shape{3}});
    Optimizer sgd(base_config(OptKind::sgd, 0.02), {Shape{3}});

    std::vector<Tensor> xm = {Tensor::vec({1, -1, 2})};
    std::vector<Tensor> xs = {xm[0]};
    for (int i = 0; i < 50; ++i) {
        Tensor g({3});
        for (std::size_t k = 0; k < 3; ++k) g[k] = rng.next_normal();
        mom.step(xm, {g});
        sgd.step(xs, {g});
        for (std::size_t k = 0; k < 3; ++k) REQUIRE(xm[0][k] == xs[0][k]);
    }
}

TEST_CASE("momentum accumulates velocity") {
    OptimizerConfig cfg = base_config(OptKind::momentum, 0.1);
    cfg.momentum.beta = 0.5;
    Optimizer opt(cfg, {Shape{1}});
    std::vector<Tensor> x = {Tensor::scalar(0.0)};
    const Tensor g = Tensor::scalar(1.0);
    opt.step(x, {g}); // v=1,   x = -0.1
    CHECK_THAT(x[0][0], Catch::Matchers::WithinAbs(-0.1, 1e-15));
    opt.step(x, {g}); // v=1.5, x = -0.25
    CHECK_THAT(x[0][0], Catch::Matchers::WithinAbs(-0.25, 1e-15));
}

TEST_CASE("adaptive baselines descend a one-dimensional parabola") {
    for (OptKind kind : {OptKind::adam, OptKind::rmsprop}) {
        Optimizer opt(base_config(kind, 0.1), {Shape{1}});
        std::vector<Tensor> x = {Tensor::scalar(1.0)};
        double prev = x[0][0] * x[0][0];
        for (int i = 0; i < 10; ++i) {
            opt.step(x, {Tensor::scalar(2.0 * x[0][0])});
            const double loss = x[0][0] * x[0][0];
            REQUIRE(loss < prev);
            prev = loss;
        }
    }
}

TEST_CASE("adam first step moves by roughly the learning rate") {
    // bias correction makes mhat/sqrt(vhat) = sign(g) at t=1
    Optimizer opt(base_config(OptKind::adam, 0.1), {Shape{1}});
    std::vector<Tensor> x = {Tensor::scalar(1.0)};
    opt.step(x, {Tensor::scalar(0.004)});
    CHECK_THAT(x[0][0], Catch::Matchers::WithinAbs(0.9, 1e-6));
}

TEST_CASE("zero gradient is a fixed point of every optimizer") {
    for (OptKind kind : {OptKind::sgd, OptKind::momentum, OptKind::adam, OptKind::rmsprop,
                         OptKind::nrsgd, OptKind::iagd}) {
        OptimizerConfig cfg = base_config(kind, 0.3);
        cfg.seed = 11;
        Optimizer opt(cfg, {Shape{2}});
        std::vector<Tensor> x = {Tensor::vec({1.5, -2.5})};
        const Tensor zero({2});
        for (int i = 0; i < 5; ++i) {
            opt.step(x, {zero});
            REQUIRE(x[0][0] == 1.5);
            REQUIRE(x[0][1] == -2.5);
        }
    }
}

TEST_CASE("noisy steps are reproducible per seed") {
    OptimizerConfig cfg = base_config(OptKind::nrsgd, 0.01);
    cfg.w = 0.4;
    cfg.seed = 123;
    const Tensor g = Tensor::vec({0.5, 1.5, -0.5});

    auto run = [&](std::uint64_t seed) {
        OptimizerConfig c = cfg;
        c.seed = seed;
        Optimizer opt(c, {g.shape()});
        std::vector<Tensor> x = {Tensor::vec({1, 2, 3})};
        for (int i = 0; i < 20; ++i) opt.step(x, {g});
        return x[0];
    };

    const Tensor a = run(123), b = run(123), c = run(124);
    for (std::size_t k = 0; k < 3; ++k) CHECK(a[k] == b[k]);
    bool differs = false;
    for (std::size_t k = 0; k < 3; ++k) differs = differs || a[k] != c[k];
    CHECK(differs);
}

TEST_CASE("step counter advances once per call across tensors") {
    Optimizer opt(base_config(OptKind::sgd, 0.1), {Shape{2}, Shape{3}});
    std::vector<Tensor> x = {Tensor({2}, 1.0), Tensor({3}, 1.0)};
    std::vector<Tensor> g = {Tensor({2}, 1.0), Tensor({3}, 1.0)};
    CHECK(opt.step_count() == 0);
    opt.step(x, g);
    CHECK(opt.step_count() == 1);
    opt.step(x, g);
    CHECK(opt.step_count() == 2);

    std::vector<Tensor> short_g = {Tensor({2}, 1.0)};
    CHECK_THROWS_MATCHES(opt.step(x, short_g), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == "shape"; }));
}

TEST_CASE("configuration validation rejects out-of-range settings") {
    auto config_error = [](OptimizerConfig cfg) {
        CHECK_THROWS_MATCHES(make_optimizer(cfg, {Shape{1}}), Error,
                             Catch::Matchers::Predicate<Error>(
                                 [](const Error& e) { return e.code() == "config"; }));
    };
    OptimizerConfig bad = base_config(OptKind::nrsgd, 0.1);
    bad.w = 1.5;
    config_error(bad);
    bad = base_config(OptKind::momentum, 0.1);
    bad.momentum.beta = 1.0;
    config_error(bad);
    bad = base_config(OptKind::adam, 0.1);
    bad.adam.beta2 = -0.1;
    config_error(bad);
    bad = base_config(OptKind::adam, 0.1);
    bad.adam.epsilon = 0.0;
    config_error(bad);
    bad = base_config(OptKind::rmsprop, 0.1);
    bad.rmsprop.rho = 1.0;
    config_error(bad);
    bad = base_config(OptKind::sgd, 0.0);
    config_error(bad);
}
