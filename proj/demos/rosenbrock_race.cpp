// Races the update rules down the Rosenbrock valley from the classic start
// at (-1.2, 1) and prints where each lands after a fixed step budget.
#include <cstdio>

#include "descent/descent.hpp"

int main() {
    using namespace descent;

    struct Entry {
        const char* name;
        double eta0;
        double guard;
    };
    // plain rules need a conservative rate in the valley; the adaptive ones
    // normalize per coordinate and tolerate a larger one. iagd gets a wide
    // divided-difference guard: near the optimum its gradient history flattens
    // and near-zero denominators would otherwise blow the prediction up.
    const Entry lineup[] = {{"sgd", 1e-4, 0},      {"momentum", 1e-4, 0}, {"nrsgd", 1e-4, 0},
                            {"iagd", 1e-4, 1e-2},  {"adam", 1e-2, 0},     {"rmsprop", 1e-2, 0}};
    const int steps = 5000;

    auto obj = rosenbrock();
    std::printf("%-10s %12s %12s %14s\n", "optimizer", "x", "y", "loss");
    for (const Entry& entry : lineup) {
        OptimizerConfig cfg;
        cfg.kind = parse_opt_kind(entry.name);
        cfg.schedule.eta0 = entry.eta0;
        if (entry.guard > 0) cfg.guard.epsilon = entry.guard;
        cfg.seed = 7;
        Optimizer opt(cfg, obj->param_shapes());

        RngStream init(0);
        std::vector<Tensor> x = obj->init_params(init);
        for (int i = 0; i < steps; ++i) opt.step(x, obj->backward(x, empty_batch()));

        std::printf("%-10s %12.6f %12.6f %14.8f\n", entry.name, x[0][0], x[0][1],
                    obj->forward(x, empty_batch()).loss);
    }
    std::printf("\nminimum sits at (1, 1); %d steps each from (-1.2, 1)\n", steps);
    return 0;
}
