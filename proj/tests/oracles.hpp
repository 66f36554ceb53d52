#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "descent/models.hpp"
#include "descent/tensor.hpp"

// Hand-rolled reference computations for the test suite. Everything here is
// coded from the closed forms directly, on purpose duplicating nothing from
// the library internals.
namespace oracles {

// Full divided-difference table over nodes xs and values ys, iterative.
inline std::vector<std::vector<double>> dd_full(const std::vector<double>& xs,
                                                const std::vector<double>& ys) {
    const std::size_t n = xs.size();
    std::vector<std::vector<double>> t(n);
    t[0] = ys;
    for (std::size_t level = 1; level < n; ++level) {
        t[level].resize(n - level);
        for (std::size_t i = 0; i + level < n; ++i)
            t[level][i] = (t[level - 1][i + 1] - t[level - 1][i]) / (xs[i + level] - xs[i]);
    }
    return t;
}

// Second-order prediction for scalar history h0..h3 evaluated at g: divided
// differences of the pairs (h_k, h_{k+1}), leading term the oldest gradient.
inline double predict2(double h0, double h1, double h2, double h3, double g) {
    const auto t = dd_full({h0, h1, h2}, {h1, h2, h3});
    return h0 + t[1][0] * (g - h0) + t[2][0] * (g - h0) * (g - h1);
}

// First-order prediction for history h0..h2 (no quadratic term).
inline double predict1(double h0, double h1, double h2, double g) {
    const auto t = dd_full({h0, h1}, {h1, h2});
    return h0 + t[1][0] * (g - h0);
}

// Central finite difference of the loss along one parameter coordinate.
inline double fd_loss_grad(const descent::Objective& obj,
                           std::vector<descent::Tensor> params, const descent::Batch& batch,
                           std::size_t tensor, std::size_t coord) {
    const double x = params[tensor][coord];
    const double h = 1e-5 * std::max(1.0, std::fabs(x));
    params[tensor][coord] = x + h;
    const double up = obj.forward(params, batch).loss;
    params[tensor][coord] = x - h;
    const double dn = obj.forward(params, batch).loss;
    return (up - dn) / (2.0 * h);
}

// Drops the trailing elapsed_seconds field from every csv line.
inline std::string strip_elapsed(const std::string& csv) {
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t cut = line.rfind(',');
        out << (cut == std::string::npos ? line : line.substr(0, cut)) << '\n';
    }
    return out.str();
}

} // namespace oracles
