#pragma once

#include <cmath>

#include "descent/error.hpp"

namespace descent {

// Exponential learning-rate decay: rate(i) = eta0 * alpha^(i/s).
// The exponent is continuous by default; staircase floors i/s to an integer.
// Defaults leave the rate constant at eta0 (alpha = 1), so decay is opt-in.
struct LrSchedule {
    double eta0 = 0.001;
    double alpha = 1.0;
    double s = 1.0;
    bool staircase = false;
};

inline void validate(const LrSchedule& sched) {
    if (!(sched.eta0 > 0.0)) throw Error("config", "lr.eta0 must be > 0");
    if (!(sched.alpha > 0.0)) throw Error("config", "lr.alpha must be > 0");
    if (!(sched.s > 0.0)) throw Error("config", "lr.s must be > 0");
}

// Learning rate at step i (i >= 0). rate(0) == eta0 exactly.
inline double rate(const LrSchedule& sched, long i) {
    if (i == 0) return sched.eta0;
    double exponent = static_cast<double>(i) / sched.s;
    if (sched.staircase) exponent = std::floor(exponent);
    return sched.eta0 * std::pow(sched.alpha, exponent);
}

// rate(i - 1) with the step-0 edge pinned to eta0: the two-gradient update
// references the previous step's rate before any previous step exists.
inline double rate_prev(const LrSchedule& sched, long i) {
    return i <= 0 ? sched.eta0 : rate(sched, i - 1);
}

} // namespace descent
