#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "reacg/common.hpp"

namespace reacg {

/// Step-size checkpoint parameters. The box accepted here is deliberately
/// wider than the tuner's sampling box: the tuned production triple
/// (0.43, 0.24, 0.08) has q > 0.5*p1 and must be constructible.
struct ScheduleParams {
    double p1 = 0.22;
    double q = 0.03;
    double q_min = 0.06;
    double rho = 0.75;

    ScheduleParams() = default;
    ScheduleParams(double p1_, double q_, double q_min_, double rho_ = 0.75)
        : p1(p1_), q(q_), q_min(q_min_), rho(rho_) {
        if (!(p1 >= 0.01 && p1 <= 0.9))
            throw ConfigError("ScheduleParams: p1 must be in [0.01, 0.9], got " + fmt_double(p1));
        if (!(q >= 0.01 && q <= 0.9))
            throw ConfigError("ScheduleParams: q must be in [0.01, 0.9], got " + fmt_double(q));
        if (!(q_min >= 0.01 && q_min <= 0.1))
            throw ConfigError("ScheduleParams: q_min must be in [0.01, 0.1], got " + fmt_double(q_min));
        if (!(rho >= 0.0 && rho <= 1.0))
            throw ConfigError("ScheduleParams: rho must be in [0, 1], got " + fmt_double(rho));
    }

    bool operator==(const ScheduleParams&) const = default;
};

/// Strictly increasing checkpoint iterations w_j in (0, N], generated by
///   p_0 = 0, p_{j+1} = p_j + max(p_j - p_{j-1} - q, q_min), w_j = ceil(p_j N),
/// stopping once p_j exceeds 1. Duplicates after the ceiling collapse are
/// dropped.
struct CheckpointSchedule {
    std::vector<int> checkpoints;
    ScheduleParams params;
    int total_iters = 0;
};

/// The ceiling is evaluated as ceil(p*N - 1e-9): binary representation error
/// on decimal parameters accumulates upward through the recursion (e.g.
/// 0.57*100 evaluates to 57.000000000000014) and a raw ceiling would bump a
/// checkpoint past its exact-arithmetic value. The same slack is applied to
/// the p_j <= 1 termination test.
inline CheckpointSchedule build_schedule(const ScheduleParams& params, int total_iters) {
    if (total_iters < 1) throw ConfigError("build_schedule: total_iters must be >= 1");
    constexpr double slack = 1e-9;
    CheckpointSchedule sched;
    sched.params = params;
    sched.total_iters = total_iters;
    double p_prev = 0.0;
    double p = params.p1;
    while (p <= 1.0 + slack) {
        const int w = std::min(static_cast<int>(std::ceil(p * total_iters - slack)), total_iters);
        if (w >= 1 && (sched.checkpoints.empty() || w > sched.checkpoints.back()))
            sched.checkpoints.push_back(w);
        const double p_next = p + std::max(p - p_prev - params.q, params.q_min);
        p_prev = p;
        p = p_next;
    }
    return sched;
}

}  // namespace reacg
