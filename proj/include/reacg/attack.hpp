#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reacg/common.hpp"
#include "reacg/losses.hpp"
#include "reacg/model.hpp"
#include "reacg/schedule.hpp"

namespace reacg {

enum class AttackVariant { apgd, acg, acg_r, acg_t, reacg };

inline const char* variant_name(AttackVariant v) {
    switch (v) {
        case AttackVariant::apgd: return "apgd";
        case AttackVariant::acg: return "acg";
        case AttackVariant::acg_r: return "acg-r";
        case AttackVariant::acg_t: return "acg-t";
        case AttackVariant::reacg: return "reacg";
    }
    return "?";
}

inline const char* loss_name(LossKind k) { return k == LossKind::cw ? "cw" : "dlr"; }

/// Per-variant checkpoint defaults: the momentum and plain conjugate-gradient
/// attacks use (0.22, 0.03, 0.06); the tuned variants use (0.43, 0.24, 0.08).
inline ScheduleParams default_schedule_params(AttackVariant v) {
    switch (v) {
        case AttackVariant::acg_t:
        case AttackVariant::reacg:
            return ScheduleParams(0.43, 0.24, 0.08);
        default:
            return ScheduleParams(0.22, 0.03, 0.06);
    }
}

struct AttackConfig {
    AttackVariant variant = AttackVariant::reacg;
    LossKind loss = LossKind::cw;
    double epsilon = 8.0 / 255.0;
    int iters = 100;
    std::optional<double> eta0;   // initial step size; defaults to 2*epsilon
    ScheduleParams schedule;
    int restarts = 0;
    std::uint64_t seed = 0;
    bool early_stop = false;
    bool record_points = false;   // keep every iterate in the result (diagnostics)

    static AttackConfig for_variant(AttackVariant v) {
        AttackConfig cfg;
        cfg.variant = v;
        cfg.schedule = default_schedule_params(v);
        return cfg;
    }

    double initial_step() const { return eta0 ? *eta0 : 2.0 * epsilon; }

    void validate() const {
        if (!(epsilon > 0.0)) throw ConfigError("attack config: epsilon must be > 0");
        if (iters < 1) throw ConfigError("attack config: iters must be >= 1");
        if (eta0 && !(*eta0 > 0.0)) throw ConfigError("attack config: eta0 must be > 0");
        if (restarts < 0) throw ConfigError("attack config: restarts must be >= 0");
    }
};

/// One recorded iterate. Row k describes the realized search point x^(k):
/// its loss and CTC, the coefficient used to build the direction s^(k), the
/// step size that will step away from it, the distance moved to reach it,
/// and the incumbent loss over iterates 0..k.
struct TraceRow {
    int iter = 0;
    double loss = 0.0;
    double beta_used = 0.0;
    double beta_raw = 0.0;
    bool rescaled = false;
    int ctc = 0;
    double eta = 0.0;
    double move_dist = 0.0;
    double best_loss = 0.0;

    bool operator==(const TraceRow&) const = default;
};

struct AttackTrace {
    std::vector<TraceRow> rows;
    int image_id = -1;
    AttackVariant variant = AttackVariant::reacg;
    LossKind loss_kind = LossKind::cw;
};

/// Per-image optimizer state: current/previous search points and gradients,
/// the conjugate direction, the step size, and the incumbent with its restore
/// slots. The gradient at the incumbent is cached alongside it so a restore
/// never re-evaluates the model, and the restore also reinstates the gradient
/// actually evaluated at x_pre (keeps the next y = g_prev - g_cur coherent).
struct AttackState {
    Vector x_cur, x_prev;
    Vector g_cur, g_prev;
    Vector s_cur;
    double eta = 0.0;
    double beta = 0.0;
    double loss_cur = 0.0;

    Vector x_adv, x_pre, s_pre, g_pre;
    Vector g_adv;
    int ctc_adv = 0;
    double best_loss = 0.0;
    int iter = 0;
};

struct AttackResult {
    AttackTrace trace;
    bool success = false;
    Vector x_adv;
    double best_loss = 0.0;
    std::optional<int> iters_to_success;
    std::vector<Vector> points;   // filled only when config.record_points
};

/// Elementwise clip onto S = [0,1]^n intersected with the L-inf ball of
/// radius epsilon around x_org. Idempotent.
inline Vector project(Vector x, const Vector& x_org, double epsilon) {
    if (x.size() != x_org.size()) throw ShapeError("project: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lo = std::max(0.0, x_org[i] - epsilon);
        const double hi = std::min(1.0, x_org[i] + epsilon);
        x[i] = std::clamp(x[i], lo, hi);
    }
    return x;
}

/// Hestenes-Stiefel coefficient from y = g_prev - g_cur. Falls back to 0
/// (a plain gradient step) when <s_prev, y> is within 1e-12 of zero.
inline double beta_hs(const Vector& g_cur, const Vector& g_prev, const Vector& s_prev) {
    if (g_cur.size() != g_prev.size() || g_cur.size() != s_prev.size())
        throw ShapeError("beta_hs: length mismatch");
    double denom = 0.0;
    double numer = 0.0;
    for (std::size_t i = 0; i < g_cur.size(); ++i) {
        const double y = g_prev[i] - g_cur[i];
        denom += s_prev[i] * y;
        numer += g_cur[i] * y;
    }
    if (std::abs(denom) < 1e-12) return 0.0;
    return numer / denom;
}

/// Hestenes-Stiefel coefficient computed from unit-normalized gradients;
/// the previous direction s_prev enters unnormalized. Returns 0 when either
/// gradient has zero norm or the denominator degenerates.
inline double beta_hs_rescaled(const Vector& g_cur, const Vector& g_prev, const Vector& s_prev) {
    if (g_cur.size() != g_prev.size() || g_cur.size() != s_prev.size())
        throw ShapeError("beta_hs_rescaled: length mismatch");
    const double n_cur = norm2(g_cur);
    const double n_prev = norm2(g_prev);
    if (n_cur == 0.0 || n_prev == 0.0) return 0.0;
    double denom = 0.0;
    double numer = 0.0;
    for (std::size_t i = 0; i < g_cur.size(); ++i) {
        const double gc = g_cur[i] / n_cur;
        const double y = g_prev[i] / n_prev - gc;
        denom += s_prev[i] * y;
        numer += gc * y;
    }
    if (std::abs(denom) < 1e-12) return 0.0;
    return numer / denom;
}

/// The rescaling trigger: mean over coordinates of |g_cur_i / s_prev_i|
/// compared strictly against |beta|. Coordinates with |s_prev_i| < 1e-12 are
/// excluded; if none qualify the condition is false.
inline bool rescaling_condition(const Vector& g_cur, const Vector& s_prev, double beta) {
    if (g_cur.size() != s_prev.size()) throw ShapeError("rescaling_condition: length mismatch");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < g_cur.size(); ++i) {
        if (std::abs(s_prev[i]) < 1e-12) continue;
        sum += std::abs(g_cur[i] / s_prev[i]);
        ++count;
    }
    if (count == 0) return false;
    return sum / static_cast<double>(count) < std::abs(beta);
}

/// s = g_cur + beta * s_prev.
inline Vector conjugate_direction(const Vector& g_cur, const Vector& s_prev, double beta) {
    if (g_cur.size() != s_prev.size()) throw ShapeError("conjugate_direction: length mismatch");
    Vector s(g_cur.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = g_cur[i] + beta * s_prev[i];
    return s;
}

/// x_next = P_S(x + eta * sign(direction)), with sign(0) = 0.
inline Vector sign_step(const Vector& x, const Vector& direction, double eta,
                        const Vector& x_org, double epsilon) {
    if (x.size() != direction.size()) throw ShapeError("sign_step: length mismatch");
    Vector moved(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) moved[i] = x[i] + eta * sign0(direction[i]);
    return project(std::move(moved), x_org, epsilon);
}

/// Step-halving test at checkpoint index j (0-based into the schedule; the
/// implicit previous checkpoint of j = 0 is iteration 0). Operates purely on
/// recorded trace rows:
///   C1: fewer than rho * (w_j - w_{j-1}) strict loss increases across the
///       window's transitions;
///   C2: identical incumbent loss and identical step size at the two
///       checkpoint iterates (exact comparison; both are bit-reproducible).
inline bool halving_conditions(std::span<const TraceRow> rows, const CheckpointSchedule& schedule,
                               std::size_t j, double rho) {
    if (j >= schedule.checkpoints.size())
        throw InternalError("halving_conditions: checkpoint index out of range");
    const int w_hi = schedule.checkpoints[j];
    const int w_lo = j == 0 ? 0 : schedule.checkpoints[j - 1];
    if (static_cast<int>(rows.size()) <= w_hi)
        throw InternalError("halving_conditions: trace window does not cover checkpoint " +
                            std::to_string(w_hi));
    int improvements = 0;
    for (int i = w_lo; i < w_hi; ++i)
        if (rows[i + 1].loss > rows[i].loss) ++improvements;
    const bool c1 = improvements < rho * (w_hi - w_lo);
    const bool c2 = rows[w_lo].best_loss == rows[w_hi].best_loss && rows[w_lo].eta == rows[w_hi].eta;
    return c1 || c2;
}

namespace detail {

struct SuccessTracker {
    bool success = false;
    std::optional<int> first_iter;

    void observe(bool misclassified_here, int iterate) {
        if (misclassified_here && !success) {
            success = true;
            first_iter = iterate;
        }
    }
};

/// Conjugate-gradient loop shared by acg / acg-r / acg-t / reacg. Starts at
/// x_init (the restart entry point); run_acg_family passes x_org itself.
inline AttackResult run_acg_from(const ClassifierModel& model, const Vector& x_org,
                                 const Vector& x_init, std::size_t c, const AttackConfig& cfg) {
    const CheckpointSchedule sched = build_schedule(cfg.schedule, cfg.iters);
    const double eps = cfg.epsilon;
    const bool rescaling_variant =
        cfg.variant == AttackVariant::acg_r || cfg.variant == AttackVariant::reacg;

    AttackResult result;
    result.trace.variant = cfg.variant;
    result.trace.loss_kind = cfg.loss;
    result.trace.rows.reserve(static_cast<std::size_t>(cfg.iters) + 1);

    AttackState st;
    st.x_cur = project(x_init, x_org, eps);
    auto ev0 = loss_and_input_grad(model, st.x_cur, c, cfg.loss);
    st.g_cur = std::move(ev0.input_grad);
    st.loss_cur = ev0.loss.value;
    st.s_cur = st.g_cur;
    st.eta = cfg.initial_step();
    st.x_adv = st.x_cur;
    st.best_loss = st.loss_cur;
    st.g_adv = st.g_cur;
    st.ctc_adv = static_cast<int>(ev0.loss.ctc);
    st.x_pre = st.x_cur;
    st.s_pre = st.s_cur;
    st.g_pre = st.g_cur;

    SuccessTracker tracker;
    tracker.observe(ev0.misclassified, 0);
    result.trace.rows.push_back({0, st.loss_cur, 0.0, 0.0, false, st.ctc_adv, st.eta, 0.0,
                                 st.best_loss});
    if (cfg.record_points) result.points.push_back(st.x_cur);

    std::size_t next_cp = 0;
    if (!(cfg.early_stop && tracker.success)) {
        for (int k = 0; k < cfg.iters; ++k) {
            const Vector x_start = st.x_cur;
            Vector x_next = sign_step(st.x_cur, st.s_cur, st.eta, x_org, eps);
            auto ev = loss_and_input_grad(model, x_next, c, cfg.loss);
            double loss_next = ev.loss.value;
            Vector g_next = std::move(ev.input_grad);
            int ctc_next = static_cast<int>(ev.loss.ctc);
            tracker.observe(ev.misclassified, k + 1);

            if (loss_next > st.best_loss) {
                st.x_adv = x_next;
                st.best_loss = loss_next;
                st.g_adv = g_next;
                st.ctc_adv = ctc_next;
                st.x_pre = st.x_cur;
                st.s_pre = st.s_cur;
                st.g_pre = st.g_cur;
            }

            if (next_cp < sched.checkpoints.size() && k == sched.checkpoints[next_cp]) {
                if (halving_conditions(result.trace.rows, sched, next_cp, cfg.schedule.rho)) {
                    st.eta *= 0.5;
                    x_next = st.x_adv;
                    loss_next = st.best_loss;
                    g_next = st.g_adv;
                    ctc_next = st.ctc_adv;
                    st.x_cur = st.x_pre;
                    st.s_cur = st.s_pre;
                    st.g_cur = st.g_pre;
                }
                ++next_cp;
            }

            const double beta_raw = beta_hs(g_next, st.g_cur, st.s_cur);
            double beta_used = beta_raw;
            bool rescaled = false;
            if (rescaling_variant && rescaling_condition(g_next, st.s_cur, beta_raw)) {
                const double beta_tilde = beta_hs_rescaled(g_next, st.g_cur, st.s_cur);
                if (std::abs(beta_tilde) < std::abs(beta_raw)) {
                    beta_used = beta_tilde;
                    rescaled = true;
                }
            }
            Vector s_next = conjugate_direction(g_next, st.s_cur, beta_used);

            result.trace.rows.push_back({k + 1, loss_next, beta_used, beta_raw, rescaled,
                                         ctc_next, st.eta, l2_dist(x_next, x_start),
                                         st.best_loss});
            if (cfg.record_points) result.points.push_back(x_next);

            st.x_prev = std::move(st.x_cur);
            st.x_cur = std::move(x_next);
            st.g_prev = std::move(st.g_cur);
            st.g_cur = std::move(g_next);
            st.s_cur = std::move(s_next);
            st.loss_cur = loss_next;
            st.beta = beta_used;
            st.iter = k + 1;

            if (cfg.early_stop && tracker.success) break;
        }
    }

    result.success = tracker.success;
    result.iters_to_success = tracker.first_iter;
    result.x_adv = std::move(st.x_adv);
    result.best_loss = st.best_loss;
    return result;
}

/// Momentum baseline: z = P_S(x + eta sign(g)), then
/// x_next = P_S(x + alpha (z - x) + (1 - alpha)(x - x_prev)) with alpha = 0.75
/// after the first iteration. Shares the checkpoint halving and incumbent
/// machinery with the conjugate-gradient family.
inline AttackResult run_apgd_from(const ClassifierModel& model, const Vector& x_org,
                                  const Vector& x_init, std::size_t c, const AttackConfig& cfg) {
    const CheckpointSchedule sched = build_schedule(cfg.schedule, cfg.iters);
    const double eps = cfg.epsilon;
    constexpr double alpha = 0.75;

    AttackResult result;
    result.trace.variant = cfg.variant;
    result.trace.loss_kind = cfg.loss;
    result.trace.rows.reserve(static_cast<std::size_t>(cfg.iters) + 1);

    AttackState st;
    st.x_cur = project(x_init, x_org, eps);
    st.x_prev = st.x_cur;
    auto ev0 = loss_and_input_grad(model, st.x_cur, c, cfg.loss);
    st.g_cur = std::move(ev0.input_grad);
    st.loss_cur = ev0.loss.value;
    st.eta = cfg.initial_step();
    st.x_adv = st.x_cur;
    st.best_loss = st.loss_cur;
    st.g_adv = st.g_cur;
    st.ctc_adv = static_cast<int>(ev0.loss.ctc);
    st.x_pre = st.x_cur;

    SuccessTracker tracker;
    tracker.observe(ev0.misclassified, 0);
    result.trace.rows.push_back({0, st.loss_cur, 0.0, 0.0, false, st.ctc_adv, st.eta, 0.0,
                                 st.best_loss});
    if (cfg.record_points) result.points.push_back(st.x_cur);

    std::size_t next_cp = 0;
    if (!(cfg.early_stop && tracker.success)) {
        for (int k = 0; k < cfg.iters; ++k) {
            const Vector x_start = st.x_cur;
            Vector z_next = sign_step(st.x_cur, st.g_cur, st.eta, x_org, eps);
            Vector x_next;
            if (k == 0) {
                x_next = std::move(z_next);
            } else {
                Vector blend(st.x_cur.size());
                for (std::size_t i = 0; i < blend.size(); ++i)
                    blend[i] = st.x_cur[i] + alpha * (z_next[i] - st.x_cur[i]) +
                               (1.0 - alpha) * (st.x_cur[i] - st.x_prev[i]);
                x_next = project(std::move(blend), x_org, eps);
            }
            auto ev = loss_and_input_grad(model, x_next, c, cfg.loss);
            double loss_next = ev.loss.value;
            Vector g_next = std::move(ev.input_grad);
            int ctc_next = static_cast<int>(ev.loss.ctc);
            tracker.observe(ev.misclassified, k + 1);

            if (loss_next > st.best_loss) {
                st.x_adv = x_next;
                st.best_loss = loss_next;
                st.g_adv = g_next;
                st.ctc_adv = ctc_next;
                st.x_pre = st.x_cur;
            }

            if (next_cp < sched.checkpoints.size() && k == sched.checkpoints[next_cp]) {
                if (halving_conditions(result.trace.rows, sched, next_cp, cfg.schedule.rho)) {
                    st.eta *= 0.5;
                    x_next = st.x_adv;
                    loss_next = st.best_loss;
                    g_next = st.g_adv;
                    ctc_next = st.ctc_adv;
                    st.x_cur = st.x_pre;
                }
                ++next_cp;
            }

            result.trace.rows.push_back({k + 1, loss_next, 0.0, 0.0, false, ctc_next, st.eta,
                                         l2_dist(x_next, x_start), st.best_loss});
            if (cfg.record_points) result.points.push_back(x_next);

            st.x_prev = std::move(st.x_cur);
            st.x_cur = std::move(x_next);
            st.g_cur = std::move(g_next);
            st.loss_cur = loss_next;
            st.iter = k + 1;

            if (cfg.early_stop && tracker.success) break;
        }
    }

    result.success = tracker.success;
    result.iters_to_success = tracker.first_iter;
    result.x_adv = std::move(st.x_adv);
    result.best_loss = st.best_loss;
    return result;
}

inline void validate_run_inputs(const ClassifierModel& model, const Vector& x_org,
                                std::size_t c, const AttackConfig& cfg) {
    cfg.validate();
    if (x_org.size() != model.input_dim())
        throw ShapeError("attack: input length does not match model input_dim");
    if (c >= model.num_classes()) throw ConfigError("attack: class index out of range");
    if (cfg.loss == LossKind::dlr && model.num_classes() < 3)
        throw ConfigError("attack: DLR loss needs at least 3 classes");
}

inline AttackResult run_from(const ClassifierModel& model, const Vector& x_org,
                             const Vector& x_init, std::size_t c, const AttackConfig& cfg) {
    validate_run_inputs(model, x_org, c, cfg);
    if (cfg.variant == AttackVariant::apgd) return run_apgd_from(model, x_org, x_init, c, cfg);
    return run_acg_from(model, x_org, x_init, c, cfg);
}

}  // namespace detail

/// Single run of the conjugate-gradient family starting at the input point.
inline AttackResult run_acg_family(const ClassifierModel& model, const Vector& x_org,
                                   std::size_t c, const AttackConfig& cfg) {
    if (cfg.variant == AttackVariant::apgd)
        throw ConfigError("run_acg_family: variant must be acg, acg-r, acg-t, or reacg");
    detail::validate_run_inputs(model, x_org, c, cfg);
    return detail::run_acg_from(model, x_org, x_org, c, cfg);
}

/// Single run of the momentum baseline starting at the input point.
inline AttackResult run_apgd_baseline(const ClassifierModel& model, const Vector& x_org,
                                      std::size_t c, const AttackConfig& cfg) {
    if (cfg.variant != AttackVariant::apgd)
        throw ConfigError("run_apgd_baseline: variant must be apgd");
    detail::validate_run_inputs(model, x_org, c, cfg);
    return detail::run_apgd_from(model, x_org, x_org, c, cfg);
}

inline AttackResult run_attack(const ClassifierModel& model, const Vector& x_org, std::size_t c,
                               const AttackConfig& cfg) {
    return detail::run_from(model, x_org, x_org, c, cfg);
}

/// Uniform draw from S; restart r uses a stream derived from (seed, r), so
/// the r-th restart is identical regardless of how many restarts follow it.
inline Vector sample_feasible_point(const Vector& x_org, double epsilon, std::uint64_t seed,
                                    int restart_index) {
    std::mt19937_64 rng(derive_seed(seed, 0x5e57a27ULL, static_cast<std::uint64_t>(restart_index)));
    Vector x(x_org.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lo = std::max(0.0, x_org[i] - epsilon);
        const double hi = std::min(1.0, x_org[i] + epsilon);
        std::uniform_real_distribution<double> dist(lo, hi);
        x[i] = dist(rng);
    }
    return x;
}

/// Run 0 starts at the input point; runs 1..restarts start at uniform draws
/// from S. Success is the union over runs; the returned incumbent is the
/// best-loss one (ties toward the earliest run), and iters_to_success comes
/// from the earliest successful run.
inline AttackResult run_with_restarts(const ClassifierModel& model, const Vector& x_org,
                                      std::size_t c, const AttackConfig& cfg) {
    detail::validate_run_inputs(model, x_org, c, cfg);
    AttackResult best = detail::run_from(model, x_org, x_org, c, cfg);
    bool success = best.success;
    std::optional<int> first_success = best.iters_to_success;
    for (int r = 1; r <= cfg.restarts; ++r) {
        if (cfg.early_stop && success) break;
        const Vector x_init = sample_feasible_point(x_org, cfg.epsilon, cfg.seed, r);
        AttackResult run = detail::run_from(model, x_org, x_init, c, cfg);
        if (run.success && !success) {
            success = true;
            first_success = run.iters_to_success;
        }
        if (run.best_loss > best.best_loss) best = std::move(run);
    }
    best.success = success;
    best.iters_to_success = first_success;
    return best;
}

}  // namespace reacg
