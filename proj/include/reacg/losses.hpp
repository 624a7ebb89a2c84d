#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "reacg/common.hpp"
#include "reacg/model.hpp"

namespace reacg {

enum class LossKind { cw, dlr };

/// Loss value, gradient with respect to the logits, and the strongest wrong
/// class at this point (the CTC). Argmax ties break toward the lowest index.
struct LossEval {
    double value = 0.0;
    Vector grad_logits;
    std::size_t ctc = 0;
};

namespace detail {

inline void check_class(const Vector& z, std::size_t c, std::size_t min_classes,
                        const char* what) {
    if (z.size() < min_classes)
        throw ConfigError(std::string(what) + ": needs at least " + std::to_string(min_classes) +
                          " classes, got " + std::to_string(z.size()));
    if (c >= z.size()) throw ConfigError(std::string(what) + ": class index out of range");
}

inline std::size_t argmax_excluding(const Vector& z, std::size_t c) {
    std::size_t best = c == 0 ? 1 : 0;
    for (std::size_t i = 0; i < z.size(); ++i)
        if (i != c && z[i] > z[best]) best = i;
    return best;
}

}  // namespace detail

/// value = -z_c + max_{i != c} z_i; positive (or zero) exactly when the point
/// is not strictly classified as c.
inline LossEval cw_loss(const Vector& z, std::size_t c) {
    detail::check_class(z, c, 2, "cw_loss");
    const std::size_t m = detail::argmax_excluding(z, c);
    LossEval ev;
    ev.value = z[m] - z[c];
    ev.grad_logits.assign(z.size(), 0.0);
    ev.grad_logits[c] -= 1.0;
    ev.grad_logits[m] += 1.0;
    ev.ctc = m;
    return ev;
}

/// CW loss scaled by the gap between the largest and third-largest logits.
/// The sorting permutation is treated as locally constant for the gradient,
/// and the denominator is floored at 1e-12 so degenerate logits mid-attack
/// produce a finite value instead of an abort.
inline LossEval dlr_loss(const Vector& z, std::size_t c) {
    detail::check_class(z, c, 3, "dlr_loss");
    std::vector<std::size_t> order(z.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (z[a] != z[b]) return z[a] > z[b];
        return a < b;
    });
    const std::size_t pi1 = order[0];
    const std::size_t pi3 = order[2];
    const std::size_t m = detail::argmax_excluding(z, c);

    const double numer = z[m] - z[c];
    const double denom = std::max(z[pi1] - z[pi3], 1e-12);

    LossEval ev;
    ev.value = numer / denom;
    ev.grad_logits.assign(z.size(), 0.0);
    const double inv_d2 = 1.0 / (denom * denom);
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double dn = (i == m ? 1.0 : 0.0) - (i == c ? 1.0 : 0.0);
        const double dd = (i == pi1 ? 1.0 : 0.0) - (i == pi3 ? 1.0 : 0.0);
        ev.grad_logits[i] = (dn * denom - numer * dd) * inv_d2;
    }
    ev.ctc = m;
    return ev;
}

inline LossEval eval_loss(const Vector& z, std::size_t c, LossKind kind) {
    return kind == LossKind::cw ? cw_loss(z, c) : dlr_loss(z, c);
}

struct LossAndGrad {
    LossEval loss;
    Vector input_grad;
    bool misclassified = false;
};

/// Composes forward, loss, and reverse accumulation: the attack-side gradient
/// g = dL/dx, plus the misclassification flag at the same point.
inline LossAndGrad loss_and_input_grad(const ClassifierModel& model, const Vector& x,
                                       std::size_t c, LossKind kind) {
    const Vector z = model.forward(x);
    LossAndGrad out;
    out.loss = eval_loss(z, c, kind);
    out.input_grad = model.input_gradient(x, out.loss.grad_logits);
    out.misclassified = misclassified(z, c);
    return out;
}

}  // namespace reacg
