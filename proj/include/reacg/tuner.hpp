#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "json.hpp"

#include "reacg/attack.hpp"
#include "reacg/common.hpp"
#include "reacg/dataset.hpp"
#include "reacg/diagnostics.hpp"
#include "reacg/schedule.hpp"

namespace reacg {

/// One checkpoint-parameter evaluation: robust accuracy is minimized, mean
/// CW loss of the final incumbents is maximized. Parameter sets producing
/// fewer than four checkpoints carry the sentinel pair (+inf, -inf).
struct Trial {
    ScheduleParams params;
    double robust_acc = std::numeric_limits<double>::infinity();
    double mean_cw_loss = -std::numeric_limits<double>::infinity();
    bool feasible = false;
    int index = -1;
};

/// Uniform draw from the search box: p1 in [0.01, 0.9], q in [0.01, 0.5*p1]
/// (collapsing to 0.01 when 0.5*p1 falls below it), q_min in [0.01, 0.1].
inline ScheduleParams sample_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> p1_dist(0.01, 0.9);
    const double p1 = p1_dist(rng);
    const double q_hi = std::max(0.01, 0.5 * p1);
    std::uniform_real_distribution<double> q_dist(0.01, q_hi);
    const double q = q_dist(rng);
    std::uniform_real_distribution<double> q_min_dist(0.01, 0.1);
    const double q_min = q_min_dist(rng);
    return ScheduleParams(p1, q, q_min);
}

/// Runs the base attack (ReACG with CW loss, no restarts, starting at the
/// input points) over the dataset under the candidate schedule parameters.
inline Trial evaluate_trial(const ScheduleParams& params, const ClassifierModel& model,
                            const Dataset& ds, const AttackConfig& base) {
    Trial trial;
    trial.params = params;
    const CheckpointSchedule sched = build_schedule(params, base.iters);
    if (sched.checkpoints.size() < 4) return trial;   // sentinel objectives stand

    AttackConfig cfg = base;
    cfg.schedule = params;
    cfg.restarts = 0;

    std::size_t still_correct = 0;
    double loss_sum = 0.0;
    std::size_t attacked = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto c = static_cast<std::size_t>(ds.labels[i]);
        const Vector z = model.forward(ds.features[i]);
        if (misclassified(z, c)) continue;   // counts as an attack success
        AttackConfig img_cfg = cfg;
        img_cfg.seed = derive_seed(cfg.seed, i);
        const AttackResult res = run_attack(model, ds.features[i], c, img_cfg);
        if (!res.success) ++still_correct;
        loss_sum += res.best_loss;
        ++attacked;
    }
    trial.robust_acc = 100.0 * static_cast<double>(still_correct) / static_cast<double>(ds.size());
    trial.mean_cw_loss = attacked > 0 ? loss_sum / static_cast<double>(attacked) : 0.0;
    trial.feasible = true;
    return trial;
}

/// Indices of the non-dominated trials under (minimize robust accuracy,
/// maximize mean loss). Duplicated objective pairs all stay on the front;
/// infeasible sentinels are dominated by any feasible trial.
inline std::vector<std::size_t> pareto_front(std::span<const Trial> trials) {
    if (trials.empty()) throw ConfigError("pareto_front: no trials");
    std::vector<std::size_t> order(trials.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (trials[a].robust_acc != trials[b].robust_acc)
            return trials[a].robust_acc < trials[b].robust_acc;
        if (trials[a].mean_cw_loss != trials[b].mean_cw_loss)
            return trials[a].mean_cw_loss > trials[b].mean_cw_loss;
        return a < b;
    });
    std::vector<std::size_t> front;
    double best_loss = -std::numeric_limits<double>::infinity();
    double best_loss_ra = 0.0;
    for (std::size_t idx : order) {
        const Trial& t = trials[idx];
        if (front.empty() || t.mean_cw_loss > best_loss) {
            front.push_back(idx);
            best_loss = t.mean_cw_loss;
            best_loss_ra = t.robust_acc;
        } else if (t.mean_cw_loss == best_loss && t.robust_acc == best_loss_ra) {
            front.push_back(idx);   // exact duplicate of a front point
        }
    }
    std::sort(front.begin(), front.end());
    return front;
}

struct TuneResult {
    std::vector<Trial> trials;
    std::vector<std::size_t> front;   // indices into trials
    Trial best;
};

/// Draws one parameter set per trial from the seeded stream.
using ParamSampler = std::function<ScheduleParams(std::mt19937_64&)>;

/// Random search with `budget` trials drawn sequentially from one seeded
/// stream; evaluations run in parallel. Best = feasible trial with minimum
/// robust accuracy, ties broken by larger mean loss, then lower index.
/// A different search strategy can be plugged in through `sampler`.
inline TuneResult tune(const ClassifierModel& model, const Dataset& ds, int budget,
                       std::uint64_t seed, const AttackConfig& base,
                       const ParamSampler& sampler = sample_params) {
    if (budget < 1) throw ConfigError("tune: budget must be >= 1");
    std::mt19937_64 rng(seed);
    std::vector<ScheduleParams> candidates;
    candidates.reserve(budget);
    for (int i = 0; i < budget; ++i) candidates.push_back(sampler(rng));

    TuneResult result;
    result.trials.resize(budget);
    parallel_for(static_cast<std::size_t>(budget), [&](std::size_t i) {
        Trial t = evaluate_trial(candidates[i], model, ds, base);
        t.index = static_cast<int>(i);
        result.trials[i] = std::move(t);
    });

    result.front = pareto_front(result.trials);

    std::optional<std::size_t> best_idx;
    for (std::size_t i = 0; i < result.trials.size(); ++i) {
        const Trial& t = result.trials[i];
        if (!t.feasible) continue;
        if (!best_idx) {
            best_idx = i;
            continue;
        }
        const Trial& b = result.trials[*best_idx];
        if (t.robust_acc < b.robust_acc ||
            (t.robust_acc == b.robust_acc && t.mean_cw_loss > b.mean_cw_loss))
            best_idx = i;
    }
    if (!best_idx) throw ConfigError("tune: no feasible schedule among sampled trials");
    result.best = result.trials[*best_idx];
    return result;
}

inline nlohmann::json trial_to_json(const Trial& t) {
    nlohmann::json j;
    j["index"] = t.index;
    j["params"] = {{"p1", t.params.p1}, {"q", t.params.q}, {"q_min", t.params.q_min},
                   {"rho", t.params.rho}};
    j["feasible"] = t.feasible;
    // The +inf/-inf sentinels have no JSON representation; emit null and let
    // "feasible" carry the information.
    j["robust_accuracy"] =
        std::isfinite(t.robust_acc) ? nlohmann::json(t.robust_acc) : nlohmann::json(nullptr);
    j["mean_cw_loss"] =
        std::isfinite(t.mean_cw_loss) ? nlohmann::json(t.mean_cw_loss) : nlohmann::json(nullptr);
    return j;
}

inline nlohmann::json tuning_report_json(const TuneResult& result) {
    nlohmann::json j;
    j["trials"] = nlohmann::json::array();
    for (const auto& t : result.trials) j["trials"].push_back(trial_to_json(t));
    j["front"] = result.front;
    j["best"] = trial_to_json(result.best);
    return j;
}

}  // namespace reacg
