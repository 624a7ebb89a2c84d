#include <catch2/catch_amalgamated.hpp>

#include <limits>
#include <random>

#include "reacg/dataset.hpp"
#include "reacg/model.hpp"
#include "reacg/tuner.hpp"

#include "oracles.hpp"

using namespace reacg;

namespace {

const ClassifierModel& tuning_model() {
    static const ClassifierModel model = [] {
        const Dataset ds = make_blobs(100, 3, 2, 0.08, 51);
        auto mlp = make_mlp(2, {10}, 3, 51);
        return train_toy(std::move(mlp), ds, 60, 0.05, 51).model;
    }();
    return model;
}

const Dataset& tuning_data() {
    static const Dataset ds = make_blobs(30, 3, 2, 0.1, 52);
    return ds;
}

AttackConfig tuning_base(int iters = 100) {
    AttackConfig base = AttackConfig::for_variant(AttackVariant::reacg);
    base.loss = LossKind::cw;
    base.epsilon = 0.1;
    base.iters = iters;
    base.restarts = 0;
    base.seed = 4;
    return base;
}

Trial make_trial(double robust, double loss, int index = -1) {
    Trial t;
    t.robust_acc = robust;
    t.mean_cw_loss = loss;
    t.feasible = std::isfinite(robust);
    t.index = index;
    return t;
}

}  // namespace

TEST_CASE("sample_params stays inside the search box and is reproducible") {
    std::mt19937_64 rng(77);
    int low_p1_draws = 0;
    for (int t = 0; t < 1000; ++t) {
        const ScheduleParams p = sample_params(rng);
        CHECK(p.p1 >= 0.01);
        CHECK(p.p1 <= 0.9);
        CHECK(p.q >= 0.01);
        CHECK(p.q <= std::max(0.01, 0.5 * p.p1));
        CHECK(p.q_min >= 0.01);
        CHECK(p.q_min <= 0.1);
        // Collapsed q range when 0.5 * p1 falls at or below the floor.
        if (p.p1 <= 0.02) {
            ++low_p1_draws;
            CHECK(p.q == 0.01);
        }
    }
    CHECK(low_p1_draws > 0);

    std::mt19937_64 a(123);
    std::mt19937_64 b(123);
    for (int t = 0; t < 50; ++t) CHECK(sample_params(a) == sample_params(b));
}

TEST_CASE("evaluate_trial: schedules with fewer than four checkpoints are infeasible") {
    // (0.9, 0.45, 0.1) yields a single checkpoint at N = 100.
    REQUIRE(build_schedule(ScheduleParams(0.9, 0.45, 0.1), 100).checkpoints.size() < 4);
    const Trial t = evaluate_trial(ScheduleParams(0.9, 0.45, 0.1), tuning_model(), tuning_data(),
                                   tuning_base());
    CHECK_FALSE(t.feasible);
    CHECK(t.robust_acc == std::numeric_limits<double>::infinity());
    CHECK(t.mean_cw_loss == -std::numeric_limits<double>::infinity());
}

TEST_CASE("evaluate_trial: stock parameter sets are feasible and deterministic") {
    REQUIRE(build_schedule(ScheduleParams(0.22, 0.03, 0.06), 100).checkpoints.size() == 8);
    REQUIRE(build_schedule(ScheduleParams(0.43, 0.24, 0.08), 100).checkpoints.size() == 6);

    const Trial a = evaluate_trial(ScheduleParams(0.22, 0.03, 0.06), tuning_model(), tuning_data(),
                                   tuning_base());
    CHECK(a.feasible);
    CHECK(std::isfinite(a.robust_acc));
    CHECK(std::isfinite(a.mean_cw_loss));

    const Trial b = evaluate_trial(ScheduleParams(0.22, 0.03, 0.06), tuning_model(), tuning_data(),
                                   tuning_base());
    CHECK(a.robust_acc == b.robust_acc);
    CHECK(a.mean_cw_loss == b.mean_cw_loss);

    const Trial tuned = evaluate_trial(ScheduleParams(0.43, 0.24, 0.08), tuning_model(),
                                       tuning_data(), tuning_base());
    CHECK(tuned.feasible);
}

TEST_CASE("pareto_front: hand-checked dominance cases") {
    {
        std::vector<Trial> trials{make_trial(50.0, 1.0), make_trial(49.0, 0.9)};
        CHECK(pareto_front(trials) == std::vector<std::size_t>{0, 1});   // trade-off
    }
    {
        std::vector<Trial> trials{make_trial(50.0, 1.0), make_trial(50.0, 0.9)};
        CHECK(pareto_front(trials) == std::vector<std::size_t>{0});
    }
    {
        std::vector<Trial> trials{make_trial(42.0, 0.5)};
        CHECK(pareto_front(trials) == std::vector<std::size_t>{0});
    }
    {
        // Duplicates of a non-dominated point all stay on the front.
        std::vector<Trial> trials{make_trial(50.0, 1.0), make_trial(50.0, 1.0),
                                  make_trial(60.0, 0.2)};
        CHECK(pareto_front(trials) == std::vector<std::size_t>{0, 1});
    }
    CHECK_THROWS_AS(pareto_front(std::vector<Trial>{}), ConfigError);
}

TEST_CASE("pareto_front matches the brute-force oracle on random trials") {
    std::mt19937_64 rng(2025);
    std::uniform_real_distribution<double> ra_dist(30.0, 70.0);
    std::uniform_int_distribution<int> loss_grid(0, 20);
    std::vector<Trial> trials;
    trials.reserve(1000);
    for (int i = 0; i < 1000; ++i) {
        if (i % 10 == 3) {
            trials.push_back(make_trial(std::numeric_limits<double>::infinity(),
                                        -std::numeric_limits<double>::infinity(), i));
            continue;
        }
        // Grid-valued objectives so exact duplicates and ties actually occur.
        const double ra = std::round(ra_dist(rng) * 4.0) / 4.0;
        const double ml = 0.1 * loss_grid(rng);
        trials.push_back(make_trial(ra, ml, i));
    }
    const auto got = pareto_front(trials);
    const auto want = oracles::pareto_oracle(trials);
    REQUIRE(got == want);
    for (std::size_t idx : got) CHECK(trials[idx].feasible);   // feasible trials exist
}

TEST_CASE("pareto_front of only infeasible trials keeps them all") {
    std::vector<Trial> trials(3, make_trial(std::numeric_limits<double>::infinity(),
                                            -std::numeric_limits<double>::infinity()));
    CHECK(pareto_front(trials) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("tune: single feasible trial forms the front; reruns are identical") {
    const TuneResult one = tune(tuning_model(), tuning_data(), 1, 99, tuning_base(50));
    CHECK(one.trials.size() == 1);
    if (one.trials[0].feasible) CHECK(one.front.size() == 1);

    const TuneResult a = tune(tuning_model(), tuning_data(), 12, 5, tuning_base(50));
    const TuneResult b = tune(tuning_model(), tuning_data(), 12, 5, tuning_base(50));
    REQUIRE(a.trials.size() == b.trials.size());
    for (std::size_t i = 0; i < a.trials.size(); ++i) {
        CHECK(a.trials[i].params == b.trials[i].params);
        CHECK(a.trials[i].robust_acc == b.trials[i].robust_acc);
        CHECK(a.trials[i].mean_cw_loss == b.trials[i].mean_cw_loss);
    }
    CHECK(a.front == b.front);
    CHECK(a.best.index == b.best.index);

    std::size_t feasible = 0;
    for (const auto& t : a.trials)
        if (t.feasible) ++feasible;
    CHECK(a.front.size() <= feasible);
    CHECK(a.best.feasible);
    for (const auto& t : a.trials) {
        if (!t.feasible) continue;
        // Best minimizes robust accuracy with the documented tie-breaks.
        CHECK(a.best.robust_acc <= t.robust_acc);
    }
}

TEST_CASE("tune: every schedule collapses at N = 1, so no trial is feasible") {
    CHECK_THROWS_AS(tune(tuning_model(), tuning_data(), 5, 1, tuning_base(1)), ConfigError);
}

TEST_CASE("tuning report json carries trials, front, and best") {
    const TuneResult r = tune(tuning_model(), tuning_data(), 4, 11, tuning_base(50));
    const nlohmann::json j = tuning_report_json(r);
    CHECK(j.at("trials").size() == 4);
    CHECK(j.at("front").size() == r.front.size());
    CHECK(j.at("best").at("index").get<int>() == r.best.index);
    for (const auto& jt : j.at("trials")) {
        if (!jt.at("feasible").get<bool>()) {
            CHECK(jt.at("robust_accuracy").is_null());   // inf sentinel serializes as null
        }
    }
}
