// Minimal end-to-end use of the library: make a toy dataset, train a small
// classifier, attack one input with ReACG, print the trace summary.

#include <cstdio>

#include "reacg/reacg.hpp"

int main() {
    using namespace reacg;

    const Dataset train_set = make_blobs(300, 3, 2, 0.15, 1);
    auto mlp = make_mlp(2, {16, 16}, 3, 1);
    const TrainResult trained = train_toy(std::move(mlp), train_set, 100, 0.05, 1);
    std::printf("clean accuracy: %.1f%%\n", 100.0 * trained.clean_accuracy);

    const Dataset targets = make_blobs(20, 3, 2, 0.18, 2);
    AttackConfig cfg = AttackConfig::for_variant(AttackVariant::reacg);
    cfg.loss = LossKind::cw;
    cfg.epsilon = 0.1;
    cfg.iters = 100;

    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto label = static_cast<std::size_t>(targets.labels[i]);
        const Vector& x = targets.features[i];
        if (misclassified(trained.model.forward(x), label)) continue;

        const AttackResult res = run_attack(trained.model, x, label, cfg);
        const std::string when =
            res.iters_to_success ? " (iter " + std::to_string(*res.iters_to_success) + ")" : "";
        std::printf("image %2zu: %s  loss %+.3f -> %+.3f  #ctc %d%s\n", i,
                    res.success ? "broken " : "held   ", res.trace.rows.front().loss,
                    res.best_loss, ctc_count(res.trace), when.c_str());
    }
    return 0;
}
