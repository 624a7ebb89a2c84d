#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "reacg/attack.hpp"
#include "reacg/common.hpp"
#include "reacg/dataset.hpp"
#include "reacg/diagnostics.hpp"
#include "reacg/model.hpp"

namespace reacg {

/// Accepts a plain decimal ("0.1") or an exact fraction ("8/255").
inline double parse_epsilon(const std::string& text) {
    const auto slash = text.find('/');
    auto parse_num = [&](const std::string& s) {
        const char* b = s.data();
        const char* e = b + s.size();
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(b, e, v);
        if (ec != std::errc() || ptr != e)
            throw ParseError("epsilon: malformed number '" + s + "'");
        return v;
    };
    if (slash == std::string::npos) return parse_num(text);
    const double numer = parse_num(text.substr(0, slash));
    const double denom = parse_num(text.substr(slash + 1));
    if (denom == 0.0) throw ParseError("epsilon: zero denominator in '" + text + "'");
    return numer / denom;
}

struct ExperimentConfig {
    std::filesystem::path model_path;
    std::filesystem::path data_path;
    std::filesystem::path out_dir;
    std::vector<AttackVariant> variants{AttackVariant::reacg};
    std::vector<LossKind> losses{LossKind::cw};
    double epsilon = 8.0 / 255.0;
    std::vector<int> iters_list{100};
    int restarts = 0;
    std::uint64_t seed = 0;
    bool early_stop = false;
    std::optional<double> eta0;
    std::optional<ScheduleParams> schedule_override;
};

struct RunSummary {
    AttackVariant variant;
    LossKind loss;
    int iters = 0;
    double clean_accuracy_pct = 0.0;
    double robust_accuracy_pct = 0.0;
    double mean_final_loss = 0.0;
    std::filesystem::path run_dir;
    std::vector<ImageResult> images;
};

namespace detail {

inline nlohmann::json config_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["model"] = cfg.model_path.string();
    j["data"] = cfg.data_path.string();
    auto variants = nlohmann::json::array();
    for (auto v : cfg.variants) variants.push_back(variant_name(v));
    j["variants"] = std::move(variants);
    auto losses = nlohmann::json::array();
    for (auto l : cfg.losses) losses.push_back(loss_name(l));
    j["losses"] = std::move(losses);
    j["epsilon"] = cfg.epsilon;
    j["iters"] = cfg.iters_list;
    j["restarts"] = cfg.restarts;
    j["seed"] = cfg.seed;
    j["early_stop"] = cfg.early_stop;
    if (cfg.eta0)
        j["eta0"] = *cfg.eta0;
    else
        j["eta0"] = nullptr;
    if (cfg.schedule_override)
        j["schedule_override"] = {{"p1", cfg.schedule_override->p1},
                                  {"q", cfg.schedule_override->q},
                                  {"q_min", cfg.schedule_override->q_min},
                                  {"rho", cfg.schedule_override->rho}};
    else
        j["schedule_override"] = nullptr;
    return j;
}

inline std::string run_dir_name(AttackVariant v, LossKind l, int iters) {
    return std::string(variant_name(v)) + "_" + loss_name(l) + "_N" + std::to_string(iters);
}

}  // namespace detail

/// Validates the full configuration against the model and dataset before any
/// attack runs.
inline void validate_experiment(const ExperimentConfig& cfg, const ClassifierModel& model,
                                const Dataset& ds) {
    if (!(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0))
        throw ConfigError("experiment: epsilon must be in (0, 1]");
    if (cfg.iters_list.empty()) throw ConfigError("experiment: iteration list is empty");
    for (int n : cfg.iters_list)
        if (n < 1) throw ConfigError("experiment: iteration counts must be >= 1");
    if (cfg.variants.empty()) throw ConfigError("experiment: variant list is empty");
    if (cfg.losses.empty()) throw ConfigError("experiment: loss list is empty");
    if (cfg.restarts < 0) throw ConfigError("experiment: restarts must be >= 0");
    if (ds.size() == 0) throw ConfigError("experiment: empty dataset");
    if (ds.dim() != model.input_dim())
        throw ConfigError("experiment: dataset dimension " + std::to_string(ds.dim()) +
                          " does not match model input_dim " + std::to_string(model.input_dim()));
    for (int label : ds.labels)
        if (label < 0 || static_cast<std::size_t>(label) >= model.num_classes())
            throw ConfigError("experiment: dataset label out of model class range");
    for (LossKind l : cfg.losses)
        if (l == LossKind::dlr && model.num_classes() < 3)
            throw ConfigError("experiment: DLR loss needs at least 3 classes");
}

struct AttackBatch {
    std::vector<ImageResult> images;
    std::vector<AttackTrace> traces;   // one per attacked (clean-correct) image
};

/// Attacks every clean-correct image under one (variant, loss, N) setting.
/// Per-image work fans out across the worker pool; results land in
/// index-addressed slots, so the output is deterministic regardless of
/// scheduling.
inline AttackBatch attack_dataset(const ClassifierModel& model, const Dataset& ds,
                                  const AttackConfig& base, std::uint64_t experiment_seed) {
    const std::size_t n = ds.size();
    std::vector<ImageResult> images(n);
    std::vector<std::optional<AttackTrace>> trace_slots(n);

    parallel_for(n, [&](std::size_t i) {
        ImageResult& out = images[i];
        out.image_id = static_cast<int>(i);
        const auto c = static_cast<std::size_t>(ds.labels[i]);
        const Vector z = model.forward(ds.features[i]);
        out.clean_correct = !misclassified(z, c);
        if (!out.clean_correct) {
            out.success = true;   // already adversarial by convention
            out.iters_to_success = 0;
            return;
        }
        AttackConfig cfg = base;
        cfg.seed = derive_seed(experiment_seed, i);
        AttackResult res = run_with_restarts(model, ds.features[i], c, cfg);
        out.success = res.success;
        out.iters_to_success = res.iters_to_success;
        out.ctc_count = ctc_count(res.trace);
        out.final_loss = res.best_loss;
        res.trace.image_id = static_cast<int>(i);
        trace_slots[i] = std::move(res.trace);
    });

    AttackBatch batch;
    batch.images = std::move(images);
    for (auto& slot : trace_slots)
        if (slot) batch.traces.push_back(std::move(*slot));
    return batch;
}

/// Runs the (variant x loss x N) matrix, writing per-run reports, per-image
/// JSONL, diagnostic CSVs, pairwise overlap percentages, and a manifest
/// under cfg.out_dir. Outputs are byte-reproducible for a fixed config.
inline std::vector<RunSummary> run_experiment(const ExperimentConfig& cfg) {
    const ClassifierModel model = load_model(cfg.model_path);
    const Dataset ds = load_dataset(cfg.data_path);
    validate_experiment(cfg, model, ds);

    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);

    std::vector<RunSummary> summaries;
    std::ofstream overlap_csv(cfg.out_dir / "overlap.csv");
    if (!overlap_csv) throw ConfigError("cannot write overlap.csv");
    overlap_csv << "loss,iters,variant_a,variant_b,only_a_pct,only_b_pct\n";

    for (LossKind loss : cfg.losses) {
        for (int iters : cfg.iters_list) {
            std::vector<std::size_t> combo_runs;   // indices into summaries
            for (AttackVariant variant : cfg.variants) {
                AttackConfig base = AttackConfig::for_variant(variant);
                base.loss = loss;
                base.epsilon = cfg.epsilon;
                base.iters = iters;
                base.restarts = cfg.restarts;
                base.early_stop = cfg.early_stop;
                base.eta0 = cfg.eta0;
                if (cfg.schedule_override) base.schedule = *cfg.schedule_override;

                AttackBatch batch = attack_dataset(model, ds, base, cfg.seed);
                RunReport report = make_run_report(std::move(batch.images));

                const fs::path run_dir = cfg.out_dir / detail::run_dir_name(variant, loss, iters);
                fs::create_directories(run_dir);

                nlohmann::json jr;
                jr["variant"] = variant_name(variant);
                jr["loss"] = loss_name(loss);
                jr["iters"] = iters;
                jr["epsilon"] = cfg.epsilon;
                jr["restarts"] = cfg.restarts;
                jr["seed"] = cfg.seed;
                jr["n_images"] = report.images.size();
                jr["clean_accuracy"] = report.clean_accuracy_pct;
                jr["robust_accuracy"] = report.robust_accuracy_pct;
                jr["mean_final_loss"] = report.mean_final_loss;
                {
                    std::ofstream out(run_dir / "report.json");
                    if (!out) throw ConfigError("cannot write report.json");
                    out << jr.dump(2) << "\n";
                }
                write_per_image_jsonl(run_dir / "per_image.jsonl", report.images);
                if (!batch.traces.empty()) {
                    write_beta_transition_csv(run_dir / "beta_transition.csv", batch.traces);
                    write_move_dist_csv(run_dir / "move_dist.csv", batch.traces);
                    write_ctc_hist_csv(run_dir / "ctc_hist.csv", batch.traces);
                }

                RunSummary summary;
                summary.variant = variant;
                summary.loss = loss;
                summary.iters = iters;
                summary.clean_accuracy_pct = report.clean_accuracy_pct;
                summary.robust_accuracy_pct = report.robust_accuracy_pct;
                summary.mean_final_loss = report.mean_final_loss;
                summary.run_dir = run_dir;
                summary.images = std::move(report.images);
                summaries.push_back(std::move(summary));
                combo_runs.push_back(summaries.size() - 1);
            }
            for (std::size_t a = 0; a < combo_runs.size(); ++a)
                for (std::size_t b = a + 1; b < combo_runs.size(); ++b) {
                    const RunSummary& ra = summaries[combo_runs[a]];
                    const RunSummary& rb = summaries[combo_runs[b]];
                    const OverlapResult ov = overlap_analysis(ra.images, rb.images);
                    overlap_csv << loss_name(loss) << ',' << iters << ','
                                << variant_name(ra.variant) << ',' << variant_name(rb.variant)
                                << ',' << fmt_double(ov.only_a_pct) << ','
                                << fmt_double(ov.only_b_pct) << "\n";
                }
        }
    }

    nlohmann::json manifest;
    manifest["config"] = detail::config_json(cfg);
    const std::string canonical = manifest["config"].dump();
    char hash_buf[32];
    std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64({canonical.data(), canonical.size()})));
    manifest["config_hash"] = hash_buf;
    manifest["seed"] = cfg.seed;
    manifest["version"] = kVersion;
    {
        std::ofstream out(cfg.out_dir / "manifest.json");
        if (!out) throw ConfigError("cannot write manifest.json");
        out << manifest.dump(2) << "\n";
    }
    return summaries;
}

}  // namespace reacg
