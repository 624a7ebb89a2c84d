#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "reacg/attack.hpp"
#include "reacg/common.hpp"

namespace reacg {

/// Per-image attack outcome. Images misclassified before the attack carry
/// clean_correct = false and count as successes by convention.
struct ImageResult {
    int image_id = -1;
    bool clean_correct = false;
    bool success = false;
    std::optional<int> iters_to_success;
    int ctc_count = 0;
    std::optional<double> final_loss;   // incumbent loss; absent for unattacked images
};

/// 100 x (#images whose final adversarial example is still correctly
/// classified) / (#images). Lower means a stronger attack.
inline double robust_accuracy(std::span<const ImageResult> results) {
    if (results.empty()) throw ConfigError("robust_accuracy: empty result set");
    std::size_t still_correct = 0;
    for (const auto& r : results)
        if (r.clean_correct && !r.success) ++still_correct;
    return 100.0 * static_cast<double>(still_correct) / static_cast<double>(results.size());
}

inline double clean_accuracy(std::span<const ImageResult> results) {
    if (results.empty()) throw ConfigError("clean_accuracy: empty result set");
    std::size_t correct = 0;
    for (const auto& r : results)
        if (r.clean_correct) ++correct;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(results.size());
}

/// Number of distinct CTC values over iterations 1..N (iterate 0 excluded).
inline int ctc_count(const AttackTrace& trace) {
    if (trace.rows.empty()) throw ConfigError("ctc_count: empty trace");
    std::set<int> seen;
    for (std::size_t i = 1; i < trace.rows.size(); ++i) seen.insert(trace.rows[i].ctc);
    return static_cast<int>(seen.size());
}

/// K -> percentage of traces with ctc_count == K. Percentages sum to 100.
inline std::map<int, double> ctc_histogram(std::span<const AttackTrace> traces) {
    if (traces.empty()) throw ConfigError("ctc_histogram: no traces");
    std::map<int, std::size_t> counts;
    for (const auto& t : traces) ++counts[ctc_count(t)];
    std::map<int, double> hist;
    for (const auto& [k, n] : counts)
        hist[k] = 100.0 * static_cast<double>(n) / static_cast<double>(traces.size());
    return hist;
}

namespace detail {

template <typename Getter>
inline std::vector<double> per_iteration_mean(std::span<const AttackTrace> traces, Getter get) {
    if (traces.empty()) throw ConfigError("per-iteration mean: no traces");
    std::size_t max_len = 0;
    for (const auto& t : traces) max_len = std::max(max_len, t.rows.size());
    std::vector<double> sums(max_len, 0.0);
    std::vector<std::size_t> counts(max_len, 0);
    for (const auto& t : traces)
        for (std::size_t k = 0; k < t.rows.size(); ++k) {
            sums[k] += get(t.rows[k]);
            ++counts[k];
        }
    std::vector<double> means(max_len);
    for (std::size_t k = 0; k < max_len; ++k) means[k] = sums[k] / static_cast<double>(counts[k]);
    return means;
}

}  // namespace detail

/// Mean |beta_used| across traces at each iteration index.
inline std::vector<double> beta_transition(std::span<const AttackTrace> traces) {
    return detail::per_iteration_mean(traces, [](const TraceRow& r) { return std::abs(r.beta_used); });
}

/// Mean moving distance ||x^(k) - x^(k-1)||_2 across traces at each iteration.
inline std::vector<double> move_dist_transition(std::span<const AttackTrace> traces) {
    return detail::per_iteration_mean(traces, [](const TraceRow& r) { return r.move_dist; });
}

struct OverlapResult {
    double only_a_pct = 0.0;
    double only_b_pct = 0.0;
};

/// Percentage of images attack A solved and B did not, and vice versa.
inline OverlapResult overlap_analysis(std::span<const ImageResult> a,
                                      std::span<const ImageResult> b) {
    if (a.empty() || a.size() != b.size())
        throw ConfigError("overlap_analysis: result sets differ in size");
    std::size_t only_a = 0;
    std::size_t only_b = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].image_id != b[i].image_id)
            throw ConfigError("overlap_analysis: image sets do not match");
        if (a[i].success && !b[i].success) ++only_a;
        if (b[i].success && !a[i].success) ++only_b;
    }
    const double n = static_cast<double>(a.size());
    return {100.0 * static_cast<double>(only_a) / n, 100.0 * static_cast<double>(only_b) / n};
}

inline void write_series_csv(const std::filesystem::path& path, const std::string& key_header,
                             const std::string& value_header, std::span<const double> values) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write csv: " + path.string());
    out << key_header << ',' << value_header << "\n";
    for (std::size_t k = 0; k < values.size(); ++k)
        out << k << ',' << fmt_double(values[k]) << "\n";
}

inline void write_beta_transition_csv(const std::filesystem::path& path,
                                      std::span<const AttackTrace> traces) {
    write_series_csv(path, "k", "mean_abs_beta", beta_transition(traces));
}

inline void write_move_dist_csv(const std::filesystem::path& path,
                                std::span<const AttackTrace> traces) {
    write_series_csv(path, "k", "mean_dist", move_dist_transition(traces));
}

inline void write_ctc_hist_csv(const std::filesystem::path& path,
                               std::span<const AttackTrace> traces) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write csv: " + path.string());
    out << "K,percent\n";
    for (const auto& [k, pct] : ctc_histogram(traces)) out << k << ',' << fmt_double(pct) << "\n";
}

inline void write_per_image_jsonl(const std::filesystem::path& path,
                                  std::span<const ImageResult> results) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write jsonl: " + path.string());
    for (const auto& r : results) {
        nlohmann::json j;
        j["image_id"] = r.image_id;
        j["success"] = r.success;
        if (r.iters_to_success)
            j["iters_to_success"] = *r.iters_to_success;
        else
            j["iters_to_success"] = nullptr;
        j["ctc_count"] = r.ctc_count;
        if (r.final_loss)
            j["final_loss"] = *r.final_loss;
        else
            j["final_loss"] = nullptr;
        out << j.dump() << "\n";
    }
}

struct RunReport {
    std::vector<ImageResult> images;
    double robust_accuracy_pct = 0.0;
    double clean_accuracy_pct = 0.0;
    double mean_final_loss = 0.0;
};

inline RunReport make_run_report(std::vector<ImageResult> images) {
    RunReport report;
    report.robust_accuracy_pct = robust_accuracy(images);
    report.clean_accuracy_pct = clean_accuracy(images);
    double loss_sum = 0.0;
    std::size_t attacked = 0;
    for (const auto& r : images)
        if (r.final_loss) {
            loss_sum += *r.final_loss;
            ++attacked;
        }
    report.mean_final_loss = attacked > 0 ? loss_sum / static_cast<double>(attacked) : 0.0;
    report.images = std::move(images);
    return report;
}

}  // namespace reacg
