#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "reacg/common.hpp"

namespace reacg {

/// Labeled samples with features in [0,1]^dim. Row order is meaningful
/// (image ids are row indices) and preserved by load/save.
struct Dataset {
    std::vector<int> labels;
    std::vector<Vector> features;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.empty() ? 0 : features.front().size(); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double_cell(const std::string& cell, const std::string& file, int line_no) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw ParseError(file + ":" + std::to_string(line_no) + ": malformed number '" + cell + "'");
    return v;
}

}  // namespace detail

/// CSV with header "label,x0,x1,...". Rejects out-of-range features and
/// malformed rows, naming the offending line.
inline Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset file: " + path.string());
    const std::string file = path.string();

    std::string line;
    int line_no = 0;
    if (!std::getline(in, line)) throw ConfigError(file + ": empty dataset");
    ++line_no;
    auto header = detail::split_csv_line(line);
    if (header.size() < 2 || header[0] != "label")
        throw ParseError(file + ":1: expected header 'label,x0,...'");
    const std::size_t dim = header.size() - 1;

    Dataset ds;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != dim + 1)
            throw ParseError(file + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(dim + 1) + " columns, got " + std::to_string(cells.size()));
        int label = 0;
        {
            const char* b = cells[0].data();
            const char* e = b + cells[0].size();
            auto [ptr, ec] = std::from_chars(b, e, label);
            if (ec != std::errc() || ptr != e || label < 0)
                throw ParseError(file + ":" + std::to_string(line_no) + ": malformed label '" + cells[0] + "'");
        }
        Vector x(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            const double v = detail::parse_double_cell(cells[j + 1], file, line_no);
            if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                throw ParseError(file + ":" + std::to_string(line_no) + ": feature value " +
                                 cells[j + 1] + " outside [0,1]");
            x[j] = v;
        }
        ds.labels.push_back(label);
        ds.features.push_back(std::move(x));
    }
    if (ds.size() == 0) throw ConfigError(file + ": empty dataset");
    return ds;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write dataset file: " + path.string());
    out << "label";
    for (std::size_t j = 0; j < ds.dim(); ++j) out << ",x" << j;
    out << "\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << ds.labels[i];
        for (double v : ds.features[i]) out << ',' << fmt_double(v);
        out << "\n";
    }
}

/// Gaussian blobs around distinct per-class centers, clipped to [0,1]^dim.
/// Labels are assigned round-robin, so class counts are balanced within 1.
inline Dataset make_blobs(int n_samples, int n_classes, int dim, double spread,
                          std::uint64_t seed) {
    if (n_classes < 2) throw ConfigError("make_blobs: need at least 2 classes");
    if (dim < 2) throw ConfigError("make_blobs: need at least 2 dimensions");
    if (n_samples < 1) throw ConfigError("make_blobs: need at least 1 sample");

    // Centers sit on a circle in the first two coordinates; remaining
    // coordinates are fixed at 0.5. Distinct for any class count.
    std::vector<Vector> centers(n_classes, Vector(dim, 0.5));
    for (int c = 0; c < n_classes; ++c) {
        const double angle = 2.0 * std::numbers::pi * c / n_classes;
        centers[c][0] = 0.5 + 0.35 * std::cos(angle);
        centers[c][1] = 0.5 + 0.35 * std::sin(angle);
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    Dataset ds;
    ds.labels.reserve(n_samples);
    ds.features.reserve(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        const int label = i % n_classes;
        Vector x(dim);
        for (int j = 0; j < dim; ++j) {
            const double v = centers[label][j] + spread * noise(rng);
            x[j] = std::clamp(v, 0.0, 1.0);
        }
        ds.labels.push_back(label);
        ds.features.push_back(std::move(x));
    }
    return ds;
}

}  // namespace reacg
