#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "reacg/common.hpp"
#include "reacg/dataset.hpp"

namespace reacg {

enum class Activation { relu, identity };

/// Dense row-major matrix (rows x cols).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
};

struct DenseLayer {
    Matrix weights;            // out x in
    Vector bias;               // out
    Activation activation = Activation::identity;

    std::size_t fan_in() const { return weights.cols; }
    std::size_t fan_out() const { return weights.rows; }
};

/// Feed-forward classifier over [0,1]^n producing raw logits. Immutable after
/// construction; forward/input_gradient are safe for concurrent read-only use.
class ClassifierModel {
public:
    ClassifierModel(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
        if (layers_.empty()) throw ConfigError("model needs at least one layer");
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const auto& layer = layers_[l];
            if (layer.weights.rows != layer.bias.size())
                throw ConfigError("layer " + std::to_string(l) + ": weight rows != bias length");
            if (l > 0 && layer.weights.cols != layers_[l - 1].weights.rows)
                throw ConfigError("layer " + std::to_string(l) + ": input width does not chain");
            if (!all_finite(layer.weights.data) || !all_finite(layer.bias))
                throw ConfigError("layer " + std::to_string(l) + ": non-finite parameter");
        }
        if (layers_.back().activation != Activation::identity)
            throw ConfigError("final layer must emit raw logits (identity activation)");
        if (num_classes() < 2) throw ConfigError("model needs at least 2 output classes");
        if (input_dim() < 1) throw ConfigError("model needs at least 1 input dimension");
    }

    std::size_t input_dim() const { return layers_.front().weights.cols; }
    std::size_t num_classes() const { return layers_.back().weights.rows; }
    const std::vector<DenseLayer>& layers() const { return layers_; }

    /// Logits z = f(x).
    Vector forward(const Vector& x) const {
        check_input(x);
        Vector h = x;
        for (const auto& layer : layers_) h = apply_layer(layer, h);
        return h;
    }

    /// dL/dx by reverse accumulation given upstream = dL/dz.
    /// relu subgradient at exactly 0 is taken as 0.
    Vector input_gradient(const Vector& x, const Vector& upstream) const {
        check_input(x);
        if (upstream.size() != num_classes())
            throw ShapeError("input_gradient: upstream length " + std::to_string(upstream.size()) +
                             " != num_classes " + std::to_string(num_classes()));
        std::vector<Vector> preacts;
        preacts.reserve(layers_.size());
        Vector h = x;
        for (const auto& layer : layers_) {
            Vector a = affine(layer, h);
            preacts.push_back(a);
            h = activate(layer.activation, std::move(a));
        }
        Vector delta = upstream;
        for (std::size_t l = layers_.size(); l-- > 0;) {
            const auto& layer = layers_[l];
            if (layer.activation == Activation::relu)
                for (std::size_t i = 0; i < delta.size(); ++i)
                    if (preacts[l][i] <= 0.0) delta[i] = 0.0;
            Vector prev(layer.fan_in(), 0.0);
            for (std::size_t r = 0; r < layer.fan_out(); ++r)
                for (std::size_t c = 0; c < layer.fan_in(); ++c)
                    prev[c] += layer.weights(r, c) * delta[r];
            delta = std::move(prev);
        }
        return delta;
    }

private:
    void check_input(const Vector& x) const {
        if (x.size() != input_dim())
            throw ShapeError("input length " + std::to_string(x.size()) + " != input_dim " +
                             std::to_string(input_dim()));
    }

    static Vector affine(const DenseLayer& layer, const Vector& h) {
        Vector a(layer.fan_out());
        for (std::size_t r = 0; r < layer.fan_out(); ++r) {
            double acc = layer.bias[r];
            for (std::size_t c = 0; c < layer.fan_in(); ++c) acc += layer.weights(r, c) * h[c];
            a[r] = acc;
        }
        return a;
    }

    static Vector activate(Activation act, Vector a) {
        if (act == Activation::relu)
            for (double& v : a) v = v > 0.0 ? v : 0.0;
        return a;
    }

    static Vector apply_layer(const DenseLayer& layer, const Vector& h) {
        return activate(layer.activation, affine(layer, h));
    }

    std::vector<DenseLayer> layers_;
};

/// MLP with relu hidden layers and identity output, parameters drawn
/// uniformly in [-1/sqrt(fan_in), +1/sqrt(fan_in)] from the seeded generator.
inline ClassifierModel make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                                std::size_t num_classes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<DenseLayer> layers;
    std::vector<std::size_t> widths;
    widths.push_back(input_dim);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(num_classes);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t fan_in = widths[l];
        const std::size_t fan_out = widths[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        DenseLayer layer;
        layer.weights = Matrix(fan_out, fan_in);
        layer.bias.resize(fan_out);
        for (double& w : layer.weights.data) w = dist(rng);
        for (double& b : layer.bias) b = dist(rng);
        layer.activation = (l + 2 == widths.size()) ? Activation::identity : Activation::relu;
        layers.push_back(std::move(layer));
    }
    return ClassifierModel(std::move(layers));
}

/// True when class c is not the strict argmax of z (ties count against c).
inline bool misclassified(const Vector& z, std::size_t c) {
    if (c >= z.size()) throw ConfigError("class index out of range");
    double best_other = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < z.size(); ++i)
        if (i != c) best_other = std::max(best_other, z[i]);
    return best_other >= z[c];
}

inline double clean_accuracy_of(const ClassifierModel& model, const Dataset& ds) {
    if (ds.size() == 0) throw ConfigError("empty dataset");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const Vector z = model.forward(ds.features[i]);
        if (!misclassified(z, static_cast<std::size_t>(ds.labels[i]))) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

struct TrainResult {
    ClassifierModel model;
    double clean_accuracy = 0.0;
};

/// Plain cross-entropy SGD with per-epoch shuffling from the seeded
/// generator. Deterministic given (model, dataset, epochs, lr, seed);
/// epochs = 0 returns the model unchanged.
inline TrainResult train_toy(ClassifierModel model, const Dataset& ds, int epochs, double lr,
                             std::uint64_t seed) {
    if (ds.size() == 0) throw ConfigError("train_toy: empty dataset");
    if (ds.dim() != model.input_dim()) throw ConfigError("train_toy: dataset/model dimension mismatch");
    for (int label : ds.labels)
        if (label < 0 || static_cast<std::size_t>(label) >= model.num_classes())
            throw ConfigError("train_toy: label out of range");

    std::vector<DenseLayer> layers = model.layers();
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t idx : order) {
            const Vector& x = ds.features[idx];
            const std::size_t label = static_cast<std::size_t>(ds.labels[idx]);

            // Forward pass, keeping pre- and post-activations for backprop.
            std::vector<Vector> acts;      // acts[0] = x, acts[l+1] = layer l output
            std::vector<Vector> preacts;
            acts.push_back(x);
            for (const auto& layer : layers) {
                Vector a(layer.fan_out());
                for (std::size_t r = 0; r < layer.fan_out(); ++r) {
                    double acc = layer.bias[r];
                    for (std::size_t c = 0; c < layer.fan_in(); ++c)
                        acc += layer.weights(r, c) * acts.back()[c];
                    a[r] = acc;
                }
                preacts.push_back(a);
                if (layer.activation == Activation::relu)
                    for (double& v : a) v = v > 0.0 ? v : 0.0;
                acts.push_back(std::move(a));
            }

            // Softmax cross-entropy gradient at the logits.
            Vector delta = acts.back();
            const double zmax = *std::max_element(delta.begin(), delta.end());
            double denom = 0.0;
            for (double& v : delta) {
                v = std::exp(v - zmax);
                denom += v;
            }
            for (double& v : delta) v /= denom;
            delta[label] -= 1.0;

            for (std::size_t l = layers.size(); l-- > 0;) {
                auto& layer = layers[l];
                if (layer.activation == Activation::relu)
                    for (std::size_t i = 0; i < delta.size(); ++i)
                        if (preacts[l][i] <= 0.0) delta[i] = 0.0;
                Vector prev(layer.fan_in(), 0.0);
                for (std::size_t r = 0; r < layer.fan_out(); ++r) {
                    for (std::size_t c = 0; c < layer.fan_in(); ++c) {
                        prev[c] += layer.weights(r, c) * delta[r];
                        layer.weights(r, c) -= lr * delta[r] * acts[l][c];
                    }
                    layer.bias[r] -= lr * delta[r];
                }
                delta = std::move(prev);
            }
        }
    }

    ClassifierModel trained(std::move(layers));
    const double acc = clean_accuracy_of(trained, ds);
    return TrainResult{std::move(trained), acc};
}

inline nlohmann::json model_to_json(const ClassifierModel& model) {
    nlohmann::json j;
    j["input_dim"] = model.input_dim();
    j["num_classes"] = model.num_classes();
    j["layers"] = nlohmann::json::array();
    for (const auto& layer : model.layers()) {
        nlohmann::json jl;
        auto rows = nlohmann::json::array();
        for (std::size_t r = 0; r < layer.weights.rows; ++r) {
            auto row = nlohmann::json::array();
            for (std::size_t c = 0; c < layer.weights.cols; ++c) row.push_back(layer.weights(r, c));
            rows.push_back(std::move(row));
        }
        jl["weights"] = std::move(rows);
        jl["bias"] = layer.bias;
        jl["activation"] = layer.activation == Activation::relu ? "relu" : "identity";
        j["layers"].push_back(std::move(jl));
    }
    return j;
}

inline ClassifierModel model_from_json(const nlohmann::json& j) {
    if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].empty())
        throw ParseError("model json: missing or empty 'layers'");
    std::vector<DenseLayer> layers;
    for (const auto& jl : j["layers"]) {
        DenseLayer layer;
        const auto& rows = jl.at("weights");
        if (!rows.is_array() || rows.empty() || !rows[0].is_array())
            throw ParseError("model json: 'weights' must be a non-empty array of rows");
        layer.weights = Matrix(rows.size(), rows[0].size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != layer.weights.cols)
                throw ParseError("model json: ragged weight rows");
            for (std::size_t c = 0; c < layer.weights.cols; ++c) {
                if (!rows[r][c].is_number()) throw ParseError("model json: non-numeric weight");
                layer.weights(r, c) = rows[r][c].get<double>();
            }
        }
        for (const auto& b : jl.at("bias")) {
            if (!b.is_number()) throw ParseError("model json: non-numeric bias");
            layer.bias.push_back(b.get<double>());
        }
        const std::string act = jl.at("activation").get<std::string>();
        if (act == "relu")
            layer.activation = Activation::relu;
        else if (act == "identity")
            layer.activation = Activation::identity;
        else
            throw ParseError("model json: unknown activation '" + act + "'");
        if (!all_finite(layer.weights.data) || !all_finite(layer.bias))
            throw ParseError("model json: non-finite parameter value");
        layers.push_back(std::move(layer));
    }
    ClassifierModel model(std::move(layers));
    if (j.contains("input_dim") && j["input_dim"].get<std::size_t>() != model.input_dim())
        throw ParseError("model json: declared input_dim does not match layer shapes");
    if (j.contains("num_classes") && j["num_classes"].get<std::size_t>() != model.num_classes())
        throw ParseError("model json: declared num_classes does not match layer shapes");
    return model;
}

inline void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write model file: " + path.string());
    out << model_to_json(model).dump(2) << "\n";
}

inline ClassifierModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("model json: " + std::string(e.what()));
    }
    try {
        return model_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("model json: " + std::string(e.what()));
    }
}

}  // namespace reacg
