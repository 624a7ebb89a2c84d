#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "reacg/dataset.hpp"
#include "reacg/losses.hpp"
#include "reacg/model.hpp"

#include "oracles.hpp"

using namespace reacg;

namespace {

ClassifierModel identity_model(std::size_t n) {
    DenseLayer layer;
    layer.weights = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) layer.weights(i, i) = 1.0;
    layer.bias.assign(n, 0.0);
    layer.activation = Activation::identity;
    return ClassifierModel({layer});
}

ClassifierModel linear_model(const std::vector<std::vector<double>>& w,
                             const std::vector<double>& b) {
    DenseLayer layer;
    layer.weights = Matrix(w.size(), w[0].size());
    for (std::size_t r = 0; r < w.size(); ++r)
        for (std::size_t c = 0; c < w[0].size(); ++c) layer.weights(r, c) = w[r][c];
    layer.bias = b;
    layer.activation = Activation::identity;
    return ClassifierModel({layer});
}

}  // namespace

TEST_CASE("forward: identity model returns its input") {
    const auto model = identity_model(2);
    CHECK(model.forward({0.3, 0.7}) == Vector{0.3, 0.7});
}

TEST_CASE("forward: hand-computed single dense layer") {
    // z = [1, -1] x + 0.5 plus a second row so the model has two classes
    const auto model = linear_model({{1.0, -1.0}, {0.0, 0.0}}, {0.5, 0.0});
    const Vector z = model.forward({2.0, 1.0});
    CHECK(z[0] == 1.5);
    CHECK(z[1] == 0.0);
}

TEST_CASE("forward: zero weights return the bias") {
    const auto model = linear_model({{0.0, 0.0}, {0.0, 0.0}}, {0.25, -0.75});
    CHECK(model.forward({0.9, 0.1}) == Vector{0.25, -0.75});
    CHECK(model.forward({0.0, 1.0}) == Vector{0.25, -0.75});
}

TEST_CASE("forward: dimension mismatch raises a shape error") {
    const auto model = identity_model(2);
    CHECK_THROWS_AS(model.forward({0.1, 0.2, 0.3}), ShapeError);
    CHECK_THROWS_AS(model.input_gradient({0.1}, {1.0, 0.0}), ShapeError);
    CHECK_THROWS_AS(model.input_gradient({0.1, 0.2}, {1.0}), ShapeError);
}

TEST_CASE("forward is pure") {
    const auto model = make_mlp(3, {8}, 3, 17);
    const Vector x{0.2, 0.5, 0.9};
    CHECK(model.forward(x) == model.forward(x));
}

TEST_CASE("input_gradient: linear model gives W^T u, independent of x") {
    const auto model = linear_model({{1.0, 2.0}, {3.0, -4.0}}, {0.0, 0.0});
    const Vector u{0.5, -1.0};
    const Vector g1 = model.input_gradient({0.1, 0.9}, u);
    const Vector g2 = model.input_gradient({0.7, 0.3}, u);
    CHECK(g1 == g2);
    CHECK(g1[0] == Catch::Approx(1.0 * 0.5 + 3.0 * -1.0));
    CHECK(g1[1] == Catch::Approx(2.0 * 0.5 + -4.0 * -1.0));
}

TEST_CASE("input_gradient: identity model passes the upstream through") {
    const auto model = identity_model(2);
    CHECK(model.input_gradient({0.4, 0.6}, {1.0, 0.0}) == Vector{1.0, 0.0});
}

TEST_CASE("input_gradient matches finite differences on relu networks") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t dim = 2 + trial % 3;
        const auto model = make_mlp(dim, {7, 5}, 3, rng());
        const Vector x = oracles::random_point(rng, dim, 0.05, 0.95);
        const Vector u = oracles::random_point(rng, 3, -1.0, 1.0);
        const Vector analytic = model.input_gradient(x, u);
        const Vector fd = oracles::fd_gradient(
            [&](const Vector& p) { return dot(u, model.forward(p)); }, x);
        INFO("trial " << trial);
        CHECK(oracles::gradients_match(analytic, fd, 1e-4));
    }
}

TEST_CASE("relu subgradient at exactly zero is zero") {
    // One relu unit wired so its preactivation is exactly 0 at x = 0.5.
    DenseLayer l1;
    l1.weights = Matrix(1, 1);
    l1.weights(0, 0) = 2.0;
    l1.bias = {-1.0};
    l1.activation = Activation::relu;
    DenseLayer l2;
    l2.weights = Matrix(2, 1);
    l2.weights(0, 0) = 1.0;
    l2.weights(1, 0) = -1.0;
    l2.bias = {0.0, 0.0};
    l2.activation = Activation::identity;
    const ClassifierModel model({l1, l2});
    const Vector g = model.input_gradient({0.5}, {1.0, 0.0});
    CHECK(g == Vector{0.0});
}

TEST_CASE("model construction validates shapes") {
    DenseLayer bad;
    bad.weights = Matrix(2, 2);
    bad.bias = {0.0};
    bad.activation = Activation::identity;
    CHECK_THROWS_AS(ClassifierModel({bad}), ConfigError);

    DenseLayer relu_out;
    relu_out.weights = Matrix(2, 2);
    relu_out.bias = {0.0, 0.0};
    relu_out.activation = Activation::relu;
    CHECK_THROWS_AS(ClassifierModel({relu_out}), ConfigError);
}

TEST_CASE("train_toy: separable blobs reach high clean accuracy") {
    const Dataset ds = make_blobs(200, 2, 2, 0.05, 5);
    auto model = make_mlp(2, {8}, 2, 5);
    const TrainResult result = train_toy(std::move(model), ds, 60, 0.1, 5);
    CHECK(result.clean_accuracy >= 0.95);
}

TEST_CASE("train_toy: zero epochs return the model unchanged") {
    const Dataset ds = make_blobs(50, 2, 2, 0.05, 7);
    const auto model = make_mlp(2, {4}, 2, 7);
    const TrainResult result = train_toy(model, ds, 0, 0.1, 7);
    REQUIRE(result.model.layers().size() == model.layers().size());
    for (std::size_t l = 0; l < model.layers().size(); ++l) {
        CHECK(result.model.layers()[l].weights.data == model.layers()[l].weights.data);
        CHECK(result.model.layers()[l].bias == model.layers()[l].bias);
    }
}

TEST_CASE("train_toy: same seed gives bitwise-identical weights") {
    const Dataset ds = make_blobs(80, 3, 2, 0.08, 11);
    const auto init = make_mlp(2, {6}, 3, 11);
    const TrainResult a = train_toy(init, ds, 20, 0.05, 42);
    const TrainResult b = train_toy(init, ds, 20, 0.05, 42);
    for (std::size_t l = 0; l < a.model.layers().size(); ++l) {
        CHECK(a.model.layers()[l].weights.data == b.model.layers()[l].weights.data);
        CHECK(a.model.layers()[l].bias == b.model.layers()[l].bias);
    }
}

TEST_CASE("train_toy: empty dataset is a configuration error") {
    const auto model = make_mlp(2, {4}, 2, 3);
    CHECK_THROWS_AS(train_toy(model, Dataset{}, 5, 0.1, 3), ConfigError);
}

TEST_CASE("make_mlp: same seed twice gives identical parameters") {
    const auto a = make_mlp(4, {9, 9}, 3, 123);
    const auto b = make_mlp(4, {9, 9}, 3, 123);
    for (std::size_t l = 0; l < a.layers().size(); ++l)
        CHECK(a.layers()[l].weights.data == b.layers()[l].weights.data);
}

TEST_CASE("model json round-trips exactly") {
    const auto model = make_mlp(3, {5}, 3, 77);
    const auto path = std::filesystem::temp_directory_path() / "reacg_test_model.json";
    save_model(model, path);
    const auto loaded = load_model(path);
    REQUIRE(loaded.layers().size() == model.layers().size());
    for (std::size_t l = 0; l < model.layers().size(); ++l) {
        CHECK(loaded.layers()[l].weights.data == model.layers()[l].weights.data);
        CHECK(loaded.layers()[l].bias == model.layers()[l].bias);
        CHECK(loaded.layers()[l].activation == model.layers()[l].activation);
    }
    std::filesystem::remove(path);
}

TEST_CASE("model loader rejects non-finite values and bad shapes") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto bad = dir / "reacg_test_bad_model.json";
    {
        std::ofstream out(bad);
        out << R"({"input_dim":2,"num_classes":2,"layers":[{"weights":[[1e999,0],[0,1]],)"
            << R"("bias":[0,0],"activation":"identity"}]})";
    }
    CHECK_THROWS_AS(load_model(bad), ParseError);
    {
        std::ofstream out(bad);
        out << R"({"layers":[{"weights":[[1,0],[0]],"bias":[0,0],"activation":"identity"}]})";
    }
    CHECK_THROWS_AS(load_model(bad), ParseError);
    {
        std::ofstream out(bad);
        out << R"({"layers":[{"weights":[[1,0],[0,1]],"bias":[0,0],"activation":"tanh"}]})";
    }
    CHECK_THROWS_AS(load_model(bad), ParseError);
    std::filesystem::remove(bad);
}
