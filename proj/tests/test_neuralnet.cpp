#include "causalbound/neuralnet.hpp"

#include "causalbound/rng.hpp"

#include "doctest.h"

#include <cmath>
#include <sstream>

using namespace causalbound;

TEST_CASE("init is deterministic in the seed") {
    MlpConfig cfg{2, {4}, 1};
    Mlp a(cfg, 99), b(cfg, 99), c(cfg, 100);
    CHECK(a.parameters()[0]->value == b.parameters()[0]->value);
    CHECK(a.parameters()[0]->value != c.parameters()[0]->value);
}

TEST_CASE("weight shapes chain through the config") {
    MlpConfig cfg{2, {4}, 1};
    Mlp mlp(cfg, 1);
    auto params = mlp.parameters();
    CHECK(params[0]->rows == 2);  // stored input x output
    CHECK(params[0]->cols == 4);
    CHECK(params[2]->rows == 4);
    CHECK(params[2]->cols == 1);
}

TEST_CASE("initial weights bounded by fan-in rule") {
    MlpConfig cfg{100, {8}, 1};
    Mlp mlp(cfg, 5);
    for (double w : mlp.parameters()[0]->value) {
        CHECK(w >= -0.1);
        CHECK(w <= 0.1);
    }
    for (double b : mlp.parameters()[1]->value) CHECK(b == 0.0);
}

TEST_CASE("zero weights give zero output") {
    MlpConfig cfg{3, {4, 2}, 2};
    Mlp mlp(cfg, 1);
    for (auto* p : mlp.parameters()) p->value.assign(p->value.size(), 0.0);
    Matrix in(5, 3, 1.0);
    Matrix out = mlp.forward(in);
    for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("hand-built single hidden unit computes relu(x-1)") {
    MlpConfig cfg{1, {1}, 1};
    Mlp mlp(cfg, 1);
    auto params = mlp.parameters();
    params[0]->value = {1.0};   // hidden weight
    params[1]->value = {-1.0};  // hidden bias
    params[2]->value = {1.0};   // output weight
    params[3]->value = {0.0};
    CHECK(mlp.forward_one(std::vector<double>{0.5})[0] == doctest::Approx(0.0));
    CHECK(mlp.forward_one(std::vector<double>{2.0})[0] == doctest::Approx(1.0));
}

TEST_CASE("forward rejects wrong input width") {
    Mlp mlp(MlpConfig{3, {4}, 1}, 1);
    Matrix in(2, 2, 0.0);
    CHECK_THROWS_AS(mlp.forward(in), std::invalid_argument);
}

TEST_CASE("hidden_activations shape and nonnegativity") {
    Mlp mlp(MlpConfig{2, {5, 3}, 1}, 17);
    auto acts = mlp.hidden_activations(std::vector<double>{0.3, -0.8});
    CHECK(acts.size() == 3);
    for (double a : acts) CHECK(a >= 0.0);
}

TEST_CASE("adam single step matches the textbook recursion") {
    // scalar parameter w=1, gradient g=0.5, lr=0.1
    ParamTensor w{1, 1, {1.0}};
    AdamOptimizer adam(0.1);
    adam.step({&w}, {{0.5}});
    // m = 0.1*0.5 = 0.05 ; v = 0.001*0.25 ; bias-corrected: mhat=0.5, vhat=0.25
    const double expected = 1.0 - 0.1 * 0.5 / (std::sqrt(0.25) + 1e-8);
    CHECK(w.value[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("train_regression rejects bad data") {
    Matrix x(0, 1), y(0, 1);
    TrainConfig tc{5, 8, 0.01, 0};
    CHECK_THROWS_AS(train_regression(x, y, tc, MlpConfig{1, {4}, 1}, 1),
                    std::invalid_argument);
    Matrix x2(2, 1, {1.0, std::nan("")}), y2(2, 1, {1.0, 2.0});
    CHECK_THROWS_AS(train_regression(x2, y2, tc, MlpConfig{1, {4}, 1}, 1),
                    std::invalid_argument);
}

TEST_CASE("fits noiseless y = 2x") {
    Rng rng(1);
    const std::size_t n = 1000;
    Matrix x(n, 1), y(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = rng.uniform(-2.0, 2.0);
        y(i, 0) = 2.0 * x(i, 0);
    }
    TrainConfig tc{200, 512, 0.01, 0};
    auto fit = train_regression(x, y, tc, MlpConfig{1, {64, 32, 16}, 1}, 3);
    for (double g = -2.0; g <= 2.0; g += 0.25) {
        double pred = fit.mlp.forward_one(std::vector<double>{g})[0];
        CHECK(std::fabs(pred - 2.0 * g) < 0.05);
    }
}

TEST_CASE("fits constant targets to high precision") {
    Rng rng(2);
    const std::size_t n = 600;
    Matrix x(n, 1), y(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = rng.uniform(-1.0, 1.0);
        y(i, 0) = 3.25;
    }
    TrainConfig tc{4000, 600, 0.01, 0};
    auto fit = train_regression(x, y, tc, MlpConfig{1, {8}, 1}, 4);
    for (double g = -0.9; g <= 0.9; g += 0.3) {
        double pred = fit.mlp.forward_one(std::vector<double>{g})[0];
        CHECK(std::fabs(pred - 3.25) < 1e-3);
    }
}

TEST_CASE("fits y = x1 + x2 with small held-out RMSE") {
    Rng rng(5);
    const std::size_t n = 2000;
    Matrix x(n, 2), y(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = rng.uniform(-1.0, 1.0);
        x(i, 1) = rng.uniform(-1.0, 1.0);
        y(i, 0) = x(i, 0) + x(i, 1);
    }
    TrainConfig tc{200, 256, 0.01, 0};
    auto fit = train_regression(x, y, tc, MlpConfig{2, {64, 32, 16}, 1}, 6);
    Rng test_rng(55);
    double se = 0.0;
    const std::size_t m = 500;
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> pt = {test_rng.uniform(-1.0, 1.0), test_rng.uniform(-1.0, 1.0)};
        const double pred = fit.mlp.forward_one(pt)[0];
        const double diff = pred - (pt[0] + pt[1]);
        se += diff * diff;
    }
    CHECK(std::sqrt(se / m) < 0.05);
}

TEST_CASE("epoch-average loss trend is non-increasing on a clean problem") {
    // Track the reported final MSE across nested budgets as a cheap proxy:
    // training longer on the same data should not end up worse.
    Rng rng(9);
    const std::size_t n = 500;
    Matrix x(n, 1), y(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = rng.uniform(-1.0, 1.0);
        y(i, 0) = std::sin(2.0 * x(i, 0));
    }
    MlpConfig mc{1, {32, 16}, 1};
    double prev = 1e100;
    for (std::size_t epochs : {20, 60, 140}) {
        TrainConfig tc{epochs, 64, 0.01, 0};
        auto fit = train_regression(x, y, tc, mc, 8);
        CHECK(fit.final_mse <= prev + 1e-4);
        prev = fit.final_mse;
    }
}

TEST_CASE("serialization round-trips") {
    Mlp mlp(MlpConfig{3, {8, 4}, 2}, 77);
    std::stringstream ss;
    mlp.save(ss);
    Mlp back = Mlp::load(ss);
    Matrix in(4, 3);
    Rng rng(12);
    for (double& v : in.data()) v = rng.normal();
    Matrix a = mlp.forward(in), b = back.forward(in);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-14));
}
