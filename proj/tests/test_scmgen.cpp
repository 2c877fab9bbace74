#include "causalbound/scmgen.hpp"

#include "causalbound/rng.hpp"

#include "doctest.h"

#include <cmath>
#include <sstream>

using namespace causalbound;

TEST_CASE("unknown name lists valid names") {
    CHECK_THROWS_WITH_AS(parse_scm_name("IV-cubic-9d"),
                         doctest::Contains("IV-lin-2d-strong"), std::invalid_argument);
}

TEST_CASE("LM aliases resolve") {
    CHECK(parse_scm_name("LM-lin-2d-strong") == ScmName::LmLin1_2d);
    CHECK(parse_scm_name("LM-lin-2d-weak") == ScmName::LmLin2_2d);
}

TEST_CASE("generation is deterministic in the seed") {
    auto a = generate(ScmName::IvQuad2dWeak, 200, 123);
    auto b = generate(ScmName::IvQuad2dWeak, 200, 123);
    CHECK(a.resp.data() == b.resp.data());
    CHECK(a.y == b.y);
}

TEST_CASE("IV-lin-2d-strong second moments match the linear-Gaussian form") {
    // X = 0.5 z + 2 c + e_x with independent standard normal parts:
    // Var(X_d) = 0.25 + 4 + 1 = 5.25, off-diagonal 0.
    auto ds = generate(ScmName::IvLin2dStrong, 100000, 7);
    for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t b = 0; b < 2; ++b) {
            double cov = 0.0;
            const double ma = column_mean(ds.resp, a), mb = column_mean(ds.resp, b);
            for (std::size_t i = 0; i < ds.n(); ++i)
                cov += (ds.resp(i, a) - ma) * (ds.resp(i, b) - mb);
            cov /= static_cast<double>(ds.n() - 1);
            CHECK(std::fabs(cov - (a == b ? 5.25 : 0.0)) < 0.1);
        }
}

TEST_CASE("conditioning variable has standard-normal scale mean") {
    for (const auto& name : all_scm_names()) {
        auto ds = generate(parse_scm_name(name), 10000, 3);
        const Matrix& g = ds.kind == ScmKind::IV ? ds.cond : ds.cond;
        for (std::size_t d = 0; d < g.cols(); ++d) {
            // LM cond is x = u + e_x (variance 2); IV cond is z (variance 1).
            const double sd = ds.kind == ScmKind::IV ? 1.0 : std::sqrt(2.0);
            CHECK(std::fabs(column_mean(g, d)) < 3.0 * sd / std::sqrt(10000.0));
        }
    }
}

TEST_CASE("instrument actually drives the treatment") {
    for (const auto& name : all_scm_names()) {
        ScmName sn = parse_scm_name(name);
        if (scm_kind(sn) != ScmKind::IV) continue;
        auto ds = generate(sn, 10000, 11);
        for (std::size_t d = 0; d < ds.p(); ++d) {
            double cov = 0.0;
            const double mz = column_mean(ds.cond, d), mx = column_mean(ds.resp, d);
            for (std::size_t i = 0; i < ds.n(); ++i)
                cov += (ds.cond(i, d) - mz) * (ds.resp(i, d) - mx);
            cov /= static_cast<double>(ds.n() - 1);
            const double corr =
                cov / (column_std(ds.cond, d) * column_std(ds.resp, d));
            // IV-quad-1d-strong has the weakest instrument: corr 0.5/sqrt(10.25)
            CHECK(corr > 0.1);
        }
    }
}

TEST_CASE("closed-form effects agree with the MC oracle on every dataset") {
    Rng rng(21);
    for (const auto& name : all_scm_names()) {
        ScmName sn = parse_scm_name(name);
        const std::size_t dim =
            scm_kind(sn) == ScmKind::IV ? generate(sn, 1, 0).p() : generate(sn, 1, 0).q();
        for (int rep = 0; rep < 3; ++rep) {
            std::vector<double> xs(dim);
            for (double& v : xs) v = rng.uniform(-2.0, 2.0);
            const double closed = true_effect(sn, xs);
            const auto mc = true_effect_mc(sn, xs, 1000000, 17 + rep);
            INFO(name);
            CHECK(std::fabs(closed - mc.mean) <= 3.0 * mc.std_error + 1e-9);
        }
    }
}

TEST_CASE("spot values of true_effect") {
    CHECK(true_effect(ScmName::IvLin2dStrong, std::vector<double>{1, 1}) ==
          doctest::Approx(2.0));
    CHECK(true_effect(ScmName::IvQuad2dStrongAdd, std::vector<double>{1, 2}) ==
          doctest::Approx(10.0));
    CHECK(true_effect(ScmName::LmLin1_2d, std::vector<double>{0, 0}) ==
          doctest::Approx(-6.0));
}

TEST_CASE("true_effect rejects wrong dimension") {
    CHECK_THROWS_AS(true_effect(ScmName::IvLin2dStrong, std::vector<double>{1.0}),
                    std::invalid_argument);
}

TEST_CASE("generated data exposes observed variables only") {
    auto ds = generate(ScmName::IvLin2dStrong, 10, 1);
    CHECK(ds.cond.cols() == 2);
    CHECK(ds.resp.cols() == 2);
    CHECK(ds.y.size() == 10);
}

TEST_CASE("csv round-trip") {
    auto ds = generate(ScmName::LmLin1_2d, 50, 9);
    std::stringstream ss;
    write_csv(ds, ss);
    const std::string text = ss.str();
    CHECK(text.substr(0, text.find('\n')) == "x1,x2,m1,m2,y");
    std::stringstream in(text);
    Dataset back = read_csv(in);
    CHECK(back.kind == ScmKind::LM);
    CHECK(back.n() == 50);
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(back.y[i] == doctest::Approx(ds.y[i]).epsilon(1e-15));
        for (std::size_t d = 0; d < 2; ++d) {
            CHECK(back.cond(i, d) == doctest::Approx(ds.cond(i, d)).epsilon(1e-15));
            CHECK(back.resp(i, d) == doctest::Approx(ds.resp(i, d)).epsilon(1e-15));
        }
    }
}

TEST_CASE("naive regression recovers the effect when confounding is absent") {
    // Debug SCM: same shape as IV-lin-2d-strong but with the confounder
    // coefficient removed, so E[Y|X] equals the causal effect x1+x2.
    Rng rng(31);
    const std::size_t n = 4000;
    Dataset ds;
    ds.kind = ScmKind::IV;
    ds.name = "debug-unconfounded";
    ds.cond = Matrix(n, 2);
    ds.resp = Matrix(n, 2);
    ds.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < 2; ++d) {
            ds.cond(i, d) = rng.normal();
            ds.resp(i, d) = 0.5 * ds.cond(i, d) + rng.normal();
        }
        ds.y[i] = ds.resp(i, 0) + ds.resp(i, 1) + 0.1 * rng.normal();
    }
    Matrix grid(3, 2);
    grid(0, 0) = -0.5;
    grid(1, 0) = 0.0;
    grid(2, 0) = 0.5;
    auto curve = naive_regression_curve(ds, grid, MlpConfig{2, {64, 32, 16}, 1},
                                        TrainConfig{200, 512, 0.01, 0}, 2);
    for (std::size_t g = 0; g < 3; ++g)
        CHECK(std::fabs(curve.predictions[g] - grid(g, 0)) < 0.1);
}

TEST_CASE("naive regression is badly biased under strong confounding") {
    auto ds = generate(ScmName::IvLin2dStrong, 4000, 13);
    Matrix grid(1, 2);
    grid(0, 0) = 2.0;
    grid(0, 1) = column_mean(ds.resp, 1);
    auto curve = naive_regression_curve(ds, grid, MlpConfig{2, {64, 32, 16}, 1},
                                        TrainConfig{200, 512, 0.01, 0}, 2);
    const double truth = true_effect(ScmName::IvLin2dStrong, grid.row(0));
    CHECK(std::fabs(curve.predictions[0] - truth) > 0.5);
}

TEST_CASE("naive curve deterministic in seed") {
    auto ds = generate(ScmName::IvQuad1dWeak, 500, 3);
    Matrix grid(2, 1);
    grid(0, 0) = -1.0;
    grid(1, 0) = 1.0;
    MlpConfig mc{1, {16, 8}, 1};
    TrainConfig tc{20, 128, 0.01, 0};
    auto a = naive_regression_curve(ds, grid, mc, tc, 5);
    auto b = naive_regression_curve(ds, grid, mc, tc, 5);
    CHECK(a.predictions == b.predictions);
}
