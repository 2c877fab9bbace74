#include "causalbound/pipeline.hpp"

#include "doctest.h"
#include "json.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

using namespace causalbound;

namespace {

// Small end-to-end budget: every knob shrunk so the full pipeline runs in
// seconds while still exercising the real setup and solve paths.
RunConfig fast_config() {
    RunConfig rc;
    rc.dataset = "IV-lin-1d-weak-add";
    rc.n = 400;
    rc.support_points = 20;
    rc.seeds = {0};
    rc.grid = GridSpec{0, -1.0, 1.0, 3};
    rc.epsilon = 5.0;
    rc.b_mc = 100;
    rc.flow = FlowVariant::Affine;
    rc.flow_train.epochs = 20;
    rc.regressor_train.epochs = 30;
    rc.baseline_train.epochs = 30;
    rc.auglag.outer_rounds = 25;
    rc.auglag.inner_steps = 10;
    rc.workers = 2;
    return rc;
}

BoundCurve make_curve() {
    BoundCurve curve;
    curve.varied_index = 0;
    curve.truth_known = true;
    curve.valid = true;
    curve.epsilon_used = 1.5;
    for (double x : {-1.0, 0.0, 1.0}) {
        GridPoint pt;
        pt.x_star = {x};
        pt.lower = x - 1.0;
        pt.upper = x + 1.0;
        pt.true_effect = x;
        pt.naive = x + 0.25;
        curve.points.push_back(pt);
    }
    curve.density_sample = {-1.2, -0.4, 0.0, 0.3, 0.9, 1.1};
    return curve;
}

}  // namespace

TEST_CASE("run config validation") {
    RunConfig rc = fast_config();
    CHECK_NOTHROW(rc.validate());
    rc.seeds.clear();
    CHECK_THROWS_AS(rc.validate(), std::invalid_argument);
    rc = fast_config();
    rc.grid.low = 2.0;
    rc.grid.high = -2.0;
    CHECK_THROWS_AS(rc.validate(), std::invalid_argument);
    rc = fast_config();
    rc.dataset.clear();
    CHECK_THROWS_AS(rc.validate(), std::invalid_argument);
    rc = fast_config();
    rc.variant = ProgramVariant::LM;  // IV dataset under an LM program
    CHECK_THROWS_AS(run_bounds(rc), std::invalid_argument);
}

TEST_CASE("pipeline produces one result per grid point, direction, and seed") {
    RunConfig rc = fast_config();
    rc.seeds = {0, 1};
    PipelineResult res = run_bounds(rc);

    CHECK(res.results.size() == 3 * 2 * 2);
    CHECK(res.curve.points.size() == 3);
    CHECK(res.curve.truth_known);
    CHECK(res.curve.epsilon_used == doctest::Approx(5.0));
    CHECK(res.curve.density_sample.size() == 400);

    // The grid sweeps the varied coordinate uniformly.
    CHECK(res.curve.points[0].x_star[0] == doctest::Approx(-1.0));
    CHECK(res.curve.points[1].x_star[0] == doctest::Approx(0.0));
    CHECK(res.curve.points[2].x_star[0] == doctest::Approx(1.0));

    // Aggregation: a converged seed's bound never lies outside the
    // aggregated interval, and every converged bound is finite.
    for (const BoundResult& r : res.results) {
        if (!r.converged) continue;
        CHECK(std::isfinite(r.bound));
        std::size_t g = 0;
        while (res.curve.points[g].x_star != r.x_star) ++g;
        if (r.direction == BoundDirection::Lower) {
            REQUIRE(res.curve.points[g].lower.has_value());
            CHECK(*res.curve.points[g].lower <= r.bound + 1e-12);
        } else {
            REQUIRE(res.curve.points[g].upper.has_value());
            CHECK(*res.curve.points[g].upper >= r.bound - 1e-12);
        }
    }
}

TEST_CASE("csv output has a fixed header and one row per result") {
    std::vector<BoundResult> results;
    BoundResult r;
    r.x_star = {0.5, -1.0};
    r.direction = BoundDirection::Upper;
    r.seed = 3;
    r.bound = 1.25;
    r.converged = true;
    r.max_violation = 0.01;
    r.wall_time_s = 2.5;
    results.push_back(r);
    r.direction = BoundDirection::Lower;
    r.converged = false;
    results.push_back(r);

    std::ostringstream out;
    emit_csv(results, out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line ==
          "x_star_1,x_star_2,direction,seed,bound,converged,max_violation,wall_time_s");
    std::getline(in, line);
    CHECK(line == "0.5,-1,upper,3,1.25,true,0.01,2.500");
    std::getline(in, line);
    CHECK(line == "0.5,-1,lower,3,1.25,false,0.01,2.500");
    CHECK(!std::getline(in, line));

    CHECK_THROWS_AS(emit_csv({}, out), std::invalid_argument);
}

TEST_CASE("summary json uses stable keys and nulls for missing values") {
    RunConfig rc = fast_config();
    BoundCurve curve = make_curve();
    curve.points[1].lower.reset();
    curve.points[1].true_effect.reset();

    std::ostringstream out;
    emit_summary_json(rc, curve, out);
    auto j = nlohmann::json::parse(out.str());

    CHECK(j["config"]["dataset"] == "IV-lin-1d-weak-add");
    CHECK(j["config"]["basis"] == "polynomial");
    CHECK(j["config"]["norm"] == "sup");
    CHECK(j["config"]["grid"]["points"] == 3);
    CHECK(j["epsilon_used"] == doctest::Approx(1.5));
    CHECK(j["truth_known"] == true);
    CHECK(j["valid"] == true);
    REQUIRE(j["grid"].size() == 3);
    CHECK(j["grid"][0]["lower"] == doctest::Approx(-2.0));
    CHECK(j["grid"][1]["lower"].is_null());
    CHECK(j["grid"][1]["true_effect"].is_null());
    CHECK(j["grid"][1]["upper"] == doctest::Approx(1.0));
    CHECK(j["grid"][2]["naive"] == doctest::Approx(1.25));

    // Key order is stable, so identical inputs give identical bytes.
    std::ostringstream again;
    emit_summary_json(rc, curve, again);
    CHECK(out.str() == again.str());
}

TEST_CASE("cubic spline interpolates knots and is linear with two of them") {
    const std::vector<double> x2 = {0.0, 2.0};
    const std::vector<double> y2 = {1.0, 5.0};
    CubicSpline line(x2, y2);
    CHECK(line(0.0) == doctest::Approx(1.0));
    CHECK(line(2.0) == doctest::Approx(5.0));
    CHECK(line(1.0) == doctest::Approx(3.0));

    const std::vector<double> x = {-2.0, -1.0, 0.5, 1.0, 3.0};
    const std::vector<double> y = {4.0, -1.0, 0.5, 2.0, -3.0};
    CubicSpline s(x, y);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(s(x[i]) == doctest::Approx(y[i]).epsilon(1e-10));

    CHECK_THROWS_AS(CubicSpline(std::vector<double>{1.0}, std::vector<double>{1.0}),
                    std::invalid_argument);
}

TEST_CASE("cubic spline tracks a smooth function between knots") {
    std::vector<double> x, y;
    for (int i = 0; i < 20; ++i) {
        const double t = -2.0 + 4.0 * i / 19.0;
        x.push_back(t);
        y.push_back(t * t * t);
    }
    CubicSpline s(x, y);
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        const double mid = 0.5 * (x[i] + x[i + 1]);
        CHECK(std::fabs(s(mid) - mid * mid * mid) < 0.05);
    }
}

TEST_CASE("cubic spline extrapolates linearly outside the knots") {
    const std::vector<double> x = {0.0, 1.0, 2.0, 3.0};
    const std::vector<double> y = {0.0, 1.0, 8.0, 27.0};
    CubicSpline s(x, y);
    const double right = s(4.0) - s(3.0);
    CHECK(s(5.0) - s(4.0) == doctest::Approx(right).epsilon(1e-10));
    const double left = s(-1.0) - s(-2.0);
    CHECK(s(0.0) - s(-1.0) == doctest::Approx(left).epsilon(1e-10));
}

TEST_CASE("svg plot is well formed and deterministic") {
    BoundCurve curve = make_curve();
    std::ostringstream a, b;
    emit_svg_plot(curve, a);
    emit_svg_plot(curve, b);
    const std::string svg = a.str();
    CHECK(svg == b.str());
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("<path") != std::string::npos);

    // Missing bounds at a point drop it from the spline without breaking.
    curve.points[1].lower.reset();
    std::ostringstream c;
    CHECK_NOTHROW(emit_svg_plot(curve, c));
}

TEST_CASE("pipeline is deterministic end to end") {
    RunConfig rc = fast_config();
    PipelineResult r1 = run_bounds(rc);
    PipelineResult r2 = run_bounds(rc);

    std::ostringstream j1, j2;
    emit_summary_json(rc, r1.curve, j1);
    emit_summary_json(rc, r2.curve, j2);
    CHECK(j1.str() == j2.str());

    // CSV rows match except for the wall-clock column.
    REQUIRE(r1.results.size() == r2.results.size());
    for (std::size_t i = 0; i < r1.results.size(); ++i) {
        r1.results[i].wall_time_s = 0.0;
        r2.results[i].wall_time_s = 0.0;
    }
    std::ostringstream c1, c2;
    emit_csv(r1.results, c1);
    emit_csv(r2.results, c2);
    CHECK(c1.str() == c2.str());
}
