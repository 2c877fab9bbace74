#pragma once

#include "causalbound/causalprog.hpp"
#include "causalbound/scmgen.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace causalbound {

// One coordinate of the treatment sweeps a uniform grid; every other
// coordinate sits at its empirical marginal mean.
struct GridSpec {
    std::size_t varied_index = 0;
    double low = -2.0;
    double high = 2.0;
    std::size_t points = 7;
};

struct RunConfig {
    std::string dataset = "IV-lin-2d-weak";  // generator name, or a CSV path
    bool load_csv = false;
    ProgramVariant variant = ProgramVariant::IV;
    BasisKind basis = BasisKind::Polynomial;
    std::size_t basis_size = 8;  // K, neural basis only
    NormKind norm = NormKind::Sup;
    double epsilon = 0.0;  // <= 0: use twice the phi1 holdout RMSE
    std::size_t support_points = 100;
    std::size_t n = 10000;
    std::size_t b_mc = 500;
    GridSpec grid;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    AugLagConfig auglag;  // direction and feasibility_tol are set per run
    FlowVariant flow = FlowVariant::Spline;
    FlowTrainConfig flow_train;
    TrainConfig regressor_train;
    TrainConfig baseline_train;  // neural basis and the naive regression
    std::size_t workers = 4;
    std::uint64_t data_seed = 0;
    std::string output_dir = ".";

    void validate() const;
};

struct BoundResult {
    std::vector<double> x_star;
    BoundDirection direction = BoundDirection::Lower;
    std::uint64_t seed = 0;
    double bound = 0.0;
    bool converged = false;
    double max_violation = 0.0;
    double wall_time_s = 0.0;
};

struct GridPoint {
    std::vector<double> x_star;
    std::optional<double> lower;  // min over converged lower seeds
    std::optional<double> upper;  // max over converged upper seeds
    std::optional<double> true_effect;
    double naive = 0.0;
};

struct BoundCurve {
    std::vector<GridPoint> points;
    std::size_t varied_index = 0;
    bool truth_known = false;
    bool valid = false;  // containment wherever both bounds exist
    double epsilon_used = 0.0;
    std::vector<double> density_sample;  // observed varied treatment coordinate
};

struct PipelineResult {
    BoundCurve curve;
    std::vector<BoundResult> results;
};

// Setup once (data, conditional model, regressors, basis, targets), then one
// solve per (grid point, direction, seed) on a bounded worker pool. Seeds
// that end infeasible are excluded from the min/max aggregation; a grid
// point with no surviving seed in a direction stays empty.
PipelineResult run_bounds(const RunConfig& config);

// One row per result in (grid, direction, seed) order; fixed header.
void emit_csv(const std::vector<BoundResult>& results, std::ostream& out);
void emit_csv(const std::vector<BoundResult>& results, const std::string& path);

// Stable key order; missing values are nulls, never omitted keys.
void emit_summary_json(const RunConfig& config, const BoundCurve& curve,
                       std::ostream& out);
void emit_summary_json(const RunConfig& config, const BoundCurve& curve,
                       const std::string& path);

// Natural interpolating cubic spline; evaluation clamps to linear
// extrapolation outside the knot range. Plot smoothing only.
class CubicSpline {
  public:
    CubicSpline(std::span<const double> x, std::span<const double> y);
    double operator()(double t) const;
    std::size_t knot_count() const { return x_.size(); }

  private:
    std::vector<double> x_, y_, m_;  // knots, values, second derivatives
};

CubicSpline fit_bound_spline(std::span<const double> x, std::span<const double> y);

// Standalone SVG: bound splines, true effect, dashed naive regression, and
// a Gaussian-KDE strip (Silverman bandwidth) of the observed treatments.
void emit_svg_plot(const BoundCurve& curve, std::ostream& out);
void emit_svg_plot(const BoundCurve& curve, const std::string& path);

}  // namespace causalbound
