#include "causalbound/pipeline.hpp"

#include "causalbound/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace causalbound {

namespace {

std::string fmt(double v, const char* spec = "%.10g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

struct Task {
    std::size_t grid_idx = 0;
    BoundDirection direction = BoundDirection::Lower;
    std::uint64_t seed = 0;
};

}  // namespace

void RunConfig::validate() const {
    if (dataset.empty()) throw std::invalid_argument("RunConfig: dataset is required");
    if (grid.points == 0) throw std::invalid_argument("RunConfig: empty grid");
    if (grid.low > grid.high)
        throw std::invalid_argument("RunConfig: grid low must not exceed high");
    if (seeds.empty()) throw std::invalid_argument("RunConfig: seeds must be nonempty");
    if (support_points == 0)
        throw std::invalid_argument("RunConfig: need at least one support point");
    if (n < 10) throw std::invalid_argument("RunConfig: n too small");
    if (b_mc == 0) throw std::invalid_argument("RunConfig: B_mc must be positive");
    if (workers == 0) throw std::invalid_argument("RunConfig: need at least one worker");
    if (basis == BasisKind::Neural && basis_size == 0)
        throw std::invalid_argument("RunConfig: neural basis needs a positive size");
    auglag.validate();
}

PipelineResult run_bounds(const RunConfig& config) {
    config.validate();

    Dataset ds;
    if (config.load_csv) {
        std::ifstream in(config.dataset);
        if (!in) throw std::invalid_argument("cannot read dataset " + config.dataset);
        ds = read_csv(in);
    } else {
        ds = generate(parse_scm_name(config.dataset), config.n, config.data_seed);
    }
    if ((config.variant == ProgramVariant::IV) != (ds.kind == ScmKind::IV))
        throw std::invalid_argument("RunConfig: variant does not match the dataset");

    const Matrix& treat = ds.treatment();
    if (config.grid.varied_index >= treat.cols())
        throw std::invalid_argument("RunConfig: varied grid index out of range");

    // The program itself runs on standardized outcomes. The second-moment
    // constraints couple to the means with lever arm 2|B_1|: perturbing the
    // implied mean by delta moves the implied second moment by 2 B_1 delta.
    // On the raw scale B_1 grows with the outcome scale and that coupling
    // crushes the usable slack; with unit-variance outcomes both moment
    // levels live on comparable scales. Bounds map back through the same
    // affine transform, which preserves order.
    double y_mean = 0.0, y_sd = 0.0;
    for (double v : ds.y) y_mean += v;
    y_mean /= static_cast<double>(ds.n());
    for (double v : ds.y) y_sd += (v - y_mean) * (v - y_mean);
    y_sd = std::sqrt(y_sd / static_cast<double>(ds.n()));
    if (!(y_sd > 0.0)) throw std::invalid_argument("RunConfig: outcome is constant");
    Dataset sds = ds;
    for (double& v : sds.y) v = (v - y_mean) / y_sd;

    // Setup phase, shared by every grid point.
    ResponseBasis basis = [&] {
        if (config.basis == BasisKind::Polynomial)
            return ResponseBasis::polynomial(ds.p());
        Matrix y(sds.n(), 1);
        for (std::size_t i = 0; i < sds.n(); ++i) y(i, 0) = sds.y[i];
        return ResponseBasis::neural(sds.resp, y, config.basis_size,
                                     config.baseline_train,
                                     derive_seed(config.data_seed, 301));
    }();
    auto h = ConditionalInvertibleModel::fit(config.flow, sds.cond, sds.resp,
                                             config.flow_train,
                                             derive_seed(config.data_seed, 302));
    auto regressors = fit_moment_regressors(sds, config.regressor_train,
                                            derive_seed(config.data_seed, 303));
    // config.epsilon is in raw outcome units; the program works in
    // standardized units throughout.
    const double eps = config.epsilon > 0.0 ? config.epsilon / y_sd
                                            : regressors.suggested_epsilon();
    auto targets = build_targets(sds, h, regressors, basis, config.support_points,
                                 derive_seed(config.data_seed, 304));
    const std::vector<double> theta0 = config.basis == BasisKind::Polynomial
                                           ? initial_theta(basis, sds)
                                           : basis.initial_theta();

    // Grid: varied coordinate on a uniform range, the rest at column means.
    std::vector<double> base(treat.cols(), 0.0);
    for (std::size_t i = 0; i < treat.rows(); ++i)
        for (std::size_t c = 0; c < treat.cols(); ++c) base[c] += treat(i, c);
    for (double& v : base) v /= static_cast<double>(treat.rows());

    std::vector<std::vector<double>> grid(config.grid.points, base);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double t = grid.size() == 1
                             ? 0.5
                             : static_cast<double>(g) / (grid.size() - 1);
        grid[g][config.grid.varied_index] =
            config.grid.low + t * (config.grid.high - config.grid.low);
    }

    std::vector<Task> tasks;
    for (std::size_t g = 0; g < grid.size(); ++g)
        for (BoundDirection dir : {BoundDirection::Lower, BoundDirection::Upper})
            for (std::uint64_t s : config.seeds) tasks.push_back({g, dir, s});

    const bool lm = config.variant == ProgramVariant::LM;
    std::vector<BoundResult> results(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const Task& task = tasks[i];
            BoundResult& r = results[i];
            r.x_star = grid[task.grid_idx];
            r.direction = task.direction;
            r.seed = task.seed;
            const auto t0 = std::chrono::steady_clock::now();
            const std::uint64_t tseed = derive_seed(
                task.seed, 7000 + task.grid_idx * 2 +
                               (task.direction == BoundDirection::Upper ? 1 : 0));
            try {
                EtaModel eta(
                    EtaModelConfig{lm ? ds.q() + ds.p() : ds.p(), basis.size(), 1e-4},
                    theta0, derive_seed(tseed, 1));
                pretrain_eta(eta, targets, 3000, 0.01);
                CausalProgramConfig pc;
                pc.variant = config.variant;
                pc.norm = config.norm;
                pc.epsilon = eps;
                pc.b_mc = config.b_mc;
                pc.x_star = r.x_star;
                CausalProgram prog(pc, &basis, &targets, std::move(eta),
                                   lm ? &h : nullptr, lm ? &sds : nullptr);
                AugLagConfig ac = config.auglag;
                ac.direction = task.direction;
                ac.feasibility_tol = 1e-2 * eps;
                const auto res = solve(prog, ac, derive_seed(tseed, 2));
                r.bound = y_mean + y_sd * res.bound;
                r.max_violation = res.max_violation * y_sd;  // raw outcome units
                r.converged = res.feasible && !res.aborted;
            } catch (const std::exception&) {
                r.converged = false;
                r.bound = std::numeric_limits<double>::quiet_NaN();
            }
            r.wall_time_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                    .count();
        }
    };
    std::vector<std::thread> pool;
    const std::size_t nthreads = std::min(config.workers, tasks.size());
    for (std::size_t t = 0; t + 1 < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    PipelineResult out;
    out.results = std::move(results);

    BoundCurve& curve = out.curve;
    curve.varied_index = config.grid.varied_index;
    curve.epsilon_used = eps * y_sd;  // report in raw outcome units
    curve.points.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) curve.points[g].x_star = grid[g];
    for (const BoundResult& r : out.results) {
        if (!r.converged) continue;
        std::size_t g = 0;
        while (curve.points[g].x_star != r.x_star) ++g;
        if (r.direction == BoundDirection::Lower) {
            auto& lo = curve.points[g].lower;
            lo = lo ? std::min(*lo, r.bound) : r.bound;
        } else {
            auto& hi = curve.points[g].upper;
            hi = hi ? std::max(*hi, r.bound) : r.bound;
        }
    }

    try {
        const ScmName name = parse_scm_name(ds.name);
        curve.truth_known = true;
        for (auto& pt : curve.points) pt.true_effect = true_effect(name, pt.x_star);
    } catch (const std::exception&) {
        curve.truth_known = false;
    }

    Matrix x_grid(grid.size(), treat.cols());
    for (std::size_t g = 0; g < grid.size(); ++g)
        for (std::size_t c = 0; c < treat.cols(); ++c) x_grid(g, c) = grid[g][c];
    auto naive = naive_regression_curve(ds, x_grid,
                                        MlpConfig{treat.cols(), {64, 32, 16}, 1},
                                        config.baseline_train,
                                        derive_seed(config.data_seed, 305));
    for (std::size_t g = 0; g < grid.size(); ++g)
        curve.points[g].naive = naive.predictions[g];

    curve.density_sample.resize(treat.rows());
    for (std::size_t i = 0; i < treat.rows(); ++i)
        curve.density_sample[i] = treat(i, config.grid.varied_index);

    curve.valid = curve.truth_known;
    bool any_pair = false;
    for (const auto& pt : curve.points) {
        if (!pt.lower || !pt.upper || !pt.true_effect) continue;
        any_pair = true;
        if (*pt.true_effect < *pt.lower || *pt.true_effect > *pt.upper)
            curve.valid = false;
    }
    if (!any_pair) curve.valid = false;
    return out;
}

void emit_csv(const std::vector<BoundResult>& results, std::ostream& out) {
    if (results.empty()) throw std::invalid_argument("emit_csv: no results");
    const std::size_t p = results.front().x_star.size();
    for (std::size_t c = 0; c < p; ++c) out << "x_star_" << c + 1 << ',';
    out << "direction,seed,bound,converged,max_violation,wall_time_s\n";
    for (const BoundResult& r : results) {
        for (double v : r.x_star) out << fmt(v) << ',';
        out << (r.direction == BoundDirection::Lower ? "lower" : "upper") << ','
            << r.seed << ',' << fmt(r.bound) << ','
            << (r.converged ? "true" : "false") << ',' << fmt(r.max_violation) << ','
            << fmt(r.wall_time_s, "%.3f") << '\n';
    }
}

void emit_csv(const std::vector<BoundResult>& results, const std::string& path) {
    auto out = open_out(path);
    emit_csv(results, out);
}

void emit_summary_json(const RunConfig& config, const BoundCurve& curve,
                       std::ostream& out) {
    nlohmann::ordered_json j;
    j["config"] = {
        {"dataset", config.dataset},
        {"variant", config.variant == ProgramVariant::IV ? "iv" : "lm"},
        {"basis", config.basis == BasisKind::Polynomial ? "polynomial" : "neural"},
        {"basis_size", config.basis_size},
        {"norm", config.norm == NormKind::Sup ? "sup" : "two"},
        {"epsilon", config.epsilon},
        {"support_points", config.support_points},
        {"n", config.n},
        {"b_mc", config.b_mc},
        {"grid",
         {{"varied_index", config.grid.varied_index},
          {"low", config.grid.low},
          {"high", config.grid.high},
          {"points", config.grid.points}}},
        {"seeds", config.seeds},
        {"data_seed", config.data_seed},
    };
    j["epsilon_used"] = curve.epsilon_used;
    j["truth_known"] = curve.truth_known;
    j["valid"] = curve.valid;
    j["grid"] = nlohmann::ordered_json::array();
    for (const GridPoint& pt : curve.points) {
        nlohmann::ordered_json row;
        row["x_star"] = pt.x_star;
        row["lower"] = pt.lower ? nlohmann::ordered_json(*pt.lower) : nullptr;
        row["upper"] = pt.upper ? nlohmann::ordered_json(*pt.upper) : nullptr;
        row["true_effect"] =
            pt.true_effect ? nlohmann::ordered_json(*pt.true_effect) : nullptr;
        row["naive"] = pt.naive;
        j["grid"].push_back(std::move(row));
    }
    out << j.dump(2) << '\n';
}

void emit_summary_json(const RunConfig& config, const BoundCurve& curve,
                       const std::string& path) {
    auto out = open_out(path);
    emit_summary_json(config, curve, out);
}

CubicSpline::CubicSpline(std::span<const double> x, std::span<const double> y)
    : x_(x.begin(), x.end()), y_(y.begin(), y.end()), m_(x.size(), 0.0) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n)
        throw std::invalid_argument("CubicSpline: need >= 2 matching knots");
    for (std::size_t i = 1; i < n; ++i)
        if (x_[i] <= x_[i - 1])
            throw std::invalid_argument("CubicSpline: knots must be increasing");
    if (n == 2) return;  // natural conditions make the segment linear

    // Tridiagonal system for interior second derivatives (natural ends).
    std::vector<double> diag(n, 2.0), rhs(n, 0.0), sub(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double hl = x_[i] - x_[i - 1];
        const double hr = x_[i + 1] - x_[i];
        sub[i] = hl / (hl + hr);
        rhs[i] = 6.0 *
                 ((y_[i + 1] - y_[i]) / hr - (y_[i] - y_[i - 1]) / hl) / (hl + hr);
    }
    for (std::size_t i = 2; i + 1 < n; ++i) {
        const double w = sub[i] / diag[i - 1];
        diag[i] -= w * (1.0 - sub[i - 1]);
        rhs[i] -= w * rhs[i - 1];
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
        m_[i] = (rhs[i] - (1.0 - sub[i]) * m_[i + 1]) / diag[i];
        if (i == 1) break;
    }
}

double CubicSpline::operator()(double t) const {
    const std::size_t n = x_.size();
    if (t <= x_.front()) {
        const double h = x_[1] - x_[0];
        const double slope = (y_[1] - y_[0]) / h - h / 6.0 * (2.0 * m_[0] + m_[1]);
        return y_.front() + slope * (t - x_.front());
    }
    if (t >= x_.back()) {
        const std::size_t s = n - 2;
        const double h = x_[s + 1] - x_[s];
        const double slope =
            (y_[s + 1] - y_[s]) / h + h / 6.0 * (m_[s] + 2.0 * m_[s + 1]);
        return y_.back() + slope * (t - x_.back());
    }
    std::size_t s = 0;
    while (s + 2 < n && x_[s + 1] < t) ++s;
    const double h = x_[s + 1] - x_[s];
    const double a = (x_[s + 1] - t) / h;
    const double b = (t - x_[s]) / h;
    return a * y_[s] + b * y_[s + 1] +
           ((a * a * a - a) * m_[s] + (b * b * b - b) * m_[s + 1]) * h * h / 6.0;
}

CubicSpline fit_bound_spline(std::span<const double> x, std::span<const double> y) {
    return CubicSpline(x, y);
}

namespace {

constexpr double kW = 720.0, kH = 500.0;
constexpr double kLeft = 60.0, kRight = 700.0, kTop = 20.0, kBottom = 370.0;
constexpr double kStripTop = 395.0, kStripBottom = 455.0;

std::string path_of(const std::vector<std::pair<double, double>>& pts) {
    std::string d;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        d += i == 0 ? "M" : " L";
        d += fmt(pts[i].first, "%.2f");
        d += ',';
        d += fmt(pts[i].second, "%.2f");
    }
    return d;
}

}  // namespace

void emit_svg_plot(const BoundCurve& curve, std::ostream& out) {
    if (curve.points.size() < 2)
        throw std::invalid_argument("emit_svg_plot: need >= 2 grid points");
    const std::size_t vi = curve.varied_index;

    std::vector<double> gx;
    for (const auto& pt : curve.points) gx.push_back(pt.x_star[vi]);
    double xmin = *std::min_element(gx.begin(), gx.end());
    double xmax = *std::max_element(gx.begin(), gx.end());
    double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
    auto absorb = [&](double v) {
        ymin = std::min(ymin, v);
        ymax = std::max(ymax, v);
    };
    for (const auto& pt : curve.points) {
        if (pt.lower) absorb(*pt.lower);
        if (pt.upper) absorb(*pt.upper);
        if (pt.true_effect) absorb(*pt.true_effect);
        absorb(pt.naive);
    }
    if (!std::isfinite(ymin)) {
        ymin = 0.0;
        ymax = 1.0;
    }
    const double xpad = 0.05 * std::max(xmax - xmin, 1e-9);
    const double ypad = 0.05 * std::max(ymax - ymin, 1e-9);
    xmin -= xpad;
    xmax += xpad;
    ymin -= ypad;
    ymax += ypad;

    auto sx = [&](double v) {
        return kLeft + (v - xmin) / (xmax - xmin) * (kRight - kLeft);
    };
    auto sy = [&](double v) {
        return kBottom - (v - ymin) / (ymax - ymin) * (kBottom - kTop);
    };

    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
        << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << kW << "\" height=\"" << kH
        << "\" fill=\"white\"/>\n"
        << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\""
        << kRight - kLeft << "\" height=\"" << kBottom - kTop
        << "\" fill=\"none\" stroke=\"black\"/>\n";

    auto draw_spline = [&](bool lower, const char* color) {
        std::vector<double> kx, ky;
        for (const auto& pt : curve.points) {
            const auto& v = lower ? pt.lower : pt.upper;
            if (v) {
                kx.push_back(pt.x_star[vi]);
                ky.push_back(*v);
            }
        }
        if (kx.size() < 2) return;
        CubicSpline sp(kx, ky);
        std::vector<std::pair<double, double>> pts;
        for (int i = 0; i <= 120; ++i) {
            const double t = kx.front() + (kx.back() - kx.front()) * i / 120.0;
            pts.emplace_back(sx(t), sy(sp(t)));
        }
        out << "<path d=\"" << path_of(pts) << "\" fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
    };
    draw_spline(true, "#1f77b4");
    draw_spline(false, "#1f77b4");

    if (curve.truth_known) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& pt : curve.points)
            if (pt.true_effect) pts.emplace_back(sx(pt.x_star[vi]), sy(*pt.true_effect));
        out << "<path d=\"" << path_of(pts)
            << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
    }

    std::vector<std::pair<double, double>> naive_pts;
    for (const auto& pt : curve.points)
        naive_pts.emplace_back(sx(pt.x_star[vi]), sy(pt.naive));
    out << "<path d=\"" << path_of(naive_pts)
        << "\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" "
           "stroke-dasharray=\"6,4\"/>\n";

    // Gaussian KDE strip of the observed varied treatment coordinate.
    if (curve.density_sample.size() >= 2) {
        const auto& s = curve.density_sample;
        const double nd = static_cast<double>(s.size());
        double mean = 0.0;
        for (double v : s) mean += v;
        mean /= nd;
        double var = 0.0;
        for (double v : s) var += (v - mean) * (v - mean);
        var /= nd;
        std::vector<double> sorted(s);
        std::sort(sorted.begin(), sorted.end());
        const double iqr = sorted[static_cast<std::size_t>(0.75 * (nd - 1))] -
                           sorted[static_cast<std::size_t>(0.25 * (nd - 1))];
        double bw = 0.9 * std::min(std::sqrt(var), iqr / 1.34) * std::pow(nd, -0.2);
        if (!(bw > 0.0)) bw = 1e-3;
        std::vector<double> dens(121, 0.0);
        double peak = 0.0;
        for (int i = 0; i <= 120; ++i) {
            const double t = xmin + (xmax - xmin) * i / 120.0;
            double d = 0.0;
            for (double v : s) {
                const double u = (t - v) / bw;
                d += std::exp(-0.5 * u * u);
            }
            dens[i] = d;
            peak = std::max(peak, d);
        }
        std::vector<std::pair<double, double>> pts;
        pts.emplace_back(sx(xmin), kStripBottom);
        for (int i = 0; i <= 120; ++i) {
            const double t = xmin + (xmax - xmin) * i / 120.0;
            const double frac = peak > 0.0 ? dens[i] / peak : 0.0;
            pts.emplace_back(sx(t),
                             kStripBottom - frac * (kStripBottom - kStripTop));
        }
        pts.emplace_back(sx(xmax), kStripBottom);
        out << "<path d=\"" << path_of(pts)
            << " Z\" fill=\"#bbbbbb\" stroke=\"none\"/>\n";
    }

    out << "<text x=\"" << kLeft << "\" y=\"" << kH - 30
        << "\" font-size=\"12\">x = " << fmt(xmin + xpad, "%.3g") << " .. "
        << fmt(xmax - xpad, "%.3g") << ", y = " << fmt(ymin + ypad, "%.3g")
        << " .. " << fmt(ymax - ypad, "%.3g")
        << " (blue: bounds, black: true, red dashed: naive)</text>\n"
        << "</svg>\n";
}

void emit_svg_plot(const BoundCurve& curve, const std::string& path) {
    auto out = open_out(path);
    emit_svg_plot(curve, out);
}

}  // namespace causalbound
