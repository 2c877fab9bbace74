#include "causalbound/pipeline.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace causalbound;

int cmd_generate(const std::string& name, std::size_t n, std::uint64_t seed,
                 const std::string& out_path) {
    Dataset ds = generate(parse_scm_name(name), n, seed);
    std::ofstream out(out_path);
    if (!out) throw std::invalid_argument("cannot write " + out_path);
    write_csv(ds, out);
    return 0;
}

int cmd_bounds(const RunConfig& config) {
    PipelineResult res = run_bounds(config);
    const std::string dir = config.output_dir.empty() ? "." : config.output_dir;
    emit_csv(res.results, dir + "/bounds.csv");
    emit_summary_json(config, res.curve, dir + "/summary.json");
    if (res.curve.points.size() >= 2) emit_svg_plot(res.curve, dir + "/plot.svg");
    bool any = false;
    for (const auto& r : res.results) any = any || r.converged;
    if (!any) {
        std::cerr << "all optimizations ended infeasible\n";
        return 2;
    }
    for (const auto& r : res.results)
        if (!r.converged)
            std::cerr << "warning: infeasible run excluded (seed " << r.seed
                      << ", x* coordinate " << r.x_star[config.grid.varied_index]
                      << ")\n";
    return 0;
}

int cmd_oracle(const std::string& name, const GridSpec& grid, std::size_t n,
               std::uint64_t seed, std::ostream& out) {
    const ScmName scm = parse_scm_name(name);
    Dataset ds = generate(scm, n, seed);
    const Matrix& treat = ds.treatment();
    if (grid.varied_index >= treat.cols())
        throw std::invalid_argument("grid index out of range");
    std::vector<double> base(treat.cols(), 0.0);
    for (std::size_t i = 0; i < treat.rows(); ++i)
        for (std::size_t c = 0; c < treat.cols(); ++c) base[c] += treat(i, c);
    for (double& v : base) v /= static_cast<double>(treat.rows());
    for (std::size_t c = 0; c < treat.cols(); ++c) out << "x_star_" << c + 1 << ',';
    out << "true_effect\n";
    for (std::size_t g = 0; g < grid.points; ++g) {
        std::vector<double> x = base;
        const double t =
            grid.points == 1 ? 0.5 : static_cast<double>(g) / (grid.points - 1);
        x[grid.varied_index] = grid.low + t * (grid.high - grid.low);
        for (double v : x) out << v << ',';
        out << true_effect(scm, x) << '\n';
    }
    return 0;
}

int cmd_plot(const std::string& summary_path, const std::string& out_path) {
    std::ifstream in(summary_path);
    if (!in) throw std::invalid_argument("cannot read " + summary_path);
    nlohmann::json j = nlohmann::json::parse(in);

    BoundCurve curve;
    curve.varied_index = j["config"]["grid"]["varied_index"].get<std::size_t>();
    curve.epsilon_used = j["epsilon_used"].get<double>();
    curve.truth_known = j["truth_known"].get<bool>();
    curve.valid = j["valid"].get<bool>();
    for (const auto& row : j["grid"]) {
        GridPoint pt;
        pt.x_star = row["x_star"].get<std::vector<double>>();
        if (!row["lower"].is_null()) pt.lower = row["lower"].get<double>();
        if (!row["upper"].is_null()) pt.upper = row["upper"].get<double>();
        if (!row["true_effect"].is_null())
            pt.true_effect = row["true_effect"].get<double>();
        pt.naive = row["naive"].get<double>();
        curve.points.push_back(std::move(pt));
    }
    // Recover the treatment density strip by regenerating the dataset.
    try {
        Dataset ds = generate(parse_scm_name(j["config"]["dataset"].get<std::string>()),
                              j["config"]["n"].get<std::size_t>(),
                              j["config"]["data_seed"].get<std::uint64_t>());
        const Matrix& treat = ds.treatment();
        for (std::size_t i = 0; i < treat.rows(); ++i)
            curve.density_sample.push_back(treat(i, curve.varied_index));
    } catch (const std::exception&) {
        // CSV-backed runs plot without the strip.
    }
    emit_svg_plot(curve, out_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bounds on interventional means under unobserved confounding"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate", "Sample a synthetic dataset to CSV");
    std::string gen_name = "IV-lin-2d-weak", gen_out = "dataset.csv";
    std::size_t gen_n = 10000;
    std::uint64_t gen_seed = 0;
    gen->add_option("--name", gen_name, "Generator name");
    gen->add_option("--n", gen_n, "Sample size");
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--out", gen_out, "Output CSV path");

    auto* bounds = app.add_subcommand("bounds", "Run the full bounding pipeline");
    bounds->set_config("--config", "", "Flat key=value config file");
    RunConfig rc;
    std::string variant = "iv", basis = "polynomial", norm = "sup", flow = "spline";
    bounds->add_option("--dataset", rc.dataset, "Generator name or CSV path");
    bounds->add_flag("--load-csv", rc.load_csv, "Treat --dataset as a CSV path");
    bounds->add_option("--variant", variant, "iv or lm")
        ->check(CLI::IsMember({"iv", "lm"}));
    bounds->add_option("--basis", basis, "polynomial or neural")
        ->check(CLI::IsMember({"polynomial", "neural"}));
    bounds->add_option("--basis-size", rc.basis_size, "Neural basis size K");
    bounds->add_option("--norm", norm, "sup or two")
        ->check(CLI::IsMember({"sup", "two"}));
    bounds->add_option("--epsilon", rc.epsilon,
                       "Constraint slack; <= 0 derives it from the regressor fit");
    bounds->add_option("--support-points", rc.support_points, "Support subsample M");
    bounds->add_option("--n", rc.n, "Sample size when generating");
    bounds->add_option("--b-mc", rc.b_mc, "Monte Carlo draws per objective");
    bounds->add_option("--grid-index", rc.grid.varied_index, "Varied coordinate");
    bounds->add_option("--grid-low", rc.grid.low, "Grid range low end");
    bounds->add_option("--grid-high", rc.grid.high, "Grid range high end");
    bounds->add_option("--grid-points", rc.grid.points, "Grid point count");
    bounds->add_option("--seeds", rc.seeds, "Optimization seeds");
    bounds->add_option("--outer-rounds", rc.auglag.outer_rounds, "Outer rounds");
    bounds->add_option("--inner-steps", rc.auglag.inner_steps, "Adam steps per round");
    bounds->add_option("--learning-rate", rc.auglag.learning_rate, "Adam step size");
    bounds->add_option("--tau-init", rc.auglag.tau_init, "Initial temperature");
    bounds->add_option("--tau-growth", rc.auglag.tau_growth, "Temperature growth");
    bounds->add_option("--tau-max", rc.auglag.tau_max, "Temperature cap");
    bounds->add_option("--flow", flow, "spline or affine")
        ->check(CLI::IsMember({"spline", "affine"}));
    bounds->add_option("--flow-epochs", rc.flow_train.epochs, "Flow training epochs");
    bounds->add_option("--regressor-epochs", rc.regressor_train.epochs,
                       "Moment regressor epochs");
    bounds->add_option("--baseline-epochs", rc.baseline_train.epochs,
                       "Neural basis / naive regression epochs");
    bounds->add_option("--workers", rc.workers, "Worker pool size");
    bounds->add_option("--data-seed", rc.data_seed, "Dataset / setup seed");
    bounds->add_option("--out-dir", rc.output_dir, "Output directory");

    auto* oracle = app.add_subcommand("oracle", "True-effect table for a grid");
    std::string orc_name = "IV-lin-2d-weak", orc_out;
    GridSpec orc_grid;
    std::size_t orc_n = 10000;
    std::uint64_t orc_seed = 0;
    oracle->add_option("--name", orc_name, "Generator name");
    oracle->add_option("--grid-index", orc_grid.varied_index, "Varied coordinate");
    oracle->add_option("--grid-low", orc_grid.low, "Grid range low end");
    oracle->add_option("--grid-high", orc_grid.high, "Grid range high end");
    oracle->add_option("--grid-points", orc_grid.points, "Grid point count");
    oracle->add_option("--n", orc_n, "Sample size for the marginal means");
    oracle->add_option("--seed", orc_seed, "Generator seed");
    oracle->add_option("--out", orc_out, "Output path (default stdout)");

    auto* plot = app.add_subcommand("plot", "Re-render the SVG from a summary JSON");
    std::string plot_summary = "summary.json", plot_out = "plot.svg";
    plot->add_option("--summary", plot_summary, "Summary JSON path");
    plot->add_option("--out", plot_out, "Output SVG path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_generate(gen_name, gen_n, gen_seed, gen_out);
        if (bounds->parsed()) {
            rc.variant = variant == "iv" ? ProgramVariant::IV : ProgramVariant::LM;
            rc.basis = basis == "polynomial" ? BasisKind::Polynomial : BasisKind::Neural;
            rc.norm = norm == "sup" ? NormKind::Sup : NormKind::Two;
            rc.flow = flow == "spline" ? FlowVariant::Spline : FlowVariant::Affine;
            return cmd_bounds(rc);
        }
        if (oracle->parsed()) {
            if (orc_out.empty())
                return cmd_oracle(orc_name, orc_grid, orc_n, orc_seed, std::cout);
            std::ofstream out(orc_out);
            if (!out) throw std::invalid_argument("cannot write " + orc_out);
            return cmd_oracle(orc_name, orc_grid, orc_n, orc_seed, out);
        }
        if (plot->parsed()) return cmd_plot(plot_summary, plot_out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
