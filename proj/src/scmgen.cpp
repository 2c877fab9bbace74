#include "causalbound/scmgen.hpp"

#include "causalbound/rng.hpp"

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace causalbound {

namespace {

struct ScmSpec {
    std::string canonical;
    ScmKind kind;
    std::size_t p;  // resp dim (x for IV, m for LM)
    std::size_t q;  // cond dim (z for IV, x for LM)
};

const std::map<ScmName, ScmSpec>& specs() {
    static const std::map<ScmName, ScmSpec> table = {
        {ScmName::IvLin1dWeakAdd, {"IV-lin-1d-weak-add", ScmKind::IV, 1, 1}},
        {ScmName::IvQuad1dStrong, {"IV-quad-1d-strong", ScmKind::IV, 1, 1}},
        {ScmName::IvQuad1dWeak, {"IV-quad-1d-weak", ScmKind::IV, 1, 1}},
        {ScmName::IvLin2dStrong, {"IV-lin-2d-strong", ScmKind::IV, 2, 2}},
        {ScmName::IvLin2dWeak, {"IV-lin-2d-weak", ScmKind::IV, 2, 2}},
        {ScmName::IvQuad2dStrongAdd, {"IV-quad-2d-strong-add", ScmKind::IV, 2, 2}},
        {ScmName::IvQuad2dWeak, {"IV-quad-2d-weak", ScmKind::IV, 2, 2}},
        {ScmName::IvQuad3dWeak, {"IV-quad-3d-weak", ScmKind::IV, 3, 3}},
        {ScmName::LmLin1_2d, {"LM-lin1-2d", ScmKind::LM, 2, 2}},
        {ScmName::LmLin2_2d, {"LM-lin2-2d", ScmKind::LM, 2, 2}},
    };
    return table;
}

double sum2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

// f_x for the IV settings: x = a*z + b*c + e_x, componentwise.
struct IvCoef {
    double a, b;
};

IvCoef iv_x_coef(ScmName name) {
    switch (name) {
        case ScmName::IvLin1dWeakAdd: return {3.0, 0.5};
        case ScmName::IvQuad1dStrong: return {0.5, 3.0};
        case ScmName::IvQuad1dWeak: return {3.0, 0.5};
        case ScmName::IvLin2dStrong: return {0.5, 2.0};
        case ScmName::IvLin2dWeak: return {2.0, 1.0};
        case ScmName::IvQuad2dStrongAdd: return {1.0, 2.0};
        case ScmName::IvQuad2dWeak: return {2.0, 1.0};
        case ScmName::IvQuad3dWeak: return {2.0, 1.0};
        default: throw std::logic_error("iv_x_coef: not an IV dataset");
    }
}

double iv_outcome(ScmName name, std::span<const double> x, std::span<const double> c,
                  double e_y) {
    const double cs = sum2(c);
    switch (name) {
        case ScmName::IvLin1dWeakAdd: return x[0] - 6.0 * c[0] + e_y;
        case ScmName::IvQuad1dStrong:
        case ScmName::IvQuad1dWeak: return 0.3 * x[0] * x[0] - 1.5 * x[0] * c[0] + e_y;
        case ScmName::IvLin2dStrong:
            return x[0] + x[1] - 3.0 * (x[0] + x[1]) * cs + e_y;
        case ScmName::IvLin2dWeak: return 5.0 * x[0] + 6.0 * x[1] - x[0] * cs + e_y;
        case ScmName::IvQuad2dStrongAdd:
            return 2.0 * x[0] * x[0] + 2.0 * x[1] * x[1] - cs + e_y;
        case ScmName::IvQuad2dWeak:
            return 5.0 * x[0] * x[0] + 6.0 * x[1] * x[1] - (x[0] + x[1]) * cs + e_y;
        case ScmName::IvQuad3dWeak:
            return 2.0 * x[0] * x[0] + 2.0 * x[1] * x[1] + 2.0 * x[2] -
                   0.3 * (x[1] + x[2]) * cs + e_y;
        default: throw std::logic_error("iv_outcome: not an IV dataset");
    }
}

// f_m for the LM settings: m = a*x + b*c - e_m, componentwise.
IvCoef lm_m_coef(ScmName name) {
    switch (name) {
        case ScmName::LmLin1_2d: return {1.0, 3.0};
        case ScmName::LmLin2_2d: return {3.0, 1.0};
        default: throw std::logic_error("lm_m_coef: not an LM dataset");
    }
}

double lm_outcome(ScmName name, std::span<const double> m, std::span<const double> c,
                  std::span<const double> u, double e_y) {
    const double ms = m[0] + m[1];
    const double conf = sum2(c) + sum2(u);
    switch (name) {
        case ScmName::LmLin1_2d: return 2.0 * m[0] + m[1] - ms * conf + e_y;
        case ScmName::LmLin2_2d: return 2.0 * m[0] + m[1] - 0.3 * ms * conf + e_y;
        default: throw std::logic_error("lm_outcome: not an LM dataset");
    }
}

}  // namespace

ScmName parse_scm_name(const std::string& name) {
    for (const auto& [key, spec] : specs())
        if (spec.canonical == name) return key;
    if (name == "LM-lin-2d-strong") return ScmName::LmLin1_2d;
    if (name == "LM-lin-2d-weak") return ScmName::LmLin2_2d;
    std::string valid;
    for (const auto& [key, spec] : specs()) valid += " " + spec.canonical;
    throw std::invalid_argument("unknown dataset '" + name + "'; valid names:" + valid +
                                " LM-lin-2d-strong LM-lin-2d-weak");
}

std::string scm_name_string(ScmName name) { return specs().at(name).canonical; }
ScmKind scm_kind(ScmName name) { return specs().at(name).kind; }

std::vector<std::string> all_scm_names() {
    std::vector<std::string> out;
    for (const auto& [key, spec] : specs()) out.push_back(spec.canonical);
    return out;
}

Dataset generate(ScmName name, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("generate: n must be >= 1");
    const ScmSpec& spec = specs().at(name);
    Dataset ds;
    ds.kind = spec.kind;
    ds.name = spec.canonical;
    ds.seed = seed;
    ds.cond = Matrix(n, spec.q);
    ds.resp = Matrix(n, spec.p);
    ds.y.resize(n);

    Rng rng(seed);
    if (spec.kind == ScmKind::IV) {
        const IvCoef coef = iv_x_coef(name);
        std::vector<double> c(spec.p), z(spec.q), x(spec.p);
        for (std::size_t i = 0; i < n; ++i) {
            for (double& v : c) v = rng.normal();
            for (double& v : z) v = rng.normal();
            for (std::size_t d = 0; d < spec.p; ++d)
                x[d] = coef.a * z[d] + coef.b * c[d] + rng.normal();
            const double e_y = rng.normal();
            for (std::size_t d = 0; d < spec.q; ++d) ds.cond(i, d) = z[d];
            for (std::size_t d = 0; d < spec.p; ++d) ds.resp(i, d) = x[d];
            ds.y[i] = iv_outcome(name, x, c, e_y);
        }
    } else {
        const IvCoef coef = lm_m_coef(name);
        std::vector<double> c(spec.p), u(spec.q), x(spec.q), m(spec.p);
        for (std::size_t i = 0; i < n; ++i) {
            for (double& v : c) v = rng.normal();
            for (double& v : u) v = rng.normal();
            for (std::size_t d = 0; d < spec.q; ++d) x[d] = u[d] + rng.normal();
            for (std::size_t d = 0; d < spec.p; ++d)
                m[d] = coef.a * x[d] + coef.b * c[d] - rng.normal();
            const double e_y = rng.normal();
            for (std::size_t d = 0; d < spec.q; ++d) ds.cond(i, d) = x[d];
            for (std::size_t d = 0; d < spec.p; ++d) ds.resp(i, d) = m[d];
            ds.y[i] = lm_outcome(name, m, c, u, e_y);
        }
    }
    return ds;
}

double true_effect(ScmName name, std::span<const double> x_star) {
    const ScmSpec& spec = specs().at(name);
    const std::size_t want = spec.kind == ScmKind::IV ? spec.p : spec.q;
    if (x_star.size() != want)
        throw std::invalid_argument("true_effect: x_star has dim " +
                                    std::to_string(x_star.size()) + ", expected " +
                                    std::to_string(want));
    // Under do(X=x*), all confounder cross terms are zero-mean Gaussians.
    switch (name) {
        case ScmName::IvLin1dWeakAdd: return x_star[0];
        case ScmName::IvQuad1dStrong:
        case ScmName::IvQuad1dWeak: return 0.3 * x_star[0] * x_star[0];
        case ScmName::IvLin2dStrong: return x_star[0] + x_star[1];
        case ScmName::IvLin2dWeak: return 5.0 * x_star[0] + 6.0 * x_star[1];
        case ScmName::IvQuad2dStrongAdd:
            return 2.0 * x_star[0] * x_star[0] + 2.0 * x_star[1] * x_star[1];
        case ScmName::IvQuad2dWeak:
            return 5.0 * x_star[0] * x_star[0] + 6.0 * x_star[1] * x_star[1];
        case ScmName::IvQuad3dWeak:
            return 2.0 * x_star[0] * x_star[0] + 2.0 * x_star[1] * x_star[1] +
                   2.0 * x_star[2];
        // m = a x* + b c - e_m; E[(m1+m2)(c1+c2+u1+u2)] = b * E[(c1+c2)^2] = 2b
        case ScmName::LmLin1_2d:
            return 2.0 * x_star[0] + x_star[1] - 1.0 * (2.0 * 3.0);
        case ScmName::LmLin2_2d:
            return 3.0 * (2.0 * x_star[0] + x_star[1]) - 0.3 * (2.0 * 1.0);
    }
    throw std::logic_error("true_effect: unreachable");
}

McEstimate true_effect_mc(ScmName name, std::span<const double> x_star,
                          std::size_t draws, std::uint64_t seed) {
    const ScmSpec& spec = specs().at(name);
    Rng rng(seed);
    double s = 0.0, s2 = 0.0;
    if (spec.kind == ScmKind::IV) {
        if (x_star.size() != spec.p)
            throw std::invalid_argument("true_effect_mc: x_star dim mismatch");
        std::vector<double> c(spec.p);
        for (std::size_t i = 0; i < draws; ++i) {
            for (double& v : c) v = rng.normal();
            const double y = iv_outcome(name, x_star, c, rng.normal());
            s += y;
            s2 += y * y;
        }
    } else {
        if (x_star.size() != spec.q)
            throw std::invalid_argument("true_effect_mc: x_star dim mismatch");
        const IvCoef coef = lm_m_coef(name);
        std::vector<double> c(spec.p), u(spec.q), m(spec.p);
        for (std::size_t i = 0; i < draws; ++i) {
            for (double& v : c) v = rng.normal();
            for (double& v : u) v = rng.normal();
            for (std::size_t d = 0; d < spec.p; ++d)
                m[d] = coef.a * x_star[d] + coef.b * c[d] - rng.normal();
            const double y = lm_outcome(name, m, c, u, rng.normal());
            s += y;
            s2 += y * y;
        }
    }
    const double nd = static_cast<double>(draws);
    const double mean = s / nd;
    const double var = s2 / nd - mean * mean;
    return McEstimate{mean, std::sqrt(var / nd)};
}

NaiveCurve naive_regression_curve(const Dataset& dataset, const Matrix& x_grid,
                                  const MlpConfig& mlp_config,
                                  const TrainConfig& train_config, std::uint64_t seed) {
    const Matrix& x = dataset.treatment();
    if (x_grid.cols() != x.cols())
        throw std::invalid_argument("naive_regression_curve: grid dim mismatch");
    Matrix targets(dataset.n(), 1);
    for (std::size_t i = 0; i < dataset.n(); ++i) targets(i, 0) = dataset.y[i];
    TrainResult fit = train_regression(x, targets, train_config, mlp_config, seed);
    NaiveCurve out;
    Matrix preds = fit.mlp.forward(x_grid);
    out.predictions = preds.data();
    out.mlp = std::move(fit.mlp);
    return out;
}

void write_csv(const Dataset& dataset, std::ostream& out) {
    out.precision(17);
    const bool iv = dataset.kind == ScmKind::IV;
    for (std::size_t d = 0; d < dataset.q(); ++d)
        out << (d ? "," : "") << (iv ? "z" : "x") << (d + 1);
    for (std::size_t d = 0; d < dataset.p(); ++d)
        out << "," << (iv ? "x" : "m") << (d + 1);
    out << ",y\n";
    for (std::size_t i = 0; i < dataset.n(); ++i) {
        for (std::size_t d = 0; d < dataset.q(); ++d)
            out << (d ? "," : "") << dataset.cond(i, d);
        for (std::size_t d = 0; d < dataset.p(); ++d) out << "," << dataset.resp(i, d);
        out << "," << dataset.y[i] << "\n";
    }
}

Dataset read_csv(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("read_csv: empty file");
    std::vector<std::string> cols;
    {
        std::stringstream ss(header);
        std::string item;
        while (std::getline(ss, item, ',')) cols.push_back(item);
    }
    if (cols.size() < 3 || cols.back() != "y")
        throw std::runtime_error("read_csv: expected header ending in y");
    const bool iv = cols[0].size() >= 1 && cols[0][0] == 'z';
    std::size_t q = 0, p = 0;
    const char cond_prefix = iv ? 'z' : 'x';
    const char resp_prefix = iv ? 'x' : 'm';
    for (std::size_t i = 0; i + 1 < cols.size(); ++i) {
        if (cols[i][0] == cond_prefix && p == 0)
            ++q;
        else if (cols[i][0] == resp_prefix)
            ++p;
        else
            throw std::runtime_error("read_csv: unexpected column '" + cols[i] + "'");
    }
    std::vector<double> cond_data, resp_data, ys;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string item;
        std::vector<double> vals;
        while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
        if (vals.size() != q + p + 1)
            throw std::runtime_error("read_csv: row with wrong field count");
        for (std::size_t d = 0; d < q; ++d) cond_data.push_back(vals[d]);
        for (std::size_t d = 0; d < p; ++d) resp_data.push_back(vals[q + d]);
        ys.push_back(vals[q + p]);
    }
    const std::size_t n = ys.size();
    if (n == 0) throw std::runtime_error("read_csv: no data rows");
    Dataset ds;
    ds.kind = iv ? ScmKind::IV : ScmKind::LM;
    ds.name = "csv";
    ds.cond = Matrix(n, q, std::move(cond_data));
    ds.resp = Matrix(n, p, std::move(resp_data));
    ds.y = std::move(ys);
    return ds;
}

}  // namespace causalbound
