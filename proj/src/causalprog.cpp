#include "causalbound/causalprog.hpp"

#include "causalbound/rng.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace causalbound {

namespace {

std::size_t packed_size(std::size_t k) { return k * (k + 1) / 2; }
std::size_t packed_index(std::size_t r, std::size_t c) { return r * (r + 1) / 2 + c; }

}  // namespace

EtaModel::EtaModel(const EtaModelConfig& config, std::span<const double> theta_init,
                   std::uint64_t seed)
    : config_(config) {
    if (config_.noise_dim == 0 || config_.basis_size == 0)
        throw std::invalid_argument("EtaModel: dims must be positive");
    if (!(config_.omega > 0.0))
        throw std::invalid_argument("EtaModel: omega must be positive");
    if (theta_init.size() != config_.basis_size)
        throw std::invalid_argument("EtaModel: theta_init must have K entries");
    mu_net_ = Mlp(MlpConfig{config_.noise_dim, {16, 16}, config_.basis_size},
                  derive_seed(seed, 0));
    sigma_net_ = Mlp(MlpConfig{config_.noise_dim, {32, 32}, packed_size(config_.basis_size)},
                     derive_seed(seed, 1));
    // Start near mu(n) = theta_init and Sigma(n) = omega I.
    for (double& w : mu_net_.output_weights().value) w *= 0.01;
    std::copy(theta_init.begin(), theta_init.end(),
              mu_net_.output_biases().value.begin());
    for (double& w : sigma_net_.output_weights().value) w *= 0.01;
}

std::vector<double> EtaModel::mu(std::span<const double> noise) const {
    return mu_net_.forward_one(noise);
}

Matrix EtaModel::sigma(std::span<const double> noise) const {
    const std::size_t k = config_.basis_size;
    const auto lp = sigma_net_.forward_one(noise);
    Matrix l(k, k);
    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t c = 0; c <= r; ++c) l(r, c) = lp[packed_index(r, c)];
    Matrix s = matmul(transpose(l), l);
    for (std::size_t d = 0; d < k; ++d) s(d, d) += config_.omega;
    return s;
}

std::vector<ParamTensor*> EtaModel::parameters() {
    auto out = mu_net_.parameters();
    for (auto* p : sigma_net_.parameters()) out.push_back(p);
    return out;
}

std::vector<diff::Var> EtaModel::push_params(diff::Tape& tape) const {
    std::vector<diff::Var> vars;
    for (const ParamTensor* p : mu_net_.parameters())
        vars.push_back(tape.leaf(p->rows, p->cols, p->value));
    for (const ParamTensor* p : sigma_net_.parameters())
        vars.push_back(tape.leaf(p->rows, p->cols, p->value));
    return vars;
}

diff::Var EtaModel::mu_tape(diff::Tape& tape, diff::Var noise_batch,
                            std::span<const diff::Var> params) const {
    return mu_net_.forward_tape_reuse(tape, noise_batch,
                                      params.subspan(0, 2 * mu_net_.layer_count()));
}

diff::Var EtaModel::lpack_tape(diff::Tape& tape, diff::Var noise_batch,
                               std::span<const diff::Var> params) const {
    return sigma_net_.forward_tape_reuse(tape, noise_batch,
                                         params.subspan(2 * mu_net_.layer_count()));
}

void EtaModel::save(std::ostream& out) const {
    out << "causalbound-eta v1\n";
    out.precision(17);
    out << config_.noise_dim << ' ' << config_.basis_size << ' ' << config_.omega
        << '\n';
    mu_net_.save(out);
    sigma_net_.save(out);
}

EtaModel EtaModel::load(std::istream& in) {
    std::string word, version;
    in >> word >> version;
    if (!in || word != "causalbound-eta" || version != "v1")
        throw std::runtime_error("EtaModel::load: unrecognized header");
    EtaModel m;
    in >> m.config_.noise_dim >> m.config_.basis_size >> m.config_.omega;
    m.mu_net_ = Mlp::load(in);
    m.sigma_net_ = Mlp::load(in);
    if (!in) throw std::runtime_error("EtaModel::load: truncated file");
    return m;
}

namespace {

Matrix regressor_inputs(const Dataset& ds) {
    Matrix in(ds.n(), ds.resp.cols() + ds.cond.cols());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t c = 0; c < ds.resp.cols(); ++c) in(i, c) = ds.resp(i, c);
        for (std::size_t c = 0; c < ds.cond.cols(); ++c)
            in(i, ds.resp.cols() + c) = ds.cond(i, c);
    }
    return in;
}

}  // namespace

MomentRegressors fit_moment_regressors(const Dataset& ds, const TrainConfig& config,
                                       std::uint64_t seed) {
    const std::size_t n = ds.n();
    if (n < 10) throw std::invalid_argument("fit_moment_regressors: need >= 10 rows");
    Matrix all_in = regressor_inputs(ds);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng split_rng(derive_seed(seed, 77));
    std::shuffle(order.begin(), order.end(), split_rng.engine());
    const std::size_t n_hold = std::max<std::size_t>(1, n / 10);
    const std::size_t n_train = n - n_hold;

    Matrix tr_in(n_train, all_in.cols()), tr_y(n_train, 1), tr_y2(n_train, 1);
    for (std::size_t i = 0; i < n_train; ++i) {
        const std::size_t src = order[i];
        for (std::size_t c = 0; c < all_in.cols(); ++c) tr_in(i, c) = all_in(src, c);
        tr_y(i, 0) = ds.y[src];
        tr_y2(i, 0) = ds.y[src] * ds.y[src];
    }

    MlpConfig mc{all_in.cols(), {64, 32, 16}, 1};
    MomentRegressors reg;
    reg.phi1 = train_regression(tr_in, tr_y, config, mc, derive_seed(seed, 1)).mlp;
    reg.phi2 = train_regression(tr_in, tr_y2, config, mc, derive_seed(seed, 2)).mlp;

    double se = 0.0;
    for (std::size_t i = n_train; i < n; ++i) {
        const std::size_t src = order[i];
        const double pred = reg.phi1.forward_one(all_in.row(src))[0];
        const double diff = pred - ds.y[src];
        se += diff * diff;
    }
    reg.holdout_rmse = std::sqrt(se / static_cast<double>(n_hold));
    return reg;
}

MomentTargets build_targets(const Dataset& ds, const ConditionalInvertibleModel& h,
                            const MomentRegressors& regressors,
                            const ResponseBasis& basis, std::size_t m,
                            std::uint64_t seed) {
    const std::size_t n = ds.n();
    if (m < 1 || m > n)
        throw std::invalid_argument("build_targets: need 1 <= M <= n, got M = " +
                                    std::to_string(m));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, 11));
    std::shuffle(order.begin(), order.end(), rng.engine());
    order.resize(m);

    const bool iv = ds.kind == ScmKind::IV;
    const std::size_t noise_dim = iv ? ds.resp.cols() : ds.cond.cols() + ds.resp.cols();

    MomentTargets t;
    t.support = order;
    t.psi = Matrix(m, basis.size());
    t.noise = Matrix(m, noise_dim);
    t.b = Matrix(2, m);
    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t src = order[j];
        const auto cond = ds.cond.row(src);
        const auto resp = ds.resp.row(src);
        const auto noise = h.invert(cond, resp);
        if (iv) {
            for (std::size_t c = 0; c < noise.size(); ++c) t.noise(j, c) = noise[c];
        } else {
            for (std::size_t c = 0; c < cond.size(); ++c) t.noise(j, c) = cond[c];
            for (std::size_t c = 0; c < noise.size(); ++c)
                t.noise(j, cond.size() + c) = noise[c];
        }
        const auto psi = basis.evaluate(resp);
        for (std::size_t k = 0; k < psi.size(); ++k) t.psi(j, k) = psi[k];
        std::vector<double> reg_in(resp.begin(), resp.end());
        reg_in.insert(reg_in.end(), cond.begin(), cond.end());
        t.b(0, j) = regressors.phi1.forward_one(reg_in)[0];
        // The regressors are independent nets, so their outputs can violate
        // E[y^2] >= E[y]^2; no positive-semidefinite Sigma can match such a
        // pair, which would make the whole program infeasible. Clip to the
        // smallest consistent second moment.
        t.b(1, j) = std::max(regressors.phi2.forward_one(reg_in)[0],
                             t.b(0, j) * t.b(0, j) + 1e-6);
    }
    return t;
}

double target_variance(const MomentTargets& targets, std::size_t j) {
    const double b1 = targets.b(0, j);
    const double b2 = std::max(targets.b(1, j), b1 * b1 + 1e-6);
    return b2 - b1 * b1;
}

void pretrain_eta(EtaModel& eta, const MomentTargets& targets, std::size_t steps,
                  double learning_rate) {
    const std::size_t m = targets.count();
    const std::size_t k = eta.config().basis_size;
    const std::size_t npack = packed_size(k);
    if (m == 0) throw std::invalid_argument("pretrain_eta: empty targets");

    Matrix ppack(m, npack), sel(npack, k);
    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t c = 0; c <= r; ++c) sel(packed_index(r, c), r) = 1.0;
    std::vector<double> b1(m), b2(m);
    for (std::size_t j = 0; j < m; ++j) {
        double ss = 0.0;
        for (std::size_t r = 0; r < k; ++r) {
            ss += targets.psi(j, r) * targets.psi(j, r);
            for (std::size_t c = 0; c <= r; ++c)
                ppack(j, packed_index(r, c)) = targets.psi(j, c);
        }
        b1[j] = targets.b(0, j);
        b2[j] = targets.b(1, j) - eta.config().omega * ss;  // omega jitter is fixed
    }

    // Alternating phases on disjoint parameter blocks. Fitting jointly would
    // let the second-moment gradients (scale B_2 ~ B_1^2) swamp the mean fit,
    // so each cycle matches the mu-net to B_1 first, then the Cholesky
    // quadratic to B_2 - A_1^2 using the achieved A_1, not B_1: the
    // difference enters nu_2 through a 2 B_1 |A_1 - B_1| cross term that
    // would otherwise dominate the residual. Refreshing the quadratic target
    // between cycles keeps the two fits consistent as the mean drifts.
    auto all_params = eta.parameters();
    const std::size_t nmu = all_params.size() / 2;
    std::vector<ParamTensor*> mu_params(all_params.begin(), all_params.begin() + nmu);
    std::vector<ParamTensor*> sig_params(all_params.begin() + nmu, all_params.end());

    const std::size_t cycles = 8;
    const std::size_t per_phase = std::max<std::size_t>(1, steps / cycles);
    for (std::size_t cycle = 0; cycle < cycles; ++cycle) {
        AdamOptimizer adam_mu(learning_rate);
        for (std::size_t step = 0; step < per_phase; ++step) {
            diff::Tape t;
            auto vars = eta.push_params(t);
            diff::Var noise = t.leaf(m, targets.noise.cols(), targets.noise.data());
            diff::Var psi = t.leaf(m, k, targets.psi.data());
            diff::Var a1 = t.row_sum(t.mul(eta.mu_tape(t, noise, vars), psi));
            diff::Var loss = t.mean(t.square(t.sub(a1, t.leaf(m, 1, b1))));
            t.backward(loss);
            std::vector<std::vector<double>> grads;
            grads.reserve(nmu);
            for (std::size_t i = 0; i < nmu; ++i) grads.push_back(t.grad(vars[i]));
            adam_mu.step(mu_params, grads);
        }

        std::vector<double> qt(m);
        for (std::size_t j = 0; j < m; ++j) {
            double a1 = 0.0;
            const auto mu = eta.mu(std::span<const double>(
                targets.noise.data().data() + j * targets.noise.cols(),
                targets.noise.cols()));
            for (std::size_t r = 0; r < k; ++r) a1 += targets.psi(j, r) * mu[r];
            qt[j] = std::max(b2[j] - a1 * a1, 0.0);
        }

        AdamOptimizer adam_sig(learning_rate);
        for (std::size_t step = 0; step < per_phase; ++step) {
            diff::Tape t;
            auto vars = eta.push_params(t);
            diff::Var noise = t.leaf(m, targets.noise.cols(), targets.noise.data());
            diff::Var lp = eta.lpack_tape(t, noise, vars);
            diff::Var quad = t.row_sum(t.square(
                t.matmul(t.mul(lp, t.leaf(m, npack, ppack.data())),
                         t.leaf(npack, k, sel.data()))));
            diff::Var loss = t.mean(t.square(t.sub(quad, t.leaf(m, 1, qt))));
            t.backward(loss);
            std::vector<std::vector<double>> grads;
            grads.reserve(nmu);
            for (std::size_t i = nmu; i < all_params.size(); ++i)
                grads.push_back(t.grad(vars[i]));
            adam_sig.step(sig_params, grads);
        }
    }
}

std::pair<double, double> implied_moments(const EtaModel& eta,
                                          const MomentTargets& targets, std::size_t j) {
    if (j >= targets.count())
        throw std::invalid_argument("implied_moments: support index out of range");
    const auto mu = eta.mu(targets.noise.row(j));
    const Matrix sig = eta.sigma(targets.noise.row(j));
    const std::size_t k = mu.size();
    double a1 = 0.0;
    for (std::size_t i = 0; i < k; ++i) a1 += targets.psi(j, i) * mu[i];
    double quad = 0.0;
    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t c = 0; c < k; ++c)
            quad += targets.psi(j, r) * sig(r, c) * targets.psi(j, c);
    return {a1, a1 * a1 + quad};
}

Matrix constraint_matrix(const EtaModel& eta, const MomentTargets& targets) {
    Matrix nu(2, targets.count());
    for (std::size_t j = 0; j < targets.count(); ++j) {
        const auto [a1, a2] = implied_moments(eta, targets, j);
        nu(0, j) = targets.b(0, j) - a1;
        nu(1, j) = targets.b(1, j) - a2;
    }
    return nu;
}

std::vector<double> constraint_scalars(const Matrix& nu, NormKind norm, double epsilon) {
    if (norm == NormKind::Two) {
        double ss = 0.0;
        for (double v : nu.data()) ss += v * v;
        return {epsilon - std::sqrt(ss)};
    }
    // j-major: both moment constraints of a support point sit adjacent.
    std::vector<double> c;
    c.reserve(nu.size());
    for (std::size_t j = 0; j < nu.cols(); ++j)
        for (std::size_t l = 0; l < nu.rows(); ++l)
            c.push_back(epsilon - std::fabs(nu(l, j)));
    return c;
}

double objective_iv(const EtaModel& eta, std::span<const double> x_star,
                    const ResponseBasis& basis, std::size_t b_mc, std::uint64_t seed) {
    if (x_star.size() != basis.treatment_dim())
        throw std::invalid_argument("objective_iv: x_star dimension mismatch");
    if (x_star.size() != eta.config().noise_dim)
        throw std::invalid_argument("objective_iv: eta noise dim mismatch");
    if (b_mc < 1) throw std::invalid_argument("objective_iv: B_mc must be >= 1");
    const auto psi = basis.evaluate(x_star);
    Rng rng(seed);
    std::vector<double> noise(x_star.size());
    std::vector<double> mean(psi.size(), 0.0);
    for (std::size_t i = 0; i < b_mc; ++i) {
        for (double& v : noise) v = rng.normal();
        const auto mu = eta.mu(noise);
        for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += mu[k];
    }
    double out = 0.0;
    for (std::size_t k = 0; k < mean.size(); ++k)
        out += psi[k] * mean[k] / static_cast<double>(b_mc);
    return out;
}

double objective_lm(const EtaModel& eta, std::span<const double> x_star,
                    const ResponseBasis& basis, const ConditionalInvertibleModel& h_m,
                    std::size_t b_mc, const Dataset& ds, std::uint64_t seed) {
    if (ds.kind != ScmKind::LM)
        throw std::invalid_argument("objective_lm: needs a mediator dataset");
    if (x_star.size() != h_m.condition_dim())
        throw std::invalid_argument("objective_lm: x_star dimension mismatch");
    const std::size_t p = h_m.variable_dim();
    if (eta.config().noise_dim != x_star.size() + p)
        throw std::invalid_argument("objective_lm: eta noise dim mismatch");
    if (b_mc < 1) throw std::invalid_argument("objective_lm: B_mc must be >= 1");
    Rng rng(seed);
    std::vector<double> noise(x_star.size() + p);
    std::vector<double> n_m(p);
    double acc = 0.0;
    for (std::size_t i = 0; i < b_mc; ++i) {
        const std::size_t src = rng.index(ds.n());
        for (std::size_t c = 0; c < x_star.size(); ++c)
            noise[c] = ds.treatment()(src, c);
        for (double& v : n_m) v = rng.normal();
        const auto m = h_m.sample(x_star, n_m);
        for (std::size_t c = 0; c < p; ++c) noise[x_star.size() + c] = n_m[c];
        const auto psi = basis.evaluate(m);
        const auto mu = eta.mu(noise);
        for (std::size_t k = 0; k < psi.size(); ++k) acc += psi[k] * mu[k];
    }
    return acc / static_cast<double>(b_mc);
}

std::vector<double> initial_theta(const ResponseBasis& basis, const Dataset& ds) {
    if (basis.kind() == BasisKind::Neural) return basis.initial_theta();
    Matrix design(ds.n(), basis.size());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const auto psi = basis.evaluate(ds.resp.row(i));
        for (std::size_t k = 0; k < psi.size(); ++k) design(i, k) = psi[k];
    }
    return least_squares(design, ds.y);
}

CausalProgram::CausalProgram(CausalProgramConfig config, const ResponseBasis* basis,
                             const MomentTargets* targets, EtaModel eta,
                             const ConditionalInvertibleModel* h_m,
                             const Dataset* dataset)
    : config_(std::move(config)),
      basis_(basis),
      targets_(targets),
      eta_(std::move(eta)),
      h_m_(h_m),
      dataset_(dataset) {
    if (basis_ == nullptr || targets_ == nullptr)
        throw std::invalid_argument("CausalProgram: basis and targets are required");
    if (!(config_.epsilon > 0.0))
        throw std::invalid_argument("CausalProgram: epsilon must be positive");
    if (config_.b_mc < 1)
        throw std::invalid_argument("CausalProgram: B_mc must be >= 1");
    const std::size_t k = basis_->size();
    if (eta_.config().basis_size != k)
        throw std::invalid_argument("CausalProgram: eta/basis size mismatch");
    if (eta_.config().noise_dim != targets_->noise.cols())
        throw std::invalid_argument("CausalProgram: eta/targets noise dim mismatch");
    if (config_.variant == ProgramVariant::IV) {
        if (config_.x_star.size() != basis_->treatment_dim())
            throw std::invalid_argument("CausalProgram: x_star dimension mismatch");
    } else {
        if (h_m_ == nullptr || dataset_ == nullptr)
            throw std::invalid_argument(
                "CausalProgram: mediator model and dataset are required for LM");
        if (config_.x_star.size() != h_m_->condition_dim())
            throw std::invalid_argument("CausalProgram: x_star dimension mismatch");
    }

    const std::size_t m = targets_->count();
    const std::size_t npack = packed_size(k);
    ppack_ = Matrix(m, npack);
    sel_ = Matrix(npack, k);
    psin2_ = Matrix(m, 1);
    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t c = 0; c <= r; ++c) sel_(packed_index(r, c), r) = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
        double ss = 0.0;
        for (std::size_t r = 0; r < k; ++r)
            for (std::size_t c = 0; c <= r; ++c)
                ppack_(j, packed_index(r, c)) = targets_->psi(j, c);
        for (std::size_t c = 0; c < k; ++c) ss += targets_->psi(j, c) * targets_->psi(j, c);
        psin2_(j, 0) = eta_.config().omega * ss;
    }
}

std::size_t CausalProgram::constraint_count() const {
    return config_.norm == NormKind::Sup ? 2 * targets_->count() : 1;
}

std::vector<ParamTensor*> CausalProgram::parameters() { return eta_.parameters(); }

diff::Var CausalProgram::objective_tape(diff::Tape& t, std::span<const diff::Var> params,
                                        std::uint64_t eval_seed) const {
    const std::size_t b = config_.b_mc;
    Rng rng(derive_seed(eval_seed, 5));
    if (config_.variant == ProgramVariant::IV) {
        const std::size_t p = config_.x_star.size();
        std::vector<double> draws(b * p);
        for (double& v : draws) v = rng.normal();
        diff::Var noise = t.leaf(b, p, draws);
        diff::Var mu_out = eta_.mu_tape(t, noise, params);
        const auto psi = basis_->evaluate(config_.x_star);
        diff::Var psi_leaf = t.leaf(1, psi.size(), psi);
        return t.sum(t.mul(t.col_mean(mu_out), psi_leaf));
    }
    const std::size_t q = config_.x_star.size();
    const std::size_t p = h_m_->variable_dim();
    Matrix noise(b, q + p), psi(b, basis_->size());
    std::vector<double> n_m(p);
    for (std::size_t i = 0; i < b; ++i) {
        const std::size_t src = rng.index(dataset_->n());
        for (std::size_t c = 0; c < q; ++c) noise(i, c) = dataset_->treatment()(src, c);
        for (double& v : n_m) v = rng.normal();
        const auto m = h_m_->sample(config_.x_star, n_m);
        for (std::size_t c = 0; c < p; ++c) noise(i, q + c) = n_m[c];
        const auto psi_row = basis_->evaluate(m);
        for (std::size_t k = 0; k < psi_row.size(); ++k) psi(i, k) = psi_row[k];
    }
    diff::Var noise_leaf = t.leaf(b, q + p, noise.data());
    diff::Var mu_out = eta_.mu_tape(t, noise_leaf, params);
    diff::Var psi_leaf = t.leaf(b, basis_->size(), psi.data());
    return t.mean(t.row_sum(t.mul(mu_out, psi_leaf)));
}

ConstrainedProblem::Built CausalProgram::build(diff::Tape& t, std::uint64_t eval_seed) {
    const std::size_t m = targets_->count();
    const std::size_t k = basis_->size();
    Built out;
    out.params = eta_.push_params(t);

    diff::Var noise = t.leaf(m, targets_->noise.cols(), targets_->noise.data());
    diff::Var psi_leaf = t.leaf(m, k, targets_->psi.data());
    diff::Var mu_out = eta_.mu_tape(t, noise, out.params);
    diff::Var a1 = t.row_sum(t.mul(mu_out, psi_leaf));

    diff::Var lp = eta_.lpack_tape(t, noise, out.params);
    diff::Var e = t.mul(lp, t.leaf(m, ppack_.cols(), ppack_.data()));
    diff::Var g = t.matmul(e, t.leaf(sel_.rows(), sel_.cols(), sel_.data()));
    diff::Var quad = t.row_sum(t.square(g));
    diff::Var a2 =
        t.add(t.add(t.square(a1), quad), t.leaf(m, 1, psin2_.data()));

    std::vector<double> b1(m), b2(m);
    for (std::size_t j = 0; j < m; ++j) {
        b1[j] = targets_->b(0, j);
        b2[j] = targets_->b(1, j);
    }
    diff::Var nu = t.concat_cols(t.sub(t.leaf(m, 1, b1), a1),
                                 t.sub(t.leaf(m, 1, b2), a2));
    if (config_.norm == NormKind::Sup) {
        out.constraints = t.shift(t.neg(t.abs(nu)), config_.epsilon);
    } else {
        out.constraints = t.shift(t.neg(t.sqrt(t.sum(t.square(nu)))), config_.epsilon);
    }
    out.objective = objective_tape(t, out.params, eval_seed);
    return out;
}

double CausalProgram::objective_value(std::uint64_t seed) const {
    if (config_.variant == ProgramVariant::IV)
        return objective_iv(eta_, config_.x_star, *basis_, config_.b_mc,
                            derive_seed(seed, 5));
    return objective_lm(eta_, config_.x_star, *basis_, *h_m_, config_.b_mc, *dataset_,
                        derive_seed(seed, 5));
}

}  // namespace causalbound
