#include "causalbound/condflow.hpp"

#include "causalbound/rng.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace causalbound {

namespace {

constexpr double kOmegaFlow = 1e-4;
constexpr std::size_t kBins = 8;
constexpr double kRange = 5.0;
constexpr double kMinFrac = 1e-3;
// softplus(x + offset) = 1 at x = 0, so a zero conditioner yields unit
// derivatives and the spline starts as the identity.
const double kSoftplusOffset = std::log(std::exp(1.0) - 1.0);
constexpr double kHalfLog2Pi = 0.9189385332046727;

double softplus(double t) { return t > 30.0 ? t : std::log1p(std::exp(t)); }

void standardize_stats(const Matrix& m, std::vector<double>& mean,
                       std::vector<double>& std) {
    mean.resize(m.cols());
    std.resize(m.cols());
    for (std::size_t c = 0; c < m.cols(); ++c) {
        mean[c] = column_mean(m, c);
        double s = column_std(m, c);
        std[c] = s > 1e-12 ? s : 1.0;
    }
}

std::size_t packed_size(std::size_t p) { return p * (p + 1) / 2; }

// Stable softmax of a 1 x k row on the tape; the max shift is a constant
// taken from the current numeric values, which leaves gradients intact.
diff::Var tape_softmax(diff::Tape& t, diff::Var row) {
    const auto& v = t.value(row);
    const double m = *std::max_element(v.begin(), v.end());
    diff::Var e = t.exp(t.shift(row, -m));
    return t.div(e, t.sum(e));
}

diff::Var tape_softplus(diff::Tape& t, diff::Var x) {
    return t.log(t.shift(t.exp(t.shift(x, kSoftplusOffset)), 1.0));
}

}  // namespace

void FlowTrainConfig::validate() const {
    if (epochs == 0 || batch_size == 0)
        throw std::invalid_argument("FlowTrainConfig: epochs and batch_size must be positive");
    if (!(learning_rate > 0.0))
        throw std::invalid_argument("FlowTrainConfig: learning_rate must be positive");
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 * 0.5); }

double normal_quantile(double u) {
    if (!(u > 0.0 && u < 1.0))
        throw std::invalid_argument("normal_quantile: u must lie strictly in (0,1)");
    // Acklam's rational approximation, then one Halley refinement.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (u < plow) {
        const double r = std::sqrt(-2.0 * std::log(u));
        x = (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
            ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
    } else if (u > 1.0 - plow) {
        const double r = std::sqrt(-2.0 * std::log(1.0 - u));
        x = -(((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
            ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
    } else {
        const double r = u - 0.5, s = r * r;
        x = (((((a[0] * s + a[1]) * s + a[2]) * s + a[3]) * s + a[4]) * s + a[5]) * r /
            (((((b[0] * s + b[1]) * s + b[2]) * s + b[3]) * s + b[4]) * s + 1.0);
    }
    const double e = normal_cdf(x) - u;
    const double un = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - un / (1.0 + 0.5 * x * un);
}

ConditionalInvertibleModel::SplineKnots ConditionalInvertibleModel::knots_from_raw(
    std::span<const double> raw) const {
    SplineKnots k;
    k.xk.assign(kBins + 1, -kRange);
    k.yk.assign(kBins + 1, -kRange);
    k.d.assign(kBins + 1, 1.0);
    auto fill = [&](std::vector<double>& knots, std::size_t off) {
        double m = raw[off];
        for (std::size_t i = 1; i < kBins; ++i) m = std::max(m, raw[off + i]);
        double s = 0.0;
        for (std::size_t i = 0; i < kBins; ++i) s += std::exp(raw[off + i] - m);
        double pos = -kRange;
        for (std::size_t i = 0; i < kBins; ++i) {
            const double frac =
                kMinFrac + (1.0 - kBins * kMinFrac) * std::exp(raw[off + i] - m) / s;
            pos += 2.0 * kRange * frac;
            knots[i + 1] = pos;
        }
        knots[kBins] = kRange;  // pin against rounding drift
    };
    fill(k.xk, 0);
    fill(k.yk, kBins);
    for (std::size_t i = 1; i < kBins; ++i)
        k.d[i] = softplus(raw[2 * kBins + i - 1] + kSoftplusOffset);
    return k;
}

namespace {

std::size_t find_bin(const std::vector<double>& knots, double v) {
    const auto it = std::upper_bound(knots.begin() + 1, knots.end() - 1, v);
    return static_cast<std::size_t>(it - knots.begin()) - 1;
}

// Monotone rational-quadratic spline in the normalizing direction:
// x (standardized data) -> n, with log-derivative. Identity in the tails.
struct Fwd {
    double n, logderiv;
};

Fwd eval_spline(const std::vector<double>& xk, const std::vector<double>& yk,
                const std::vector<double>& dv, double x) {
    if (x <= -kRange || x >= kRange) return {x, 0.0};
    const std::size_t k = find_bin(xk, x);
    const double w = xk[k + 1] - xk[k], h = yk[k + 1] - yk[k];
    const double s = h / w;
    const double xi = (x - xk[k]) / w;
    const double om = 1.0 - xi;
    const double tt = dv[k + 1] + dv[k] - 2.0 * s;
    const double denom = s + tt * xi * om;
    const double n = yk[k] + h * (s * xi * xi + dv[k] * xi * om) / denom;
    const double dnum = dv[k + 1] * xi * xi + 2.0 * s * xi * om + dv[k] * om * om;
    return {n, 2.0 * std::log(s) + std::log(dnum) - 2.0 * std::log(denom)};
}

double invert_spline(const std::vector<double>& xk, const std::vector<double>& yk,
                     const std::vector<double>& dv, double n) {
    if (n <= -kRange || n >= kRange) return n;
    const std::size_t k = find_bin(yk, n);
    const double w = xk[k + 1] - xk[k], h = yk[k + 1] - yk[k];
    const double s = h / w;
    const double delta = n - yk[k];
    const double tt = dv[k + 1] + dv[k] - 2.0 * s;
    const double a = h * (s - dv[k]) + delta * tt;
    const double b = h * dv[k] - delta * tt;
    const double c = -s * delta;
    const double disc = std::max(0.0, b * b - 4.0 * a * c);
    const double xi = 2.0 * c / (-b - std::sqrt(disc));
    return xk[k] + xi * w;
}

}  // namespace

std::vector<double> ConditionalInvertibleModel::conditioner_input(
    std::span<const double> z, std::span<const double> x_std, std::size_t dim) const {
    std::vector<double> in(q_ + dim);
    for (std::size_t c = 0; c < q_; ++c)
        in[c] = (z[c] - cond_mean_[c]) / cond_std_[c];
    for (std::size_t c = 0; c < dim; ++c) in[q_ + c] = x_std[c];
    return in;
}

ConditionalInvertibleModel ConditionalInvertibleModel::fit(FlowVariant variant,
                                                           const Matrix& condition,
                                                           const Matrix& variable,
                                                           const FlowTrainConfig& config,
                                                           std::uint64_t seed) {
    config.validate();
    if (condition.rows() == 0 || condition.rows() != variable.rows())
        throw std::invalid_argument("fit: need matching nonempty condition/variable rows");
    for (double v : condition.data())
        if (!std::isfinite(v)) throw std::invalid_argument("fit: non-finite condition value");
    for (double v : variable.data())
        if (!std::isfinite(v)) throw std::invalid_argument("fit: non-finite variable value");
    for (std::size_t c = 0; c < variable.cols(); ++c)
        if (column_std(variable, c) < 1e-10)
            throw std::invalid_argument(
                "fit: variable column " + std::to_string(c + 1) +
                " is constant; add jitter to the data before fitting");

    ConditionalInvertibleModel m;
    m.variant_ = variant;
    m.q_ = condition.cols();
    m.p_ = variable.cols();
    const std::size_t n = condition.rows(), p = m.p_, q = m.q_;
    standardize_stats(condition, m.cond_mean_, m.cond_std_);

    Matrix zs(n, q);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < q; ++c)
            zs(i, c) = (condition(i, c) - m.cond_mean_[c]) / m.cond_std_[c];

    std::vector<ParamTensor*> params;
    if (variant == FlowVariant::Affine) {
        MlpConfig mc{q, config.hidden_sizes, p + packed_size(p)};
        m.affine_net_ = Mlp(mc, derive_seed(seed, 1));
        // Start near the marginal fit: b = mean(x), L = diag(std(x)).
        for (double& w : m.affine_net_.output_weights().value) w *= 0.01;
        auto& bias = m.affine_net_.output_biases().value;
        for (std::size_t d = 0; d < p; ++d) {
            bias[d] = column_mean(variable, d);
            bias[p + d * (d + 1) / 2 + d] = column_std(variable, d);
        }
        params = m.affine_net_.parameters();
    } else {
        standardize_stats(variable, m.var_mean_, m.var_std_);
        for (std::size_t d = 0; d < p; ++d) {
            MlpConfig mc{q + d, config.hidden_sizes, 3 * kBins - 1};
            m.spline_nets_.emplace_back(mc, derive_seed(seed, 2 + d));
            // Zero readout makes the initial transform exactly the identity.
            auto& w = m.spline_nets_.back().output_weights().value;
            std::fill(w.begin(), w.end(), 0.0);
            for (auto* pt : m.spline_nets_.back().parameters()) params.push_back(pt);
        }
    }

    Matrix xs;  // standardized variable, spline only
    if (variant == FlowVariant::Spline) {
        xs = Matrix(n, p);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t d = 0; d < p; ++d)
                xs(i, d) = (variable(i, d) - m.var_mean_[d]) / m.var_std_[d];
    }

    AdamOptimizer adam(config.learning_rate);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const std::vector<double> eye_omega = [&] {
        std::vector<double> e(p * p, 0.0);
        for (std::size_t d = 0; d < p; ++d) e[d * p + d] = kOmegaFlow;
        return e;
    }();

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(seed, 1000 + epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t bs = std::min(config.batch_size, n - start);
            diff::Tape t;
            std::vector<diff::Var> pv;
            diff::Var total = t.scalar(0.0);

            Matrix zb(bs, q);
            for (std::size_t i = 0; i < bs; ++i)
                for (std::size_t c = 0; c < q; ++c) zb(i, c) = zs(order[start + i], c);
            diff::Var zleaf = t.leaf(bs, q, zb.data());

            if (variant == FlowVariant::Affine) {
                diff::Var out = m.affine_net_.forward_tape(t, zleaf, pv);
                diff::Var om = t.leaf(p, p, eye_omega);
                for (std::size_t i = 0; i < bs; ++i) {
                    diff::Var row = t.slice_rows(out, i, 1);
                    diff::Var b = t.slice_cols(row, 0, p);
                    diff::Var lp = t.slice_cols(row, p, packed_size(p));
                    diff::Var l = t.tril_from_packed(lp, p);
                    diff::Var a = t.add(t.matmul(t.transpose(l), l), om);
                    diff::Var x = t.leaf(1, p, variable.row(order[start + i]));
                    diff::Var u = t.matmul(t.sub(x, b), t.matinv(a));
                    total = t.add(total, t.add(t.scale(t.sum(t.square(u)), 0.5),
                                               t.logdet(a)));
                }
            } else {
                for (std::size_t d = 0; d < p; ++d) {
                    Matrix in(bs, q + d);
                    for (std::size_t i = 0; i < bs; ++i) {
                        for (std::size_t c = 0; c < q; ++c)
                            in(i, c) = zb(i, c);
                        for (std::size_t c = 0; c < d; ++c)
                            in(i, q + c) = xs(order[start + i], c);
                    }
                    diff::Var out =
                        m.spline_nets_[d].forward_tape(t, t.leaf(bs, q + d, in.data()), pv);
                    for (std::size_t i = 0; i < bs; ++i) {
                        const double x = xs(order[start + i], d);
                        if (x <= -kRange || x >= kRange) continue;  // identity tail
                        diff::Var raw = t.slice_rows(out, i, 1);
                        SplineKnots nk = m.knots_from_raw(t.value(raw));
                        const std::size_t k = find_bin(nk.xk, x);

                        diff::Var pw = tape_softmax(t, t.slice_cols(raw, 0, kBins));
                        diff::Var w = t.shift(
                            t.scale(pw, 2.0 * kRange * (1.0 - kBins * kMinFrac)),
                            2.0 * kRange * kMinFrac);
                        diff::Var ph = tape_softmax(t, t.slice_cols(raw, kBins, kBins));
                        diff::Var h = t.shift(
                            t.scale(ph, 2.0 * kRange * (1.0 - kBins * kMinFrac)),
                            2.0 * kRange * kMinFrac);
                        diff::Var xk = k == 0 ? t.scalar(-kRange)
                                              : t.shift(t.sum(t.slice_cols(w, 0, k)),
                                                        -kRange);
                        diff::Var yk = k == 0 ? t.scalar(-kRange)
                                              : t.shift(t.sum(t.slice_cols(h, 0, k)),
                                                        -kRange);
                        diff::Var wk = t.slice_cols(w, k, 1);
                        diff::Var hk = t.slice_cols(h, k, 1);
                        auto deriv = [&](std::size_t idx) {
                            if (idx == 0 || idx == kBins) return t.scalar(1.0);
                            return tape_softplus(
                                t, t.slice_cols(raw, 2 * kBins + idx - 1, 1));
                        };
                        diff::Var d0 = deriv(k), d1 = deriv(k + 1);
                        diff::Var sk = t.div(hk, wk);
                        diff::Var xi = t.div(t.shift(t.neg(xk), x), wk);
                        diff::Var om1 = t.shift(t.neg(xi), 1.0);
                        diff::Var xiom = t.mul(xi, om1);
                        diff::Var tt = t.sub(t.add(d0, d1), t.scale(sk, 2.0));
                        diff::Var denom = t.add(sk, t.mul(tt, xiom));
                        diff::Var g = t.add(
                            yk, t.div(t.mul(hk, t.add(t.mul(sk, t.square(xi)),
                                                      t.mul(d0, xiom))),
                                      denom));
                        diff::Var dnum =
                            t.add(t.add(t.mul(d1, t.square(xi)),
                                        t.mul(t.scale(sk, 2.0), xiom)),
                                  t.mul(d0, t.square(om1)));
                        diff::Var logderiv = t.sub(
                            t.add(t.scale(t.log(sk), 2.0), t.log(dnum)),
                            t.scale(t.log(denom), 2.0));
                        total = t.add(total,
                                      t.sub(t.scale(t.square(g), 0.5), logderiv));
                    }
                }
            }

            diff::Var loss = t.scale(total, 1.0 / static_cast<double>(bs));
            t.backward(loss);
            std::vector<std::vector<double>> grads;
            grads.reserve(pv.size());
            for (diff::Var v : pv) grads.push_back(t.grad(v));
            adam.step(params, grads);
        }
    }

    m.final_ll_ = m.mean_log_likelihood(condition, variable);
    return m;
}

std::vector<double> ConditionalInvertibleModel::sample(std::span<const double> z,
                                                       std::span<const double> n) const {
    if (z.size() != q_ || n.size() != p_)
        throw std::invalid_argument("sample: condition or noise dimension mismatch");
    for (double v : z)
        if (!std::isfinite(v)) throw std::invalid_argument("sample: non-finite condition");
    std::vector<double> noise(n.begin(), n.end());
    if (uniform_noise_)
        for (double& v : noise) v = normal_quantile(v);
    for (double v : noise)
        if (!std::isfinite(v)) throw std::invalid_argument("sample: non-finite noise");

    if (variant_ == FlowVariant::Affine) {
        AffineParams ap = affine_params(z);
        std::vector<double> x(p_);
        for (std::size_t r = 0; r < p_; ++r) {
            double acc = ap.b[r];
            for (std::size_t c = 0; c < p_; ++c) acc += ap.a(r, c) * noise[c];
            x[r] = acc;
        }
        return x;
    }
    std::vector<double> x(p_), x_std(p_);
    for (std::size_t d = 0; d < p_; ++d) {
        const auto in = conditioner_input(z, x_std, d);
        const auto raw = spline_nets_[d].forward_one(in);
        SplineKnots k = knots_from_raw(raw);
        x_std[d] = invert_spline(k.xk, k.yk, k.d, noise[d]);
        x[d] = var_mean_[d] + var_std_[d] * x_std[d];
    }
    return x;
}

std::vector<double> ConditionalInvertibleModel::invert(std::span<const double> z,
                                                       std::span<const double> x) const {
    if (z.size() != q_ || x.size() != p_)
        throw std::invalid_argument("invert: condition or variable dimension mismatch");
    for (double v : z)
        if (!std::isfinite(v)) throw std::invalid_argument("invert: non-finite condition");
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("invert: non-finite variable");

    std::vector<double> n(p_);
    if (variant_ == FlowVariant::Affine) {
        AffineParams ap = affine_params(z);
        std::vector<double> r(p_);
        for (std::size_t d = 0; d < p_; ++d) r[d] = x[d] - ap.b[d];
        n = solve(ap.a, r);
    } else {
        std::vector<double> x_std(p_);
        for (std::size_t d = 0; d < p_; ++d)
            x_std[d] = (x[d] - var_mean_[d]) / var_std_[d];
        for (std::size_t d = 0; d < p_; ++d) {
            const auto in = conditioner_input(z, x_std, d);
            const auto raw = spline_nets_[d].forward_one(in);
            SplineKnots k = knots_from_raw(raw);
            n[d] = eval_spline(k.xk, k.yk, k.d, x_std[d]).n;
        }
    }
    if (uniform_noise_)
        for (double& v : n) v = normal_cdf(v);
    return n;
}

double ConditionalInvertibleModel::log_likelihood(std::span<const double> z,
                                                  std::span<const double> x) const {
    if (z.size() != q_ || x.size() != p_)
        throw std::invalid_argument("log_likelihood: dimension mismatch");
    if (variant_ == FlowVariant::Affine) {
        AffineParams ap = affine_params(z);
        std::vector<double> r(p_);
        for (std::size_t d = 0; d < p_; ++d) r[d] = x[d] - ap.b[d];
        const std::vector<double> n = solve(ap.a, r);
        Matrix chol = cholesky(ap.a);
        double logdet = 0.0;
        for (std::size_t d = 0; d < p_; ++d) logdet += std::log(chol(d, d));
        logdet *= 2.0;
        double q = 0.0;
        for (double v : n) q += v * v;
        // x | z ~ N(b, A^2), so the density carries log det A once.
        return -0.5 * q - logdet - static_cast<double>(p_) * kHalfLog2Pi;
    }
    std::vector<double> x_std(p_);
    for (std::size_t d = 0; d < p_; ++d)
        x_std[d] = (x[d] - var_mean_[d]) / var_std_[d];
    double ll = 0.0;
    for (std::size_t d = 0; d < p_; ++d) {
        const auto in = conditioner_input(z, x_std, d);
        const auto raw = spline_nets_[d].forward_one(in);
        SplineKnots k = knots_from_raw(raw);
        const Fwd f = eval_spline(k.xk, k.yk, k.d, x_std[d]);
        ll += -0.5 * f.n * f.n - kHalfLog2Pi + f.logderiv - std::log(var_std_[d]);
    }
    return ll;
}

double ConditionalInvertibleModel::mean_log_likelihood(const Matrix& condition,
                                                       const Matrix& variable) const {
    if (condition.rows() == 0 || condition.rows() != variable.rows())
        throw std::invalid_argument("mean_log_likelihood: mismatched rows");
    double acc = 0.0;
    for (std::size_t i = 0; i < condition.rows(); ++i)
        acc += log_likelihood(condition.row(i), variable.row(i));
    return acc / static_cast<double>(condition.rows());
}

AffineParams ConditionalInvertibleModel::affine_params(std::span<const double> z) const {
    if (variant_ != FlowVariant::Affine)
        throw std::logic_error("affine_params: model is not affine");
    if (z.size() != q_) throw std::invalid_argument("affine_params: dimension mismatch");
    std::vector<double> zin(q_);
    for (std::size_t c = 0; c < q_; ++c)
        zin[c] = (z[c] - cond_mean_[c]) / cond_std_[c];
    const auto out = affine_net_.forward_one(zin);
    AffineParams ap;
    ap.b.assign(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(p_));
    Matrix l(p_, p_);
    std::size_t idx = p_;
    for (std::size_t r = 0; r < p_; ++r)
        for (std::size_t c = 0; c <= r; ++c) l(r, c) = out[idx++];
    ap.a = matmul(transpose(l), l);
    for (std::size_t d = 0; d < p_; ++d) ap.a(d, d) += kOmegaFlow;
    return ap;
}

void ConditionalInvertibleModel::save(std::ostream& out) const {
    out << "causalbound-flow v1\n";
    out << (variant_ == FlowVariant::Affine ? "affine" : "spline") << ' ' << p_ << ' '
        << q_ << ' ' << (uniform_noise_ ? 1 : 0) << '\n';
    out.precision(17);
    out << final_ll_ << '\n';
    for (double v : cond_mean_) out << v << ' ';
    out << '\n';
    for (double v : cond_std_) out << v << ' ';
    out << '\n';
    if (variant_ == FlowVariant::Affine) {
        affine_net_.save(out);
    } else {
        out << kBins << ' ' << kRange << '\n';
        for (double v : var_mean_) out << v << ' ';
        out << '\n';
        for (double v : var_std_) out << v << ' ';
        out << '\n';
        for (const Mlp& net : spline_nets_) net.save(out);
    }
}

ConditionalInvertibleModel ConditionalInvertibleModel::load(std::istream& in) {
    std::string word, version;
    in >> word >> version;
    if (!in || word != "causalbound-flow" || version != "v1")
        throw std::runtime_error("ConditionalInvertibleModel::load: unrecognized header");
    ConditionalInvertibleModel m;
    std::string variant;
    int uniform = 0;
    in >> variant >> m.p_ >> m.q_ >> uniform >> m.final_ll_;
    if (variant != "affine" && variant != "spline")
        throw std::runtime_error("ConditionalInvertibleModel::load: unknown variant");
    m.variant_ = variant == "affine" ? FlowVariant::Affine : FlowVariant::Spline;
    m.uniform_noise_ = uniform != 0;
    m.cond_mean_.resize(m.q_);
    m.cond_std_.resize(m.q_);
    for (double& v : m.cond_mean_) in >> v;
    for (double& v : m.cond_std_) in >> v;
    if (m.variant_ == FlowVariant::Affine) {
        m.affine_net_ = Mlp::load(in);
    } else {
        std::size_t bins = 0;
        double range = 0.0;
        in >> bins >> range;
        if (bins != kBins || range != kRange)
            throw std::runtime_error(
                "ConditionalInvertibleModel::load: spline metadata mismatch");
        m.var_mean_.resize(m.p_);
        m.var_std_.resize(m.p_);
        for (double& v : m.var_mean_) in >> v;
        for (double& v : m.var_std_) in >> v;
        for (std::size_t d = 0; d < m.p_; ++d) m.spline_nets_.push_back(Mlp::load(in));
    }
    if (!in) throw std::runtime_error("ConditionalInvertibleModel::load: truncated file");
    return m;
}

ConditionalInvertibleModel one_dim_cdf_variant(const Matrix& condition,
                                               const Matrix& variable,
                                               const FlowTrainConfig& config,
                                               std::uint64_t seed) {
    if (variable.cols() != 1)
        throw std::invalid_argument("one_dim_cdf_variant: variable must be scalar");
    ConditionalInvertibleModel m = ConditionalInvertibleModel::fit(
        FlowVariant::Spline, condition, variable, config, seed);
    m.uniform_noise_ = true;
    return m;
}

}  // namespace causalbound
