#include "causalbound/basis.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace causalbound {

ResponseBasis ResponseBasis::polynomial(std::size_t p) {
    if (p < 1) throw std::invalid_argument("polynomial_basis: p must be >= 1");
    ResponseBasis b;
    b.kind_ = BasisKind::Polynomial;
    b.p_ = p;
    b.k_ = p * (p + 3) / 2 + 1;
    return b;
}

ResponseBasis ResponseBasis::neural(const Matrix& x, const Matrix& y, std::size_t K,
                                    const TrainConfig& config, std::uint64_t seed) {
    if (K < 1) throw std::invalid_argument("neural_basis: K must be >= 1");
    if (x.rows() == 0) throw std::invalid_argument("neural_basis: empty dataset");
    MlpConfig mc{x.cols(), {64, 64, K}, 1};
    TrainResult fit = train_regression(x, y, config, mc, seed);
    ResponseBasis b;
    b.kind_ = BasisKind::Neural;
    b.p_ = x.cols();
    b.k_ = K;
    b.net_ = std::move(fit.mlp);
    b.mse_ = fit.final_mse;

    // Rescale each last-hidden unit to unit RMS over the training inputs,
    // folding the inverse scale into the readout. ReLU is positively
    // homogeneous, so the network function is unchanged, but downstream
    // moment constraints see ||psi|| = O(sqrt(K)) instead of the raw
    // activation scales, which can span several orders of magnitude.
    std::vector<double> ms(K, 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto act = b.net_.hidden_activations(
            std::span<const double>(x.data().data() + i * x.cols(), x.cols()));
        for (std::size_t k = 0; k < K; ++k) ms[k] += act[k] * act[k];
    }
    auto params = b.net_.parameters();
    ParamTensor& wh = *params[params.size() - 4];  // last hidden weights, in x K
    ParamTensor& bh = *params[params.size() - 3];
    ParamTensor& wo = b.net_.output_weights();  // K x 1 readout
    for (std::size_t k = 0; k < K; ++k) {
        const double rms = std::sqrt(ms[k] / static_cast<double>(x.rows()));
        if (rms < 1e-12) continue;  // dead unit, leave as-is
        for (std::size_t r = 0; r < wh.rows; ++r) wh.value[r * wh.cols + k] /= rms;
        bh.value[k] /= rms;
        wo.value[k] *= rms;
    }

    b.theta_ = wo.value;
    b.bias_ = b.net_.output_biases().value[0];
    return b;
}

std::vector<double> ResponseBasis::evaluate(std::span<const double> x) const {
    if (x.size() != p_)
        throw std::invalid_argument("ResponseBasis::evaluate: x has dim " +
                                    std::to_string(x.size()) + ", expected " +
                                    std::to_string(p_));
    for (double v : x)
        if (!std::isfinite(v))
            throw std::invalid_argument("ResponseBasis::evaluate: non-finite input");
    if (kind_ == BasisKind::Neural) return net_.hidden_activations(x);
    std::vector<double> out;
    out.reserve(k_);
    out.push_back(1.0);
    for (double v : x) out.push_back(v);
    for (std::size_t i = 0; i < p_; ++i)
        for (std::size_t j = i; j < p_; ++j) out.push_back(x[i] * x[j]);
    return out;
}

const std::vector<double>& ResponseBasis::initial_theta() const {
    if (kind_ != BasisKind::Neural)
        throw std::logic_error("initial_theta: only the neural basis stores a readout");
    return theta_;
}

double ResponseBasis::initial_bias() const {
    if (kind_ != BasisKind::Neural)
        throw std::logic_error("initial_bias: only the neural basis stores a readout");
    return bias_;
}

double ResponseBasis::training_mse() const {
    if (kind_ != BasisKind::Neural)
        throw std::logic_error("training_mse: only the neural basis is trained");
    return mse_;
}

void ResponseBasis::save(std::ostream& out) const {
    out << "causalbound-basis v1\n";
    if (kind_ == BasisKind::Polynomial) {
        out << "polynomial " << p_ << '\n';
        return;
    }
    out.precision(17);
    out << "neural " << p_ << ' ' << k_ << ' ' << mse_ << '\n';
    net_.save(out);
}

ResponseBasis ResponseBasis::load(std::istream& in) {
    std::string word, version;
    in >> word >> version;
    if (!in || word != "causalbound-basis" || version != "v1")
        throw std::runtime_error("ResponseBasis::load: unrecognized header");
    std::string kind;
    in >> kind;
    if (kind == "polynomial") {
        std::size_t p = 0;
        in >> p;
        if (!in) throw std::runtime_error("ResponseBasis::load: truncated file");
        return polynomial(p);
    }
    if (kind != "neural") throw std::runtime_error("ResponseBasis::load: unknown kind");
    ResponseBasis b;
    b.kind_ = BasisKind::Neural;
    in >> b.p_ >> b.k_ >> b.mse_;
    b.net_ = Mlp::load(in);
    b.theta_ = b.net_.output_weights().value;
    b.bias_ = b.net_.output_biases().value[0];
    if (!in) throw std::runtime_error("ResponseBasis::load: truncated file");
    return b;
}

}  // namespace causalbound
