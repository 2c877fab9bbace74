#include "causalbound/neuralnet.hpp"

#include "causalbound/rng.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace causalbound {

namespace {
constexpr const char* kModelMagic = "causalbound-mlp";
constexpr int kModelVersion = 1;
}  // namespace

void MlpConfig::validate() const {
    if (input_dim == 0 || output_dim == 0)
        throw std::invalid_argument("MlpConfig: dims must be positive");
    if (hidden_sizes.empty())
        throw std::invalid_argument("MlpConfig: hidden_sizes must be nonempty");
    for (std::size_t h : hidden_sizes)
        if (h == 0) throw std::invalid_argument("MlpConfig: hidden size must be positive");
}

Mlp::Mlp(const MlpConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    std::vector<std::size_t> dims;
    dims.push_back(config_.input_dim);
    dims.insert(dims.end(), config_.hidden_sizes.begin(), config_.hidden_sizes.end());
    dims.push_back(config_.output_dim);

    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t fan_in = dims[l], fan_out = dims[l + 1];
        const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
        ParamTensor w{fan_in, fan_out, std::vector<double>(fan_in * fan_out)};
        for (double& x : w.value) x = rng.uniform(-bound, bound);
        weights_.push_back(std::move(w));
        biases_.push_back(ParamTensor{1, fan_out, std::vector<double>(fan_out, 0.0)});
    }
}

Matrix Mlp::forward(const Matrix& batch) const {
    if (batch.cols() != config_.input_dim)
        throw std::invalid_argument("Mlp::forward: input has " +
                                    std::to_string(batch.cols()) + " columns, expected " +
                                    std::to_string(config_.input_dim));
    Matrix h = batch;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        const ParamTensor& w = weights_[l];
        const ParamTensor& b = biases_[l];
        Matrix next(h.rows(), w.cols);
        for (std::size_t i = 0; i < h.rows(); ++i)
            for (std::size_t k = 0; k < w.rows; ++k) {
                const double hik = h(i, k);
                if (hik == 0.0) continue;
                for (std::size_t j = 0; j < w.cols; ++j)
                    next(i, j) += hik * w.value[k * w.cols + j];
            }
        const bool last = (l + 1 == weights_.size());
        for (std::size_t i = 0; i < next.rows(); ++i)
            for (std::size_t j = 0; j < next.cols(); ++j) {
                double v = next(i, j) + b.value[j];
                next(i, j) = (!last && v < 0.0) ? 0.0 : v;
            }
        h = std::move(next);
    }
    return h;
}

std::vector<double> Mlp::forward_one(std::span<const double> x) const {
    Matrix in(1, x.size(), std::vector<double>(x.begin(), x.end()));
    Matrix out = forward(in);
    return out.data();
}

std::vector<double> Mlp::hidden_activations(std::span<const double> x) const {
    if (weights_.size() < 2)
        throw std::invalid_argument("hidden_activations: mlp has no hidden layer");
    std::vector<double> h(x.begin(), x.end());
    for (std::size_t l = 0; l + 1 < weights_.size(); ++l) {
        const ParamTensor& w = weights_[l];
        const ParamTensor& b = biases_[l];
        std::vector<double> next(w.cols, 0.0);
        for (std::size_t k = 0; k < w.rows; ++k)
            for (std::size_t j = 0; j < w.cols; ++j)
                next[j] += h[k] * w.value[k * w.cols + j];
        for (std::size_t j = 0; j < w.cols; ++j)
            next[j] = std::max(0.0, next[j] + b.value[j]);
        h = std::move(next);
    }
    return h;
}

diff::Var Mlp::forward_tape(diff::Tape& tape, diff::Var batch,
                            std::vector<diff::Var>& param_vars) const {
    diff::Var h = batch;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        diff::Var w = tape.leaf(weights_[l].rows, weights_[l].cols, weights_[l].value);
        diff::Var b = tape.leaf(1, biases_[l].cols, biases_[l].value);
        param_vars.push_back(w);
        param_vars.push_back(b);
        h = tape.add(tape.matmul(h, w), b);
        if (l + 1 < weights_.size()) h = tape.relu(h);
    }
    return h;
}

diff::Var Mlp::forward_tape_reuse(diff::Tape& tape, diff::Var batch,
                                  std::span<const diff::Var> param_vars) const {
    if (param_vars.size() != 2 * weights_.size())
        throw std::invalid_argument("forward_tape_reuse: expected 2 vars per layer");
    diff::Var h = batch;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        h = tape.add(tape.matmul(h, param_vars[2 * l]), param_vars[2 * l + 1]);
        if (l + 1 < weights_.size()) h = tape.relu(h);
    }
    return h;
}

std::vector<ParamTensor*> Mlp::parameters() {
    std::vector<ParamTensor*> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.push_back(&weights_[l]);
        out.push_back(&biases_[l]);
    }
    return out;
}

std::vector<const ParamTensor*> Mlp::parameters() const {
    std::vector<const ParamTensor*> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.push_back(&weights_[l]);
        out.push_back(&biases_[l]);
    }
    return out;
}

void Mlp::save(std::ostream& out) const {
    out.precision(17);
    out << kModelMagic << " v" << kModelVersion << "\n";
    out << "input_dim " << config_.input_dim << "\n";
    out << "hidden";
    for (std::size_t h : config_.hidden_sizes) out << ' ' << h;
    out << "\noutput_dim " << config_.output_dim << "\n";
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out << "layer " << l << ' ' << weights_[l].rows << ' ' << weights_[l].cols << "\n";
        out << "w";
        for (double v : weights_[l].value) out << ' ' << v;
        out << "\nb";
        for (double v : biases_[l].value) out << ' ' << v;
        out << "\n";
    }
}

Mlp Mlp::load(std::istream& in) {
    std::string magic, version;
    in >> magic >> version;
    if (magic != kModelMagic || version != "v" + std::to_string(kModelVersion))
        throw std::runtime_error("Mlp::load: unrecognized model header");
    MlpConfig cfg;
    std::string key;
    in >> key >> cfg.input_dim;
    in >> key;  // "hidden"
    std::string line;
    std::getline(in, line);
    {
        std::size_t p = 0;
        while (p < line.size()) {
            while (p < line.size() && line[p] == ' ') ++p;
            if (p >= line.size()) break;
            std::size_t consumed = 0;
            cfg.hidden_sizes.push_back(std::stoul(line.substr(p), &consumed));
            p += consumed;
        }
    }
    in >> key >> cfg.output_dim;
    Mlp mlp(cfg, 0);
    for (std::size_t l = 0; l < mlp.weights_.size(); ++l) {
        std::size_t idx, r, c;
        in >> key >> idx >> r >> c;
        if (key != "layer" || r != mlp.weights_[l].rows || c != mlp.weights_[l].cols)
            throw std::runtime_error("Mlp::load: layer shape mismatch");
        in >> key;
        for (double& v : mlp.weights_[l].value) in >> v;
        in >> key;
        for (double& v : mlp.biases_[l].value) in >> v;
    }
    if (!in) throw std::runtime_error("Mlp::load: truncated model file");
    return mlp;
}

void AdamOptimizer::step(const std::vector<ParamTensor*>& params,
                         const std::vector<std::vector<double>>& grads) {
    if (params.size() != grads.size())
        throw std::invalid_argument("AdamOptimizer: params/grads count mismatch");
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i]->value.size(), 0.0);
            v_[i].assign(params[i]->value.size(), 0.0);
        }
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i]->value;
        const auto& g = grads[i];
        if (g.size() != p.size())
            throw std::invalid_argument("AdamOptimizer: gradient size mismatch");
        for (std::size_t j = 0; j < p.size(); ++j) {
            m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g[j];
            v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g[j] * g[j];
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            p[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void TrainConfig::validate() const {
    if (epochs == 0 || batch_size == 0 || learning_rate <= 0.0)
        throw std::invalid_argument("TrainConfig: all fields must be positive");
}

TrainResult train_regression(const Matrix& inputs, const Matrix& targets,
                             const TrainConfig& config, const MlpConfig& mlp_config,
                             std::uint64_t seed) {
    config.validate();
    if (inputs.rows() == 0) throw std::invalid_argument("train_regression: empty dataset");
    if (inputs.rows() != targets.rows())
        throw std::invalid_argument("train_regression: input/target row mismatch");
    for (double v : inputs.data())
        if (!std::isfinite(v))
            throw std::invalid_argument("train_regression: non-finite input value");
    for (double v : targets.data())
        if (!std::isfinite(v))
            throw std::invalid_argument("train_regression: non-finite target value");

    Mlp mlp(mlp_config, derive_seed(seed, 0));
    AdamOptimizer adam(config.learning_rate);
    auto params = mlp.parameters();

    const std::size_t n = inputs.rows();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.shuffle_seed != 0 ? config.shuffle_seed : seed,
                                    epoch + 1));
        std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t count = std::min(config.batch_size, n - start);
            Matrix bx(count, inputs.cols());
            Matrix by(count, targets.cols());
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t src = order[start + i];
                for (std::size_t j = 0; j < inputs.cols(); ++j) bx(i, j) = inputs(src, j);
                for (std::size_t j = 0; j < targets.cols(); ++j) by(i, j) = targets(src, j);
            }
            diff::Tape tape;
            std::vector<diff::Var> pvars;
            diff::Var in = tape.leaf(count, inputs.cols(), bx.data());
            diff::Var pred = mlp.forward_tape(tape, in, pvars);
            diff::Var target = tape.leaf(count, targets.cols(), by.data());
            diff::Var loss = tape.mean(tape.square(tape.sub(pred, target)));
            tape.backward(loss);
            std::vector<std::vector<double>> grads;
            grads.reserve(pvars.size());
            for (diff::Var pv : pvars) grads.push_back(tape.grad(pv));
            adam.step(params, grads);
        }
    }

    Matrix pred = mlp.forward(inputs);
    double mse = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data()[i] - targets.data()[i];
        mse += d * d;
    }
    mse /= static_cast<double>(pred.size());
    return TrainResult{std::move(mlp), mse};
}

}  // namespace causalbound
