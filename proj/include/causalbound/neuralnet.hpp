#pragma once

#include "causalbound/diffcore.hpp"
#include "causalbound/matrix.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace causalbound {

struct MlpConfig {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden_sizes;
    std::size_t output_dim = 1;

    void validate() const;
};

struct ParamTensor {
    std::size_t rows = 0, cols = 0;
    std::vector<double> value;
};

// Fully connected net: affine + ReLU on hidden layers, identity output.
// Weights are stored as [in x out] so a batch forward is x * W + b.
class Mlp {
  public:
    Mlp() = default;
    Mlp(const MlpConfig& config, std::uint64_t seed);

    const MlpConfig& config() const { return config_; }
    std::size_t layer_count() const { return weights_.size(); }

    Matrix forward(const Matrix& batch) const;
    std::vector<double> forward_one(std::span<const double> x) const;

    // Post-ReLU activations of the last hidden layer.
    std::vector<double> hidden_activations(std::span<const double> x) const;

    // Records the forward pass on a tape. Parameters are pushed as leaves;
    // their Vars are appended to param_vars in the same order as
    // parameters() so gradients can be read back after backward().
    diff::Var forward_tape(diff::Tape& tape, diff::Var batch,
                           std::vector<diff::Var>& param_vars) const;

    // Same pass against parameter leaves pushed earlier (2 per layer,
    // weight then bias), so several forwards can share one gradient.
    diff::Var forward_tape_reuse(diff::Tape& tape, diff::Var batch,
                                 std::span<const diff::Var> param_vars) const;

    std::vector<ParamTensor*> parameters();
    std::vector<const ParamTensor*> parameters() const;

    ParamTensor& output_weights() { return weights_.back(); }
    ParamTensor& output_biases() { return biases_.back(); }
    const ParamTensor& output_weights() const { return weights_.back(); }
    const ParamTensor& output_biases() const { return biases_.back(); }

    void save(std::ostream& out) const;
    static Mlp load(std::istream& in);

  private:
    MlpConfig config_;
    std::vector<ParamTensor> weights_;
    std::vector<ParamTensor> biases_;
};

// Adam with bias correction; beta1=0.9, beta2=0.999, eps=1e-8.
class AdamOptimizer {
  public:
    explicit AdamOptimizer(double learning_rate) : lr_(learning_rate) {}

    // grads must parallel params (same order, same sizes).
    void step(const std::vector<ParamTensor*>& params,
              const std::vector<std::vector<double>>& grads);

    long step_count() const { return step_; }
    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

  private:
    double lr_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long step_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 512;
    double learning_rate = 0.01;
    std::uint64_t shuffle_seed = 0;

    void validate() const;
};

struct TrainResult {
    Mlp mlp;
    double final_mse = 0.0;
};

// Minibatch Adam on mean squared error. Shuffles each epoch with a
// per-epoch derived seed; the last partial batch is used.
TrainResult train_regression(const Matrix& inputs, const Matrix& targets,
                             const TrainConfig& config, const MlpConfig& mlp_config,
                             std::uint64_t seed);

}  // namespace causalbound
