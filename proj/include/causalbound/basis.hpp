#pragma once

#include "causalbound/matrix.hpp"
#include "causalbound/neuralnet.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace causalbound {

enum class BasisKind { Polynomial, Neural };

// Fixed family psi: R^p -> R^K whose span hosts the response functions
// f_theta(x) = theta' psi(x); linear in theta by construction.
class ResponseBasis {
  public:
    // {1} then {x_i} ascending then {x_i x_j, i <= j} in lexicographic
    // (i, j) order; K = p(p+3)/2 + 1.
    static ResponseBasis polynomial(std::size_t p);

    // Trains an MLP with hidden layers (64, 64, K) on (x -> y) and exposes
    // the last hidden layer's activations as psi. The trained readout is
    // kept as an initial guess for the response coefficients.
    static ResponseBasis neural(const Matrix& x, const Matrix& y, std::size_t K,
                                const TrainConfig& config, std::uint64_t seed);

    std::vector<double> evaluate(std::span<const double> x) const;

    std::size_t size() const { return k_; }
    std::size_t treatment_dim() const { return p_; }
    BasisKind kind() const { return kind_; }

    // Neural only: readout weights/bias of the backing net, so that
    // theta' psi(x) + bias reproduces the full MLP exactly.
    const std::vector<double>& initial_theta() const;
    double initial_bias() const;
    double training_mse() const;

    void save(std::ostream& out) const;
    static ResponseBasis load(std::istream& in);

  private:
    BasisKind kind_ = BasisKind::Polynomial;
    std::size_t p_ = 0, k_ = 0;
    Mlp net_;
    std::vector<double> theta_;
    double bias_ = 0.0;
    double mse_ = 0.0;
};

}  // namespace causalbound
