#pragma once

#include "causalbound/matrix.hpp"
#include "causalbound/neuralnet.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace causalbound {

enum class FlowVariant { Affine, Spline };

struct FlowTrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 512;
    double learning_rate = 0.01;
    std::vector<std::size_t> hidden_sizes = {64, 32, 16};

    void validate() const;
};

struct AffineParams {
    std::vector<double> b;  // p
    Matrix a;               // p x p, symmetric positive definite
};

// Conditional invertible model x = h_z(n) with n ~ N(0, I_p) and an exact
// inverse. Affine variant: x = A(z) n + b(z) with A = L^T L + omega I.
// Spline variant: per-dimension monotone rational-quadratic spline in the
// normalizing direction, autoregressive across dimensions (the conditioner
// for dimension d sees z and x_{<d}); linear tails outside [-R, R] in
// standardized coordinates make the map globally invertible.
class ConditionalInvertibleModel {
  public:
    static ConditionalInvertibleModel fit(FlowVariant variant, const Matrix& condition,
                                          const Matrix& variable,
                                          const FlowTrainConfig& config,
                                          std::uint64_t seed);

    std::vector<double> sample(std::span<const double> z,
                               std::span<const double> n) const;
    std::vector<double> invert(std::span<const double> z,
                               std::span<const double> x) const;

    double log_likelihood(std::span<const double> z, std::span<const double> x) const;
    double mean_log_likelihood(const Matrix& condition, const Matrix& variable) const;

    FlowVariant variant() const { return variant_; }
    std::size_t variable_dim() const { return p_; }
    std::size_t condition_dim() const { return q_; }
    double final_mean_log_likelihood() const { return final_ll_; }

    // Uniform-noise view: sample takes u in (0,1) per coordinate and maps it
    // through the standard-normal quantile; invert returns the normal cdf of
    // the Gaussian noise. Densities are unaffected.
    bool uniform_noise() const { return uniform_noise_; }

    AffineParams affine_params(std::span<const double> z) const;

    void save(std::ostream& out) const;
    static ConditionalInvertibleModel load(std::istream& in);

  private:
    friend ConditionalInvertibleModel one_dim_cdf_variant(const Matrix&, const Matrix&,
                                                          const FlowTrainConfig&,
                                                          std::uint64_t);

    struct SplineKnots {
        std::vector<double> xk, yk, d;  // bins+1 knots and derivatives
    };
    SplineKnots knots_from_raw(std::span<const double> raw) const;
    std::vector<double> conditioner_input(std::span<const double> z,
                                          std::span<const double> x_std,
                                          std::size_t dim) const;

    FlowVariant variant_ = FlowVariant::Affine;
    std::size_t p_ = 0, q_ = 0;
    bool uniform_noise_ = false;
    double final_ll_ = 0.0;
    std::vector<double> cond_mean_, cond_std_;  // condition standardization
    // Affine
    Mlp affine_net_;
    // Spline
    std::vector<Mlp> spline_nets_;              // one per variable dimension
    std::vector<double> var_mean_, var_std_;    // variable standardization
};

// Inverse-cdf parameterization for a scalar variable: the fitted flow with
// uniform noise, so sample(z, u) realizes F^{-1}_{x|z}(u).
ConditionalInvertibleModel one_dim_cdf_variant(const Matrix& condition,
                                               const Matrix& variable,
                                               const FlowTrainConfig& config,
                                               std::uint64_t seed);

double normal_cdf(double x);
double normal_quantile(double u);

}  // namespace causalbound
