#pragma once

#include "causalbound/auglag.hpp"
#include "causalbound/basis.hpp"
#include "causalbound/condflow.hpp"
#include "causalbound/matrix.hpp"
#include "causalbound/neuralnet.hpp"
#include "causalbound/scmgen.hpp"

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

namespace causalbound {

enum class ProgramVariant { IV, LM };
enum class NormKind { Sup, Two };

struct EtaModelConfig {
    std::size_t noise_dim = 1;   // p for IV; q + p (treatment, mediator noise) for LM
    std::size_t basis_size = 1;  // K
    double omega = 1e-4;
};

// Conditional distribution of response coefficients: noise -> first two
// moments. mu-net hidden (16,16) -> K; Sigma-net hidden (32,32) -> packed
// Cholesky entries, Sigma = L^T L + omega I (always positive definite).
// Initialized so mu(n) is approximately theta_init and Sigma near omega I.
class EtaModel {
  public:
    EtaModel() = default;
    EtaModel(const EtaModelConfig& config, std::span<const double> theta_init,
             std::uint64_t seed);

    const EtaModelConfig& config() const { return config_; }

    std::vector<double> mu(std::span<const double> noise) const;
    Matrix sigma(std::span<const double> noise) const;  // K x K

    std::vector<ParamTensor*> parameters();

    // Tape access: push_params records all parameters once (mu-net layers
    // then Sigma-net layers); the batch evaluators reuse those leaves.
    std::vector<diff::Var> push_params(diff::Tape& tape) const;
    diff::Var mu_tape(diff::Tape& tape, diff::Var noise_batch,
                      std::span<const diff::Var> params) const;  // B x K
    diff::Var lpack_tape(diff::Tape& tape, diff::Var noise_batch,
                         std::span<const diff::Var> params) const;  // B x K(K+1)/2

    void save(std::ostream& out) const;
    static EtaModel load(std::istream& in);

  private:
    EtaModelConfig config_;
    Mlp mu_net_, sigma_net_;
};

struct MomentRegressors {
    Mlp phi1, phi2;  // (treatment-side, condition-side) -> y and y^2
    double holdout_rmse = 0.0;

    // Slack suggestion: twice the held-out RMSE of phi1, so the constraint
    // slack absorbs regressor estimation error.
    double suggested_epsilon() const { return 2.0 * holdout_rmse; }
};

// Fits y and y^2 regressors on [resp, cond] rows (x,z for IV; m,x for LM)
// with a 90/10 train/holdout split; the holdout only feeds holdout_rmse.
MomentRegressors fit_moment_regressors(const Dataset& ds, const TrainConfig& config,
                                       std::uint64_t seed);

struct MomentTargets {
    std::vector<std::size_t> support;  // M indices into the dataset
    Matrix psi;                        // M x K, basis at the response argument
    Matrix noise;                      // M x noise_dim, eta-model inputs
    Matrix b;                          // 2 x M, regression targets B_{l,j}

    std::size_t count() const { return support.size(); }
};

// One-time cache shared across every x*: uniform support subsample without
// replacement, recovered noises n_j, basis vectors, and moment targets.
// IV: noise = h^{-1}_{z_j}(x_j), psi at x_j. LM: noise = [x_j, h^{-1}_{x_j}(m_j)],
// psi at m_j.
MomentTargets build_targets(const Dataset& ds, const ConditionalInvertibleModel& h,
                            const MomentRegressors& regressors,
                            const ResponseBasis& basis, std::size_t m,
                            std::uint64_t seed);

// Target variance implied by the cached moments, with B2 clipped below at
// B1^2 + 1e-6 to absorb regressor noise (diagnostics only; raw B feeds nu).
double target_variance(const MomentTargets& targets, std::size_t j);

// A1 = psi' mu(n_j); A2 = psi' (Sigma(n_j) + mu mu') psi. A2 >= A1^2 always.
std::pair<double, double> implied_moments(const EtaModel& eta,
                                          const MomentTargets& targets, std::size_t j);

// nu_{l,j} = B_{l,j} - A_{l,j}(eta), shape 2 x M.
Matrix constraint_matrix(const EtaModel& eta, const MomentTargets& targets);

// Sup mode: 2M values epsilon - |nu_{l,j}| (l-major). Two mode: the single
// value epsilon - ||nu||_{2,2}.
std::vector<double> constraint_scalars(const Matrix& nu, NormKind norm, double epsilon);

// psi(x*)' E_N[mu(N)] by B_mc standard-normal draws.
double objective_iv(const EtaModel& eta, std::span<const double> x_star,
                    const ResponseBasis& basis, std::size_t b_mc, std::uint64_t seed);

// Leaky-mediator interventional mean: resample observed treatments for the
// first noise input, draw mediator noise fresh, push it through h at x*,
// and average mu(n_x, n_m)' psi(m).
double objective_lm(const EtaModel& eta, std::span<const double> x_star,
                    const ResponseBasis& basis, const ConditionalInvertibleModel& h_m,
                    std::size_t b_mc, const Dataset& ds, std::uint64_t seed);

// Moment-matched warm start: full-batch Adam on the squared residuals of the
// implied moments A_1, A_2 against B_1, B_2. Starting the solver feasible-ish
// keeps the early outer rounds from distorting the mean model during
// feasibility restoration.
void pretrain_eta(EtaModel& eta, const MomentTargets& targets, std::size_t steps,
                  double learning_rate);

// Least-squares coefficients of y on psi(response argument); used to seed
// the eta-model mean for the polynomial basis (the neural basis carries
// its own readout).
std::vector<double> initial_theta(const ResponseBasis& basis, const Dataset& ds);

struct CausalProgramConfig {
    ProgramVariant variant = ProgramVariant::IV;
    NormKind norm = NormKind::Sup;
    double epsilon = 0.1;
    std::size_t b_mc = 500;
    std::vector<double> x_star;
};

// One bound run: owns its mutable EtaModel; everything else is shared
// read-only, so instances can run on parallel workers.
class CausalProgram final : public ConstrainedProblem {
  public:
    CausalProgram(CausalProgramConfig config, const ResponseBasis* basis,
                  const MomentTargets* targets, EtaModel eta,
                  const ConditionalInvertibleModel* h_m = nullptr,
                  const Dataset* dataset = nullptr);

    std::size_t constraint_count() const override;
    std::vector<ParamTensor*> parameters() override;
    Built build(diff::Tape& tape, std::uint64_t eval_seed) override;

    const CausalProgramConfig& config() const { return config_; }
    EtaModel& eta() { return eta_; }
    const EtaModel& eta() const { return eta_; }

    double objective_value(std::uint64_t seed) const;

  private:
    diff::Var objective_tape(diff::Tape& tape, std::span<const diff::Var> params,
                             std::uint64_t eval_seed) const;

    CausalProgramConfig config_;
    const ResponseBasis* basis_;
    const MomentTargets* targets_;
    EtaModel eta_;
    const ConditionalInvertibleModel* h_m_;
    const Dataset* dataset_;
    // Constants reused by every build: packed psi replication, the
    // lower-triangular row-group selector, and omega ||psi_j||^2.
    Matrix ppack_;   // M x npack
    Matrix sel_;     // npack x K
    Matrix psin2_;   // M x 1
};

}  // namespace causalbound
