#pragma once

#include "causalbound/diffcore.hpp"
#include "causalbound/neuralnet.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace causalbound {

enum class BoundDirection { Lower, Upper };

// A differentiable objective o and inequality constraints c >= 0, rebuilt
// on a fresh tape per evaluation (Monte-Carlo terms may resample under
// eval_seed). parameters() and Built.params list the same tensors in the
// same order.
class ConstrainedProblem {
  public:
    virtual ~ConstrainedProblem() = default;

    struct Built {
        diff::Var objective;    // scalar, sign not applied
        diff::Var constraints;  // any shape; entries are the c values
        std::vector<diff::Var> params;
    };

    virtual std::size_t constraint_count() const = 0;
    virtual std::vector<ParamTensor*> parameters() = 0;
    virtual Built build(diff::Tape& tape, std::uint64_t eval_seed) = 0;
};

struct AugLagConfig {
    double tau_init = 10.0;
    double tau_max = 10000.0;
    double tau_growth = 1.08;
    std::size_t outer_rounds = 150;
    std::size_t inner_steps = 30;
    double learning_rate = 0.001;
    BoundDirection direction = BoundDirection::Lower;
    double feasibility_tol = 1e-2;  // allowed final max violation

    void validate() const;
};

struct AugLagState {
    std::vector<double> lambda;  // >= 0 elementwise, one per constraint
    double tau = 10.0;
};

struct TraceRow {
    std::size_t round = 0;
    double objective = 0.0;
    double max_violation = 0.0;
    double tau = 0.0;
};

struct AugLagResult {
    double bound = 0.0;           // objective at the final iterate
    bool feasible = false;        // max_violation <= feasibility_tol
    bool aborted = false;         // non-finite subproblem value encountered
    double max_violation = 0.0;   // max(0, -min c) at the final iterate
    double lambda_norm = 0.0;
    std::vector<TraceRow> trace;  // one row per outer round
};

// Penalty term of the subproblem: -lambda c + tau c^2 / 2 while
// tau c <= lambda, flat -lambda^2 / (2 tau) beyond; C1 at the switch.
double xi(double c, double lambda, double tau);

// Subproblem assembled on the tape holding (lambda, tau) fixed. Minimize
// mode adds +objective, maximize mode -objective; the solver always
// minimizes the result.
diff::Var lagrangian(diff::Tape& tape, const ConstrainedProblem::Built& built,
                     const AugLagState& state, BoundDirection direction);

// lambda_l <- max{0, lambda_l - tau c_l}; tau <- min(tau * growth, tau_max).
void outer_update(AugLagState& state, std::span<const double> c,
                  const AugLagConfig& config);

// outer_rounds x (inner_steps of Adam on the subproblem, then outer_update).
// Adam moments persist across rounds; the final-round iterate is returned
// in place inside the problem's parameters.
AugLagResult solve(ConstrainedProblem& problem, const AugLagConfig& config,
                   std::uint64_t seed);

}  // namespace causalbound
