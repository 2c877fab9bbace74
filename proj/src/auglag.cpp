#include "causalbound/auglag.hpp"

#include "causalbound/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace causalbound {

void AugLagConfig::validate() const {
    if (!(tau_init > 0.0) || tau_init > tau_max)
        throw std::invalid_argument("AugLagConfig: need 0 < tau_init <= tau_max");
    if (!(tau_growth > 1.0))
        throw std::invalid_argument("AugLagConfig: tau_growth must exceed 1");
    if (outer_rounds == 0 || inner_steps == 0)
        throw std::invalid_argument("AugLagConfig: round counts must be positive");
    if (!(learning_rate > 0.0))
        throw std::invalid_argument("AugLagConfig: learning_rate must be positive");
    if (!(feasibility_tol >= 0.0))
        throw std::invalid_argument("AugLagConfig: feasibility_tol must be >= 0");
}

double xi(double c, double lambda, double tau) {
    if (tau * c <= lambda) return -lambda * c + 0.5 * tau * c * c;
    return -lambda * lambda / (2.0 * tau);
}

diff::Var lagrangian(diff::Tape& tape, const ConstrainedProblem::Built& built,
                     const AugLagState& state, BoundDirection direction) {
    const auto& cvals = tape.value(built.constraints);
    if (cvals.size() != state.lambda.size())
        throw std::invalid_argument("lagrangian: constraint/lambda count mismatch");
    const std::size_t rows = tape.rows(built.constraints);
    const std::size_t cols = tape.cols(built.constraints);
    const double tau = state.tau;

    // The active branch (tau c <= lambda) is quadratic in c; the inactive
    // branch is constant, so it enters as a plain shift with zero gradient.
    std::vector<double> mask(cvals.size());
    double inactive = 0.0;
    for (std::size_t i = 0; i < cvals.size(); ++i) {
        if (tau * cvals[i] <= state.lambda[i]) {
            mask[i] = 1.0;
        } else {
            mask[i] = 0.0;
            inactive += -state.lambda[i] * state.lambda[i] / (2.0 * tau);
        }
    }
    diff::Var m = tape.leaf(rows, cols, mask);
    diff::Var lam = tape.leaf(rows, cols, state.lambda);
    diff::Var active = tape.sub(tape.scale(tape.square(built.constraints), 0.5 * tau),
                                tape.mul(lam, built.constraints));
    diff::Var penalty = tape.shift(tape.sum(tape.mul(m, active)), inactive);
    diff::Var obj = direction == BoundDirection::Lower ? built.objective
                                                       : tape.neg(built.objective);
    return tape.add(obj, penalty);
}

void outer_update(AugLagState& state, std::span<const double> c,
                  const AugLagConfig& config) {
    if (c.size() != state.lambda.size())
        throw std::invalid_argument("outer_update: constraint/lambda count mismatch");
    for (std::size_t i = 0; i < c.size(); ++i)
        state.lambda[i] = std::max(0.0, state.lambda[i] - state.tau * c[i]);
    state.tau = std::min(state.tau * config.tau_growth, config.tau_max);
}

AugLagResult solve(ConstrainedProblem& problem, const AugLagConfig& config,
                   std::uint64_t seed) {
    config.validate();
    AugLagResult result;
    AugLagState state;
    state.lambda.assign(problem.constraint_count(), 0.0);
    state.tau = config.tau_init;

    auto params = problem.parameters();
    AdamOptimizer adam(config.learning_rate);

    auto violation = [](const std::vector<double>& c) {
        double worst = 0.0;
        for (double v : c) worst = std::max(worst, -v);
        return worst;
    };

    for (std::size_t round = 0; round < config.outer_rounds; ++round) {
        for (std::size_t step = 0; step < config.inner_steps; ++step) {
            diff::Tape tape;
            auto built = problem.build(
                tape, derive_seed(seed, round * config.inner_steps + step));
            diff::Var sub = lagrangian(tape, built, state, config.direction);
            if (!std::isfinite(tape.value_scalar(sub))) {
                result.aborted = true;
                result.max_violation = violation(tape.value(built.constraints));
                return result;
            }
            tape.backward(sub);
            std::vector<std::vector<double>> grads;
            grads.reserve(built.params.size());
            for (diff::Var v : built.params) grads.push_back(tape.grad(v));
            adam.step(params, grads);
        }
        // Fresh evaluation at the post-inner-loop iterate for the
        // multiplier update and the diagnostics trace.
        diff::Tape tape;
        auto built = problem.build(tape, derive_seed(seed, 1000000 + round));
        const std::vector<double> c = tape.value(built.constraints);
        result.trace.push_back(TraceRow{round, tape.value_scalar(built.objective),
                                        violation(c), state.tau});
        const bool last = round + 1 == config.outer_rounds;
        if (last) {
            result.bound = tape.value_scalar(built.objective);
            result.max_violation = violation(c);
        }
        outer_update(state, c, config);
    }

    result.feasible = result.max_violation <= config.feasibility_tol;
    double l2 = 0.0;
    for (double v : state.lambda) l2 += v * v;
    result.lambda_norm = std::sqrt(l2);
    return result;
}

}  // namespace causalbound
