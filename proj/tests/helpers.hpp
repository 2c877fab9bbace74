#pragma once

#include "causalbound/condflow.hpp"
#include "causalbound/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace causalbound::testutil {

// Builds an affine model with constant parameters by serializing a
// zeroed-out conditioner whose output biases encode b and L, then loading
// it through the public model format. A = L^T L + 1e-4 I.
inline ConditionalInvertibleModel make_constant_affine(std::size_t p, std::size_t q,
                                                       const std::vector<double>& b,
                                                       double a_diag) {
    const std::size_t npack = p * (p + 1) / 2;
    Mlp net(MlpConfig{q, {4}, p + npack}, 1);
    for (auto* t : net.parameters()) t->value.assign(t->value.size(), 0.0);
    const double l_diag = std::sqrt(a_diag - 1e-4);
    auto& bias = net.output_biases().value;
    for (std::size_t d = 0; d < p; ++d) {
        bias[d] = b[d];
        bias[p + d * (d + 1) / 2 + d] = l_diag;
    }
    std::stringstream ss;
    ss << "causalbound-flow v1\naffine " << p << ' ' << q << " 0\n0\n";
    for (std::size_t c = 0; c < q; ++c) ss << "0 ";
    ss << '\n';
    for (std::size_t c = 0; c < q; ++c) ss << "1 ";
    ss << '\n';
    net.save(ss);
    return ConditionalInvertibleModel::load(ss);
}

inline ConditionalInvertibleModel make_identity_spline(std::size_t p, std::size_t q) {
    std::stringstream ss;
    ss << "causalbound-flow v1\nspline " << p << ' ' << q << " 0\n0\n";
    for (std::size_t c = 0; c < q; ++c) ss << "0 ";
    ss << '\n';
    for (std::size_t c = 0; c < q; ++c) ss << "1 ";
    ss << "\n8 5\n";
    for (std::size_t d = 0; d < p; ++d) ss << "0 ";
    ss << '\n';
    for (std::size_t d = 0; d < p; ++d) ss << "1 ";
    ss << '\n';
    for (std::size_t d = 0; d < p; ++d) {
        Mlp net(MlpConfig{q + d, {4}, 23}, 7 + d);
        auto& w = net.output_weights().value;
        std::fill(w.begin(), w.end(), 0.0);
        net.save(ss);
    }
    return ConditionalInvertibleModel::load(ss);
}

}  // namespace causalbound::testutil
