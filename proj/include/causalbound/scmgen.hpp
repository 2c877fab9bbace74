#pragma once

#include "causalbound/matrix.hpp"
#include "causalbound/neuralnet.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace causalbound {

enum class ScmKind { IV, LM };

enum class ScmName {
    IvLin1dWeakAdd,
    IvQuad1dStrong,
    IvQuad1dWeak,
    IvLin2dStrong,
    IvLin2dWeak,
    IvQuad2dStrongAdd,
    IvQuad2dWeak,
    IvQuad3dWeak,
    LmLin1_2d,  // a.k.a. LM-lin-2d-strong
    LmLin2_2d,  // a.k.a. LM-lin-2d-weak
};

// Throws with the list of valid names on an unknown string. Accepts the
// LM-lin-2d-strong/weak aliases.
ScmName parse_scm_name(const std::string& name);
std::string scm_name_string(ScmName name);
ScmKind scm_kind(ScmName name);
std::vector<std::string> all_scm_names();

// Observed samples only; confounders are discarded at generation time.
struct Dataset {
    ScmKind kind = ScmKind::IV;
    std::string name;
    Matrix cond;  // IV: instruments z [n x q]; LM: treatments x [n x q]
    Matrix resp;  // IV: treatments x [n x p]; LM: mediators m [n x p]
    std::vector<double> y;
    std::uint64_t seed = 0;

    std::size_t n() const { return y.size(); }
    std::size_t p() const { return resp.cols(); }
    std::size_t q() const { return cond.cols(); }
    // The variable intervened on: x in both settings.
    const Matrix& treatment() const { return kind == ScmKind::IV ? resp : cond; }
    std::size_t treatment_dim() const { return treatment().cols(); }
};

Dataset generate(ScmName name, std::size_t n, std::uint64_t seed);

// E[Y | do(X = x_star)] in closed form. The closed forms are validated
// against true_effect_mc in the test suite before being trusted.
double true_effect(ScmName name, std::span<const double> x_star);

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

// Monte-Carlo oracle: simulate the SCM with X forced to x_star.
McEstimate true_effect_mc(ScmName name, std::span<const double> x_star,
                          std::size_t draws, std::uint64_t seed);

// Trains Y-on-treatment MLP and evaluates on the grid rows (each row a
// full treatment vector). Assumes no confounding; used as a baseline.
struct NaiveCurve {
    Mlp mlp;
    std::vector<double> predictions;
};

NaiveCurve naive_regression_curve(const Dataset& dataset, const Matrix& x_grid,
                                  const MlpConfig& mlp_config,
                                  const TrainConfig& train_config, std::uint64_t seed);

void write_csv(const Dataset& dataset, std::ostream& out);
Dataset read_csv(std::istream& in);

}  // namespace causalbound
