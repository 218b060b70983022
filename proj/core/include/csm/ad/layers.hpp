#pragma once

#include <string>
#include <vector>

#include "csm/ad/rng.hpp"
#include "csm/ad/tape.hpp"

namespace csm::ad {

/// Uniform in [-1/sqrt(fanIn), 1/sqrt(fanIn)].
Tensor uniformInit(std::size_t rows, std::size_t cols, std::size_t fanIn, RngStream& rng);

/// y = x W + b with W (in x out) and b (1 x out).
struct Linear {
    ParamId weight = 0;
    ParamId bias = 0;
    std::size_t in = 0;
    std::size_t out = 0;

    static Linear create(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, RngStream& rng);
    Var operator()(Tape& tape, const ParameterStore& store, Var x) const;
};

/// Stack of Linear layers with ReLU between them (not after the last).
struct Mlp {
    std::vector<Linear> layers;

    /// widths = {in, hidden..., out}.
    static Mlp create(ParameterStore& store, const std::string& name, const std::vector<std::size_t>& widths, RngStream& rng);
    Var operator()(Tape& tape, const ParameterStore& store, Var x) const;

    std::size_t inWidth() const { return layers.front().in; }
    std::size_t outWidth() const { return layers.back().out; }
};

/// Probabilities clamped away from {0,1} before the log.
inline constexpr double kProbEpsilon = 1e-12;

/// Elementwise binary cross-entropy -[t log p + (1-t) log(1-p)], averaged over all entries.
Var binaryCrossEntropy(Var probs, Var targets);
/// Categorical cross-entropy over consecutive column groups, averaged over rows and groups.
Var categoricalCrossEntropy(Var probs, Var oneHotTargets, std::size_t group);

}  // namespace csm::ad
