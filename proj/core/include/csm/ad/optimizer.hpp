#pragma once

#include <cstdint>
#include <vector>

#include "csm/ad/tape.hpp"

namespace csm::ad {

struct AdamWOptions {
    double learningRate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weightDecay = 1e-2;
};

/// Moment accumulators for AdamW with decoupled weight decay.
struct OptimizerState {
    AdamWOptions options;
    std::uint64_t step = 0;
    std::vector<Tensor> firstMoment;
    std::vector<Tensor> secondMoment;

    OptimizerState() = default;
    OptimizerState(const ParameterStore& params, AdamWOptions opts);
};

/// One AdamW update. Parameters absent from `grads` are treated as having a
/// zero gradient (their moments still decay and weight decay still applies).
/// Throws NonFiniteError naming the parameter if a gradient is NaN or infinite.
void adamwStep(ParameterStore& params, const GradientMap& grads, OptimizerState& state);

}  // namespace csm::ad
