#include "csm/ad/optimizer.hpp"

#include <cmath>

#include "csm/error.hpp"

namespace csm::ad {

OptimizerState::OptimizerState(const ParameterStore& params, AdamWOptions opts) : options(opts) {
    firstMoment.reserve(params.size());
    secondMoment.reserve(params.size());
    for (const auto& p : params.all()) {
        firstMoment.emplace_back(p.value.rows(), p.value.cols());
        secondMoment.emplace_back(p.value.rows(), p.value.cols());
    }
}

void adamwStep(ParameterStore& params, const GradientMap& grads, OptimizerState& state) {
    if (state.firstMoment.size() != params.size())
        throw ShapeError("optimizer state tracks " + std::to_string(state.firstMoment.size()) + " parameters, store has " +
                         std::to_string(params.size()));
    for (const auto& [id, g] : grads) {
        if (id >= params.size()) throw ShapeError("gradient for unknown parameter id " + std::to_string(id));
        if (!g.sameShape(params.value(id)))
            throw ShapeError("gradient for '" + params.name(id) + "' has shape " + g.shapeString() + ", parameter is " +
                             params.value(id).shapeString());
        if (!g.allFinite()) throw NonFiniteError("non-finite gradient for parameter '" + params.name(id) + "'");
    }

    const auto& o = state.options;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(o.beta1, t);
    const double bias2 = 1.0 - std::pow(o.beta2, t);
    const double decay = 1.0 - o.learningRate * o.weightDecay;

    for (ParamId id = 0; id < params.size(); ++id) {
        auto theta = params.value(id).data();
        auto m = state.firstMoment[id].data();
        auto v = state.secondMoment[id].data();
        auto it = grads.find(id);
        const double* g = it == grads.end() ? nullptr : it->second.data().data();
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double gi = g ? g[i] : 0.0;
            theta[i] *= decay;
            m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * gi;
            v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * gi * gi;
            const double mhat = m[i] / bias1;
            const double vhat = v[i] / bias2;
            theta[i] -= o.learningRate * mhat / (std::sqrt(vhat) + o.epsilon);
        }
    }
}

}  // namespace csm::ad
