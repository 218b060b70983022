#include "csm/ad/layers.hpp"

#include <cmath>

#include "csm/error.hpp"

namespace csm::ad {

Tensor uniformInit(std::size_t rows, std::size_t cols, std::size_t fanIn, RngStream& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fanIn));
    Tensor t(rows, cols);
    for (auto& v : t.storage()) v = rng.uniform(-bound, bound);
    return t;
}

Linear Linear::create(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, RngStream& rng) {
    if (in == 0 || out == 0) throw InvalidArgument("linear layer '" + name + "' needs positive widths");
    Linear l;
    l.in = in;
    l.out = out;
    auto sub = rng.substream(name);
    l.weight = store.add(name + ".weight", uniformInit(in, out, in, sub));
    l.bias = store.add(name + ".bias", uniformInit(1, out, in, sub));
    return l;
}

Var Linear::operator()(Tape& tape, const ParameterStore& store, Var x) const {
    if (x.cols() != in)
        throw ShapeError("linear: input " + x.value().shapeString() + " does not match layer input width " + std::to_string(in));
    return matmul(x, tape.param(store, weight)) + tape.param(store, bias);
}

Mlp Mlp::create(ParameterStore& store, const std::string& name, const std::vector<std::size_t>& widths, RngStream& rng) {
    if (widths.size() < 2) throw InvalidArgument("mlp '" + name + "' needs at least input and output widths");
    Mlp m;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i)
        m.layers.push_back(Linear::create(store, name + "." + std::to_string(i), widths[i], widths[i + 1], rng));
    return m;
}

Var Mlp::operator()(Tape& tape, const ParameterStore& store, Var x) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        x = layers[i](tape, store, x);
        if (i + 1 < layers.size()) x = relu(x);
    }
    return x;
}

Var binaryCrossEntropy(Var probs, Var targets) {
    const Var p = clamp(probs, kProbEpsilon, 1.0 - kProbEpsilon);
    const Var q = clamp(1.0 - probs, kProbEpsilon, 1.0 - kProbEpsilon);
    return -mean(targets * log(p) + (1.0 - targets) * log(q));
}

Var categoricalCrossEntropy(Var probs, Var oneHotTargets, std::size_t group) {
    if (group == 0 || probs.cols() % group != 0)
        throw ShapeError("categorical cross-entropy: " + probs.value().shapeString() + " not divisible into groups of " +
                         std::to_string(group));
    const Var p = clamp(probs, kProbEpsilon, 1.0);
    // mean over all entries times group width = mean over (row, group) of the per-group sum
    return -static_cast<double>(group) * mean(oneHotTargets * log(p));
}

}  // namespace csm::ad
