#include <cmath>
#include <functional>

#include "csm/ad/layers.hpp"
#include "csm/ad/rng.hpp"
#include "csm/ad/tape.hpp"
#include "csm/error.hpp"
#include "doctest.h"
#include "support/gradcheck.hpp"

using namespace csm::ad;

TEST_CASE("x*x at 3 has derivative 6") {
    ParameterStore store;
    const auto x = store.add("x", Tensor::scalar(3.0));
    Tape tape;
    const Var xv = tape.param(store, x);
    const Var f = xv * xv;
    CHECK(f.value()[0] == 9.0);
    const auto grads = tape.backward(f);
    CHECK(grads.at(x)[0] == 6.0);
}

TEST_CASE("stop-gradient blocks the upstream path exactly") {
    ParameterStore store;
    const auto x = store.add("x", Tensor::scalar(1.7));
    const auto w = store.add("w", Tensor::scalar(-0.4));
    Tape tape;
    const Var xv = tape.param(store, x);
    const Var blocked = stopGradient(xv);
    CHECK(blocked.value() == xv.value());
    const Var f = blocked * tape.param(store, w);
    const auto grads = tape.backward(f);
    CHECK(grads.at(x)[0] == 0.0);
    CHECK(grads.at(w)[0] == doctest::Approx(1.7));
}

TEST_CASE("parameters with no path to the loss receive exact zeros") {
    ParameterStore store;
    const auto a = store.add("a", Tensor::row({1.0, 2.0}));
    const auto b = store.add("b", Tensor::row({3.0, 4.0}));
    Tape tape;
    const Var av = tape.param(store, a);
    tape.param(store, b);
    const auto grads = tape.backward(sum(av));
    REQUIRE(grads.count(b) == 1);
    CHECK(grads.at(b) == Tensor::row({0.0, 0.0}));
    CHECK(grads.at(a) == Tensor::row({1.0, 1.0}));
}

TEST_CASE("shape mismatches name the primitive and shapes") {
    Tape tape;
    const Var a = tape.constant(Tensor(2, 3));
    const Var b = tape.constant(Tensor(4, 5));
    try {
        matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const csm::ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("matmul") != std::string::npos);
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x5]") != std::string::npos);
    }
    CHECK_THROWS_AS(a + b, csm::ShapeError);
    CHECK_THROWS_AS(sliceCols(a, 2, 2), csm::ShapeError);
    CHECK_THROWS_AS(softmaxGroups(a, 2), csm::ShapeError);
    CHECK_THROWS_AS(tape.backward(a), csm::ShapeError);
}

TEST_CASE("broadcasting over rows and columns") {
    Tape tape;
    const Var m = tape.constant(Tensor::fromRows({{1, 2, 3}, {4, 5, 6}}));
    const Var rowv = tape.constant(Tensor::fromRows({{10, 20, 30}}));
    const Var colv = tape.constant(Tensor::fromRows({{2}, {3}}));
    CHECK((m + rowv).value() == Tensor::fromRows({{11, 22, 33}, {14, 25, 36}}));
    CHECK((m * colv).value() == Tensor::fromRows({{2, 4, 6}, {12, 15, 18}}));
}

TEST_CASE("grouped softmax, sums and products") {
    Tape tape;
    const Var x = tape.constant(Tensor::fromRows({{0, 0, 1000, 1000}}));
    const Var s = softmaxGroups(x, 2);
    CHECK(s.value() == Tensor::fromRows({{0.5, 0.5, 0.5, 0.5}}));
    const Var y = tape.constant(Tensor::fromRows({{1, 2, 3, 4, 5, 6}}));
    CHECK(sumGroups(y, 3).value() == Tensor::fromRows({{6, 15}}));
    CHECK(prodGroups(y, 2).value() == Tensor::fromRows({{2, 12, 30}}));
}

TEST_CASE("replaying a tape reproduces forward values bit-exactly") {
    RngStream rng(11, "replay");
    ParameterStore store;
    const auto net = Mlp::create(store, "net", {4, 6, 3}, rng);
    Tape tape;
    const Var x = tape.constant(Tensor({5, 4}, rng.gaussianVector(20)));
    const Var out = softmax(net(tape, store, x));
    const Var loss = mean(log(out));
    CHECK(tape.replay(out) == out.value());
    CHECK(tape.replay(loss) == loss.value());
}

TEST_CASE("random two-layer MLP gradients match central differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        RngStream rng(seed, "mlp-fd");
        ParameterStore store;
        const auto net = Mlp::create(store, "net", {3, 5, 2}, rng);
        Tape tape;
        const Var x = tape.constant(Tensor({4, 3}, rng.gaussianVector(12)));
        const Var targets = tape.constant(Tensor({4, 2}, rng.bernoulliVector(8, 0.5)));
        const Var loss = binaryCrossEntropy(sigmoid(net(tape, store, x)), targets);
        const auto result = csm::testing::gradCheck(tape, loss, store, tape.backward(loss));
        INFO("seed " << seed << " worst " << result.worst);
        CHECK(result.maxRelError < 1e-4);
    }
}

namespace {

// Builds loss = sum(weights * primitive(inputs)) so every output entry of the
// primitive contributes with a distinct random weight.
using PrimitiveBuilder = std::function<Var(Tape&, const ParameterStore&, ParamId, ParamId)>;

double primitiveFdError(std::uint64_t seed, const PrimitiveBuilder& build, std::size_t rows, std::size_t cols,
                        bool positive = false) {
    RngStream rng(seed, "primitive");
    ParameterStore store;
    auto draw = [&](std::size_t r, std::size_t c) {
        Tensor t(r, c);
        for (auto& v : t.storage()) v = positive ? rng.uniform(0.2, 2.0) : rng.gaussian();
        return t;
    };
    const auto a = store.add("a", draw(rows, cols));
    const auto b = store.add("b", draw(rows, cols));
    Tape tape;
    const Var out = build(tape, store, a, b);
    const Var w = tape.constant(Tensor({out.rows(), out.cols()}, rng.gaussianVector(out.value().size())));
    const Var loss = sum(out * w);
    return csm::testing::gradCheck(tape, loss, store, tape.backward(loss)).maxRelError;
}

}  // namespace

TEST_CASE("every primitive matches central differences on 100 seeds") {
    const std::vector<std::pair<std::string, PrimitiveBuilder>> cases = {
        {"add", [](Tape& t, const ParameterStore& s, ParamId a, ParamId b) { return t.param(s, a) + t.param(s, b); }},
        {"sub", [](Tape& t, const ParameterStore& s, ParamId a, ParamId b) { return t.param(s, a) - t.param(s, b); }},
        {"mul", [](Tape& t, const ParameterStore& s, ParamId a, ParamId b) { return t.param(s, a) * t.param(s, b); }},
        {"mul-broadcast",
         [](Tape& t, const ParameterStore& s, ParamId a, ParamId b) { return t.param(s, a) * sliceCols(t.param(s, b), 1, 1); }},
        {"affine", [](Tape& t, const ParameterStore& s, ParamId a, ParamId) { return affine(t.param(s, a), -1.5, 0.25); }},
        {"matmul",
         [](Tape& t, const ParameterStore& s, ParamId a, ParamId b) {
             return matmul(t.param(s, a), reshape(t.param(s, b), 4, 3));
         }},
        {"concat",
         [](Tape& t, const ParameterStore& s, ParamId a, ParamId b) {
             const Var parts[] = {t.param(s, a), t.param(s, b)};
             return concatCols(parts);
         }},
        {"slice", [](Tape& t, const ParameterStore& s, ParamId a, ParamId) { return sliceCols(t.param(s, a), 1, 2); }},
        {"gather", [](Tape& t, const ParameterStore& s, ParamId a, ParamId) { return gatherCols(t.param(s, a), {3, 0, 3, 1}); }},
        {"relu", [](Tape& t, const ParameterStore& s, ParamId a, ParamId) { return relu(t.param(s, a)); }},
        {"sigmoid", [](Tape& t, const ParameterStore& s, ParamId a, ParamId) { return sigmoid(t.param(s, a)); }},
        {"softmax", [](Tape& t, const ParameterStore& s, ParamId a, ParamId) { return softmaxGroups(t.param(s, a), 2); }},
        {"exp", [](Tape& t, const ParameterStore& s, ParamId a, ParamId) { return exp(t.param(s, a)); }},
        {"abs", [](Tape& t, const ParameterStore& s, ParamId a, ParamId) { return abs(t.param(s, a)); }},
        {"clamp", [](Tape& t, const ParameterStore& s, ParamId a, ParamId) { return clamp(t.param(s, a), -0.5, 0.5); }},
        {"sum", [](Tape& t, const ParameterStore& s, ParamId a, ParamId) { return sum(t.param(s, a)); }},
        {"mean", [](Tape& t, const ParameterStore& s, ParamId a, ParamId) { return mean(t.param(s, a)); }},
        {"mean-rows", [](Tape& t, const ParameterStore& s, ParamId a, ParamId) { return meanRows(t.param(s, a)); }},
        {"sum-groups", [](Tape& t, const ParameterStore& s, ParamId a, ParamId) { return sumGroups(t.param(s, a), 2); }},
        {"prod-groups", [](Tape& t, const ParameterStore& s, ParamId a, ParamId) { return prodGroups(t.param(s, a), 4); }},
        {"stop-gradient",
         [](Tape& t, const ParameterStore& s, ParamId a, ParamId b) { return stopGradient(t.param(s, a)) * t.param(s, b); }},
    };
    for (const auto& [name, build] : cases) {
        double worst = 0.0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) worst = std::max(worst, primitiveFdError(seed, build, 3, 4));
        INFO(name);
        CHECK(worst < 1e-4);
    }
    // log needs positive inputs
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
        worst = std::max(worst, primitiveFdError(
                                    seed, [](Tape& t, const ParameterStore& s, ParamId a, ParamId) { return log(t.param(s, a)); },
                                    3, 4, true));
    CHECK(worst < 1e-4);
}

TEST_CASE("prod-groups gradient is exact with a zero factor") {
    ParameterStore store;
    const auto a = store.add("a", Tensor::row({0.0, 2.0, 3.0}));
    Tape tape;
    const auto grads = tape.backward(sum(prodGroups(tape.param(store, a), 3)));
    CHECK(grads.at(a) == Tensor::row({6.0, 0.0, 0.0}));
}

TEST_CASE("cross-entropy helpers") {
    Tape tape;
    const Var p = tape.constant(Tensor::row({0.5, 0.25}));
    const Var t = tape.constant(Tensor::row({1.0, 0.0}));
    const double expected = -(std::log(0.5) + std::log(0.75)) / 2.0;
    CHECK(binaryCrossEntropy(p, t).value()[0] == doctest::Approx(expected).epsilon(1e-14));
    const Var cat = tape.constant(Tensor::row({0.2, 0.8, 0.6, 0.4}));
    const Var onehot = tape.constant(Tensor::row({0.0, 1.0, 1.0, 0.0}));
    CHECK(categoricalCrossEntropy(cat, onehot, 2).value()[0] ==
          doctest::Approx(-(std::log(0.8) + std::log(0.6)) / 2.0).epsilon(1e-14));
    // saturated probabilities stay finite
    const Var hard = tape.constant(Tensor::row({0.0, 1.0}));
    CHECK(std::isfinite(binaryCrossEntropy(hard, t).value()[0]));
}
