#include <cmath>

#include "csm/ad/rng.hpp"
#include "csm/data/generators.hpp"
#include "csm/error.hpp"
#include "csm/model/model.hpp"
#include "doctest.h"

using namespace csm::model;
using csm::ad::RngStream;

namespace {

const Architecture kAll[] = {Architecture::LRM, Architecture::CRM, Architecture::CEM, Architecture::DCR, Architecture::CMR};

Hyperparameters smallHp(Architecture arch, std::size_t in = 6, std::size_t nC = 3, std::size_t nY = 2) {
    Hyperparameters hp;
    hp.arch = arch;
    hp.inputWidth = in;
    hp.nConcepts = nC;
    hp.nTasks = nY;
    hp.embSize = 8;
    hp.conceptEmb = 3;
    hp.nRules = 3;
    hp.ruleEmb = 5;
    return hp;
}

Tensor randomInputs(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    RngStream rng(seed);
    Tensor t(rows, cols);
    for (auto& v : t.storage()) v = rng.gaussian();
    return t;
}

/// Makes the sidechannel predictor output its last bias regardless of x.
void makeSidechannelConstant(CsmModel& m) { m.store.value(m.sidechannelNet.layers.back().weight).fill(0.0); }

}  // namespace

TEST_CASE("zero-weight concept predictor gives 0.5 for every concept") {
    auto m = CsmModel::create(smallHp(Architecture::CRM), 1);
    m.store.value(m.conceptNet.layers.back().weight).fill(0.0);
    m.store.value(m.conceptNet.layers.back().bias).fill(0.0);
    const auto c = predictConcepts(m, randomInputs(7, 6, 2));
    CHECK(c.kind == ConceptKind::Bernoulli);
    CHECK(c.conceptCount() == 3);
    for (double v : c.values.data()) CHECK(v == 0.5);
}

TEST_CASE("inference is deterministic and construction is seeded") {
    for (auto arch : kAll) {
        const auto a = CsmModel::create(smallHp(arch), 3);
        const auto b = CsmModel::create(smallHp(arch), 3);
        CHECK(a.store == b.store);
        CHECK_FALSE(a.store == CsmModel::create(smallHp(arch), 4).store);
        const auto x = randomInputs(5, 6, 3);
        CHECK(inferDefault(a, x).probs == inferDefault(a, x).probs);
    }
}

TEST_CASE("sidechannel kinds and widths follow the architecture") {
    const auto x = randomInputs(4, 6, 5);
    const auto crm = predictSidechannel(CsmModel::create(smallHp(Architecture::CRM), 1), x);
    CHECK(crm.kind == SidechannelKind::DeltaEmbedding);
    CHECK(crm.payload.cols() == 8);
    const auto cem = predictSidechannel(CsmModel::create(smallHp(Architecture::CEM), 1), x);
    CHECK(cem.kind == SidechannelKind::ConceptPairEmbeddings);
    CHECK(cem.payload.cols() == 3 * 2 * 3);
    const auto cmr = predictSidechannel(CsmModel::create(smallHp(Architecture::CMR), 1), x);
    CHECK(cmr.kind == SidechannelKind::Categorical);
    CHECK(cmr.payload.cols() == 2 * 3);
    CHECK_THROWS_AS(predictSidechannel(CsmModel::create(smallHp(Architecture::CRM), 1), randomInputs(2, 5, 1)), csm::ShapeError);
}

TEST_CASE("cmr with a zero selector is uniform over rules") {
    auto m = CsmModel::create(smallHp(Architecture::CMR), 2);
    m.store.value(m.sidechannelNet.layers.back().weight).fill(0.0);
    m.store.value(m.sidechannelNet.layers.back().bias).fill(0.0);
    const auto z = predictSidechannel(m, randomInputs(3, 6, 9));
    for (double v : z.payload.data()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("categorical payloads sum to one on 1000 random inputs") {
    const auto m = CsmModel::create(smallHp(Architecture::CMR), 7);
    const auto z = predictSidechannel(m, randomInputs(1000, 6, 8)).payload;
    double worst = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t t = 0; t < 2; ++t) worst = std::max(worst, std::abs(z(i, 3 * t) + z(i, 3 * t + 1) + z(i, 3 * t + 2) - 1.0));
    CHECK(worst < 1e-9);
}

TEST_CASE("crm with a zero-logit head predicts 0.5") {
    auto m = CsmModel::create(smallHp(Architecture::CRM), 1);
    m.store.value(m.mlpHead.layers.back().weight).fill(0.0);
    m.store.value(m.mlpHead.layers.back().bias).fill(0.0);
    const auto y = inferDefault(m, randomInputs(6, 6, 1));
    for (double v : y.probs.data()) CHECK(v == 0.5);
}

TEST_CASE("a task head that ignores z makes both modes agree exactly") {
    auto m = CsmModel::create(smallHp(Architecture::LRM), 4);
    auto& w = m.store.value(m.linearHead.weight);
    for (std::size_t r = 3; r < w.rows(); ++r)
        for (std::size_t k = 0; k < w.cols(); ++k) w(r, k) = 0.0;
    const auto x = randomInputs(50, 6, 4);
    m.setPrior(computeMarginalPrior(m, x));
    CHECK(inferDefault(m, x).probs == inferBottleneck(m, x).probs);
}

TEST_CASE("bottleneck mode sees x only through the concepts") {
    for (auto arch : kAll) {
        auto m = CsmModel::create(smallHp(arch), 5);
        m.store.value(m.conceptNet.layers.back().weight).fill(0.0);  // concepts constant
        m.setPrior(computeMarginalPrior(m, randomInputs(20, 6, 1)));
        const auto y = inferBottleneck(m, randomInputs(2, 6, 11)).probs;
        for (std::size_t t = 0; t < y.cols(); ++t) CHECK(y(0, t) == y(1, t));
    }
}

TEST_CASE("bottleneck inference without a prior is an error") {
    const auto m = CsmModel::create(smallHp(Architecture::CRM), 1);
    CHECK_FALSE(m.hasPrior());
    CHECK_THROWS_AS(inferBottleneck(m, randomInputs(2, 6, 1)), csm::Error);
    CHECK_NOTHROW(inferDefault(m, randomInputs(2, 6, 1)));
}

TEST_CASE("with the sidechannel forced to the prior, the two modes agree bit-exactly") {
    for (auto arch : kAll) {
        auto m = CsmModel::create(smallHp(arch), 6);
        makeSidechannelConstant(m);
        const auto x = randomInputs(30, 6, 2);
        m.setPrior({PriorMode::Marginalized, m.hp.sidechannelKind(), predictSidechannel(m, x).payload.sliceRows(0, 1)});
        INFO(architectureName(arch));
        CHECK(inferDefault(m, x).probs == inferBottleneck(m, x).probs);
    }
}

TEST_CASE("marginalized prior: constant sidechannel, arithmetic mean, permutation invariance") {
    auto m = CsmModel::create(smallHp(Architecture::CRM), 8);
    makeSidechannelConstant(m);
    const auto e = m.store.value(m.sidechannelNet.layers.back().bias);
    const auto constant = computeMarginalPrior(m, randomInputs(40, 6, 3)).payload;
    for (std::size_t k = 0; k < e.cols(); ++k) CHECK(std::abs(constant[k] - e[k]) < 1e-12);

    const auto cmr = CsmModel::create(smallHp(Architecture::CMR), 8);
    const auto x = randomInputs(64, 6, 4);
    const auto z = predictSidechannel(cmr, x).payload;
    const auto prior = computeMarginalPrior(cmr, x);
    CHECK(prior.kind == SidechannelKind::Categorical);
    for (std::size_t k = 0; k < z.cols(); ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < z.rows(); ++i) s += z(i, k);
        CHECK(std::abs(prior.payload[k] - s / 64.0) < 1e-12);
    }
    RngStream rng(5);
    const auto perm = rng.permutation(64);
    const auto shuffled = computeMarginalPrior(cmr, x.gatherRows(perm));
    for (std::size_t k = 0; k < z.cols(); ++k) CHECK(std::abs(shuffled.payload[k] - prior.payload[k]) < 1e-12);
}

TEST_CASE("marginalized prior uses only the training split") {
    const auto ds = csm::data::genDnf({.n = 400}, 3);
    const auto m = CsmModel::create(hyperparametersFor(ds, Architecture::CRM), 2);
    CHECK(computeMarginalPrior(m, ds).payload == computeMarginalPrior(m, ds.x.gatherRows(ds.splits.train)).payload);
    auto empty = ds;
    empty.splits.train.clear();
    CHECK_THROWS_AS(computeMarginalPrior(m, empty), csm::InvalidArgument);
    CHECK_THROWS_AS(computeMarginalPrior(m, Tensor()), csm::InvalidArgument);
}

TEST_CASE("task distributions stay in range and mutually-exclusive groups sum to one") {
    const auto ds = csm::data::genSymbolicAddition(10, 60, 0.2, 4);
    for (auto arch : kAll) {
        auto hp = hyperparametersFor(ds, arch);
        hp.embSize = 8;
        hp.conceptEmb = 2;
        CHECK(hp.taskGroup == 19);
        auto m = CsmModel::create(hp, 3);
        m.setPrior(computeMarginalPrior(m, ds));
        for (const auto& y : {inferDefault(m, ds.x), inferBottleneck(m, ds.x)}) {
            CHECK(y.mutuallyExclusive);
            for (std::size_t i = 0; i < y.probs.rows(); ++i) {
                double s = 0.0;
                for (std::size_t t = 0; t < 19; ++t) {
                    CHECK(y.probs(i, t) >= 0.0);
                    CHECK(y.probs(i, t) <= 1.0);
                    s += y.probs(i, t);
                }
                CHECK(std::abs(s - 1.0) < 1e-9);
            }
        }
    }
}

TEST_CASE("learnable prior is a parameter; cmr all-rules mode needs no prior") {
    auto hp = smallHp(Architecture::CMR);
    hp.priorMode = PriorMode::Learnable;
    const auto m = CsmModel::create(hp, 1);
    REQUIRE(m.priorParam);
    const auto p = m.currentPrior().payload;
    for (double v : p.data()) CHECK(v == doctest::Approx(1.0 / 3));
    CHECK_NOTHROW(inferBottleneck(m, randomInputs(3, 6, 1)));

    auto hp2 = smallHp(Architecture::CMR);
    hp2.cmrAllRules = true;
    CHECK_NOTHROW(inferBottleneck(CsmModel::create(hp2, 1), randomInputs(3, 6, 1)));
}

TEST_CASE("hyperparameter validation and tag parsing") {
    auto hp = smallHp(Architecture::LRM);
    hp.additiveHeads = true;
    CHECK_THROWS_AS(CsmModel::create(hp, 1), csm::InvalidArgument);
    hp = smallHp(Architecture::CRM);
    hp.nConcepts = 0;
    CHECK_THROWS_AS(CsmModel::create(hp, 1), csm::InvalidArgument);
    CHECK(parseArchitecture("cmr") == Architecture::CMR);
    CHECK(parseArchitecture("DCR") == Architecture::DCR);
    CHECK_THROWS_AS(parseArchitecture("mlp"), csm::InvalidArgument);
    CHECK(hardThreshold(Tensor::row({0.5, 0.4999, 0.9})) == Tensor::row({1, 0, 1}));
}
