#include <algorithm>
#include <cmath>

#include "csm/ad/rng.hpp"
#include "csm/data/generators.hpp"
#include "csm/error.hpp"
#include "csm/train/train.hpp"
#include "doctest.h"

using namespace csm;
using namespace csm::train;
using ad::RngStream;
using model::Architecture;

namespace {

const Architecture kAll[] = {Architecture::LRM, Architecture::CRM, Architecture::CEM, Architecture::DCR, Architecture::CMR};

TrainConfig smallConfig(double beta = 0.0) {
    TrainConfig c;
    c.beta = beta;
    c.sizes = {8, 3, 2, 6};
    c.epochs = 3;
    c.batchSize = 64;
    c.seed = 5;
    return c;
}

data::SyntheticDataset smallDnf(std::uint64_t seed = 1) {
    data::DnfOptions o;
    o.nConcepts = 4;
    o.nTasks = 2;
    o.n = 300;
    return data::genDnf(o, seed);
}

data::Batch firstRows(const data::SyntheticDataset& ds, std::size_t n) {
    std::vector<std::size_t> rows(ds.splits.train.begin(), ds.splits.train.begin() + static_cast<std::ptrdiff_t>(n));
    return ds.batch(rows);
}

bool startsWith(const std::string& s, std::string_view prefix) { return s.rfind(prefix, 0) == 0; }

/// Every gradient entry of a parameter whose name starts with `prefix` is exactly zero.
bool gradientsVanish(const ad::ParameterStore& store, const ad::GradientMap& grads, std::string_view prefix) {
    for (const auto& [id, g] : grads)
        if (startsWith(store.name(id), prefix))
            for (double v : g.data())
                if (v != 0.0) return false;
    return true;
}

bool anyNonZero(const ad::ParameterStore& store, const ad::GradientMap& grads, std::string_view prefix) {
    for (const auto& [id, g] : grads)
        if (startsWith(store.name(id), prefix))
            for (double v : g.data())
                if (v != 0.0) return true;
    return false;
}

double bce(double p, double y) { return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p)); }
double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

TEST_CASE("config validation and defaults") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.resolvedPriorMode() == model::PriorMode::Marginalized);
    c.beta = 0.5;
    CHECK(c.resolvedPriorMode() == model::PriorMode::Learnable);
    c.priorMode = model::PriorMode::Marginalized;
    CHECK(c.resolvedPriorMode() == model::PriorMode::Marginalized);
    using Mutation = void (*)(TrainConfig&);
    const Mutation mutations[] = {[](TrainConfig& t) { t.alpha = -1.0; }, [](TrainConfig& t) { t.beta = -0.1; },
                                  [](TrainConfig& t) { t.dropoutP = 1.5; }, [](TrainConfig& t) { t.randintP = -0.2; },
                                  [](TrainConfig& t) { t.batchSize = 0; }, [](TrainConfig& t) { t.beta = std::nan(""); }};
    for (auto bad : mutations) {
        TrainConfig t;
        bad(t);
        CHECK_THROWS_AS(t.validate(), InvalidArgument);
    }
    CHECK(parseBaseline("detach") == Baseline::Detach);
    CHECK(std::string(baselineName(Baseline::Dropout)) == "dropout");
    CHECK_THROWS_AS(parseBaseline("joint"), InvalidArgument);
}

TEST_CASE("hyperparameters follow the config") {
    const auto ds = smallDnf();
    auto c = smallConfig(1.0);
    const auto hp = modelHyperparameters(ds, Architecture::CMR, c);
    CHECK(hp.priorMode == model::PriorMode::Learnable);
    CHECK(hp.cmrAllRules);
    CHECK(hp.embSize == 8);
    CHECK_FALSE(modelHyperparameters(ds, Architecture::CMR, smallConfig(0.0)).cmrAllRules);
    c.baseline = Baseline::Detach;
    CHECK(modelHyperparameters(ds, Architecture::CRM, c).additiveHeads);
}

TEST_CASE("beta = 0 loss is task plus alpha times concept") {
    const auto ds = smallDnf();
    const auto batch = firstRows(ds, 20);
    for (auto arch : kAll) {
        auto c = smallConfig(0.0);
        c.alpha = 0.7;
        const auto m = model::CsmModel::create(modelHyperparameters(ds, arch, c), 2);
        ad::Tape tape;
        const auto t = trainingLoss(tape, batch, m, c);
        CHECK_FALSE(t.sis.valid());
        CHECK(t.total.value()[0] == t.task.value()[0] + 0.7 * t.conceptLoss.value()[0]);
    }
}

TEST_CASE("a head that ignores z has a zero SIS term") {
    const auto ds = smallDnf();
    const auto batch = firstRows(ds, 20);
    for (auto kind : {metrics::DivergenceKind::TotalVariation, metrics::DivergenceKind::SymmetricKL}) {
        auto c = smallConfig(2.0);
        c.divergence = kind;
        auto m = model::CsmModel::create(modelHyperparameters(ds, Architecture::LRM, c), 3);
        auto& w = m.store.value(m.linearHead.weight);
        for (std::size_t r = m.hp.nConcepts; r < w.rows(); ++r)
            for (std::size_t t = 0; t < w.cols(); ++t) w(r, t) = 0.0;
        ad::Tape tape;
        const auto t = trainingLoss(tape, batch, m, c);
        CHECK(t.sis.value()[0] == 0.0);
    }
}

TEST_CASE("two-sample LRM loss matches hand arithmetic") {
    // one concept, one task, sidechannel width 1
    data::SyntheticDataset ds;
    ds.x = Tensor::fromRows({{0.3, -0.2}, {1.0, 0.5}});
    ds.c = Tensor::fromRows({{1}, {0}});
    ds.y = Tensor::fromRows({{1}, {0}});
    ds.splits.train = {0, 1};
    model::Hyperparameters hp;
    hp.arch = Architecture::LRM;
    hp.inputWidth = 2;
    hp.nConcepts = 1;
    hp.nTasks = 1;
    hp.embSize = 1;
    hp.priorMode = model::PriorMode::Learnable;
    auto m = model::CsmModel::create(hp, 4);
    // concept probability sigmoid(1) for every input, so the hard concept is 1
    m.store.value(m.conceptNet.layers.back().weight).fill(0.0);
    m.store.value(m.conceptNet.layers.back().bias).fill(1.0);
    auto& w = m.store.value(m.linearHead.weight);
    w(0, 0) = 0.8;
    w(1, 0) = -1.5;
    m.store.value(m.linearHead.bias).fill(0.1);

    const auto batch = ds.batch(ds.splits.train);
    const Tensor z = model::predictSidechannel(m, batch.x).payload;
    const double pc = sigmoid(1.0);
    const double conceptTerm = (bce(pc, 1.0) + bce(pc, 0.0)) / 2.0;
    double task = 0.0, tv = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        const double pDefault = sigmoid(0.8 * 1.0 - 1.5 * z(i, 0) + 0.1);
        const double pBottleneck = sigmoid(0.8 * 1.0 + 0.1);  // zero-initialized prior
        task += bce(pDefault, batch.y(i, 0)) / 2.0;
        tv += std::abs(pDefault - pBottleneck) / 2.0;
    }
    auto c = smallConfig(0.3);
    c.alpha = 2.0;
    ad::Tape tape;
    const auto t = trainingLoss(tape, batch, m, c);
    CHECK(t.task.value()[0] == doctest::Approx(task).epsilon(1e-12));
    CHECK(t.conceptLoss.value()[0] == doctest::Approx(conceptTerm).epsilon(1e-12));
    CHECK(t.sis.value()[0] == doctest::Approx(tv).epsilon(1e-12));
    CHECK(t.total.value()[0] == doctest::Approx(task + 2.0 * conceptTerm + 0.3 * tv).epsilon(1e-12));
}

TEST_CASE("task and SIS terms send no gradient into the concept predictor") {
    const auto ds = smallDnf();
    const auto batch = firstRows(ds, 24);
    for (auto arch : kAll)
        for (auto baseline : {Baseline::None, Baseline::Dropout, Baseline::Detach}) {
            if (baseline == Baseline::Detach && arch != Architecture::CRM) continue;
            auto c = smallConfig(1.0);
            c.baseline = baseline;
            c.dropoutP = 0.5;
            const auto m = model::CsmModel::create(modelHyperparameters(ds, arch, c), 6);
            RngStream rng(3);
            ad::Tape tape;
            const auto t = trainingLoss(tape, batch, m, c, {&rng});
            CHECK_MESSAGE(gradientsVanish(m.store, tape.backward(t.task), "concept"), model::architectureName(arch));
            CHECK_MESSAGE(gradientsVanish(m.store, tape.backward(t.sis), "concept"), model::architectureName(arch));
            CHECK(anyNonZero(m.store, tape.backward(t.conceptLoss), "concept"));
        }
}

TEST_CASE("learnable prior receives gradient from the SIS term") {
    const auto ds = smallDnf();
    const auto batch = firstRows(ds, 24);
    for (auto arch : {Architecture::LRM, Architecture::CRM, Architecture::CEM, Architecture::DCR}) {
        const auto c = smallConfig(1.0);
        const auto m = model::CsmModel::create(modelHyperparameters(ds, arch, c), 8);
        ad::Tape tape;
        const auto t = trainingLoss(tape, batch, m, c);
        CHECK_MESSAGE(anyNonZero(m.store, tape.backward(t.sis), "prior"), model::architectureName(arch));
    }
}

TEST_CASE("non-finite loss reports its components") {
    const auto ds = smallDnf();
    auto m = model::CsmModel::create(modelHyperparameters(ds, Architecture::CRM, smallConfig()), 1);
    m.store.value(m.mlpHead.layers.back().bias).fill(std::nan(""));
    ad::Tape tape;
    try {
        trainingLoss(tape, firstRows(ds, 4), m, smallConfig());
        FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
        CHECK(std::string(e.what()).find("concept=") != std::string::npos);
    }
}

TEST_CASE("sidechannel dropout") {
    RngStream rng(11);
    const Tensor z = Tensor::fromRows({{1.0, -2.0}, {0.5, 3.0}});
    for (int i = 0; i < 100; ++i) CHECK(applySidechannelDropout(z, 0.0, rng) == z);
    for (int i = 0; i < 100; ++i) CHECK(applySidechannelDropout(z, 1.0, rng) == Tensor(2, 2));
    std::size_t zeroed = 0;
    const std::size_t batches = 10000;
    for (std::size_t i = 0; i < batches; ++i) zeroed += applySidechannelDropout(z, 0.5, rng) == Tensor(2, 2) ? 1 : 0;
    CHECK(std::abs(static_cast<double>(zeroed) / batches - 0.5) <= 0.02);
    CHECK_THROWS_AS(applySidechannelDropout(z, 1.2, rng), InvalidArgument);
}

TEST_CASE("randint interventions") {
    RngStream rng(12);
    const Tensor probs = Tensor::fromRows({{0.2, 0.7}, {0.9, 0.4}});
    const Tensor labels = Tensor::fromRows({{1, 0}, {0, 1}});
    CHECK(randintIntervene(probs, labels, 0.0, rng) == probs);
    CHECK(randintIntervene(probs, labels, 1.0, rng) == labels);
    Tensor many(1000, 100, 0.5), ones(1000, 100, 1.0);
    const auto out = randintIntervene(many, ones, 0.05, rng);
    const double replaced = static_cast<double>(std::count(out.data().begin(), out.data().end(), 1.0)) / 1e5;
    CHECK(std::abs(replaced - 0.05) <= 0.005);
    CHECK_THROWS_AS(randintIntervene(probs, Tensor(1, 2), 0.1, rng), ShapeError);
}

TEST_CASE("detach loss") {
    const auto ds = smallDnf();
    const auto batch = firstRows(ds, 16);
    auto c = smallConfig();
    c.baseline = Baseline::Detach;
    auto m = model::CsmModel::create(modelHyperparameters(ds, Architecture::CRM, c), 7);

    auto gradsFor = [&](const model::CsmModel& model) {
        ad::Tape tape;
        const Var x = tape.constant(batch.x);
        const auto concepts = model.conceptInputs(tape, model.conceptProbs(tape, x));
        return tape.backward(detachLoss(tape, concepts.hard, model.sidechannel(tape, x), tape.constant(batch.y), model));
    };

    SUBCASE("g = 0 makes both terms equal CE(f(c), y)") {
        for (const auto& layer : m.sideLogitHead.layers) {
            m.store.value(layer.weight).fill(0.0);
            m.store.value(layer.bias).fill(0.0);
        }
        ad::Tape tape;
        const auto concepts = m.conceptInputs(tape, m.conceptProbs(tape, tape.constant(batch.x)));
        const double single =
            taskCrossEntropy(ad::sigmoid(m.conceptLogits(tape, concepts.hard)), tape.constant(batch.y), 0).value()[0];
        CHECK(detachLoss(batch, m) == doctest::Approx(2.0 * single).epsilon(1e-12));
    }
    SUBCASE("gradient reaching f does not depend on g") {
        const auto before = gradsFor(m);
        for (const auto& layer : m.sideLogitHead.layers) m.store.value(layer.weight).fill(0.37);
        const auto after = gradsFor(m);
        for (const auto& [id, g] : before)
            if (startsWith(m.store.name(id), "head.f")) CHECK(g == after.at(id));
        CHECK(anyNonZero(m.store, after, "head.g"));
    }
    SUBCASE("wrong architecture") {
        const auto plain = model::CsmModel::create(modelHyperparameters(ds, Architecture::CRM, smallConfig()), 7);
        CHECK_THROWS_AS(detachLoss(batch, plain), InvalidArgument);
    }
}

TEST_CASE("zero epochs returns the initialized model") {
    const auto ds = smallDnf();
    auto c = smallConfig();
    c.epochs = 0;
    for (auto arch : kAll) {
        const auto r = fit(ds, arch, c);
        CHECK(r.history.epochs.empty());
        CHECK(r.history.bestEpoch == 0);
        CHECK(r.model.store == model::CsmModel::create(modelHyperparameters(ds, arch, c), c.seed).store);
    }
}

TEST_CASE("fit is deterministic for a fixed seed") {
    const auto ds = smallDnf();
    for (auto arch : kAll) {
        auto c = smallConfig(arch == Architecture::CEM ? 0.0 : 1.0);
        c.baseline = arch == Architecture::LRM ? Baseline::Dropout : Baseline::None;
        c.dropoutP = 0.3;
        const auto a = fit(ds, arch, c);
        const auto b = fit(ds, arch, c);
        CHECK(a.model.store == b.model.store);
        CHECK(a.history.epochs.size() == c.epochs);
        c.seed += 1;
        CHECK_FALSE(fit(ds, arch, c).model.store == a.model.store);
    }
}

TEST_CASE("restored weights achieve the minimum recorded validation loss") {
    const auto ds = smallDnf(2);
    for (double beta : {0.0, 1.0}) {
        auto c = smallConfig(beta);
        c.epochs = 6;
        c.optimizer.learningRate = 0.05;  // large steps make validation loss non-monotone
        const auto r = fit(ds, Architecture::CRM, c);
        REQUIRE(r.history.bestEpoch > 0);
        double best = r.history.epochs.front().valLoss;
        for (const auto& e : r.history.epochs) best = std::min(best, e.valLoss);
        CHECK(r.history.bestValLoss == best);
        CHECK(r.history.epochs[r.history.bestEpoch - 1].valLoss == best);
        CHECK(evaluateLoss(ds.split(data::Split::Validation), r.model, c).total == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("early stopping bounds the number of epochs") {
    const auto ds = smallDnf(3);
    auto c = smallConfig();
    c.epochs = 40;
    c.patience = 2;
    c.optimizer.learningRate = 0.2;
    const auto r = fit(ds, Architecture::LRM, c);
    CHECK(r.history.epochs.size() <= 40);
    CHECK(r.history.epochs.size() >= r.history.bestEpoch);
    if (r.history.epochs.size() < 40) CHECK(r.history.epochs.size() == r.history.bestEpoch + 2);
}

TEST_CASE("training reduces the loss and tracks validation metrics") {
    const auto ds = smallDnf(4);
    auto c = smallConfig(1.0);
    c.epochs = 10;
    c.optimizer.learningRate = 1e-2;
    const auto r = fit(ds, Architecture::CRM, c);
    REQUIRE(r.history.epochs.size() == 10);
    CHECK(r.history.epochs.back().lossTotal < r.history.epochs.front().lossTotal);
    for (const auto& e : r.history.epochs) {
        CHECK(e.valAccuracy >= 0.0);
        CHECK(e.valAccuracy <= 1.0);
        CHECK(e.valSis >= 0.0);
        CHECK(e.valSis <= 1.0);
    }
    CHECK_FALSE(r.history.failure);
}

TEST_CASE("fit rejects mismatched hyperparameters") {
    const auto ds = smallDnf();
    auto hp = modelHyperparameters(ds, Architecture::CRM, smallConfig());
    hp.nConcepts += 1;
    CHECK_THROWS_AS(fit(ds, hp, smallConfig()), InvalidArgument);
}
