#include <benchmark/benchmark.h>

#include "csm/ad/optimizer.hpp"
#include "csm/ad/rng.hpp"
#include "csm/ad/tape.hpp"
#include "csm/data/generators.hpp"
#include "csm/model/model.hpp"
#include "csm/train/train.hpp"

using namespace csm;

namespace {

ad::Tensor randomTensor(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    ad::RngStream rng(seed);
    ad::Tensor t(rows, cols);
    for (auto& v : t.storage()) v = rng.gaussian();
    return t;
}

void BM_MatmulForwardBackward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    ad::ParameterStore store;
    const auto w = store.add("w", randomTensor(n, n, 1));
    const auto x = randomTensor(256, n, 2);
    for (auto _ : state) {
        ad::Tape tape;
        const auto y = ad::mean(ad::matmul(tape.constant(x), tape.param(store, w)));
        benchmark::DoNotOptimize(tape.backward(y));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(256 * n * n));
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(16)->Arg(64)->Arg(128);

void BM_TrainingStep(benchmark::State& state) {
    const auto arch = static_cast<model::Architecture>(state.range(0));
    const auto ds = data::genDnf({}, 1);
    train::TrainConfig config;
    config.beta = 1.0;
    auto m = model::CsmModel::create(train::modelHyperparameters(ds, arch, config), 0);
    ad::OptimizerState opt(m.store, config.optimizer);
    std::vector<std::size_t> rows(ds.splits.train.begin(), ds.splits.train.begin() + 256);
    const auto batch = ds.batch(rows);
    for (auto _ : state) {
        ad::Tape tape;
        const auto terms = train::trainingLoss(tape, batch, m, config);
        ad::adamwStep(m.store, tape.backward(terms.total), opt);
    }
    state.SetLabel(model::architectureName(arch));
}
BENCHMARK(BM_TrainingStep)->DenseRange(0, 4)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
