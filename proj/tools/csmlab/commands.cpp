#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <thread>

#include "csm/data/generators.hpp"
#include "csm/error.hpp"
#include "csm/io/checkpoint.hpp"
#include "json.hpp"

namespace csm::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ofstream openReport(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    return out;
}

void writeJson(const fs::path& path, const json& j) { openReport(path) << j.dump(2) << "\n"; }

json fingerprintJson(const data::Fingerprint& fp) {
    json j;
    j["generator"] = fp.generator;
    j["seed"] = fp.seed;
    j["params"] = fp.params;
    return j;
}

json sisJson(const metrics::SisReport& r) {
    return {{"n", r.n}, {"agreements", r.agreements}, {"sis", r.sisHat}, {"delta", r.delta},
            {"lo", r.lo}, {"hi", r.hi},                 {"threshold", r.threshold}};
}

data::Fingerprint storedFingerprint(const data::SyntheticDataset& ds) {
    auto fp = ds.fingerprint;
    fp.rules.clear();
    return fp;
}

ParetoRow runGridPoint(const ExperimentConfig& cfg, const data::SyntheticDataset& ds, double beta, std::size_t embSize) {
    ParetoRow row;
    row.arch = cfg.arch;
    row.beta = beta;
    row.embSize = embSize;
    try {
        auto tc = cfg.train;
        tc.beta = beta;
        tc.sizes.embSize = embSize;
        const auto fitted = train::fit(ds, cfg.arch, tc);
        row.bestEpoch = fitted.history.bestEpoch;
        if (fitted.history.failure) throw NonFiniteError(*fitted.history.failure);
        const auto e = evaluateTest(fitted.model, ds, cfg.delta);
        row.accuracy = e.accuracy;
        row.sis = e.sis.sisHat;
        row.sisLo = e.sis.lo;
        row.sisHi = e.sis.hi;
    } catch (const std::exception& err) {
        row.error = err.what();
        row.accuracy = row.sis = row.sisLo = row.sisHi = kNaN;
    }
    return row;
}

}  // namespace

std::string formatNumber(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

Evaluation evaluateTest(const model::CsmModel& m, const data::SyntheticDataset& ds, double delta) {
    const auto test = ds.split(data::Split::Test);
    if (test.x.empty()) throw InvalidArgument("dataset has an empty test split");
    const auto yDefault = model::inferDefault(m, test.x).probs;
    Evaluation e;
    e.accuracy = metrics::accuracy(yDefault, test.y, ds.taskGroups);
    e.sis = metrics::sisScore(yDefault, model::inferBottleneck(m, test.x).probs, ds.taskGroups, delta);
    return e;
}

TrainReport cmdTrain(const ExperimentConfig& cfg, const fs::path& outDir) {
    cfg.validate();
    const auto ds = loadDataset(cfg.dataset, cfg.seed);
    fs::create_directories(outDir);
    auto fitted = train::fit(ds, cfg.arch, cfg.train);

    TrainReport report;
    report.history = fitted.history;
    report.test = evaluateTest(fitted.model, ds, cfg.delta);

    io::CheckpointInfo info;
    info.dataset = storedFingerprint(ds);
    info.epochsTrained = fitted.history.epochs.size();
    info.bestEpoch = fitted.history.bestEpoch;
    info.bestValLoss = fitted.history.bestValLoss;
    info.failure = fitted.history.failure.value_or("");
    io::saveCheckpoint(outDir / kCheckpointFile, fitted.model, info);
    io::writeParameterDump(outDir / kDumpFile, fitted.model, info);

    if (cfg.writeCsv) {
        auto out = openReport(outDir / kHistoryCsv);
        out << "epoch,loss_task,loss_concept,loss_sis,val_acc,val_sis\n";
        for (const auto& e : fitted.history.epochs)
            out << e.epoch << ',' << formatNumber(e.lossTask) << ',' << formatNumber(e.lossConcept) << ',' << formatNumber(e.lossSis)
                << ',' << formatNumber(e.valAccuracy) << ',' << formatNumber(e.valSis) << '\n';
    }
    if (cfg.writeJson) {
        json j;
        j["arch"] = model::architectureName(cfg.arch);
        j["beta"] = cfg.train.beta;
        j["alpha"] = cfg.train.alpha;
        j["prior"] = model::priorModeName(fitted.model.hp.priorMode);
        j["baseline"] = train::baselineName(cfg.train.baseline);
        j["divergence"] = metrics::divergenceName(cfg.train.divergence);
        j["dataset"] = fingerprintJson(info.dataset);
        j["epochs_trained"] = info.epochsTrained;
        j["best_epoch"] = info.bestEpoch;
        j["best_val_loss"] = info.bestValLoss;
        j["test_accuracy"] = report.test.accuracy;
        j["test_sis"] = sisJson(report.test.sis);
        j["failure"] = fitted.history.failure ? json(*fitted.history.failure) : json(nullptr);
        writeJson(outDir / kTrainJson, j);
    }
    return report;
}

std::vector<ParetoRow> cmdPareto(const ExperimentConfig& cfg, const fs::path& outDir) {
    cfg.validate();
    auto betas = cfg.sweep.betas.empty() ? std::vector<double>{cfg.train.beta} : cfg.sweep.betas;
    auto embs = cfg.sweep.embSizes.empty() ? std::vector<std::size_t>{cfg.train.sizes.embSize} : cfg.sweep.embSizes;
    std::sort(betas.begin(), betas.end());
    betas.erase(std::unique(betas.begin(), betas.end()), betas.end());
    std::sort(embs.begin(), embs.end());
    embs.erase(std::unique(embs.begin(), embs.end()), embs.end());

    const auto ds = loadDataset(cfg.dataset, cfg.seed);
    std::vector<std::pair<double, std::size_t>> grid;
    for (double b : betas)
        for (auto e : embs) grid.emplace_back(b, e);

    std::vector<ParetoRow> rows(grid.size());
    const std::size_t workers =
        std::min<std::size_t>(grid.size(), cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency()));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < grid.size();) rows[i] = runGridPoint(cfg, ds, grid[i].first, grid[i].second);
    };
    std::vector<std::future<void>> running;
    for (std::size_t w = 0; w < workers; ++w) running.push_back(std::async(std::launch::async, work));
    for (auto& f : running) f.get();

    std::vector<metrics::ParetoPoint> points;
    for (const auto& r : rows) points.push_back({"", r.arch, r.beta, r.accuracy, r.sis});
    const auto flags = metrics::paretoFlags(points);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].paretoFlag = flags[i];

    fs::create_directories(outDir);
    if (cfg.writeCsv) {
        auto out = openReport(outDir / kParetoCsv);
        out << "arch,beta,emb_size,accuracy,sis,sis_lo,sis_hi,pareto_flag\n";
        for (const auto& r : rows)
            out << model::architectureName(r.arch) << ',' << formatNumber(r.beta) << ',' << r.embSize << ',' << formatNumber(r.accuracy)
                << ',' << formatNumber(r.sis) << ',' << formatNumber(r.sisLo) << ',' << formatNumber(r.sisHi) << ','
                << (r.paretoFlag ? 1 : 0) << '\n';
    }
    if (cfg.writeJson) {
        json j;
        j["arch"] = model::architectureName(cfg.arch);
        j["dataset"] = fingerprintJson(storedFingerprint(ds));
        j["delta"] = cfg.delta;
        j["points"] = json::array();
        for (const auto& r : rows)
            j["points"].push_back({{"beta", r.beta},
                                   {"emb_size", r.embSize},
                                   {"accuracy", r.accuracy},
                                   {"sis", r.sis},
                                   {"sis_lo", r.sisLo},
                                   {"sis_hi", r.sisHi},
                                   {"pareto", r.paretoFlag},
                                   {"best_epoch", r.bestEpoch},
                                   {"error", r.error.empty() ? json(nullptr) : json(r.error)}});
        writeJson(outDir / kParetoJson, j);
    }
    return rows;
}

metrics::InterventionCurve cmdIntervene(const fs::path& checkpoint, const std::optional<DatasetSpec>& dataset,
                                        const ExperimentConfig& cfg, const fs::path& outDir) {
    const auto ck = io::loadCheckpoint(checkpoint);
    const auto ds = dataset ? loadDataset(*dataset, cfg.seed) : data::regenerate(ck.info.dataset);
    if (ds.featureWidth() != ck.model.hp.inputWidth || ds.conceptCount() != ck.model.hp.nConcepts)
        throw InvalidArgument("dataset widths do not match the checkpoint's model");
    const auto curve = metrics::intervenabilityCurve(ck.model, ds, cfg.orderSeed);

    fs::create_directories(outDir);
    if (cfg.writeCsv) {
        auto out = openReport(outDir / kCurveCsv);
        out << "k,accuracy\n";
        for (std::size_t k = 0; k < curve.accuracy.size(); ++k) out << k << ',' << formatNumber(curve.accuracy[k]) << '\n';
    }
    if (cfg.writeJson) {
        json j;
        j["order_seed"] = cfg.orderSeed;
        j["dataset"] = fingerprintJson(storedFingerprint(ds));
        j["order"] = json::array();
        for (auto i : curve.order) j["order"].push_back(i < ds.conceptNames.size() ? ds.conceptNames[i] : "c" + std::to_string(i + 1));
        j["accuracy"] = curve.accuracy;
        writeJson(outDir / kCurveJson, j);
    }
    return curve;
}

metrics::WeightReport cmdInspect(const fs::path& checkpoint, const ExperimentConfig& cfg, const fs::path& outDir) {
    const auto ck = io::loadCheckpoint(checkpoint);
    std::vector<std::string> conceptNames, taskNames;
    try {
        const auto ds = data::regenerate(ck.info.dataset);
        conceptNames = ds.conceptNames;
        taskNames = ds.taskNames;
    } catch (const Error&) {
        // imported datasets cannot be regenerated; fall back to default names
    }
    const auto report = metrics::inspectLinearWeights(ck.model, conceptNames, taskNames);

    fs::create_directories(outDir);
    if (cfg.writeCsv) {
        auto out = openReport(outDir / kWeightsCsv);
        out << "task,rank,name,kind,weight\n";
        for (const auto& t : report.tasks)
            for (std::size_t k = 0; k < std::min(kInspectTopK, t.ranked.size()); ++k)
                out << t.task << ',' << k + 1 << ',' << t.ranked[k].name << ',' << (t.ranked[k].isConcept ? "concept" : "sidechannel") << ','
                    << formatNumber(t.ranked[k].weight) << '\n';
    }
    if (cfg.writeJson) {
        json j;
        j["concept_mass"] = report.conceptMass;
        j["sidechannel_mass"] = report.sidechannelMass;
        j["concept_share"] = report.conceptShare();
        j["sidechannel_share"] = report.sidechannelShare();
        j["tasks"] = json::array();
        for (const auto& t : report.tasks) {
            json jt;
            jt["task"] = t.task;
            jt["concept_mass"] = t.conceptMass;
            jt["sidechannel_mass"] = t.sidechannelMass;
            double listed = 0.0, unlisted = 0.0;
            jt["top"] = json::array();
            for (std::size_t k = 0; k < t.ranked.size(); ++k) {
                const auto& e = t.ranked[k];
                if (k < kInspectTopK) {
                    listed += std::abs(e.weight);
                    jt["top"].push_back({{"name", e.name}, {"weight", e.weight}, {"kind", e.isConcept ? "concept" : "sidechannel"}});
                } else {
                    unlisted += std::abs(e.weight);
                }
            }
            jt["listed_mass"] = listed;
            jt["unlisted_mass"] = unlisted;
            j["tasks"].push_back(jt);
        }
        writeJson(outDir / kWeightsJson, j);
    }
    return report;
}

data::SyntheticDataset cmdGenData(const ExperimentConfig& cfg, const fs::path& outDir) {
    auto ds = loadDataset(cfg.dataset, cfg.seed);
    fs::create_directories(outDir);
    data::exportDataset(ds, outDir / kDatasetFile);
    if (cfg.writeJson) {
        json j;
        j["dataset"] = fingerprintJson(storedFingerprint(ds));
        j["n"] = ds.size();
        j["features"] = ds.featureWidth();
        j["concepts"] = ds.conceptNames;
        j["tasks"] = ds.taskNames;
        j["splits"] = {{"train", ds.splits.train.size()}, {"validation", ds.splits.validation.size()}, {"test", ds.splits.test.size()}};
        json rules = json::array();
        for (const auto& r : ds.fingerprint.rules) rules.push_back(r.toString(ds.conceptNames));
        j["rules"] = rules;
        writeJson(outDir / kDatasetJson, j);
    }
    return ds;
}

}  // namespace csm::cli
