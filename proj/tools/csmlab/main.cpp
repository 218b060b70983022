#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "csm/error.hpp"

namespace {

using namespace csm;
using namespace csm::cli;

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> beta;
    std::optional<std::string> embSize;
    std::optional<std::string> arch;
    std::optional<double> delta;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> threads;
    std::optional<std::uint64_t> orderSeed;
    std::optional<std::string> generator;
    std::string checkpoint;
};

void addCommon(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "JSON experiment config")->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "experiment seed (training and dataset)");
    cmd->add_option("--out", f.out, std::string("output directory (default $") + kOutputEnv + " or " + kDefaultOutput + ")");
    cmd->add_option("--arch", f.arch, "architecture: lrm, crm, cem, dcr, cmr");
    cmd->add_option("--delta", f.delta, "Hoeffding confidence parameter");
    cmd->add_option("--epochs", f.epochs, "training epochs");
    cmd->add_option("--generator", f.generator, "dataset generator: xor, dnf, latent, addition");
}

ExperimentConfig buildConfig(const CommonFlags& f, bool sweep) {
    ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : loadConfig(f.config);
    if (f.seed) c.seed = *f.seed;
    c.train.seed = c.seed;
    if (f.arch) c.arch = model::parseArchitecture(*f.arch);
    if (f.delta) c.delta = *f.delta;
    if (f.epochs) c.train.epochs = *f.epochs;
    if (f.threads) c.threads = *f.threads;
    if (f.orderSeed) c.orderSeed = *f.orderSeed;
    if (f.generator) {
        if (*f.generator != c.dataset.generator) c.dataset.params.clear();
        c.dataset.generator = *f.generator;
        c.dataset.path.clear();
    }
    if (f.beta) {
        const auto betas = parseNumberList(*f.beta, "--beta");
        if (sweep) {
            c.sweep.betas = betas;
        } else {
            if (betas.size() != 1) throw InvalidArgument("--beta: train takes a single value");
            c.train.beta = betas.front();
        }
    }
    if (f.embSize) {
        const auto embs = parseNumberList(*f.embSize, "--emb-size");
        std::vector<std::size_t> sizes;
        for (double e : embs) {
            if (!(e >= 1.0) || e != static_cast<double>(static_cast<std::size_t>(e)))
                throw InvalidArgument("--emb-size: values must be positive integers");
            sizes.push_back(static_cast<std::size_t>(e));
        }
        if (sweep) {
            c.sweep.embSizes = sizes;
        } else {
            if (sizes.size() != 1) throw InvalidArgument("--emb-size: train takes a single value");
            c.train.sizes.embSize = sizes.front();
        }
    }
    c.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"csmlab: concept sidechannel models on synthetic data"};
    app.require_subcommand(1);
    CommonFlags f;

    auto* trainCmd = app.add_subcommand("train", "train one configuration and report test accuracy and SIS");
    addCommon(trainCmd, f);
    trainCmd->add_option("--beta", f.beta, "SIS regularization weight");
    trainCmd->add_option("--emb-size", f.embSize, "embedding width");

    auto* paretoCmd = app.add_subcommand("pareto", "sweep beta x emb_size and flag Pareto-efficient points");
    addCommon(paretoCmd, f);
    paretoCmd->add_option("--beta", f.beta, "comma-separated beta values");
    paretoCmd->add_option("--emb-size", f.embSize, "comma-separated embedding widths");
    paretoCmd->add_option("--threads", f.threads, "concurrent grid points (default: hardware concurrency)");

    auto* interveneCmd = app.add_subcommand("intervene", "intervenability curve of a checkpoint");
    addCommon(interveneCmd, f);
    interveneCmd->add_option("--checkpoint", f.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
    interveneCmd->add_option("--order-seed", f.orderSeed, "seed of the concept intervention order");

    auto* inspectCmd = app.add_subcommand("inspect", "linear task-head weights of an LRM checkpoint");
    addCommon(inspectCmd, f);
    inspectCmd->add_option("--checkpoint", f.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);

    auto* genCmd = app.add_subcommand("gen-data", "generate and export a synthetic dataset");
    addCommon(genCmd, f);

    CLI11_PARSE(app, argc, argv);

    try {
        const bool sweep = paretoCmd->parsed();
        const auto cfg = buildConfig(f, sweep);
        const auto out = resolveOutputDir(f.out ? std::optional<std::filesystem::path>(*f.out) : std::nullopt, cfg);
        if (trainCmd->parsed()) {
            const auto r = cmdTrain(cfg, out);
            std::printf("test accuracy %s  SIS %s [%s, %s]  best epoch %zu\n", formatNumber(r.test.accuracy).c_str(),
                        formatNumber(r.test.sis.sisHat).c_str(), formatNumber(r.test.sis.lo).c_str(), formatNumber(r.test.sis.hi).c_str(),
                        r.history.bestEpoch);
            if (r.history.failure) std::fprintf(stderr, "training stopped early: %s\n", r.history.failure->c_str());
        } else if (sweep) {
            const auto rows = cmdPareto(cfg, out);
            std::size_t failed = 0;
            for (const auto& r : rows) {
                std::printf("beta %-8s emb %-4zu accuracy %-12s sis %-12s%s\n", formatNumber(r.beta).c_str(), r.embSize,
                            formatNumber(r.accuracy).c_str(), formatNumber(r.sis).c_str(), r.paretoFlag ? " *" : "");
                if (!r.error.empty()) {
                    ++failed;
                    std::fprintf(stderr, "beta %s emb %zu failed: %s\n", formatNumber(r.beta).c_str(), r.embSize, r.error.c_str());
                }
            }
            if (failed) std::fprintf(stderr, "%zu of %zu grid points failed\n", failed, rows.size());
        } else if (interveneCmd->parsed()) {
            const auto dataset = f.config.empty() && !f.generator ? std::optional<DatasetSpec>() : std::optional<DatasetSpec>(cfg.dataset);
            const auto curve = cmdIntervene(f.checkpoint, dataset, cfg, out);
            for (std::size_t k = 0; k < curve.accuracy.size(); ++k) std::printf("k=%zu accuracy %s\n", k, formatNumber(curve.accuracy[k]).c_str());
        } else if (inspectCmd->parsed()) {
            const auto r = cmdInspect(f.checkpoint, cfg, out);
            std::printf("concept share %s  sidechannel share %s\n", formatNumber(r.conceptShare()).c_str(),
                        formatNumber(r.sidechannelShare()).c_str());
        } else if (genCmd->parsed()) {
            const auto ds = cmdGenData(cfg, out);
            std::printf("wrote %zu instances to %s\n", ds.size(), (out / kDatasetFile).string().c_str());
        }
        std::printf("reports in %s\n", out.string().c_str());
    } catch (const csm::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
