#include "csm/train/train.hpp"

#include <cmath>
#include <limits>

#include "csm/error.hpp"

namespace csm::train {

namespace {

void requireProbability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument(std::string(what) + " must be in [0,1], got " + std::to_string(p));
}

struct SplitEvaluation {
    LossValues loss;
    double accuracy = 0.0;
    double sis = std::numeric_limits<double>::quiet_NaN();
};

LossValues valuesOf(const LossTerms& t) {
    LossValues v;
    v.total = t.total.value()[0];
    v.task = t.task.value()[0];
    v.conceptLoss = t.conceptLoss.value()[0];
    v.sis = t.sis.valid() ? t.sis.value()[0] : 0.0;
    return v;
}

SplitEvaluation evaluateSplit(const data::Batch& batch, const model::CsmModel& m, const TrainConfig& config,
                              const data::Grouping& taskGroups) {
    ad::Tape tape;
    const auto terms = trainingLoss(tape, batch, m, config, {}, true);
    SplitEvaluation e;
    e.loss = valuesOf(terms);
    e.accuracy = metrics::accuracy(terms.taskDefault.value(), batch.y, taskGroups);
    if (terms.taskBottleneck.valid())
        e.sis = metrics::sisScore(terms.taskDefault.value(), terms.taskBottleneck.value(), taskGroups).sisHat;
    return e;
}

}  // namespace

const char* baselineName(Baseline b) noexcept {
    switch (b) {
        case Baseline::None: return "none";
        case Baseline::Dropout: return "dropout";
        case Baseline::Detach: return "detach";
    }
    return "?";
}

Baseline parseBaseline(std::string_view name) {
    if (name == "none") return Baseline::None;
    if (name == "dropout") return Baseline::Dropout;
    if (name == "detach") return Baseline::Detach;
    throw InvalidArgument("unknown baseline '" + std::string(name) + "' (expected none, dropout or detach)");
}

void TrainConfig::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be a finite value >= 0");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be a finite value >= 0");
    requireProbability(dropoutP, "dropoutP");
    requireProbability(randintP, "randintP");
    if (batchSize == 0) throw InvalidArgument("batchSize must be >= 1");
    if (!(optimizer.learningRate > 0.0)) throw InvalidArgument("learning rate must be > 0");
    if (!(optimizer.weightDecay >= 0.0)) throw InvalidArgument("weight decay must be >= 0");
}

model::PriorMode TrainConfig::resolvedPriorMode() const {
    if (priorMode) return *priorMode;
    return beta > 0.0 ? model::PriorMode::Learnable : model::PriorMode::Marginalized;
}

model::Hyperparameters modelHyperparameters(const data::SyntheticDataset& ds, model::Architecture arch, const TrainConfig& config) {
    auto hp = model::hyperparametersFor(ds, arch);
    hp.embSize = config.sizes.embSize;
    hp.conceptEmb = config.sizes.conceptEmb;
    hp.nRules = config.sizes.nRules;
    hp.ruleEmb = config.sizes.ruleEmb;
    hp.priorMode = config.resolvedPriorMode();
    hp.additiveHeads = config.baseline == Baseline::Detach;
    // A learned CMR prior stands for "use every rule": bottleneck mode is the OR over the rulebook.
    hp.cmrAllRules = arch == model::Architecture::CMR && hp.priorMode == model::PriorMode::Learnable;
    return hp;
}

Var taskCrossEntropy(Var probs, Var labels, std::size_t exclusiveGroup) {
    return exclusiveGroup == 0 ? ad::binaryCrossEntropy(probs, labels) : ad::categoricalCrossEntropy(probs, labels, exclusiveGroup);
}

LossTerms trainingLoss(ad::Tape& tape, const data::Batch& batch, const model::CsmModel& m, const TrainConfig& config,
                       StepNoise noise, bool alwaysSis) {
    const Var x = tape.constant(batch.x);
    const Var y = tape.constant(batch.y);
    const Var probs = m.conceptProbs(tape, x);
    const std::size_t g = m.hp.taskGroup;

    LossTerms t;
    t.conceptLoss = ad::binaryCrossEntropy(probs, tape.constant(batch.c));

    const bool randint = noise.rng && config.randintP > 0.0 && m.hp.arch == model::Architecture::CEM;
    const auto concepts =
        randint ? m.conceptInputs(tape, tape.constant(randintIntervene(probs.value(), batch.c, config.randintP, *noise.rng)))
                : m.conceptInputs(tape, probs);

    Var z = m.sidechannel(tape, x);
    if (noise.rng && config.baseline == Baseline::Dropout) z = applySidechannelDropout(z, config.dropoutP, *noise.rng);

    t.taskDefault = m.task(tape, concepts, z);
    t.task = m.hp.additiveHeads ? detachLoss(tape, concepts.hard, z, y, m) : taskCrossEntropy(t.taskDefault, y, g);
    t.total = t.task + config.alpha * t.conceptLoss;
    if (config.beta > 0.0 || (alwaysSis && m.hasPrior())) {
        t.taskBottleneck = m.taskBottleneck(tape, concepts);
        t.sis = metrics::divergence(t.taskDefault, t.taskBottleneck, config.divergence, g);
        if (config.beta > 0.0) t.total = t.total + config.beta * t.sis;
    }
    if (!std::isfinite(t.total.value()[0])) {
        const auto v = valuesOf(t);
        throw NonFiniteError("non-finite training loss: task=" + std::to_string(v.task) + " concept=" + std::to_string(v.conceptLoss) +
                             " sis=" + std::to_string(v.sis));
    }
    return t;
}

LossValues evaluateLoss(const data::Batch& batch, const model::CsmModel& m, const TrainConfig& config) {
    ad::Tape tape;
    return valuesOf(trainingLoss(tape, batch, m, config, {}, true));
}

Var detachLoss(ad::Tape& tape, Var hardConcepts, Var z, Var labels, const model::CsmModel& m) {
    const std::size_t g = m.hp.taskGroup;
    const Var f = m.conceptLogits(tape, hardConcepts);
    const Var fromConcepts = taskCrossEntropy(zoo::taskProbabilities(f, g), labels, g);
    const Var combined = taskCrossEntropy(zoo::taskProbabilities(ad::stopGradient(f) + m.sideLogits(tape, z), g), labels, g);
    return fromConcepts + combined;
}

double detachLoss(const data::Batch& batch, const model::CsmModel& m) {
    if (!m.hp.additiveHeads) throw InvalidArgument("detach loss needs the additive-head (detach) CRM variant");
    ad::Tape tape;
    const Var x = tape.constant(batch.x);
    const auto concepts = m.conceptInputs(tape, m.conceptProbs(tape, x));
    return detachLoss(tape, concepts.hard, m.sidechannel(tape, x), tape.constant(batch.y), m).value()[0];
}

Var applySidechannelDropout(Var z, double p, ad::RngStream& rng) {
    requireProbability(p, "dropout probability");
    return rng.bernoulli(p) ? ad::affine(z, 0.0, 0.0) : z;
}

Tensor applySidechannelDropout(const Tensor& z, double p, ad::RngStream& rng) {
    requireProbability(p, "dropout probability");
    return rng.bernoulli(p) ? Tensor(z.rows(), z.cols()) : z;
}

Tensor randintIntervene(const Tensor& conceptProbs, const Tensor& labels, double p, ad::RngStream& rng) {
    requireProbability(p, "randint probability");
    if (!conceptProbs.sameShape(labels))
        throw ShapeError("randint: probabilities " + conceptProbs.shapeString() + " and labels " + labels.shapeString() + " differ");
    Tensor out = conceptProbs;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (rng.bernoulli(p)) out[i] = labels[i];
    return out;
}

FitResult fit(const data::SyntheticDataset& ds, model::Architecture arch, const TrainConfig& config) {
    config.validate();
    return fit(ds, modelHyperparameters(ds, arch, config), config);
}

FitResult fit(const data::SyntheticDataset& ds, const model::Hyperparameters& hp, const TrainConfig& config) {
    config.validate();
    ds.validate();
    if (ds.splits.train.empty()) throw InvalidArgument("training split is empty");
    if (hp.inputWidth != ds.featureWidth() || hp.nConcepts != ds.conceptCount() || hp.nTasks != ds.taskCount())
        throw InvalidArgument("model hyperparameters do not match the dataset's widths");

    FitResult r{model::CsmModel::create(hp, config.seed), {}};
    auto& m = r.model;
    auto& history = r.history;
    const data::Batch train = ds.split(data::Split::Train);
    // Tiny datasets may have no validation rows; fall back to the training split.
    const data::Batch val = ds.splits.validation.empty() ? train : ds.split(data::Split::Validation);

    const bool marginalized = hp.priorMode == model::PriorMode::Marginalized;
    auto refreshPrior = [&] {
        if (marginalized) m.setPrior(model::computeMarginalPrior(m, train.x));
    };
    refreshPrior();

    ad::OptimizerState optimizer(m.store, config.optimizer);
    const ad::RngStream root(config.seed, "train");
    const auto shuffle = root.substream("shuffle");
    auto noise = root.substream("noise");

    double bestLoss = std::numeric_limits<double>::infinity();
    ad::ParameterStore bestStore = m.store;
    Tensor bestPrior = m.marginalPrior;
    std::size_t sinceBest = 0;
    const std::size_t nTrain = ds.splits.train.size();

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        try {
            const auto perm = shuffle.substream(epoch).permutation(nTrain);
            std::vector<std::size_t> rows;
            for (std::size_t start = 0; start < nTrain; start += config.batchSize) {
                const std::size_t end = std::min(nTrain, start + config.batchSize);
                rows.clear();
                for (std::size_t k = start; k < end; ++k) rows.push_back(ds.splits.train[perm[k]]);
                const auto batch = ds.batch(rows);
                ad::Tape tape;
                const auto terms = trainingLoss(tape, batch, m, config, {&noise});
                ad::adamwStep(m.store, tape.backward(terms.total), optimizer);
                const auto v = valuesOf(terms);
                const double w = static_cast<double>(end - start) / static_cast<double>(nTrain);
                rec.lossTotal += w * v.total;
                rec.lossTask += w * v.task;
                rec.lossConcept += w * v.conceptLoss;
                rec.lossSis += w * v.sis;
            }
            refreshPrior();
            const auto e = evaluateSplit(val, m, config, ds.taskGroups);
            rec.valLoss = e.loss.total;
            rec.valAccuracy = e.accuracy;
            rec.valSis = e.sis;
        } catch (const NonFiniteError& err) {
            history.failure = "epoch " + std::to_string(epoch) + ": " + err.what();
            break;
        }
        history.epochs.push_back(rec);
        if (rec.valLoss < bestLoss) {
            bestLoss = rec.valLoss;
            history.bestEpoch = epoch;
            history.bestValLoss = rec.valLoss;
            bestStore = m.store;
            bestPrior = m.marginalPrior;
            sinceBest = 0;
        } else if (config.patience > 0 && ++sinceBest >= config.patience) {
            break;
        }
    }
    if ((config.restoreBest || history.failure) && history.bestEpoch > 0) {
        m.store = bestStore;
        m.marginalPrior = bestPrior;
    } else if (history.failure) {
        m.store = bestStore;  // initial parameters
        refreshPrior();
    }
    return r;
}

}  // namespace csm::train
