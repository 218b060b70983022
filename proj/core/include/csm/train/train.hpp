#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "csm/ad/optimizer.hpp"
#include "csm/ad/rng.hpp"
#include "csm/data/dataset.hpp"
#include "csm/metrics/metrics.hpp"
#include "csm/model/model.hpp"

namespace csm::train {

using ad::Tensor;
using ad::Var;

/// Concept-usage baselines compared against SIS regularization.
enum class Baseline { None, Dropout, Detach };

const char* baselineName(Baseline b) noexcept;
Baseline parseBaseline(std::string_view name);

/// Model sizes a sweep varies; the rest of the hyperparameters come from the dataset.
struct ModelSizes {
    std::size_t embSize = 16;
    std::size_t conceptEmb = 8;
    std::size_t nRules = 3;
    std::size_t ruleEmb = 16;
};

struct TrainConfig {
    double alpha = 1.0;
    double beta = 0.0;
    metrics::DivergenceKind divergence = metrics::DivergenceKind::TotalVariation;
    /// Unset: learnable whenever beta > 0, marginalized otherwise.
    std::optional<model::PriorMode> priorMode;
    Baseline baseline = Baseline::None;
    double dropoutP = 0.0;
    /// Probability of replacing a concept by its label during CEM training.
    double randintP = 0.05;
    std::size_t epochs = 80;
    std::size_t batchSize = 256;
    ad::AdamWOptions optimizer;
    std::uint64_t seed = 0;
    /// Restore the parameters of the epoch with the lowest validation loss.
    bool restoreBest = true;
    /// Stop after this many epochs without validation improvement; 0 disables.
    std::size_t patience = 0;
    ModelSizes sizes;

    /// Throws InvalidArgument naming the offending field.
    void validate() const;
    model::PriorMode resolvedPriorMode() const;
};

/// Hyperparameters for training `arch` on `ds` under `config`.
model::Hyperparameters modelHyperparameters(const data::SyntheticDataset& ds, model::Architecture arch, const TrainConfig& config);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double lossTotal = 0.0;
    double lossTask = 0.0;
    double lossConcept = 0.0;
    double lossSis = 0.0;
    double valLoss = 0.0;
    double valAccuracy = 0.0;
    double valSis = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t bestEpoch = 0;  // 0 when no epoch ran
    double bestValLoss = 0.0;
    /// Set when training stopped on a non-finite loss or gradient.
    std::optional<std::string> failure;
};

/// Graph nodes of one loss evaluation. `sis` and `taskBottleneck` are invalid
/// when the SIS term was not computed.
struct LossTerms {
    Var total;
    Var task;
    Var conceptLoss;
    Var sis;
    Var taskDefault;
    Var taskBottleneck;
};

/// Training-time noise sources; evaluation passes none.
struct StepNoise {
    ad::RngStream* rng = nullptr;
};

/// Cross-entropy of task probabilities against labels (categorical over groups when exclusiveGroup > 0).
Var taskCrossEntropy(Var probs, Var labels, std::size_t exclusiveGroup);

/// task CE (default mode, hard predicted concepts) + alpha * concept BCE + beta * DIV(default || bottleneck).
/// Task and SIS terms reach the concept predictor only through thresholded (constant) concepts.
/// The SIS term is built when beta > 0, or when `alwaysSis` is set and the model has a prior.
LossTerms trainingLoss(ad::Tape& tape, const data::Batch& batch, const model::CsmModel& m, const TrainConfig& config,
                       StepNoise noise = {}, bool alwaysSis = false);

struct LossValues {
    double total = 0.0;
    double task = 0.0;
    double conceptLoss = 0.0;
    double sis = 0.0;
};

/// Noise-free loss values on a batch (SIS term included whenever a prior exists).
LossValues evaluateLoss(const data::Batch& batch, const model::CsmModel& m, const TrainConfig& config);

/// CE(f(c), y) + CE(act(stopgrad(f_logit(c)) + g_logit(z)), y) for additive (detach) heads.
Var detachLoss(ad::Tape& tape, Var hardConcepts, Var z, Var labels, const model::CsmModel& m);
double detachLoss(const data::Batch& batch, const model::CsmModel& m);

/// With probability p (one draw per call) the whole payload is zeroed.
Var applySidechannelDropout(Var z, double p, ad::RngStream& rng);
Tensor applySidechannelDropout(const Tensor& z, double p, ad::RngStream& rng);

/// Each entry independently replaced by its label with probability p.
Tensor randintIntervene(const Tensor& conceptProbs, const Tensor& labels, double p, ad::RngStream& rng);

struct FitResult {
    model::CsmModel model;
    TrainHistory history;
};

FitResult fit(const data::SyntheticDataset& ds, model::Architecture arch, const TrainConfig& config);
FitResult fit(const data::SyntheticDataset& ds, const model::Hyperparameters& hp, const TrainConfig& config);

}  // namespace csm::train
