#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "csm/ad/layers.hpp"
#include "csm/data/dataset.hpp"
#include "csm/zoo/zoo.hpp"

namespace csm::model {

using ad::ParameterStore;
using ad::Tape;
using ad::Tensor;
using ad::Var;

enum class Architecture { LRM, CRM, CEM, DCR, CMR };

const char* architectureName(Architecture a) noexcept;
/// Accepts the lower- or upper-case tag ("crm", "CRM").
Architecture parseArchitecture(std::string_view tag);

enum class ConceptKind { Delta, Bernoulli };
enum class SidechannelKind { DeltaEmbedding, Categorical, ConceptPairEmbeddings };
enum class PriorMode { Marginalized, Learnable };

const char* priorModeName(PriorMode m) noexcept;
PriorMode parsePriorMode(std::string_view name);

/// Rows are instances.
struct ConceptDistribution {
    ConceptKind kind = ConceptKind::Bernoulli;
    Tensor values;

    std::size_t conceptCount() const noexcept { return values.cols(); }
};

struct SidechannelDistribution {
    SidechannelKind kind = SidechannelKind::DeltaEmbedding;
    Tensor payload;
};

struct TaskDistribution {
    Tensor probs;
    bool mutuallyExclusive = false;
};

/// Input-independent replacement for p(z|x), one payload row.
struct SidechannelPrior {
    PriorMode mode = PriorMode::Marginalized;
    SidechannelKind kind = SidechannelKind::DeltaEmbedding;
    Tensor payload;
};

struct Hyperparameters {
    Architecture arch = Architecture::CRM;
    std::size_t inputWidth = 0;
    std::size_t nConcepts = 0;
    std::size_t nTasks = 0;
    std::size_t embSize = 16;    // hidden width; also |Z| for LRM/CRM
    std::size_t conceptEmb = 8;  // CEM/DCR per-concept embedding width
    std::size_t nRules = 3;      // CMR rules per task
    std::size_t ruleEmb = 16;    // CMR rule embedding width
    /// Task predictor sigmoid(f(c) + g(z)) with separate heads (CRM only).
    bool additiveHeads = false;
    /// CMR bottleneck mode evaluates the OR of all rules instead of a prior mixture.
    bool cmrAllRules = false;
    PriorMode priorMode = PriorMode::Marginalized;
    /// Width of each mutually-exclusive task group; 0 for independent tasks.
    std::size_t taskGroup = 0;

    /// Throws InvalidArgument naming the first inconsistent field.
    void validate() const;
    std::size_t sidechannelWidth() const;
    SidechannelKind sidechannelKind() const;

    friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

/// Group width for a task grouping: 0 when tasks are independent. Mutually
/// exclusive groups must be contiguous and of equal width.
std::size_t exclusiveGroupWidth(const data::Grouping& g, std::size_t nTasks);

/// Hyperparameters sized for a dataset.
Hyperparameters hyperparametersFor(const data::SyntheticDataset& ds, Architecture arch);

/// Threshold at 0.5, ties to 1.
Tensor hardThreshold(const Tensor& probs);

/// Concept inputs to a task predictor: thresholded concepts, and the soft
/// scores CEM mixes with.
struct ConceptInputs {
    Var hard;
    Var soft;
};

/// One parametrization of the meta-model.
struct CsmModel {
    Hyperparameters hp;
    ParameterStore store;

    ad::Mlp conceptNet;
    ad::Mlp sidechannelNet;
    ad::Linear linearHead;     // LRM
    ad::Mlp mlpHead;           // CRM, CEM
    ad::Mlp conceptLogitHead;  // CRM additive: f(c)
    ad::Mlp sideLogitHead;     // CRM additive: g(z), a single linear layer
    zoo::DcrHead dcrHead;
    zoo::Rulebook rulebook;
    std::optional<ad::ParamId> priorParam;  // learnable prior
    Tensor marginalPrior;                   // 1 x sidechannelWidth once computed

    static CsmModel create(const Hyperparameters& hp, std::uint64_t seed);

    Var conceptProbs(Tape& tape, Var x) const;
    /// p(z|x) payload, B x sidechannelWidth.
    Var sidechannel(Tape& tape, Var x) const;
    /// p(z) payload, 1 x sidechannelWidth. Throws if a marginalized prior was never computed.
    Var prior(Tape& tape) const;
    ConceptInputs conceptInputs(Tape& tape, Var conceptProbs) const;

    /// p(y|c,z) for a sidechannel payload with 1 or B rows.
    Var task(Tape& tape, const ConceptInputs& c, Var z) const;
    Var taskDefault(Tape& tape, const ConceptInputs& c, Var x) const { return task(tape, c, sidechannel(tape, x)); }
    Var taskBottleneck(Tape& tape, const ConceptInputs& c) const;

    Var conceptLogits(Tape& tape, Var hardConcepts) const;  // additive heads only
    Var sideLogits(Tape& tape, Var z) const;                // additive heads only

    bool hasPrior() const noexcept { return hp.cmrAllRules || hp.priorMode == PriorMode::Learnable || !marginalPrior.empty(); }
    SidechannelPrior currentPrior() const;
    void setPrior(const SidechannelPrior& p);
};

ConceptDistribution predictConcepts(const CsmModel& m, const Tensor& x);
SidechannelDistribution predictSidechannel(const CsmModel& m, const Tensor& x);
TaskDistribution inferDefault(const CsmModel& m, const Tensor& x);
TaskDistribution inferBottleneck(const CsmModel& m, const Tensor& x);

enum class InferenceMode { Default, Bottleneck };

/// Task prediction from externally supplied concept probabilities, e.g. predictions with
/// some columns replaced by ground truth. They are thresholded exactly as predicted ones are.
TaskDistribution inferWithConcepts(const CsmModel& m, const Tensor& x, const Tensor& conceptProbs, InferenceMode mode);

/// Mean sidechannel payload over the dataset's training split.
SidechannelPrior computeMarginalPrior(const CsmModel& m, const data::SyntheticDataset& ds);
/// Mean payload over the given rows of x.
SidechannelPrior computeMarginalPrior(const CsmModel& m, const Tensor& x);

}  // namespace csm::model
