#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csm/ad/tape.hpp"
#include "csm/data/dataset.hpp"
#include "csm/model/model.hpp"

namespace csm::metrics {

using ad::Tensor;

inline constexpr double kPredictionThreshold = 0.5;

/// 0/1 decisions: per-column threshold, or a one-hot argmax (first maximum)
/// within each mutually-exclusive group.
Tensor predictLabels(const Tensor& probs, const data::Grouping& g);

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
    double epsilon = 0.0;
};

/// sqrt(ln(2/delta) / (2n)).
double hoeffdingEpsilon(std::size_t n, double delta);
/// [sisHat - eps, sisHat + eps] clipped to [0,1].
Interval hoeffdingInterval(double sisHat, std::size_t n, double delta);

struct SisReport {
    std::size_t n = 0;
    /// Sum over instances of the fraction of agreeing units (tasks, or whole groups).
    double agreements = 0.0;
    double sisHat = 0.0;
    double delta = 0.05;
    double lo = 0.0;
    double hi = 1.0;
    double threshold = kPredictionThreshold;
};

/// Agreement between default- and bottleneck-mode decisions.
SisReport sisScore(const Tensor& defaultProbs, const Tensor& bottleneckProbs, const data::Grouping& g, double delta = 0.05);

/// Mean over instances and units of "every column in the unit is predicted correctly".
double accuracy(const Tensor& probs, const Tensor& labels, const data::Grouping& g);

enum class DivergenceKind { TotalVariation, SymmetricKL };

const char* divergenceName(DivergenceKind k) noexcept;
DivergenceKind parseDivergence(std::string_view name);

/// Divergence between two task distributions, averaged over instances and
/// tasks (binary marginals) or over mutually-exclusive groups of width `exclusiveGroup`.
double divergence(const Tensor& p, const Tensor& q, DivergenceKind kind, std::size_t exclusiveGroup = 0);
ad::Var divergence(ad::Var p, ad::Var q, DivergenceKind kind, std::size_t exclusiveGroup = 0);

/// Random concept order shared by every model evaluated with the same seed.
std::vector<std::size_t> interventionOrder(std::size_t nConcepts, std::uint64_t orderSeed);

struct InterventionCurve {
    std::vector<std::size_t> order;
    std::vector<double> accuracy;  // index k: first k concepts of `order` set to ground truth
};

InterventionCurve intervenabilityCurve(const model::CsmModel& m, const data::SyntheticDataset& ds, std::uint64_t orderSeed,
                                       data::Split split = data::Split::Test);

struct ParetoPoint {
    std::string id;
    model::Architecture arch = model::Architecture::CRM;
    double beta = 0.0;
    double accuracy = 0.0;
    double sis = 0.0;
};

/// True for points no other point dominates in (accuracy, sis). Points with a
/// NaN metric are never on the front and never dominate.
std::vector<bool> paretoFlags(std::span<const ParetoPoint> points);
std::vector<ParetoPoint> paretoFront(std::span<const ParetoPoint> points);

struct WeightEntry {
    std::string name;
    double weight = 0.0;
    bool isConcept = false;
};

struct TaskWeights {
    std::string task;
    std::vector<WeightEntry> ranked;  // by |weight| descending
    double conceptMass = 0.0;
    double sidechannelMass = 0.0;
};

struct WeightReport {
    std::vector<TaskWeights> tasks;
    double conceptMass = 0.0;
    double sidechannelMass = 0.0;

    double conceptShare() const;
    double sidechannelShare() const;
};

/// Linear task-head weights of an LRM; biases excluded. Unnamed concepts are
/// called c1, c2, ...; sidechannel units z[0], z[1], ...
WeightReport inspectLinearWeights(const model::CsmModel& m, const std::vector<std::string>& conceptNames = {},
                                  const std::vector<std::string>& taskNames = {});

}  // namespace csm::metrics
