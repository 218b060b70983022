#include "csm/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "csm/ad/layers.hpp"
#include "csm/ad/rng.hpp"
#include "csm/error.hpp"

namespace csm::metrics {

namespace {

void requireSameShape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.sameShape(b)) throw ShapeError(std::string(what) + ": shapes " + a.shapeString() + " and " + b.shapeString() + " differ");
}

/// Fraction of units of row i on which a and b match on every column.
double unitAgreement(const Tensor& a, const Tensor& b, std::size_t i, const std::vector<std::vector<std::size_t>>& units) {
    std::size_t agree = 0;
    for (const auto& unit : units) {
        bool same = true;
        for (auto col : unit) same = same && a(i, col) == b(i, col);
        agree += same ? 1 : 0;
    }
    return static_cast<double>(agree) / static_cast<double>(units.size());
}

double meanAgreement(const Tensor& a, const Tensor& b, const data::Grouping& g, double& total) {
    const auto units = g.unitsFor(a.cols());
    total = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) total += unitAgreement(a, b, i, units);
    return total / static_cast<double>(a.rows());
}

}  // namespace

Tensor predictLabels(const Tensor& probs, const data::Grouping& g) {
    Tensor out(probs.rows(), probs.cols());
    for (std::size_t i = 0; i < probs.rows(); ++i)
        for (std::size_t j = 0; j < probs.cols(); ++j) out(i, j) = probs(i, j) >= kPredictionThreshold ? 1.0 : 0.0;
    if (!g.mutuallyExclusive) return out;
    for (std::size_t i = 0; i < probs.rows(); ++i)
        for (const auto& group : g.groups) {
            std::size_t best = group.front();
            for (auto col : group) {
                if (probs(i, col) > probs(i, best)) best = col;
                out(i, col) = 0.0;
            }
            out(i, best) = 1.0;
        }
    return out;
}

double hoeffdingEpsilon(std::size_t n, double delta) {
    if (n == 0) throw InvalidArgument("hoeffding interval needs n >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("confidence delta must be in (0,1)");
    return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n)));
}

Interval hoeffdingInterval(double sisHat, std::size_t n, double delta) {
    const double eps = hoeffdingEpsilon(n, delta);
    return {std::max(0.0, sisHat - eps), std::min(1.0, sisHat + eps), eps};
}

SisReport sisScore(const Tensor& defaultProbs, const Tensor& bottleneckProbs, const data::Grouping& g, double delta) {
    requireSameShape(defaultProbs, bottleneckProbs, "sis");
    if (defaultProbs.empty()) throw InvalidArgument("sis needs at least one instance");
    SisReport r;
    r.n = defaultProbs.rows();
    r.sisHat = meanAgreement(predictLabels(defaultProbs, g), predictLabels(bottleneckProbs, g), g, r.agreements);
    r.delta = delta;
    const auto iv = hoeffdingInterval(r.sisHat, r.n, delta);
    r.lo = iv.lo;
    r.hi = iv.hi;
    return r;
}

double accuracy(const Tensor& probs, const Tensor& labels, const data::Grouping& g) {
    requireSameShape(probs, labels, "accuracy");
    if (probs.empty()) throw InvalidArgument("accuracy needs at least one instance");
    double total = 0.0;
    return meanAgreement(predictLabels(probs, g), labels, g, total);
}

const char* divergenceName(DivergenceKind k) noexcept { return k == DivergenceKind::SymmetricKL ? "symkl" : "tv"; }

DivergenceKind parseDivergence(std::string_view name) {
    if (name == "tv" || name == "total-variation") return DivergenceKind::TotalVariation;
    if (name == "symkl" || name == "symmetric-kl") return DivergenceKind::SymmetricKL;
    throw InvalidArgument("unknown divergence '" + std::string(name) + "' (expected tv or symkl)");
}

ad::Var divergence(ad::Var p, ad::Var q, DivergenceKind kind, std::size_t exclusiveGroup) {
    if (!p.value().sameShape(q.value()))
        throw ShapeError("divergence: shapes " + p.value().shapeString() + " and " + q.value().shapeString() + " differ");
    const double eps = ad::kProbEpsilon;
    if (kind == DivergenceKind::TotalVariation) {
        // binary marginal: |p - q|; categorical group: half the L1 distance
        const ad::Var d = ad::mean(ad::abs(p - q));
        return exclusiveGroup == 0 ? d : (0.5 * static_cast<double>(exclusiveGroup)) * d;
    }
    const ad::Var pc = ad::clamp(p, eps, 1.0 - eps);
    const ad::Var qc = ad::clamp(q, eps, 1.0 - eps);
    if (exclusiveGroup == 0) {
        // KL(p||q) + KL(q||p) over (p, 1-p) = (p - q) * (logit p - logit q)
        const ad::Var logitGap = ad::log(pc) - ad::log(1.0 - pc) - ad::log(qc) + ad::log(1.0 - qc);
        return ad::mean((pc - qc) * logitGap);
    }
    return static_cast<double>(exclusiveGroup) * ad::mean((pc - qc) * (ad::log(pc) - ad::log(qc)));
}

double divergence(const Tensor& p, const Tensor& q, DivergenceKind kind, std::size_t exclusiveGroup) {
    requireSameShape(p, q, "divergence");
    for (const Tensor* t : {&p, &q})
        for (double v : t->data())
            if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("divergence inputs must be probabilities in [0,1]");
    if (exclusiveGroup != 0 && p.cols() % exclusiveGroup != 0) throw ShapeError("divergence: group width does not divide task count");
    ad::Tape tape;
    return divergence(tape.constant(p), tape.constant(q), kind, exclusiveGroup).value()[0];
}

std::vector<std::size_t> interventionOrder(std::size_t nConcepts, std::uint64_t orderSeed) {
    return ad::RngStream(orderSeed, "intervention-order").permutation(nConcepts);
}

InterventionCurve intervenabilityCurve(const model::CsmModel& m, const data::SyntheticDataset& ds, std::uint64_t orderSeed,
                                       data::Split split) {
    if (ds.c.empty() || ds.conceptCount() != m.hp.nConcepts)
        throw InvalidArgument("intervenability needs concept labels matching the model's " + std::to_string(m.hp.nConcepts) + " concepts");
    const auto batch = ds.split(split);
    if (batch.x.empty()) throw InvalidArgument(std::string("split '") + data::splitName(split) + "' is empty");
    InterventionCurve curve;
    curve.order = interventionOrder(m.hp.nConcepts, orderSeed);
    Tensor probs = model::predictConcepts(m, batch.x).values;
    for (std::size_t k = 0; k <= curve.order.size(); ++k) {
        if (k > 0) {
            const auto col = curve.order[k - 1];
            for (std::size_t i = 0; i < probs.rows(); ++i) probs(i, col) = batch.c(i, col);
        }
        const auto y = model::inferWithConcepts(m, batch.x, probs, model::InferenceMode::Default);
        curve.accuracy.push_back(accuracy(y.probs, batch.y, ds.taskGroups));
    }
    return curve;
}

std::vector<bool> paretoFlags(std::span<const ParetoPoint> points) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < points.size(); ++i)
        if (!std::isnan(points[i].accuracy) && !std::isnan(points[i].sis)) idx.push_back(i);
    // accuracy descending, then sis descending
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (points[a].accuracy != points[b].accuracy) return points[a].accuracy > points[b].accuracy;
        return points[a].sis > points[b].sis;
    });
    std::vector<bool> flags(points.size(), false);
    double bestAbove = -std::numeric_limits<double>::infinity();  // max sis among strictly higher accuracy
    for (std::size_t start = 0; start < idx.size();) {
        std::size_t end = start;
        while (end < idx.size() && points[idx[end]].accuracy == points[idx[start]].accuracy) ++end;
        const double groupBest = points[idx[start]].sis;
        for (std::size_t k = start; k < end; ++k) {
            const double s = points[idx[k]].sis;
            flags[idx[k]] = !(bestAbove >= s || groupBest > s);
        }
        bestAbove = std::max(bestAbove, groupBest);
        start = end;
    }
    return flags;
}

std::vector<ParetoPoint> paretoFront(std::span<const ParetoPoint> points) {
    const auto flags = paretoFlags(points);
    std::vector<ParetoPoint> front;
    for (std::size_t i = 0; i < points.size(); ++i)
        if (flags[i]) front.push_back(points[i]);
    return front;
}

double WeightReport::conceptShare() const {
    const double total = conceptMass + sidechannelMass;
    return total > 0.0 ? conceptMass / total : 0.0;
}

double WeightReport::sidechannelShare() const {
    const double total = conceptMass + sidechannelMass;
    return total > 0.0 ? sidechannelMass / total : 0.0;
}

WeightReport inspectLinearWeights(const model::CsmModel& m, const std::vector<std::string>& conceptNames,
                                  const std::vector<std::string>& taskNames) {
    if (m.hp.arch != model::Architecture::LRM)
        throw InvalidArgument(std::string("weight inspection needs a linear (LRM) task head, got ") + model::architectureName(m.hp.arch));
    const auto& w = m.store.value(m.linearHead.weight);
    const std::size_t nC = m.hp.nConcepts;
    WeightReport report;
    for (std::size_t t = 0; t < w.cols(); ++t) {
        TaskWeights tw;
        tw.task = t < taskNames.size() ? taskNames[t] : "y" + std::to_string(t + 1);
        for (std::size_t r = 0; r < w.rows(); ++r) {
            WeightEntry e;
            e.isConcept = r < nC;
            e.name = e.isConcept ? (r < conceptNames.size() ? conceptNames[r] : "c" + std::to_string(r + 1)) : "z[" + std::to_string(r - nC) + "]";
            e.weight = w(r, t);
            (e.isConcept ? tw.conceptMass : tw.sidechannelMass) += std::abs(e.weight);
            tw.ranked.push_back(std::move(e));
        }
        std::stable_sort(tw.ranked.begin(), tw.ranked.end(),
                         [](const WeightEntry& a, const WeightEntry& b) { return std::abs(a.weight) > std::abs(b.weight); });
        report.conceptMass += tw.conceptMass;
        report.sidechannelMass += tw.sidechannelMass;
        report.tasks.push_back(std::move(tw));
    }
    return report;
}

}  // namespace csm::metrics
