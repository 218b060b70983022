#include "csm/model/model.hpp"

#include <algorithm>
#include <cctype>

#include "csm/error.hpp"

namespace csm::model {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return out;
}

/// Repeats a 1-row payload for every instance; B-row payloads pass through.
Var broadcastRows(Tape& tape, Var z, std::size_t rows) {
    if (z.rows() == rows) return z;
    if (z.rows() != 1) throw ShapeError("sidechannel payload " + z.value().shapeString() + " does not match batch of " + std::to_string(rows));
    return ad::matmul(tape.constant(Tensor(rows, 1, 1.0)), z);
}

}  // namespace

const char* architectureName(Architecture a) noexcept {
    switch (a) {
        case Architecture::LRM: return "LRM";
        case Architecture::CRM: return "CRM";
        case Architecture::CEM: return "CEM";
        case Architecture::DCR: return "DCR";
        case Architecture::CMR: return "CMR";
    }
    return "?";
}

Architecture parseArchitecture(std::string_view tag) {
    const auto t = lower(tag);
    if (t == "lrm") return Architecture::LRM;
    if (t == "crm") return Architecture::CRM;
    if (t == "cem") return Architecture::CEM;
    if (t == "dcr") return Architecture::DCR;
    if (t == "cmr") return Architecture::CMR;
    throw InvalidArgument("unknown architecture '" + std::string(tag) + "' (expected LRM, CRM, CEM, DCR or CMR)");
}

const char* priorModeName(PriorMode m) noexcept { return m == PriorMode::Learnable ? "learnable" : "marginalized"; }

PriorMode parsePriorMode(std::string_view name) {
    const auto n = lower(name);
    if (n == "marginalized") return PriorMode::Marginalized;
    if (n == "learnable") return PriorMode::Learnable;
    throw InvalidArgument("unknown prior mode '" + std::string(name) + "' (expected marginalized or learnable)");
}

void Hyperparameters::validate() const {
    if (inputWidth == 0) throw InvalidArgument("inputWidth must be >= 1");
    if (nConcepts == 0) throw InvalidArgument("nConcepts must be >= 1");
    if (nTasks == 0) throw InvalidArgument("nTasks must be >= 1");
    if (embSize == 0) throw InvalidArgument("embSize must be >= 1");
    if ((arch == Architecture::CEM || arch == Architecture::DCR) && conceptEmb == 0) throw InvalidArgument("conceptEmb must be >= 1");
    if (arch == Architecture::CMR && (nRules == 0 || ruleEmb == 0)) throw InvalidArgument("nRules and ruleEmb must be >= 1");
    if (additiveHeads && arch != Architecture::CRM) throw InvalidArgument("additive (detach) heads are only defined for CRM");
    if (cmrAllRules && arch != Architecture::CMR) throw InvalidArgument("all-rules bottleneck mode is only defined for CMR");
    if (taskGroup != 0 && nTasks % taskGroup != 0) throw InvalidArgument("taskGroup must divide nTasks");
}

std::size_t Hyperparameters::sidechannelWidth() const {
    switch (arch) {
        case Architecture::LRM:
        case Architecture::CRM: return embSize;
        case Architecture::CEM:
        case Architecture::DCR: return nConcepts * 2 * conceptEmb;
        case Architecture::CMR: return nTasks * nRules;
    }
    return 0;
}

SidechannelKind Hyperparameters::sidechannelKind() const {
    switch (arch) {
        case Architecture::CEM:
        case Architecture::DCR: return SidechannelKind::ConceptPairEmbeddings;
        case Architecture::CMR: return SidechannelKind::Categorical;
        default: return SidechannelKind::DeltaEmbedding;
    }
}

std::size_t exclusiveGroupWidth(const data::Grouping& g, std::size_t nTasks) {
    if (!g.mutuallyExclusive) return 0;
    if (g.groups.empty() || g.groups.front().empty()) throw InvalidArgument("mutually-exclusive task grouping has no groups");
    const std::size_t width = g.groups.front().size();
    std::size_t next = 0;
    for (const auto& group : g.groups) {
        if (group.size() != width) throw InvalidArgument("mutually-exclusive task groups must have equal widths");
        for (auto col : group)
            if (col != next++) throw InvalidArgument("mutually-exclusive task groups must be contiguous column ranges");
    }
    if (next != nTasks) throw InvalidArgument("mutually-exclusive task groups do not cover every task");
    return width;
}

Hyperparameters hyperparametersFor(const data::SyntheticDataset& ds, Architecture arch) {
    Hyperparameters hp;
    hp.arch = arch;
    hp.inputWidth = ds.featureWidth();
    hp.nConcepts = ds.conceptCount();
    hp.nTasks = ds.taskCount();
    hp.taskGroup = exclusiveGroupWidth(ds.taskGroups, ds.taskCount());
    return hp;
}

Tensor hardThreshold(const Tensor& probs) {
    Tensor out = probs;
    for (auto& v : out.storage()) v = v >= 0.5 ? 1.0 : 0.0;
    return out;
}

CsmModel CsmModel::create(const Hyperparameters& hp, std::uint64_t seed) {
    hp.validate();
    CsmModel m;
    m.hp = hp;
    ad::RngStream rng(seed, "init");
    auto& s = m.store;
    const std::size_t in = hp.inputWidth, e = hp.embSize, nC = hp.nConcepts, nY = hp.nTasks;

    m.conceptNet = ad::Mlp::create(s, "concept", {in, e, e, nC}, rng);
    switch (hp.arch) {
        case Architecture::LRM:
            m.sidechannelNet = ad::Mlp::create(s, "sidechannel", {in, e, e, e}, rng);
            m.linearHead = ad::Linear::create(s, "head", nC + e, nY, rng);
            break;
        case Architecture::CRM:
            m.sidechannelNet = ad::Mlp::create(s, "sidechannel", {in, e, e, e}, rng);
            if (hp.additiveHeads) {
                m.conceptLogitHead = ad::Mlp::create(s, "head.f", {nC, e, e, e, nY}, rng);
                m.sideLogitHead = ad::Mlp::create(s, "head.g", {e, nY}, rng);
            } else {
                m.mlpHead = ad::Mlp::create(s, "head", {nC + e, e, e, e, nY}, rng);
            }
            break;
        case Architecture::CEM: {
            const std::size_t w = hp.sidechannelWidth();
            m.sidechannelNet = ad::Mlp::create(s, "sidechannel", {in, w, w, w, w}, rng);
            m.mlpHead = ad::Mlp::create(s, "head", {nC * hp.conceptEmb, e, e, e, nY}, rng);
            break;
        }
        case Architecture::DCR: {
            const std::size_t w = hp.sidechannelWidth();
            m.sidechannelNet = ad::Mlp::create(s, "sidechannel", {in, w, w, w, w}, rng);
            m.dcrHead = zoo::DcrHead::create(s, "head", nC, nY, hp.conceptEmb, rng);
            break;
        }
        case Architecture::CMR:
            m.sidechannelNet = ad::Mlp::create(s, "sidechannel", {in, e, e, e, nY * hp.nRules}, rng);
            m.rulebook = zoo::Rulebook::create(s, "rules", nC, nY, hp.nRules, hp.ruleEmb, rng);
            break;
    }
    if (hp.priorMode == PriorMode::Learnable) m.priorParam = s.add("prior", Tensor(1, hp.sidechannelWidth()));
    return m;
}

Var CsmModel::conceptProbs(Tape& tape, Var x) const { return ad::sigmoid(conceptNet(tape, store, x)); }

Var CsmModel::sidechannel(Tape& tape, Var x) const {
    const Var raw = sidechannelNet(tape, store, x);
    return hp.arch == Architecture::CMR ? ad::softmaxGroups(raw, hp.nRules) : raw;
}

Var CsmModel::prior(Tape& tape) const {
    if (priorParam) {
        const Var p = tape.param(store, *priorParam);
        return hp.arch == Architecture::CMR ? ad::softmaxGroups(p, hp.nRules) : p;
    }
    if (marginalPrior.empty())
        throw Error("bottleneck inference needs a sidechannel prior: compute the marginalized prior first");
    return tape.constant(marginalPrior);
}

ConceptInputs CsmModel::conceptInputs(Tape& tape, Var probs) const {
    return {tape.constant(hardThreshold(probs.value())), ad::stopGradient(probs)};
}

Var CsmModel::conceptLogits(Tape& tape, Var hardConcepts) const {
    if (!hp.additiveHeads) throw InvalidArgument("model has no additive concept head");
    return conceptLogitHead(tape, store, hardConcepts);
}

Var CsmModel::sideLogits(Tape& tape, Var z) const {
    if (!hp.additiveHeads) throw InvalidArgument("model has no additive sidechannel head");
    return sideLogitHead(tape, store, z);
}

Var CsmModel::task(Tape& tape, const ConceptInputs& c, Var z) const {
    const std::size_t g = hp.taskGroup;
    const std::size_t batch = c.hard.rows();
    switch (hp.arch) {
        case Architecture::LRM: return zoo::lrmTask(tape, store, linearHead, c.hard, broadcastRows(tape, z, batch), g);
        case Architecture::CRM:
            if (hp.additiveHeads) {
                const Var zb = broadcastRows(tape, z, batch);
                return zoo::taskProbabilities(conceptLogitHead(tape, store, c.hard) + sideLogitHead(tape, store, zb), g);
            }
            return zoo::crmTask(tape, store, mlpHead, c.hard, broadcastRows(tape, z, batch), g);
        case Architecture::CEM:
            return zoo::cemMixAndPredict(tape, store, mlpHead, c.soft, broadcastRows(tape, z, batch), hp.conceptEmb, g);
        case Architecture::DCR: return dcrHead(tape, store, c.hard, broadcastRows(tape, z, batch), g);
        case Architecture::CMR: return zoo::cmrInfer(c.hard, z, rulebook.roles(tape, store), hp.nRules, g);
    }
    throw Error("unknown architecture");
}

Var CsmModel::taskBottleneck(Tape& tape, const ConceptInputs& c) const {
    if (hp.cmrAllRules) return zoo::cmrInferAllRules(c.hard, rulebook.roles(tape, store), hp.nRules, hp.taskGroup);
    return task(tape, c, prior(tape));
}

SidechannelPrior CsmModel::currentPrior() const {
    Tape tape;
    return {hp.priorMode, hp.sidechannelKind(), prior(tape).value()};
}

void CsmModel::setPrior(const SidechannelPrior& p) {
    if (hp.priorMode != PriorMode::Marginalized || p.mode != PriorMode::Marginalized)
        throw InvalidArgument("only a marginalized prior can be assigned; learnable priors are parameters");
    if (p.kind != hp.sidechannelKind() || p.payload.rows() != 1 || p.payload.cols() != hp.sidechannelWidth())
        throw ShapeError("prior payload " + p.payload.shapeString() + " does not match sidechannel width " +
                         std::to_string(hp.sidechannelWidth()));
    marginalPrior = p.payload;
}

ConceptDistribution predictConcepts(const CsmModel& m, const Tensor& x) {
    Tape tape;
    return {ConceptKind::Bernoulli, m.conceptProbs(tape, tape.constant(x)).value()};
}

SidechannelDistribution predictSidechannel(const CsmModel& m, const Tensor& x) {
    Tape tape;
    return {m.hp.sidechannelKind(), m.sidechannel(tape, tape.constant(x)).value()};
}

TaskDistribution inferDefault(const CsmModel& m, const Tensor& x) {
    Tape tape;
    const Var xv = tape.constant(x);
    const auto c = m.conceptInputs(tape, m.conceptProbs(tape, xv));
    return {m.taskDefault(tape, c, xv).value(), m.hp.taskGroup != 0};
}

TaskDistribution inferBottleneck(const CsmModel& m, const Tensor& x) {
    Tape tape;
    const auto c = m.conceptInputs(tape, m.conceptProbs(tape, tape.constant(x)));
    return {m.taskBottleneck(tape, c).value(), m.hp.taskGroup != 0};
}

TaskDistribution inferWithConcepts(const CsmModel& m, const Tensor& x, const Tensor& conceptProbs, InferenceMode mode) {
    if (conceptProbs.rows() != x.rows() || conceptProbs.cols() != m.hp.nConcepts)
        throw ShapeError("concepts " + conceptProbs.shapeString() + " do not match " + std::to_string(x.rows()) + " inputs over " +
                         std::to_string(m.hp.nConcepts) + " concepts");
    Tape tape;
    const auto c = m.conceptInputs(tape, tape.constant(conceptProbs));
    if (mode == InferenceMode::Bottleneck) return {m.taskBottleneck(tape, c).value(), m.hp.taskGroup != 0};
    return {m.taskDefault(tape, c, tape.constant(x)).value(), m.hp.taskGroup != 0};
}

SidechannelPrior computeMarginalPrior(const CsmModel& m, const Tensor& x) {
    if (x.empty()) throw InvalidArgument("cannot compute a marginalized prior from an empty dataset");
    Tape tape;
    const Tensor z = m.sidechannel(tape, tape.constant(x)).value();
    // Offsets from the first row keep the mean of a constant column exact.
    Tensor mean(1, z.cols());
    for (std::size_t j = 0; j < z.cols(); ++j) {
        double offset = 0.0;
        for (std::size_t i = 0; i < z.rows(); ++i) offset += z(i, j) - z(0, j);
        mean(0, j) = z(0, j) + offset / static_cast<double>(z.rows());
    }
    return {PriorMode::Marginalized, m.hp.sidechannelKind(), mean};
}

SidechannelPrior computeMarginalPrior(const CsmModel& m, const data::SyntheticDataset& ds) {
    if (ds.splits.train.empty()) throw InvalidArgument("cannot compute a marginalized prior from an empty training split");
    return computeMarginalPrior(m, ds.x.gatherRows(ds.splits.train));
}

}  // namespace csm::model
