#include "csm/zoo/zoo.hpp"

#include <cmath>

#include "csm/error.hpp"

namespace csm::zoo {

namespace {

void requireUnitInterval(std::span<const double> values, const char* what) {
    for (double v : values)
        if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument(std::string(what) + " must lie in [0,1], got " + std::to_string(v));
}

void requireSimplexTriples(std::span<const double> roles, const char* what) {
    if (roles.size() % 3 != 0) throw ShapeError(std::string(what) + ": role vector length is not a multiple of 3");
    requireUnitInterval(roles, what);
    for (std::size_t k = 0; k < roles.size(); k += 3) {
        const double s = roles[k] + roles[k + 1] + roles[k + 2];
        if (std::abs(s - 1.0) > 1e-9)
            throw InvalidArgument(std::string(what) + ": role triple " + std::to_string(k / 3) + " sums to " + std::to_string(s));
    }
}

Var concatPair(Var a, Var b) {
    const Var parts[] = {a, b};
    return ad::concatCols(parts);
}

}  // namespace

Var taskProbabilities(Var logits, std::size_t exclusiveGroup) {
    return exclusiveGroup == 0 ? ad::sigmoid(logits) : ad::softmaxGroups(logits, exclusiveGroup);
}

Var renormalizeGroups(Var scores, std::size_t exclusiveGroup) {
    if (exclusiveGroup == 0) return scores;
    // softmax(log(s + eps)) == (s + eps) / sum(s + eps)
    return ad::softmaxGroups(ad::log(scores + kRenormEpsilon), exclusiveGroup);
}

Var lrmTask(Tape& tape, const ParameterStore& store, const Linear& head, Var c, Var z, std::size_t exclusiveGroup) {
    return taskProbabilities(head(tape, store, concatPair(c, z)), exclusiveGroup);
}

Var crmTask(Tape& tape, const ParameterStore& store, const Mlp& head, Var c, Var z, std::size_t exclusiveGroup) {
    return taskProbabilities(head(tape, store, concatPair(c, z)), exclusiveGroup);
}

Var cemMix(Var conceptScores, Var pairs, std::size_t cEmb) {
    const std::size_t nC = conceptScores.cols();
    if (cEmb == 0 || pairs.cols() != nC * 2 * cEmb || pairs.rows() != conceptScores.rows())
        throw ShapeError("cem mix: pairs " + pairs.value().shapeString() + " do not hold " + std::to_string(nC) +
                         " concept pairs of width " + std::to_string(cEmb) + " for scores " + conceptScores.value().shapeString());
    std::vector<std::size_t> first, second, owner;
    for (std::size_t i = 0; i < nC; ++i)
        for (std::size_t e = 0; e < cEmb; ++e) {
            first.push_back(i * 2 * cEmb + e);
            second.push_back(i * 2 * cEmb + cEmb + e);
            owner.push_back(i);
        }
    const Var z1 = ad::gatherCols(pairs, std::move(first));
    const Var z2 = ad::gatherCols(pairs, std::move(second));
    const Var c = ad::gatherCols(conceptScores, std::move(owner));
    return c * z1 + (1.0 - c) * z2;
}

Var cemMixAndPredict(Tape& tape, const ParameterStore& store, const Mlp& head, Var conceptScores, Var pairs, std::size_t cEmb,
                     std::size_t exclusiveGroup) {
    return taskProbabilities(head(tape, store, cemMix(conceptScores, pairs, cEmb)), exclusiveGroup);
}

Var dcrEvaluate(Var concepts, Var relevance, Var polarity, std::size_t nTasks) {
    const std::size_t nC = concepts.cols();
    if (nTasks == 0 || relevance.cols() != nTasks * nC || polarity.cols() != nTasks * nC)
        throw ShapeError("dcr: relevance " + relevance.value().shapeString() + " / polarity " + polarity.value().shapeString() +
                         " do not match " + std::to_string(nTasks) + " tasks over " + std::to_string(nC) + " concepts");
    std::vector<std::size_t> owner;
    for (std::size_t t = 0; t < nTasks; ++t)
        for (std::size_t i = 0; i < nC; ++i) owner.push_back(i);
    const Var c = ad::gatherCols(concepts, std::move(owner));
    const Var literal = polarity * c + (1.0 - polarity) * (1.0 - c);
    return ad::prodGroups(1.0 - relevance * (1.0 - literal), nC);
}

Tensor dcrEvaluate(const Tensor& concepts, const FuzzyRule& rule) {
    if (rule.relevance.size() != concepts.cols() || rule.polarity.size() != concepts.cols())
        throw ShapeError("dcr: rule over " + std::to_string(rule.relevance.size()) + " concepts applied to " + concepts.shapeString());
    requireUnitInterval(concepts.data(), "dcr concepts");
    requireUnitInterval(rule.relevance, "dcr relevance");
    requireUnitInterval(rule.polarity, "dcr polarity");
    Tape tape;
    const Var c = tape.constant(concepts);
    const Var rel = tape.constant(Tensor::row(rule.relevance));
    const Var pol = tape.constant(Tensor::row(rule.polarity));
    return dcrEvaluate(c, rel, pol, 1).value();
}

DcrHead DcrHead::create(ParameterStore& store, const std::string& name, std::size_t nConcepts, std::size_t nTasks,
                        std::size_t cEmb, ad::RngStream& rng) {
    DcrHead h;
    h.nConcepts = nConcepts;
    h.nTasks = nTasks;
    h.cEmb = cEmb;
    h.roles = Mlp::create(store, name, {cEmb, cEmb, cEmb, cEmb, 2 * nTasks}, rng);
    return h;
}

Var DcrHead::operator()(Tape& tape, const ParameterStore& store, Var concepts, Var pairs, std::size_t exclusiveGroup) const {
    const std::size_t batch = concepts.rows();
    const Var mixed = cemMix(concepts, pairs, cEmb);
    const Var perConcept = ad::reshape(mixed, batch * nConcepts, cEmb);
    const Var decoded = ad::reshape(ad::sigmoid(roles(tape, store, perConcept)), batch, nConcepts * 2 * nTasks);
    std::vector<std::size_t> pol, rel;
    for (std::size_t t = 0; t < nTasks; ++t)
        for (std::size_t i = 0; i < nConcepts; ++i) {
            pol.push_back(i * 2 * nTasks + t);
            rel.push_back(i * 2 * nTasks + nTasks + t);
        }
    const Var y = dcrEvaluate(concepts, ad::gatherCols(decoded, std::move(rel)), ad::gatherCols(decoded, std::move(pol)), nTasks);
    return renormalizeGroups(y, exclusiveGroup);
}

Rulebook Rulebook::create(ParameterStore& store, const std::string& name, std::size_t nConcepts, std::size_t nTasks,
                          std::size_t nRules, std::size_t ruleEmb, ad::RngStream& rng) {
    if (nRules == 0 || ruleEmb == 0) throw InvalidArgument("rulebook needs at least one rule and a positive embedding width");
    Rulebook b;
    b.nTasks = nTasks;
    b.nRules = nRules;
    b.nConcepts = nConcepts;
    auto sub = rng.substream(name);
    b.embeddings = store.add(name + ".embeddings", ad::uniformInit(nTasks * nRules, ruleEmb, ruleEmb, sub));
    b.decoder = Mlp::create(store, name + ".decoder", {ruleEmb, ruleEmb, ruleEmb, ruleEmb, 3 * nConcepts}, rng);
    return b;
}

Var Rulebook::roles(Tape& tape, const ParameterStore& store) const {
    const Var logits = decoder(tape, store, tape.param(store, embeddings));
    return ad::reshape(ad::softmaxGroups(logits, 3), 1, nTasks * nRules * nConcepts * 3);
}

Tensor Rulebook::roles(const ParameterStore& store) const {
    Tape tape;
    return roles(tape, store).value();
}

Var cmrSatisfaction(Var conceptProbs, Var roles) {
    const std::size_t nC = conceptProbs.cols();
    if (roles.cols() % (3 * nC) != 0 || (roles.rows() != 1 && roles.rows() != conceptProbs.rows()))
        throw ShapeError("cmr: roles " + roles.value().shapeString() + " are not rule triples over " + std::to_string(nC) +
                         " concepts for probabilities " + conceptProbs.value().shapeString());
    const std::size_t slots = roles.cols() / 3;
    std::vector<std::size_t> pos(slots), neg(slots), irr(slots), owner(slots);
    for (std::size_t k = 0; k < slots; ++k) {
        pos[k] = 3 * k;
        neg[k] = 3 * k + 1;
        irr[k] = 3 * k + 2;
        owner[k] = k % nC;
    }
    const Var p = ad::gatherCols(conceptProbs, std::move(owner));
    const Var factor = ad::gatherCols(roles, std::move(irr)) + ad::gatherCols(roles, std::move(pos)) * p +
                       ad::gatherCols(roles, std::move(neg)) * (1.0 - p);
    return ad::prodGroups(factor, nC);
}

double cmrEvaluateRule(std::span<const double> conceptProbs, std::span<const double> roles) {
    if (roles.size() != 3 * conceptProbs.size())
        throw ShapeError("cmr rule: " + std::to_string(roles.size()) + " role entries for " + std::to_string(conceptProbs.size()) +
                         " concepts");
    requireUnitInterval(conceptProbs, "cmr concept probabilities");
    requireSimplexTriples(roles, "cmr rule");
    double sat = 1.0;
    for (std::size_t i = 0; i < conceptProbs.size(); ++i)
        sat *= roles[3 * i + 2] + roles[3 * i] * conceptProbs[i] + roles[3 * i + 1] * (1.0 - conceptProbs[i]);
    return sat;
}

Var cmrInfer(Var conceptProbs, Var select, Var roles, std::size_t nRules, std::size_t exclusiveGroup) {
    const Var sat = cmrSatisfaction(conceptProbs, roles);
    if (select.cols() != sat.cols())
        throw ShapeError("cmr: selection " + select.value().shapeString() + " does not match " + std::to_string(sat.cols()) + " rules");
    return renormalizeGroups(ad::sumGroups(select * sat, nRules), exclusiveGroup);
}

Var cmrInferAllRules(Var conceptProbs, Var roles, std::size_t nRules, std::size_t exclusiveGroup) {
    const Var sat = cmrSatisfaction(conceptProbs, roles);
    return renormalizeGroups(1.0 - ad::prodGroups(1.0 - sat, nRules), exclusiveGroup);
}

Tensor cmrInfer(const Tensor& conceptProbs, const Tensor& select, const Tensor& roles, std::size_t nRules) {
    requireUnitInterval(conceptProbs.data(), "cmr concept probabilities");
    requireSimplexTriples(roles.data(), "cmr rulebook");
    if (nRules == 0 || select.cols() % nRules != 0) throw ShapeError("cmr: selection width is not a multiple of the rule count");
    requireUnitInterval(select.data(), "cmr selection");
    for (std::size_t r = 0; r < select.rows(); ++r)
        for (std::size_t t = 0; t < select.cols(); t += nRules) {
            double s = 0.0;
            for (std::size_t k = 0; k < nRules; ++k) s += select(r, t + k);
            if (std::abs(s - 1.0) > 1e-9) throw InvalidArgument("cmr: rule selection for task " + std::to_string(t / nRules) +
                                                                " sums to " + std::to_string(s));
        }
    Tape tape;
    return cmrInfer(tape.constant(conceptProbs), tape.constant(select), tape.constant(roles), nRules).value();
}

}  // namespace csm::zoo
