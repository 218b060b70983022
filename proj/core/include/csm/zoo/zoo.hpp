#pragma once

#include <span>

#include "csm/ad/layers.hpp"
#include "csm/ad/tape.hpp"

namespace csm::zoo {

using ad::Linear;
using ad::Mlp;
using ad::ParameterStore;
using ad::Tape;
using ad::Tensor;
using ad::Var;

/// Added to every score before renormalizing a mutually-exclusive group of
/// rule or fuzzy outputs, so an all-zero group becomes uniform.
inline constexpr double kRenormEpsilon = 1e-9;

/// Independent sigmoids when `exclusiveGroup` is 0, otherwise a softmax over
/// consecutive groups of that many tasks.
Var taskProbabilities(Var logits, std::size_t exclusiveGroup);
/// Scores in [0,1] mapped to (s+eps)/sum(s+eps) per group; identity when the group is 0.
Var renormalizeGroups(Var scores, std::size_t exclusiveGroup);

// ---- LRM / CRM ------------------------------------------------------------

/// sigmoid(linear(concat(c, z))).
Var lrmTask(Tape& tape, const ParameterStore& store, const Linear& head, Var c, Var z, std::size_t exclusiveGroup = 0);
/// sigmoid(mlp(concat(c, z))).
Var crmTask(Tape& tape, const ParameterStore& store, const Mlp& head, Var c, Var z, std::size_t exclusiveGroup = 0);

// ---- CEM ------------------------------------------------------------------

/// Pairs are laid out per row as nC blocks of [z_i1 | z_i2], each cEmb wide.
/// Returns B x (nC*cEmb) with z_i = c_i z_i1 + (1 - c_i) z_i2.
Var cemMix(Var conceptScores, Var pairs, std::size_t cEmb);
Var cemMixAndPredict(Tape& tape, const ParameterStore& store, const Mlp& head, Var conceptScores, Var pairs, std::size_t cEmb,
                     std::size_t exclusiveGroup = 0);

// ---- DCR ------------------------------------------------------------------

/// Relevance and polarity of each concept for one task.
struct FuzzyRule {
    std::vector<double> relevance;
    std::vector<double> polarity;
};

/// relevance and polarity are B x (nTasks*nC), task-major. Returns B x nTasks with
/// y = prod_i (1 - rel_i (1 - l_i)), l_i = pol_i c_i + (1 - pol_i)(1 - c_i).
Var dcrEvaluate(Var concepts, Var relevance, Var polarity, std::size_t nTasks);
/// One rule applied to every row of `concepts`; returns n x 1.
Tensor dcrEvaluate(const Tensor& concepts, const FuzzyRule& rule);

/// Decodes each concept's mixed embedding into (polarity, relevance) for every task.
struct DcrHead {
    Mlp roles;  // cEmb -> 2*nY, applied per concept
    std::size_t nConcepts = 0;
    std::size_t nTasks = 0;
    std::size_t cEmb = 0;

    static DcrHead create(ParameterStore& store, const std::string& name, std::size_t nConcepts, std::size_t nTasks,
                          std::size_t cEmb, ad::RngStream& rng);
    /// Mixes pairs with the (hard) concepts, decodes roles, evaluates the rules.
    Var operator()(Tape& tape, const ParameterStore& store, Var concepts, Var pairs, std::size_t exclusiveGroup = 0) const;
};

// ---- CMR ------------------------------------------------------------------

/// Learnable rule embeddings (nY*nR rows) and the decoder mapping each to a
/// per-concept (positive, negative, irrelevant) simplex.
struct Rulebook {
    ad::ParamId embeddings = 0;
    Mlp decoder;
    std::size_t nTasks = 0;
    std::size_t nRules = 0;
    std::size_t nConcepts = 0;

    static Rulebook create(ParameterStore& store, const std::string& name, std::size_t nConcepts, std::size_t nTasks,
                           std::size_t nRules, std::size_t ruleEmb, ad::RngStream& rng);
    /// 1 x (nY*nR*nC*3): rule (t, r) concept i role triple at ((t*nR + r)*nC + i)*3.
    Var roles(Tape& tape, const ParameterStore& store) const;
    Tensor roles(const ParameterStore& store) const;
};

/// Probability that each rule's conjunction holds under independent concepts.
/// roles has 1 or B rows of K*nC*3 entries; returns B x K.
Var cmrSatisfaction(Var conceptProbs, Var roles);
/// Single rule: prod_i (irr_i + pos_i p_i + neg_i (1 - p_i)). Roles are nC consecutive triples.
double cmrEvaluateRule(std::span<const double> conceptProbs, std::span<const double> roles);

/// Per task, sum_r select_r * sat_r. select is B x (nY*nR) (or 1 row), softmaxed per task.
Var cmrInfer(Var conceptProbs, Var select, Var roles, std::size_t nRules, std::size_t exclusiveGroup = 0);
/// Per task, 1 - prod_r (1 - sat_r): the OR of every rule in the task's book.
Var cmrInferAllRules(Var conceptProbs, Var roles, std::size_t nRules, std::size_t exclusiveGroup = 0);
/// Validating value-level entry point; returns B x nY.
Tensor cmrInfer(const Tensor& conceptProbs, const Tensor& select, const Tensor& roles, std::size_t nRules);

}  // namespace csm::zoo
