#include "csm/data/generators.hpp"

#include <algorithm>

#include "csm/ad/rng.hpp"
#include "csm/error.hpp"

namespace csm::data {

namespace {

using ad::RngStream;
using ad::Tensor;

std::vector<std::string> numberedNames(const std::string& prefix, std::size_t n) {
    std::vector<std::string> names(n);
    for (std::size_t i = 0; i < n; ++i) names[i] = prefix + std::to_string(i + 1);
    return names;
}

/// Writes [v, 1-v] + noise for one binary value at column `col`.
void encodePair(Tensor& x, std::size_t row, std::size_t col, double v, double noise, RngStream& rng) {
    x(row, col) = v + rng.gaussian(0.0, noise);
    x(row, col + 1) = (1.0 - v) + rng.gaussian(0.0, noise);
}

Dnf drawDnf(std::size_t nConcepts, std::size_t termCount, RngStream rng) {
    Dnf dnf;
    const std::size_t maxWidth = std::min<std::size_t>(3, nConcepts);
    const std::size_t minWidth = std::min<std::size_t>(2, nConcepts);
    for (std::size_t t = 0; t < termCount; ++t) {
        const std::size_t width = minWidth + static_cast<std::size_t>(rng.uniformInt(maxWidth - minWidth + 1));
        auto perm = rng.permutation(nConcepts);
        std::vector<Literal> term;
        for (std::size_t k = 0; k < width; ++k) term.push_back({perm[k], rng.bernoulli(0.5)});
        std::sort(term.begin(), term.end(), [](const Literal& a, const Literal& b) { return a.index < b.index; });
        dnf.terms.push_back(std::move(term));
    }
    return dnf;
}

/// Draws one DNF per task, redrawing with the next sub-seed whenever a task
/// would be constant over the sampled concepts.
std::vector<Dnf> drawTaskRules(const Tensor& concepts, std::size_t nTasks, std::size_t termCount, const RngStream& rng) {
    std::vector<Dnf> rules;
    for (std::size_t t = 0; t < nTasks; ++t) {
        const auto taskStream = rng.substream(t);
        for (std::uint64_t attempt = 0;; ++attempt) {
            if (attempt > 1000) throw InvalidArgument("could not draw a non-constant DNF; increase n or nConcepts");
            Dnf dnf = drawDnf(concepts.cols(), termCount, taskStream.substream(attempt));
            std::size_t positives = 0;
            for (std::size_t i = 0; i < concepts.rows(); ++i) positives += dnf.evaluate(concepts.rowSpan(i)) ? 1 : 0;
            if (concepts.rows() == 1 || (positives > 0 && positives < concepts.rows())) {
                rules.push_back(std::move(dnf));
                break;
            }
        }
    }
    return rules;
}

void requirePositive(std::size_t v, const char* what) {
    if (v == 0) throw InvalidArgument(std::string(what) + " must be >= 1");
}

void requireNonNegative(double v, const char* what) {
    if (!(v >= 0.0)) throw InvalidArgument(std::string(what) + " must be >= 0");
}

void requireProbability(double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument(std::string(what) + " must be in [0,1]");
}

}  // namespace

SyntheticDataset genXor(std::size_t n, double noiseStd, std::uint64_t seed) {
    requirePositive(n, "n");
    requireNonNegative(noiseStd, "noiseStd");
    RngStream root(seed, "xor");
    auto conceptRng = root.substream("concepts");
    auto noiseRng = root.substream("noise");

    SyntheticDataset ds;
    ds.x = Tensor(n, 4);
    ds.c = Tensor(n, 2);
    ds.y = Tensor(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double c1 = conceptRng.bernoulli(0.5) ? 1.0 : 0.0;
        const double c2 = conceptRng.bernoulli(0.5) ? 1.0 : 0.0;
        ds.c(i, 0) = c1;
        ds.c(i, 1) = c2;
        ds.y(i, 0) = c1 != c2 ? 1.0 : 0.0;
        encodePair(ds.x, i, 0, c1, noiseStd, noiseRng);
        encodePair(ds.x, i, 2, c2, noiseStd, noiseRng);
    }
    ds.conceptNames = {"c1", "c2"};
    ds.taskNames = {"xor"};
    ds.splits = makeSplits(n, seed);
    ds.fingerprint = {"xor", {{"n", static_cast<double>(n)}, {"noise_std", noiseStd}}, seed, {}};
    ds.fingerprint.rules = {Dnf{{{{0, true}, {1, false}}, {{0, false}, {1, true}}}}};
    return ds;
}

SyntheticDataset genDnf(const DnfOptions& o, std::uint64_t seed) {
    requirePositive(o.n, "n");
    requirePositive(o.nConcepts, "nConcepts");
    requirePositive(o.nTasks, "nTasks");
    requirePositive(o.termCount, "termCount");
    requireProbability(o.conceptNoise, "conceptNoise");
    requireNonNegative(o.featureNoise, "featureNoise");
    RngStream root(seed, "dnf");
    auto conceptRng = root.substream("concepts");
    auto noiseRng = root.substream("noise");
    auto flipRng = root.substream("flips");

    Tensor clean(o.n, o.nConcepts);
    for (auto& v : clean.storage()) v = conceptRng.bernoulli(0.5) ? 1.0 : 0.0;
    const auto rules = drawTaskRules(clean, o.nTasks, o.termCount, root.substream("rules"));

    SyntheticDataset ds;
    ds.x = Tensor(o.n, 2 * o.nConcepts);
    ds.c = clean;
    ds.y = Tensor(o.n, o.nTasks);
    for (std::size_t i = 0; i < o.n; ++i) {
        for (std::size_t k = 0; k < o.nConcepts; ++k) {
            encodePair(ds.x, i, 2 * k, clean(i, k), o.featureNoise, noiseRng);
            if (flipRng.bernoulli(o.conceptNoise)) ds.c(i, k) = 1.0 - clean(i, k);
        }
        for (std::size_t t = 0; t < o.nTasks; ++t) ds.y(i, t) = rules[t].evaluate(clean.rowSpan(i)) ? 1.0 : 0.0;
    }
    ds.conceptNames = numberedNames("c", o.nConcepts);
    ds.taskNames = numberedNames("y", o.nTasks);
    ds.splits = makeSplits(o.n, seed);
    ds.fingerprint = {"dnf",
                      {{"n", static_cast<double>(o.n)},
                       {"n_concepts", static_cast<double>(o.nConcepts)},
                       {"n_tasks", static_cast<double>(o.nTasks)},
                       {"term_count", static_cast<double>(o.termCount)},
                       {"concept_noise", o.conceptNoise},
                       {"feature_noise", o.featureNoise}},
                      seed,
                      rules};
    return ds;
}

SyntheticDataset genLatent(const LatentOptions& o, std::uint64_t seed) {
    requirePositive(o.n, "n");
    requirePositive(o.nConcepts, "nConcepts");
    requirePositive(o.nTasks, "nTasks");
    requirePositive(o.termCount, "termCount");
    if (!(o.latentWeight > 0.0 && o.latentWeight < 1.0)) throw InvalidArgument("latentWeight must be in (0,1)");
    requireNonNegative(o.featureNoise, "featureNoise");
    requireNonNegative(o.latentNoise, "latentNoise");
    RngStream root(seed, "latent");
    auto conceptRng = root.substream("concepts");
    auto latentRng = root.substream("latent");
    auto noiseRng = root.substream("noise");

    Tensor clean(o.n, o.nConcepts);
    for (auto& v : clean.storage()) v = conceptRng.bernoulli(0.5) ? 1.0 : 0.0;
    const auto rules = drawTaskRules(clean, o.nTasks, o.termCount, root.substream("rules"));

    SyntheticDataset ds;
    ds.x = Tensor(o.n, 2 * o.nConcepts + 2);
    ds.c = clean;
    ds.y = Tensor(o.n, o.nTasks);
    for (std::size_t i = 0; i < o.n; ++i) {
        const double h = latentRng.bernoulli(o.latentWeight) ? 1.0 : 0.0;
        for (std::size_t k = 0; k < o.nConcepts; ++k) encodePair(ds.x, i, 2 * k, clean(i, k), o.featureNoise, noiseRng);
        encodePair(ds.x, i, 2 * o.nConcepts, h, o.latentNoise, noiseRng);
        for (std::size_t t = 0; t < o.nTasks; ++t) {
            const bool base = rules[t].evaluate(clean.rowSpan(i));
            ds.y(i, t) = (base != (h == 1.0)) ? 1.0 : 0.0;
        }
    }
    ds.conceptNames = numberedNames("c", o.nConcepts);
    ds.taskNames = numberedNames("y", o.nTasks);
    ds.splits = makeSplits(o.n, seed);
    ds.fingerprint = {"latent",
                      {{"n", static_cast<double>(o.n)},
                       {"n_concepts", static_cast<double>(o.nConcepts)},
                       {"n_tasks", static_cast<double>(o.nTasks)},
                       {"term_count", static_cast<double>(o.termCount)},
                       {"latent_weight", o.latentWeight},
                       {"feature_noise", o.featureNoise},
                       {"latent_noise", o.latentNoise}},
                      seed,
                      rules};
    return ds;
}

SyntheticDataset genSymbolicAddition(std::size_t nDigits, std::size_t n, double featureNoise, std::uint64_t seed) {
    requirePositive(n, "n");
    if (nDigits < 2) throw InvalidArgument("nDigits must be >= 2");
    requireNonNegative(featureNoise, "featureNoise");
    RngStream root(seed, "addition");
    auto digitRng = root.substream("digits");
    auto noiseRng = root.substream("noise");

    const std::size_t classes = 2 * nDigits - 1;
    SyntheticDataset ds;
    ds.x = Tensor(n, 2 * nDigits);
    ds.c = Tensor(n, 2 * nDigits);
    ds.y = Tensor(n, classes);
    for (std::size_t i = 0; i < n; ++i) {
        const auto d1 = static_cast<std::size_t>(digitRng.uniformInt(nDigits));
        const auto d2 = static_cast<std::size_t>(digitRng.uniformInt(nDigits));
        ds.c(i, d1) = 1.0;
        ds.c(i, nDigits + d2) = 1.0;
        ds.y(i, d1 + d2) = 1.0;
        for (std::size_t k = 0; k < 2 * nDigits; ++k) ds.x(i, k) = ds.c(i, k) + noiseRng.gaussian(0.0, featureNoise);
    }
    for (std::size_t d = 0; d < nDigits; ++d) ds.conceptNames.push_back("a=" + std::to_string(d));
    for (std::size_t d = 0; d < nDigits; ++d) ds.conceptNames.push_back("b=" + std::to_string(d));
    for (std::size_t s = 0; s < classes; ++s) ds.taskNames.push_back("sum=" + std::to_string(s));
    ds.conceptGroups.mutuallyExclusive = true;
    ds.conceptGroups.groups.resize(2);
    for (std::size_t d = 0; d < nDigits; ++d) {
        ds.conceptGroups.groups[0].push_back(d);
        ds.conceptGroups.groups[1].push_back(nDigits + d);
    }
    ds.taskGroups.mutuallyExclusive = true;
    ds.taskGroups.groups.resize(1);
    for (std::size_t s = 0; s < classes; ++s) ds.taskGroups.groups[0].push_back(s);
    ds.splits = makeSplits(n, seed);
    ds.fingerprint = {"addition",
                      {{"n", static_cast<double>(n)}, {"n_digits", static_cast<double>(nDigits)}, {"feature_noise", featureNoise}},
                      seed,
                      {}};
    return ds;
}

SyntheticDataset regenerate(const Fingerprint& fp) {
    auto count = [&](const char* key) { return static_cast<std::size_t>(fp.param(key)); };
    if (fp.generator == "xor") return genXor(count("n"), fp.param("noise_std"), fp.seed);
    if (fp.generator == "dnf")
        return genDnf({count("n_concepts"), count("n_tasks"), count("term_count"), count("n"), fp.param("concept_noise"),
                       fp.param("feature_noise")},
                      fp.seed);
    if (fp.generator == "latent")
        return genLatent({count("n_concepts"), count("n_tasks"), count("term_count"), count("n"), fp.param("latent_weight"),
                          fp.param("feature_noise"), fp.param("latent_noise")},
                         fp.seed);
    if (fp.generator == "addition") return genSymbolicAddition(count("n_digits"), count("n"), fp.param("feature_noise"), fp.seed);
    throw InvalidArgument("unknown generator '" + fp.generator + "'");
}

}  // namespace csm::data
