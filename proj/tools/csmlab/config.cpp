#include "config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "csm/data/generators.hpp"
#include "csm/error.hpp"
#include "json.hpp"

namespace csm::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fieldError(const std::string& path, const std::string& what) {
    throw InvalidArgument("config field '" + path + "': " + what);
}

void rejectUnknown(const json& obj, const std::string& prefix, const std::set<std::string>& known) {
    for (const auto& [key, value] : obj.items())
        if (!known.count(key)) fieldError(prefix + key, "unknown field");
}

double number(const json& v, const std::string& path) {
    if (!v.is_number()) fieldError(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fieldError(path, "must be finite");
    return d;
}

std::uint64_t count(const json& v, const std::string& path) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        fieldError(path, "expected a non-negative integer");
    return v.get<std::uint64_t>();
}

bool boolean(const json& v, const std::string& path) {
    if (!v.is_boolean()) fieldError(path, "expected true or false");
    return v.get<bool>();
}

std::string text(const json& v, const std::string& path) {
    if (!v.is_string()) fieldError(path, "expected a string");
    return v.get<std::string>();
}

const json& object(const json& v, const std::string& path) {
    if (!v.is_object()) fieldError(path, "expected an object");
    return v;
}

template <typename F>
auto parsed(const std::string& path, F&& f) {
    try {
        return f();
    } catch (const InvalidArgument& e) {
        fieldError(path, e.what());
    }
}

void parseDataset(const json& j, DatasetSpec& d) {
    rejectUnknown(object(j, "dataset"), "dataset.", {"generator", "seed", "path", "params"});
    if (j.contains("generator")) d.generator = text(j["generator"], "dataset.generator");
    if (j.contains("seed")) d.seed = count(j["seed"], "dataset.seed");
    if (j.contains("path")) d.path = text(j["path"], "dataset.path");
    if (j.contains("params")) {
        const auto& defaults = parsed("dataset.generator", [&]() -> const auto& { return generatorDefaults(d.generator); });
        for (const auto& [key, value] : object(j["params"], "dataset.params").items()) {
            const std::string path = "dataset.params." + key;
            if (!defaults.count(key)) fieldError(path, "not a parameter of generator '" + d.generator + "'");
            d.params[key] = number(value, path);
        }
    }
}

void parseTrain(const json& j, train::TrainConfig& t) {
    rejectUnknown(object(j, "train"), "train.",
                  {"alpha", "beta", "divergence", "prior", "baseline", "dropout_p", "randint_p", "epochs", "batch_size",
                   "learning_rate", "weight_decay", "restore_best", "patience", "emb_size", "concept_emb", "n_rules", "rule_emb"});
    if (j.contains("alpha")) t.alpha = number(j["alpha"], "train.alpha");
    if (j.contains("beta")) t.beta = number(j["beta"], "train.beta");
    if (j.contains("divergence"))
        t.divergence = parsed("train.divergence", [&] { return metrics::parseDivergence(text(j["divergence"], "train.divergence")); });
    if (j.contains("prior")) t.priorMode = parsed("train.prior", [&] { return model::parsePriorMode(text(j["prior"], "train.prior")); });
    if (j.contains("baseline"))
        t.baseline = parsed("train.baseline", [&] { return train::parseBaseline(text(j["baseline"], "train.baseline")); });
    if (j.contains("dropout_p")) t.dropoutP = number(j["dropout_p"], "train.dropout_p");
    if (j.contains("randint_p")) t.randintP = number(j["randint_p"], "train.randint_p");
    if (j.contains("epochs")) t.epochs = count(j["epochs"], "train.epochs");
    if (j.contains("batch_size")) t.batchSize = count(j["batch_size"], "train.batch_size");
    if (j.contains("learning_rate")) t.optimizer.learningRate = number(j["learning_rate"], "train.learning_rate");
    if (j.contains("weight_decay")) t.optimizer.weightDecay = number(j["weight_decay"], "train.weight_decay");
    if (j.contains("restore_best")) t.restoreBest = boolean(j["restore_best"], "train.restore_best");
    if (j.contains("patience")) t.patience = count(j["patience"], "train.patience");
    if (j.contains("emb_size")) t.sizes.embSize = count(j["emb_size"], "train.emb_size");
    if (j.contains("concept_emb")) t.sizes.conceptEmb = count(j["concept_emb"], "train.concept_emb");
    if (j.contains("n_rules")) t.sizes.nRules = count(j["n_rules"], "train.n_rules");
    if (j.contains("rule_emb")) t.sizes.ruleEmb = count(j["rule_emb"], "train.rule_emb");
}

void parseSweep(const json& j, SweepSpec& s) {
    rejectUnknown(object(j, "sweep"), "sweep.", {"beta", "emb_size"});
    if (j.contains("beta")) {
        if (!j["beta"].is_array()) fieldError("sweep.beta", "expected a list of numbers");
        for (std::size_t i = 0; i < j["beta"].size(); ++i) s.betas.push_back(number(j["beta"][i], "sweep.beta[" + std::to_string(i) + "]"));
    }
    if (j.contains("emb_size")) {
        if (!j["emb_size"].is_array()) fieldError("sweep.emb_size", "expected a list of integers");
        for (std::size_t i = 0; i < j["emb_size"].size(); ++i)
            s.embSizes.push_back(count(j["emb_size"][i], "sweep.emb_size[" + std::to_string(i) + "]"));
    }
}

}  // namespace

void ExperimentConfig::validate() const {
    parsed("train", [&] {
        train.validate();
        return 0;
    });
    if (!(delta > 0.0 && delta < 1.0)) fieldError("delta", "must be in (0,1)");
    if (dataset.path.empty()) parsed("dataset.generator", [&]() -> const auto& { return generatorDefaults(dataset.generator); });
    for (double b : sweep.betas)
        if (!(b >= 0.0)) fieldError("sweep.beta", "values must be >= 0");
    for (auto e : sweep.embSizes)
        if (e == 0) fieldError("sweep.emb_size", "values must be >= 1");
    if (train.baseline == train::Baseline::Detach && arch != model::Architecture::CRM)
        fieldError("train.baseline", "detach needs arch CRM");
}

const std::map<std::string, double>& generatorDefaults(const std::string& generator) {
    static const std::map<std::string, std::map<std::string, double>> table = [] {
        const data::DnfOptions dnf;
        const data::LatentOptions latent;
        std::map<std::string, std::map<std::string, double>> t;
        t["xor"] = {{"n", 10000}, {"noise_std", 0.1}};
        t["dnf"] = {{"n_concepts", double(dnf.nConcepts)}, {"n_tasks", double(dnf.nTasks)},     {"term_count", double(dnf.termCount)},
                    {"n", double(dnf.n)},                 {"concept_noise", dnf.conceptNoise}, {"feature_noise", dnf.featureNoise}};
        t["latent"] = {{"n_concepts", double(latent.nConcepts)}, {"n_tasks", double(latent.nTasks)},
                       {"term_count", double(latent.termCount)}, {"n", double(latent.n)},
                       {"latent_weight", latent.latentWeight},   {"feature_noise", latent.featureNoise},
                       {"latent_noise", latent.latentNoise}};
        t["addition"] = {{"n_digits", 10}, {"n", 4000}, {"feature_noise", 0.2}};
        return t;
    }();
    const auto it = table.find(generator);
    if (it == table.end()) throw InvalidArgument("unknown generator '" + generator + "' (expected xor, dnf, latent or addition)");
    return it->second;
}

data::Fingerprint datasetFingerprint(const DatasetSpec& spec, std::uint64_t experimentSeed) {
    data::Fingerprint fp;
    fp.generator = spec.generator;
    fp.params = generatorDefaults(spec.generator);
    for (const auto& [k, v] : spec.params) {
        if (!fp.params.count(k)) throw InvalidArgument("'" + k + "' is not a parameter of generator '" + spec.generator + "'");
        fp.params[k] = v;
    }
    fp.seed = spec.seed.value_or(experimentSeed);
    return fp;
}

data::SyntheticDataset loadDataset(const DatasetSpec& spec, std::uint64_t experimentSeed) {
    if (!spec.path.empty()) return data::importDataset(spec.path);
    return data::regenerate(datasetFingerprint(spec, experimentSeed));
}

ExperimentConfig parseConfig(const std::string& text_) {
    json j;
    try {
        j = json::parse(text_);
    } catch (const json::parse_error& e) {
        throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig c;
    rejectUnknown(object(j, "(root)"), "", {"seed", "dataset", "arch", "train", "sweep", "delta", "order_seed", "out", "threads", "formats"});
    if (j.contains("seed")) c.seed = count(j["seed"], "seed");
    if (j.contains("dataset")) parseDataset(j["dataset"], c.dataset);
    if (j.contains("arch")) c.arch = parsed("arch", [&] { return model::parseArchitecture(text(j["arch"], "arch")); });
    if (j.contains("train")) parseTrain(j["train"], c.train);
    if (j.contains("sweep")) parseSweep(j["sweep"], c.sweep);
    if (j.contains("delta")) c.delta = number(j["delta"], "delta");
    if (j.contains("order_seed")) c.orderSeed = count(j["order_seed"], "order_seed");
    if (j.contains("out")) c.out = text(j["out"], "out");
    if (j.contains("threads")) c.threads = count(j["threads"], "threads");
    if (j.contains("formats")) {
        if (!j["formats"].is_array()) fieldError("formats", "expected a list containing \"csv\" and/or \"json\"");
        c.writeCsv = c.writeJson = false;
        for (const auto& f : j["formats"]) {
            const auto name = text(f, "formats");
            if (name == "csv") c.writeCsv = true;
            else if (name == "json") c.writeJson = true;
            else fieldError("formats", "unknown format '" + name + "'");
        }
    }
    c.train.seed = c.seed;
    c.validate();
    return c;
}

ExperimentConfig loadConfig(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot read config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parseConfig(ss.str());
}

std::vector<double> parseNumberList(const std::string& list, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
        if (item.empty() || used != item.size() || !std::isfinite(v)) throw InvalidArgument(what + ": '" + item + "' is not a number");
        out.push_back(v);
    }
    if (out.empty()) throw InvalidArgument(what + ": empty list");
    return out;
}

std::filesystem::path resolveOutputDir(const std::optional<std::filesystem::path>& flag, const ExperimentConfig& cfg) {
    if (flag) return *flag;
    if (!cfg.out.empty()) return cfg.out;
    if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
    return kDefaultOutput;
}

}  // namespace csm::cli
