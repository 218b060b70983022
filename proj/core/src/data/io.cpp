#include <fstream>
#include <sstream>

#include "csm/data/generators.hpp"
#include "csm/data/json_codec.hpp"
#include "csm/error.hpp"

namespace csm::data {

Json toJson(const Grouping& g) {
    return Json{{"groups", g.groups}, {"mutually_exclusive", g.mutuallyExclusive}};
}

Grouping groupingFromJson(const Json& j) {
    Grouping g;
    g.groups = j.at("groups").get<std::vector<std::vector<std::size_t>>>();
    g.mutuallyExclusive = j.at("mutually_exclusive").get<bool>();
    return g;
}

Json toJson(const Dnf& dnf) {
    Json terms = Json::array();
    for (const auto& term : dnf.terms) {
        Json t = Json::array();
        for (const auto& lit : term) t.push_back(Json{{"concept", lit.index}, {"positive", lit.positive}});
        terms.push_back(std::move(t));
    }
    return terms;
}

Dnf dnfFromJson(const Json& j) {
    Dnf dnf;
    for (const auto& t : j) {
        std::vector<Literal> term;
        for (const auto& lit : t) term.push_back({lit.at("concept").get<std::size_t>(), lit.at("positive").get<bool>()});
        dnf.terms.push_back(std::move(term));
    }
    return dnf;
}

Json toJson(const Fingerprint& fp) {
    Json params = Json::object();
    for (const auto& [k, v] : fp.params) params[k] = v;
    Json rules = Json::array();
    for (const auto& r : fp.rules) rules.push_back(toJson(r));
    return Json{{"generator", fp.generator}, {"seed", fp.seed}, {"params", params}, {"rules", rules}};
}

Fingerprint fingerprintFromJson(const Json& j) {
    Fingerprint fp;
    fp.generator = j.at("generator").get<std::string>();
    fp.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [k, v] : j.at("params").items()) fp.params[k] = v.get<double>();
    for (const auto& r : j.at("rules")) fp.rules.push_back(dnfFromJson(r));
    return fp;
}

namespace {

std::vector<double> rowVector(const ad::Tensor& t, std::size_t i) {
    auto r = t.rowSpan(i);
    return {r.begin(), r.end()};
}

Split parseSplit(const std::string& s, std::size_t line) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Validation;
    if (s == "test") return Split::Test;
    throw ParseError(line, "unknown split '" + s + "'");
}

void copyRow(ad::Tensor& dst, std::size_t row, const std::vector<double>& values, std::size_t line, const char* field) {
    if (values.size() != dst.cols())
        throw ParseError(line, std::string("field '") + field + "' has " + std::to_string(values.size()) + " entries, expected " +
                                   std::to_string(dst.cols()));
    std::copy(values.begin(), values.end(), dst.rowSpan(row).begin());
}

}  // namespace

void exportDataset(const SyntheticDataset& ds, const std::filesystem::path& path) {
    ds.validate();
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");

    Json header{{"format", "csmlab-dataset"},
                {"version", kDatasetFormatVersion},
                {"n", ds.size()},
                {"n_features", ds.featureWidth()},
                {"n_concepts", ds.conceptCount()},
                {"n_tasks", ds.taskCount()},
                {"concept_names", ds.conceptNames},
                {"task_names", ds.taskNames},
                {"concept_groups", toJson(ds.conceptGroups)},
                {"task_groups", toJson(ds.taskGroups)},
                {"fingerprint", toJson(ds.fingerprint)}};
    out << header.dump() << '\n';

    std::vector<Split> splitOf(ds.size(), Split::Train);
    for (auto s : {Split::Validation, Split::Test})
        for (auto i : ds.splits[s]) splitOf[i] = s;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        Json rec{{"split", splitName(splitOf[i])}, {"x", rowVector(ds.x, i)}, {"c", rowVector(ds.c, i)}, {"y", rowVector(ds.y, i)}};
        out << rec.dump() << '\n';
    }
    if (!out) throw Error("write to '" + path.string() + "' failed");
}

SyntheticDataset importDataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");

    std::string line;
    std::size_t lineNo = 1;
    if (!std::getline(in, line)) throw ParseError(1, "missing header record");
    Json header;
    try {
        header = Json::parse(line);
    } catch (const Json::exception& e) {
        throw ParseError(1, std::string("malformed header: ") + e.what());
    }

    SyntheticDataset ds;
    std::size_t n = 0;
    try {
        if (header.at("format").get<std::string>() != "csmlab-dataset") throw ParseError(1, "not a csmlab dataset file");
        if (header.at("version").get<int>() != kDatasetFormatVersion)
            throw ParseError(1, "unsupported dataset format version " + header.at("version").dump());
        n = header.at("n").get<std::size_t>();
        const auto d = header.at("n_features").get<std::size_t>();
        const auto nc = header.at("n_concepts").get<std::size_t>();
        const auto ny = header.at("n_tasks").get<std::size_t>();
        ds.x = ad::Tensor(n, d);
        ds.c = ad::Tensor(n, nc);
        ds.y = ad::Tensor(n, ny);
        ds.conceptNames = header.at("concept_names").get<std::vector<std::string>>();
        ds.taskNames = header.at("task_names").get<std::vector<std::string>>();
        ds.conceptGroups = groupingFromJson(header.at("concept_groups"));
        ds.taskGroups = groupingFromJson(header.at("task_groups"));
        ds.fingerprint = fingerprintFromJson(header.at("fingerprint"));
    } catch (const Json::exception& e) {
        throw ParseError(1, std::string("bad header field: ") + e.what());
    } catch (const ShapeError& e) {
        throw ParseError(1, std::string("bad header sizes: ") + e.what());
    }

    for (std::size_t i = 0; i < n; ++i) {
        ++lineNo;
        if (!std::getline(in, line))
            throw ParseError(lineNo, "record " + std::to_string(i) + " missing: file ends after " + std::to_string(i) + " of " +
                                         std::to_string(n) + " records");
        try {
            const Json rec = Json::parse(line);
            const Split s = parseSplit(rec.at("split").get<std::string>(), lineNo);
            switch (s) {
                case Split::Train: ds.splits.train.push_back(i); break;
                case Split::Validation: ds.splits.validation.push_back(i); break;
                case Split::Test: ds.splits.test.push_back(i); break;
            }
            copyRow(ds.x, i, rec.at("x").get<std::vector<double>>(), lineNo, "x");
            copyRow(ds.c, i, rec.at("c").get<std::vector<double>>(), lineNo, "c");
            copyRow(ds.y, i, rec.at("y").get<std::vector<double>>(), lineNo, "y");
        } catch (const Json::exception& e) {
            throw ParseError(lineNo, "record " + std::to_string(i) + ": " + e.what());
        }
    }
    while (std::getline(in, line)) {
        ++lineNo;
        if (!line.empty()) throw ParseError(lineNo, "unexpected data after " + std::to_string(n) + " records");
    }
    try {
        ds.validate();
    } catch (const InvalidArgument& e) {
        throw ParseError(lineNo, e.what());
    }
    return ds;
}

}  // namespace csm::data
