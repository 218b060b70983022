#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "config.hpp"
#include "csm/data/generators.hpp"
#include "csm/error.hpp"
#include "csm/io/checkpoint.hpp"
#include "doctest.h"

using namespace csm;
using namespace csm::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string l; std::getline(ss, l);) out.push_back(l);
    return out;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("csmlab_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

ExperimentConfig quickConfig() {
    return parseConfig(R"({
        "seed": 3,
        "dataset": {"generator": "dnf", "params": {"n": 400, "n_concepts": 4}},
        "arch": "crm",
        "train": {"epochs": 4, "batch_size": 64, "emb_size": 8},
        "threads": 2
    })");
}

std::string errorOf(const std::string& config) {
    try {
        parseConfig(config);
    } catch (const InvalidArgument& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("config parsing") {
    const auto c = quickConfig();
    CHECK(c.seed == 3);
    CHECK(c.train.seed == 3);
    CHECK(c.arch == model::Architecture::CRM);
    CHECK(c.train.epochs == 4);
    CHECK(c.dataset.params.at("n") == 400);
    const auto fp = datasetFingerprint(c.dataset, c.seed);
    CHECK(fp.seed == 3);
    CHECK(fp.params.at("term_count") == generatorDefaults("dnf").at("term_count"));
    CHECK(loadDataset(c.dataset, c.seed).size() == 400);
}

TEST_CASE("config errors name the field") {
    CHECK(errorOf(R"({"train": {"epochs": -1}})").find("train.epochs") != std::string::npos);
    CHECK(errorOf(R"({"train": {"beta": -1}})").find("train") != std::string::npos);
    CHECK(errorOf(R"({"train": {"bogus": 1}})").find("train.bogus") != std::string::npos);
    CHECK(errorOf(R"({"dataset": {"generator": "dnf", "params": {"wat": 1}}})").find("dataset.params.wat") != std::string::npos);
    CHECK(errorOf(R"({"arch": "mlp"})").find("'arch'") != std::string::npos);
    CHECK(errorOf(R"({"delta": 2})").find("'delta'") != std::string::npos);
    CHECK(errorOf(R"({"sweep": {"beta": [0, "x"]}})").find("sweep.beta[1]") != std::string::npos);
    CHECK(errorOf(R"({"arch": "lrm", "train": {"baseline": "detach"}})").find("train.baseline") != std::string::npos);
    CHECK(errorOf("{not json").find("JSON") != std::string::npos);
}

TEST_CASE("number lists and output directory") {
    CHECK(parseNumberList("0,0.5, 1", "--beta") == std::vector<double>{0, 0.5, 1});
    CHECK_THROWS_AS(parseNumberList("0,,1", "--beta"), InvalidArgument);
    CHECK_THROWS_AS(parseNumberList("a", "--beta"), InvalidArgument);
    ExperimentConfig c;
    CHECK(resolveOutputDir(fs::path("x"), c) == fs::path("x"));
    ::setenv(kOutputEnv, "from-env", 1);
    CHECK(resolveOutputDir(std::nullopt, c) == fs::path("from-env"));
    c.out = "from-config";
    CHECK(resolveOutputDir(std::nullopt, c) == fs::path("from-config"));
    ::unsetenv(kOutputEnv);
    CHECK(resolveOutputDir(std::nullopt, ExperimentConfig{}) == fs::path(kDefaultOutput));
}

TEST_CASE("train writes reproducible reports") {
    TempDir a("train_a"), b("train_b");
    const auto cfg = quickConfig();
    const auto ra = cmdTrain(cfg, a.path);
    cmdTrain(cfg, b.path);
    for (const char* f : {kHistoryCsv, kTrainJson, kCheckpointFile, kDumpFile}) CHECK_MESSAGE(slurp(a.path / f) == slurp(b.path / f), f);
    const auto hist = lines(slurp(a.path / kHistoryCsv));
    REQUIRE(hist.size() == 5);
    CHECK(hist[0] == "epoch,loss_task,loss_concept,loss_sis,val_acc,val_sis");

    // k = 0 of the intervention curve equals the reported test accuracy
    const auto curve = cmdIntervene(a.path / kCheckpointFile, std::nullopt, cfg, a.path);
    CHECK(curve.accuracy.front() == ra.test.accuracy);
    const auto curveCsv = lines(slurp(a.path / kCurveCsv));
    CHECK(curveCsv.front() == "k,accuracy");
    CHECK(curveCsv.size() == 4 + 2);
}

TEST_CASE("pareto rows are canonical and thread-count independent") {
    TempDir one("pareto_1"), many("pareto_n");
    auto cfg = quickConfig();
    cfg.sweep.betas = {2.0, 0.0, 0.5};
    cfg.sweep.embSizes = {8, 4};
    cfg.threads = 1;
    const auto rows = cmdPareto(cfg, one.path);
    cfg.threads = 4;
    cmdPareto(cfg, many.path);
    CHECK(slurp(one.path / kParetoCsv) == slurp(many.path / kParetoCsv));
    CHECK(slurp(one.path / kParetoJson) == slurp(many.path / kParetoJson));
    REQUIRE(rows.size() == 6);
    for (std::size_t i = 1; i < rows.size(); ++i)
        CHECK((rows[i - 1].beta < rows[i].beta || (rows[i - 1].beta == rows[i].beta && rows[i - 1].embSize < rows[i].embSize)));
    CHECK(lines(slurp(one.path / kParetoCsv)).front() == "arch,beta,emb_size,accuracy,sis,sis_lo,sis_hi,pareto_flag");
    std::vector<metrics::ParetoPoint> pts;
    for (const auto& r : rows) pts.push_back({"", r.arch, r.beta, r.accuracy, r.sis});
    const auto flags = metrics::paretoFlags(pts);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].paretoFlag == flags[i]);
}

TEST_CASE("single grid point is on the front") {
    TempDir d("pareto_single");
    auto cfg = quickConfig();
    cfg.sweep.betas = {1.0};
    const auto rows = cmdPareto(cfg, d.path);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].paretoFlag);
}

TEST_CASE("failed grid points keep the row schema") {
    TempDir d("pareto_fail");
    auto cfg = quickConfig();
    cfg.arch = model::Architecture::CMR;
    cfg.train.sizes.nRules = 0;  // rejected when the model is built
    cfg.sweep.betas = {0.0, 1.0};
    const auto rows = cmdPareto(cfg, d.path);
    for (const auto& r : rows) {
        CHECK_FALSE(r.error.empty());
        CHECK(std::isnan(r.accuracy));
        CHECK_FALSE(r.paretoFlag);
    }
    const auto csv = lines(slurp(d.path / kParetoCsv));
    REQUIRE(csv.size() == 3);
    CHECK(csv[1] == "CMR,0,8,nan,nan,nan,nan,0");
}

TEST_CASE("inspect accounting") {
    TempDir d("inspect");
    auto cfg = quickConfig();
    cfg.arch = model::Architecture::LRM;
    cmdTrain(cfg, d.path);
    const auto r = cmdInspect(d.path / kCheckpointFile, cfg, d.path);
    double listed = 0.0;
    for (const auto& t : r.tasks)
        for (const auto& e : t.ranked) listed += std::abs(e.weight);
    CHECK(listed == doctest::Approx(r.conceptMass + r.sidechannelMass).epsilon(1e-12));
    CHECK(r.tasks[0].ranked.size() == 4 + 8);
    const auto csv = lines(slurp(d.path / kWeightsCsv));
    CHECK(csv.size() == 1 + kInspectTopK);
    CHECK(csv[0] == "task,rank,name,kind,weight");
    CHECK(slurp(d.path / kWeightsJson).find("unlisted_mass") != std::string::npos);

    cfg.arch = model::Architecture::CRM;
    TempDir crm("inspect_crm");
    cmdTrain(cfg, crm.path);
    CHECK_THROWS_AS(cmdInspect(crm.path / kCheckpointFile, cfg, crm.path), InvalidArgument);
}

TEST_CASE("gen-data round trips through the export format") {
    TempDir d("gendata");
    auto cfg = quickConfig();
    const auto ds = cmdGenData(cfg, d.path);
    CHECK(data::importDataset(d.path / kDatasetFile) == ds);
    cfg.dataset.path = d.path / kDatasetFile;
    CHECK(loadDataset(cfg.dataset, cfg.seed) == ds);
}
