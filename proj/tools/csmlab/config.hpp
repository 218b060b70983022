#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csm/data/dataset.hpp"
#include "csm/model/model.hpp"
#include "csm/train/train.hpp"

namespace csm::cli {

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputEnv = "CSMLAB_OUT";
inline constexpr const char* kDefaultOutput = "csmlab-out";

/// A generated dataset (generator name and parameters) or an exported file.
struct DatasetSpec {
    std::string generator = "dnf";
    std::map<std::string, double> params;  // overrides of the generator defaults
    std::optional<std::uint64_t> seed;     // defaults to the experiment seed
    std::filesystem::path path;            // when set, the dataset is imported instead

    bool operator==(const DatasetSpec&) const = default;
};

struct SweepSpec {
    std::vector<double> betas;
    std::vector<std::size_t> embSizes;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    DatasetSpec dataset;
    model::Architecture arch = model::Architecture::CRM;
    train::TrainConfig train;
    SweepSpec sweep;
    double delta = 0.05;
    std::uint64_t orderSeed = 0;
    std::filesystem::path out;
    std::size_t threads = 0;  // 0: hardware concurrency
    bool writeCsv = true;
    bool writeJson = true;

    /// Throws InvalidArgument naming the offending field.
    void validate() const;
};

/// Parameter names and defaults for each generator.
const std::map<std::string, double>& generatorDefaults(const std::string& generator);

/// Fingerprint for a generated dataset spec: defaults merged with overrides.
data::Fingerprint datasetFingerprint(const DatasetSpec& spec, std::uint64_t experimentSeed);
data::SyntheticDataset loadDataset(const DatasetSpec& spec, std::uint64_t experimentSeed);

/// Parses the JSON config format. Unknown keys and wrong types are errors
/// naming the field path (e.g. "train.epochs").
ExperimentConfig parseConfig(const std::string& text);
ExperimentConfig loadConfig(const std::filesystem::path& path);

/// "0,0.1,1" -> {0, 0.1, 1}.
std::vector<double> parseNumberList(const std::string& text, const std::string& what);

/// Flag value, then config value, then $CSMLAB_OUT, then "csmlab-out".
std::filesystem::path resolveOutputDir(const std::optional<std::filesystem::path>& flag, const ExperimentConfig& cfg);

}  // namespace csm::cli
