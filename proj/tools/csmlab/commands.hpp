#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "csm/metrics/metrics.hpp"
#include "csm/train/train.hpp"

namespace csm::cli {

/// Report file names inside the output directory.
inline constexpr const char* kCheckpointFile = "model.ckpt";
inline constexpr const char* kDumpFile = "model.txt";
inline constexpr const char* kHistoryCsv = "history.csv";
inline constexpr const char* kTrainJson = "train_summary.json";
inline constexpr const char* kParetoCsv = "pareto.csv";
inline constexpr const char* kParetoJson = "pareto_summary.json";
inline constexpr const char* kCurveCsv = "curve.csv";
inline constexpr const char* kCurveJson = "intervene_summary.json";
inline constexpr const char* kWeightsCsv = "weights.csv";
inline constexpr const char* kWeightsJson = "inspect_summary.json";
inline constexpr const char* kDatasetFile = "dataset.jsonl";
inline constexpr const char* kDatasetJson = "dataset_summary.json";

/// Test-split evaluation of a trained model.
struct Evaluation {
    double accuracy = 0.0;
    metrics::SisReport sis;
};

Evaluation evaluateTest(const model::CsmModel& m, const data::SyntheticDataset& ds, double delta);

struct TrainReport {
    Evaluation test;
    train::TrainHistory history;
};

/// Trains one configuration; writes the checkpoint, a parameter dump, the
/// history CSV and a JSON summary.
TrainReport cmdTrain(const ExperimentConfig& cfg, const std::filesystem::path& outDir);

struct ParetoRow {
    model::Architecture arch = model::Architecture::CRM;
    double beta = 0.0;
    std::size_t embSize = 0;
    double accuracy = 0.0;
    double sis = 0.0;
    double sisLo = 0.0;
    double sisHi = 0.0;
    bool paretoFlag = false;
    std::size_t bestEpoch = 0;
    std::string error;  // empty on success; metrics are NaN otherwise
};

/// Trains every (beta, emb_size) grid point, possibly concurrently; rows come
/// back sorted by beta then emb_size regardless of completion order.
std::vector<ParetoRow> cmdPareto(const ExperimentConfig& cfg, const std::filesystem::path& outDir);

/// Uses the checkpoint's training dataset unless `dataset` is given.
metrics::InterventionCurve cmdIntervene(const std::filesystem::path& checkpoint, const std::optional<DatasetSpec>& dataset,
                                        const ExperimentConfig& cfg, const std::filesystem::path& outDir);

inline constexpr std::size_t kInspectTopK = 10;

metrics::WeightReport cmdInspect(const std::filesystem::path& checkpoint, const ExperimentConfig& cfg,
                                 const std::filesystem::path& outDir);

data::SyntheticDataset cmdGenData(const ExperimentConfig& cfg, const std::filesystem::path& outDir);

/// CSV number format: shortest of %.10g, "nan" for NaN.
std::string formatNumber(double v);

}  // namespace csm::cli
