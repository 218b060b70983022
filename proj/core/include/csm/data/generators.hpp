#pragma once

#include <cstdint>
#include <filesystem>

#include "csm/data/dataset.hpp"

namespace csm::data {

/// Two fair-coin concepts, task y = c1 xor c2. Features are the pair encodings
/// [c1, 1-c1, c2, 1-c2] plus gaussian noise of scale noiseStd.
SyntheticDataset genXor(std::size_t n, double noiseStd, std::uint64_t seed);

struct DnfOptions {
    std::size_t nConcepts = 6;
    std::size_t nTasks = 1;
    std::size_t termCount = 3;
    std::size_t n = 4000;
    /// Probability that each stored concept annotation is flipped. Tasks are
    /// computed from the clean concepts, which the features encode.
    double conceptNoise = 0.05;
    double featureNoise = 0.1;
};

/// Concepts are sufficient: each task is a random DNF (terms of 2-3 literals)
/// over the concepts. The generating DNFs are stored in the fingerprint.
SyntheticDataset genDnf(const DnfOptions& options, std::uint64_t seed);

struct LatentOptions {
    std::size_t nConcepts = 6;
    std::size_t nTasks = 1;
    std::size_t termCount = 2;
    std::size_t n = 4000;
    /// Probability of the hidden bit h; y = dnf(c) xor h.
    double latentWeight = 0.2;
    double featureNoise = 0.6;
    double latentNoise = 0.6;
};

/// Concepts are insufficient: a hidden bit, encoded only in the features,
/// flips the DNF label with probability latentWeight.
SyntheticDataset genLatent(const LatentOptions& options, std::uint64_t seed);

/// Two digits in {0..nDigits-1}; features are their noisy one-hot codes,
/// concepts the 2*nDigits indicators (two mutually-exclusive groups), task the
/// one-hot sum over 2*nDigits-1 classes (one mutually-exclusive group).
SyntheticDataset genSymbolicAddition(std::size_t nDigits, std::size_t n, double featureNoise, std::uint64_t seed);

/// Re-runs the generator named in the fingerprint with its parameters and seed.
SyntheticDataset regenerate(const Fingerprint& fingerprint);

/// Line-delimited JSON. Line 1 is the header (format, version, fingerprint,
/// names, groupings, sizes); each following line is one instance with fields
/// in the order split, x, c, y.
void exportDataset(const SyntheticDataset& dataset, const std::filesystem::path& path);
SyntheticDataset importDataset(const std::filesystem::path& path);

inline constexpr int kDatasetFormatVersion = 1;

}  // namespace csm::data
