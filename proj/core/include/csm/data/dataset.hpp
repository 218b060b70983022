#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "csm/ad/tensor.hpp"

namespace csm::data {

/// Partition of label columns into groups. With no groups every column is
/// its own unit. A mutually-exclusive grouping means exactly one column per
/// group is active (one-hot), and predictions use argmax within the group.
struct Grouping {
    std::vector<std::vector<std::size_t>> groups;
    bool mutuallyExclusive = false;

    bool empty() const noexcept { return groups.empty(); }
    /// Groups, or one singleton group per column when empty.
    std::vector<std::vector<std::size_t>> unitsFor(std::size_t columns) const;

    friend bool operator==(const Grouping&, const Grouping&) = default;
};

struct Literal {
    std::size_t index = 0;
    bool positive = true;

    friend bool operator==(const Literal&, const Literal&) = default;
};

/// Disjunction of conjunctions over binary concepts.
struct Dnf {
    std::vector<std::vector<Literal>> terms;

    bool evaluate(std::span<const double> concepts) const;
    std::string toString(const std::vector<std::string>& conceptNames) const;

    friend bool operator==(const Dnf&, const Dnf&) = default;
};

/// Everything needed to regenerate a dataset bit-exactly.
struct Fingerprint {
    std::string generator;
    std::map<std::string, double> params;
    std::uint64_t seed = 0;
    /// Ground-truth concept -> task rules, one per task, where the generator has them.
    std::vector<Dnf> rules;

    double param(const std::string& key) const;

    friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

enum class Split { Train, Validation, Test };

const char* splitName(Split s) noexcept;

struct Splits {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;

    const std::vector<std::size_t>& operator[](Split s) const;

    friend bool operator==(const Splits&, const Splits&) = default;
};

/// A batch of rows: features, concept labels, task labels.
struct Batch {
    ad::Tensor x;
    ad::Tensor c;
    ad::Tensor y;
};

struct SyntheticDataset {
    ad::Tensor x;  // n x d features
    ad::Tensor c;  // n x nC binary concept labels
    ad::Tensor y;  // n x nY binary task labels
    std::vector<std::string> conceptNames;
    std::vector<std::string> taskNames;
    Grouping conceptGroups;
    Grouping taskGroups;
    Splits splits;
    Fingerprint fingerprint;

    std::size_t size() const noexcept { return x.rows(); }
    std::size_t featureWidth() const noexcept { return x.cols(); }
    std::size_t conceptCount() const noexcept { return c.cols(); }
    std::size_t taskCount() const noexcept { return y.cols(); }

    Batch batch(std::span<const std::size_t> rows) const;
    Batch split(Split s) const { return batch(splits[s]); }

    /// Throws InvalidArgument describing the first violated invariant.
    void validate() const;

    friend bool operator==(const SyntheticDataset&, const SyntheticDataset&) = default;
};

/// Test fraction carved first, then the remainder split 9/1 into train/validation.
inline constexpr double kTestFraction = 0.2;
inline constexpr double kValidationFraction = 0.1;

Splits makeSplits(std::size_t n, std::uint64_t seed);

}  // namespace csm::data
