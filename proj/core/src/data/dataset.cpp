#include "csm/data/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "csm/ad/rng.hpp"
#include "csm/error.hpp"

namespace csm::data {

std::vector<std::vector<std::size_t>> Grouping::unitsFor(std::size_t columns) const {
    if (!groups.empty()) return groups;
    std::vector<std::vector<std::size_t>> units(columns);
    for (std::size_t j = 0; j < columns; ++j) units[j] = {j};
    return units;
}

bool Dnf::evaluate(std::span<const double> concepts) const {
    for (const auto& term : terms) {
        bool holds = true;
        for (const auto& lit : term) {
            const bool value = concepts[lit.index] >= 0.5;
            if (value != lit.positive) {
                holds = false;
                break;
            }
        }
        if (holds) return true;
    }
    return false;
}

std::string Dnf::toString(const std::vector<std::string>& names) const {
    std::string out;
    for (std::size_t t = 0; t < terms.size(); ++t) {
        if (t) out += " | ";
        out += "(";
        for (std::size_t k = 0; k < terms[t].size(); ++k) {
            if (k) out += " & ";
            const auto& lit = terms[t][k];
            if (!lit.positive) out += "~";
            out += lit.index < names.size() ? names[lit.index] : "c" + std::to_string(lit.index);
        }
        out += ")";
    }
    return out;
}

double Fingerprint::param(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end()) throw InvalidArgument("fingerprint of '" + generator + "' has no parameter '" + key + "'");
    return it->second;
}

const char* splitName(Split s) noexcept {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

const std::vector<std::size_t>& Splits::operator[](Split s) const {
    switch (s) {
        case Split::Train: return train;
        case Split::Validation: return validation;
        case Split::Test: return test;
    }
    return train;
}

Batch SyntheticDataset::batch(std::span<const std::size_t> rows) const {
    return {x.gatherRows(rows), c.gatherRows(rows), y.gatherRows(rows)};
}

void SyntheticDataset::validate() const {
    const std::size_t n = x.rows();
    if (c.rows() != n || y.rows() != n)
        throw InvalidArgument("dataset row counts disagree: x " + x.shapeString() + ", c " + c.shapeString() + ", y " + y.shapeString());
    auto binary = [](const ad::Tensor& t) {
        return std::all_of(t.data().begin(), t.data().end(), [](double v) { return v == 0.0 || v == 1.0; });
    };
    if (!binary(c)) throw InvalidArgument("concept labels must be 0/1");
    if (!binary(y)) throw InvalidArgument("task labels must be 0/1");
    if (conceptNames.size() != c.cols()) throw InvalidArgument("concept name count does not match concept columns");
    if (taskNames.size() != y.cols()) throw InvalidArgument("task name count does not match task columns");
    std::vector<int> seen(n, 0);
    for (auto s : {Split::Train, Split::Validation, Split::Test})
        for (auto i : splits[s]) {
            if (i >= n) throw InvalidArgument("split index " + std::to_string(i) + " out of range");
            ++seen[i];
        }
    if (std::any_of(seen.begin(), seen.end(), [](int k) { return k != 1; }))
        throw InvalidArgument("split indices do not partition 0..n-1");
}

Splits makeSplits(std::size_t n, std::uint64_t seed) {
    ad::RngStream rng(seed, "splits");
    const auto perm = rng.permutation(n);
    const auto nTest = static_cast<std::size_t>(std::floor(kTestFraction * static_cast<double>(n)));
    const auto rest = n - nTest;
    const auto nVal = static_cast<std::size_t>(std::floor(kValidationFraction * static_cast<double>(rest)));
    Splits s;
    s.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(nTest));
    s.validation.assign(perm.begin() + static_cast<std::ptrdiff_t>(nTest), perm.begin() + static_cast<std::ptrdiff_t>(nTest + nVal));
    s.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(nTest + nVal), perm.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.validation.begin(), s.validation.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

}  // namespace csm::data
