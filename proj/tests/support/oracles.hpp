#pragma once

// Brute-force oracles used by unit and acceptance tests. None of these call
// into the model code paths they check.

#include <algorithm>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "csm/ad/tensor.hpp"

namespace csm::testing {

/// Accuracy of the best possible function f(pattern) -> label, where pattern is
/// any discrete key per row: the per-pattern majority label, scored on the same rows.
inline double bestFunctionAccuracy(const std::vector<std::uint64_t>& patterns, const std::vector<int>& labels) {
    std::map<std::uint64_t, std::pair<std::size_t, std::size_t>> counts;  // pattern -> (zeros, ones)
    for (std::size_t i = 0; i < patterns.size(); ++i) {
        auto& [zeros, ones] = counts[patterns[i]];
        (labels[i] ? ones : zeros) += 1;
    }
    std::size_t correct = 0;
    for (const auto& [key, zo] : counts) correct += std::max(zo.first, zo.second);
    return static_cast<double>(correct) / static_cast<double>(patterns.size());
}

/// Bit pattern of the binary columns of row i.
inline std::uint64_t rowPattern(const ad::Tensor& t, std::size_t i) {
    std::uint64_t key = 0;
    for (std::size_t j = 0; j < t.cols(); ++j)
        if (t(i, j) >= 0.5) key |= (std::uint64_t{1} << j);
    return key;
}

/// Best concept-only accuracy for task column `task`.
inline double bestConceptOnlyAccuracy(const ad::Tensor& concepts, const ad::Tensor& tasks, std::size_t task) {
    std::vector<std::uint64_t> patterns(concepts.rows());
    std::vector<int> labels(concepts.rows());
    for (std::size_t i = 0; i < concepts.rows(); ++i) {
        patterns[i] = rowPattern(concepts, i);
        labels[i] = tasks(i, task) >= 0.5 ? 1 : 0;
    }
    return bestFunctionAccuracy(patterns, labels);
}

/// O(n^2) Pareto dominance: returns a flag per point, true if no other point
/// is >= on both coordinates and > on at least one.
inline std::vector<bool> paretoFlagsBruteForce(const std::vector<std::pair<double, double>>& pts) {
    std::vector<bool> keep(pts.size(), true);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (i == j) continue;
            const bool geq = pts[j].first >= pts[i].first && pts[j].second >= pts[i].second;
            const bool gt = pts[j].first > pts[i].first || pts[j].second > pts[i].second;
            if (geq && gt) {
                keep[i] = false;
                break;
            }
        }
    return keep;
}

/// CMR task probability by explicit enumeration: sums, over every hard
/// concept vector c and every rule r, p(c) * select_r * [rule r holds on c],
/// where a rule holds on c with probability prod_i (irr + pos*c_i + neg*(1-c_i))
/// because each concept's role is itself drawn from its (pos, neg, irr) triple.
/// roles: rule r concept i triple at (r*nC + i)*3. Exponential in nC.
inline double cmrEnumerate(const std::vector<double>& probs, const std::vector<double>& select, const std::vector<double>& roles) {
    const std::size_t nC = probs.size();
    double total = 0.0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << nC); ++mask) {
        double pc = 1.0;
        for (std::size_t i = 0; i < nC; ++i) pc *= (mask >> i & 1) ? probs[i] : 1.0 - probs[i];
        if (pc == 0.0) continue;
        double y = 0.0;
        for (std::size_t r = 0; r < select.size(); ++r) {
            double holds = 1.0;
            for (std::size_t i = 0; i < nC; ++i) {
                const double* t = &roles[(r * nC + i) * 3];
                holds *= (mask >> i & 1) ? t[0] + t[2] : t[1] + t[2];
            }
            y += select[r] * holds;
        }
        total += pc * y;
    }
    return total;
}

}  // namespace csm::testing
