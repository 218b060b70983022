#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace csm::ad {

/// Counter-based pseudo-random stream. Output i is a pure function of
/// (key, i), where the key is derived from the seed and the sub-stream path,
/// so streams can be split and consumed in any order without affecting each
/// other. Sampling routines are implemented here rather than via <random>
/// distributions so that sequences are identical across standard libraries.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::string_view name = "root");

    /// Independent child stream. Same (parent, name) always gives the same child.
    RngStream substream(std::string_view name) const;
    RngStream substream(std::uint64_t index) const;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

    std::uint64_t nextU64();
    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniformInt(std::uint64_t n);
    bool bernoulli(double p);
    double gaussian(double mean = 0.0, double stddev = 1.0);
    /// Random permutation of 0..n-1 (Fisher-Yates).
    std::vector<std::size_t> permutation(std::size_t n);

    std::vector<double> uniformVector(std::size_t n);
    std::vector<double> bernoulliVector(std::size_t n, double p);
    std::vector<double> gaussianVector(std::size_t n, double mean = 0.0, double stddev = 1.0);

private:
    RngStream(std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

    std::uint64_t seed_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// SplitMix64 finalizer; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x) noexcept;
/// FNV-1a over a byte string.
std::uint64_t hashName(std::string_view name) noexcept;

}  // namespace csm::ad
