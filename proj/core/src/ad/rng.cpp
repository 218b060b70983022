#include "csm/ad/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "csm/error.hpp"

namespace csm::ad {

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t hashName(std::string_view name) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : name) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

RngStream::RngStream(std::uint64_t seed, std::string_view name)
    : seed_(seed), key_(mix64(mix64(seed) ^ hashName(name))) {}

RngStream RngStream::substream(std::string_view name) const {
    return RngStream(seed_, mix64(key_ ^ mix64(hashName(name))));
}

RngStream RngStream::substream(std::uint64_t index) const {
    return RngStream(seed_, mix64(key_ + mix64(index ^ 0x5851f42d4c957f2dULL)));
}

std::uint64_t RngStream::nextU64() {
    // Two rounds of mixing over (key, counter) decorrelate adjacent counters.
    const std::uint64_t c = counter_++;
    return mix64(mix64(c ^ key_) + key_);
}

double RngStream::uniform() { return static_cast<double>(nextU64() >> 11) * 0x1.0p-53; }

std::uint64_t RngStream::uniformInt(std::uint64_t n) {
    if (n == 0) throw InvalidArgument("uniformInt requires n > 0");
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
        v = nextU64();
    } while (v >= limit);
    return v % n;
}

bool RngStream::bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("bernoulli probability must be in [0,1], got " + std::to_string(p));
    if (p == 1.0) {
        nextU64();
        return true;
    }
    return uniform() < p;
}

double RngStream::gaussian(double mean, double stddev) {
    if (!(stddev >= 0.0)) throw InvalidArgument("gaussian stddev must be non-negative");
    // Box-Muller; one draw per call keeps the stream position simple to reason about.
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> RngStream::permutation(std::size_t n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniformInt(i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

std::vector<double> RngStream::uniformVector(std::size_t n) {
    std::vector<double> out(n);
    for (auto& v : out) v = uniform();
    return out;
}

std::vector<double> RngStream::bernoulliVector(std::size_t n, double p) {
    std::vector<double> out(n);
    for (auto& v : out) v = bernoulli(p) ? 1.0 : 0.0;
    return out;
}

std::vector<double> RngStream::gaussianVector(std::size_t n, double mean, double stddev) {
    std::vector<double> out(n);
    for (auto& v : out) v = gaussian(mean, stddev);
    return out;
}

}  // namespace csm::ad
