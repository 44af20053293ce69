#pragma once

// Counter-based random streams.
//
// Every random quantity in the library is drawn from a stream whose key is a
// pure function of (master seed, labels...). No stream is ever shared between
// subjects, variables or replications, so output never depends on the order
// in which work is scheduled.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <string_view>

namespace icepath {

using Seed = std::uint64_t;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// FNV-1a, for turning short labels into stream keys.
constexpr std::uint64_t label_key(std::string_view label) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derive a child seed from a parent seed and a sequence of labels.
constexpr Seed derive_seed(Seed parent, std::initializer_list<std::uint64_t> labels) noexcept {
    std::uint64_t h = mix64(parent ^ 0x6a09e667f3bcc909ULL);
    for (std::uint64_t label : labels) {
        h = mix64(h ^ mix64(label + 0x3c6ef372fe94f82bULL));
    }
    return h;
}

/// A keyed counter stream. Satisfies UniformRandomBitGenerator so it can
/// also drive <random> distributions.
class Stream {
public:
    using result_type = std::uint64_t;

    constexpr explicit Stream(Seed key) noexcept : key_(mix64(key)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
    }

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; consumes two uniforms, no caching.
    double normal() noexcept {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    Stream substream(std::initializer_list<std::uint64_t> labels) const noexcept {
        Stream s(0);
        s.key_ = derive_seed(key_, labels);
        return s;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace icepath
