#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace pathlearn {

/// SplitMix64 finalizer; used to expand one seed into independent streams.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed of the named child stream of `seed`. Children are keyed by name so
/// adding a stream never shifts the others.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) noexcept;

/// Deterministic generator. Draws are mapped to doubles and integers by
/// hand so sequences are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(splitmix64(seed)) {}

    /// Independent generator for a named sub-component; depends only on the
    /// construction seed and the name, never on draws made so far.
    Rng child(std::string_view stream) const { return Rng(derive_seed(seed_, stream)); }

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    bool bernoulli(double p) { return uniform() < p; }

    const std::mt19937_64& engine() const noexcept { return engine_; }
    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace pathlearn
