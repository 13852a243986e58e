#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace tmdp {

/// SplitMix64 finalizer. Used both as a seed scrambler and as the mixing
/// function of the counter-based substreams.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Maps 64 random bits to a double in [0, 1) with 53 bits of resolution.
constexpr double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Seed of substream `stream` derived from a master seed.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) noexcept {
    return splitmix64(master ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/// The `counter`-th uniform of substream `stream`. Pure function of its
/// arguments, so draws do not depend on call order across streams.
constexpr double counter_uniform(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t counter) noexcept {
    return to_unit(splitmix64(stream_seed(master, stream) ^ splitmix64(counter)));
}

/// Sequential generator for instance construction and trial-level randomness.
///
/// Wraps std::mt19937_64 (whose output sequence is fixed by the standard) and
/// converts bits to numbers itself, so results do not depend on the standard
/// library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t bits() { return engine_(); }

    double uniform() { return to_unit(engine_()); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x = engine_();
        while (x >= limit)
            x = engine_();
        return x % n;
    }

    /// Standard exponential; sums of these normalised give a flat Dirichlet.
    double exponential() { return -std::log1p(-uniform()); }

private:
    std::mt19937_64 engine_;
};

} // namespace tmdp
