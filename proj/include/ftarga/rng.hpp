#pragma once

#include <cstdint>
#include <random>

namespace ftarga {

/// Seedable, splittable 64-bit generator.
///
/// `split(k)` derives an independent child stream from this generator's seed
/// and the stream index `k` only; it does not depend on (or advance) the
/// parent's state. Algorithms address their randomness through stream
/// indices, which keeps runs bit-reproducible regardless of how many draws
/// each stream consumes.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] Rng split(std::uint64_t stream) const;

    std::uint64_t next() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    /// Fair coin: 0 or 1.
    int bit();

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive child seeds.
[[nodiscard]] std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace ftarga
