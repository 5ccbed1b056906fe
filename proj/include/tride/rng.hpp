#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace tride {

/// xoshiro256** seeded through splitmix64. The algorithm is fixed so that
/// seeded artifacts are reproducible across platforms and standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t next_u64();

    /// Uniform in [0, 1) with 53 bits of mantissa.
    double uniform();
    double uniform(double lo, double hi);

    /// Standard normal via Box-Muller (no cached second draw).
    double normal();

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    /// Independent stream derived from the current state and a tag.
    Rng split(std::uint64_t tag) const;

    template <typename T>
    void shuffle(std::span<T> values)
    {
        for (std::size_t i = values.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

} // namespace tride
