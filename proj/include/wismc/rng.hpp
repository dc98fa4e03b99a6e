#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace wismc {

/// xoshiro256++ seeded through SplitMix64.
///
/// Every random consumer in the library gets its own stream derived from a
/// (seed, stream id) pair, so results do not depend on thread scheduling.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept;

    // Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    // Uniform on (0, 1).
    double uniform_open() noexcept;
    double normal() noexcept;
    double exponential() noexcept;
    // Gamma(shape, 1), Marsaglia-Tsang.
    double gamma(double shape) noexcept;
    bool bernoulli(double p) noexcept { return uniform() < p; }

    // Inverse-cdf draw from an unnormalised non-negative weight vector.
    // Returns weights.size() if the total weight is zero.
    std::size_t discrete(std::span<const double> weights) noexcept;

private:
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Child seed for a named sub-stream; used to fan one CLI seed out to components.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) noexcept;

}  // namespace wismc
