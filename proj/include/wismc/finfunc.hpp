#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wismc/triplet.hpp"

namespace wismc {

// P(J~' <= j | cell) summed over every waiting time. Works for either sign of j.
[[nodiscard]] double one_step_marginal_j(const TripletKernel& tk, const ConditioningCell& cell, double j);
[[nodiscard]] double one_step_marginal_v(const TripletKernel& tk, const ConditioningCell& cell, double a);

// Joint pmf of (|J~'|, |V~'|) over modulus levels, [level_j * levels_v + level_v].
[[nodiscard]] std::vector<double> modulus_joint_pmf(const TripletKernel& tk, const ConditioningCell& cell);

struct ModulusMoments {
    double mean_j = 0.0;
    double mean_v = 0.0;
    double sd_j = 0.0;
    double sd_v = 0.0;
    double covariance = 0.0;
    std::optional<double> rho;  // empty when either sd is zero
};

[[nodiscard]] ModulusMoments modulus_covariance(const TripletKernel& tk, const ConditioningCell& cell);
// Cov(|J~'|, V~') = (2 p_v - 1) Cov(|J~'|, |V~'|).
[[nodiscard]] double signed_covariance(const TripletKernel& tk, const ConditioningCell& cell);
// Mutual information of (|J~'|, |V~'|) in nats.
[[nodiscard]] double mutual_information(const TripletKernel& tk, const ConditioningCell& cell);
[[nodiscard]] double mutual_information(const std::vector<double>& joint, std::size_t rows, std::size_t cols);

struct FptQuery {
    double rho = 1.0;   // price accumulation threshold
    double psi = 1.0;   // volume accumulation threshold
    int horizon = 1;
    std::vector<HistoryPoint> history;  // state indices; the last point is time 0 of the query
    int u = 0;          // minutes already elapsed without a synchronized jump
};

struct FptResult {
    std::string method;
    std::vector<double> survival;  // t = 0..horizon
    std::vector<double> standard_error;
    std::vector<double> lower;
    std::vector<double> upper;
    std::size_t paths = 0;
    std::size_t memo_entries = 0;
    std::vector<std::string> warnings;
};

struct FptOptions {
    std::size_t memo_limit = 4'000'000;
};

[[nodiscard]] FptResult fpt_survival_recursive(const TripletKernel& tk, const FptQuery& query,
                                               const FptOptions& options = {});

// Paths use Rng(seed, path id), so results do not depend on the thread count.
[[nodiscard]] FptResult fpt_survival_mc(const TripletKernel& tk, const FptQuery& query, std::size_t n_paths,
                                        std::uint64_t seed, unsigned threads = 1);

}  // namespace wismc
