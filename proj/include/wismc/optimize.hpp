#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wismc {

struct MapeResult {
    double value = 0.0;
    std::vector<std::size_t> excluded_lags;  // lags where the reference acf is zero
};

// (100 / L) * sum over lags 1..max_lag of |real - synth| / |real|.
// Lags with real == 0 are skipped and L counts the remaining lags.
[[nodiscard]] MapeResult mape(std::span<const double> real_acf, std::span<const double> synth_acf,
                              std::size_t max_lag);

struct GridSpec {
    std::vector<int> state_counts{3, 5, 7, 9};
    std::vector<double> lambdas{0.95, 0.96, 0.97, 0.98, 0.99};
    std::size_t max_lag = 100;
    std::size_t reps_per_point = 5;
    std::optional<double> epsilon;  // stop increasing s when the best MAPE improves by less
    int bins = 5;

    void validate() const;
};

struct OptRecord {
    int states = 0;
    double lambda = 0.0;
    double mape = 0.0;
    bool failed = false;
    std::string error;
    double runtime_seconds = 0.0;
};

struct OptResult {
    std::string label;
    std::string variable = "r";
    std::vector<OptRecord> records;  // ordered by (states, lambda)
    int best_states = 0;
    double best_lambda = 0.0;
    double best_mape = 0.0;
    bool stopped_early = false;
};

// Per point: symmetric grid, jump chain, kernel, `reps_per_point` simulated
// series of the same length, mean |.| acf, MAPE against the data.
[[nodiscard]] OptResult grid_search(std::span<const double> values, const GridSpec& grid, std::uint64_t seed,
                                    unsigned threads = 1);

}  // namespace wismc
