#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wismc/copula.hpp"
#include "wismc/core.hpp"
#include "wismc/triplet.hpp"

namespace wismc {

// Per-state sorted samples of the continuous values observed in that state.
struct EmpiricalInverse {
    std::vector<std::vector<double>> samples;

    // At most max_points order statistics per state are kept (evenly spaced
    // in rank, always including the minimum and maximum).
    static EmpiricalInverse build(std::span<const double> values, const StateGrid& grid,
                                  std::size_t max_points = 1001);
    [[nodiscard]] bool empty() const noexcept { return samples.empty(); }
};

// Empirical quantile of the state's sample at level u, linear between order
// statistics. An empty sample falls back to `fallback` and sets *used_fallback.
[[nodiscard]] double backtransform(int state, double u, const EmpiricalInverse& inv, double fallback,
                                   bool* used_fallback = nullptr);

struct FitConfig {
    int states_j = 5;
    int states_v = 5;
    double lambda_j = 0.97;
    double lambda_v = 0.97;
    int bins = 5;
    std::size_t history_m = 0;
    CopulaFamily copula = CopulaFamily::gaussian;
    int nu = 4;
    std::optional<int> t_max;
    double t_max_quantile = 0.995;

    void validate() const;
};

struct FittedModel {
    FitConfig config;
    TripletKernel triplet;
    EmpiricalInverse inverse_j;
    EmpiricalInverse inverse_v;
    // Empirical frequency of (J~, V~) pairs, [j_state * states_v + v_state].
    std::vector<double> initial_weights;
    std::size_t n_returns = 0;
    std::size_t sync_events = 0;
};

// Fits the triplet model on aligned return and volume-return series.
[[nodiscard]] FittedModel fit_model(std::span<const double> r, std::span<const double> v, const FitConfig& config);

}  // namespace wismc
