#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wismc {

struct DescriptiveStats {
    std::size_t n = 0;
    double mean = 0.0;
    double median = 0.0;
    double standard_deviation = 0.0;  // n-1 denominator
    double skewness = 0.0;            // m3 / m2^1.5
    double kurtosis = 0.0;            // m4 / m2^2 - 3 when convention is "excess"
    std::string kurtosis_convention = "excess";
};

[[nodiscard]] DescriptiveStats descriptive_stats(std::span<const double> x);

struct JarqueBera {
    double statistic = 0.0;
    double p_value = 1.0;
    bool reject = false;
};

[[nodiscard]] JarqueBera jarque_bera(std::span<const double> x, double alpha = 0.01);

// Biased estimator: acf[k] = sum_{t<n-k} (x_t - m)(x_{t+k} - m) / sum_t (x_t - m)^2.
[[nodiscard]] std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag);

struct Correlation {
    std::string name;
    double rho = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

// Pearson correlation with a two-sided Student-t p-value on n-2 degrees of freedom.
[[nodiscard]] Correlation pearson(std::span<const double> x, std::span<const double> y);

// (r,v), (|r|,v), (r,|v|), (|r|,|v|)
[[nodiscard]] std::vector<Correlation> cross_correlation_battery(std::span<const double> r,
                                                                 std::span<const double> v);

struct ContingencyTable {
    std::vector<double> row_edges;  // waiting-time bins, left-closed right-open
    std::vector<double> col_edges;  // state bins, left-closed right-open
    std::vector<std::vector<std::int64_t>> observed;
    std::vector<std::vector<double>> expected;
    double chi2_statistic = 0.0;
    int degrees_of_freedom = 0;
    double p_value = 1.0;
    std::size_t dropped_rows = 0;
    std::size_t dropped_cols = 0;
    std::size_t low_expected_cells = 0;  // cells with expected < 5
    std::vector<std::string> warnings;
};

// Chi-square test of independence on a count matrix. Empty rows and columns do
// not contribute and reduce the degrees of freedom.
[[nodiscard]] ContingencyTable contingency_from_counts(std::vector<std::vector<std::int64_t>> observed);

// Rows bin the waiting times, columns bin the values. Edge lists include both
// outer edges (which may be infinite).
[[nodiscard]] ContingencyTable contingency(std::span<const double> values,
                                           std::span<const std::int64_t> waits,
                                           std::span<const double> state_edges,
                                           std::span<const double> wait_edges);

struct BatteryOptions {
    std::size_t max_lag = 100;
    double alpha = 0.01;
    int contingency_states = 5;
    std::vector<double> wait_edges{0.0, 2.0, 4.0, std::numeric_limits<double>::infinity()};
};

struct Battery {
    std::size_t n_returns = 0;
    DescriptiveStats r_stats;
    DescriptiveStats v_stats;
    JarqueBera r_jb;
    JarqueBera v_jb;
    std::vector<double> acf_abs_r;
    std::vector<double> acf_abs_v;
    std::vector<Correlation> cross;
    std::optional<ContingencyTable> contingency_r;
    std::optional<ContingencyTable> contingency_v;
    std::vector<std::string> warnings;
};

// Runs every section on an aligned (r, v) pair. Sections that cannot be
// computed on the data are omitted with a warning rather than aborting.
[[nodiscard]] Battery analyze(std::span<const double> r, std::span<const double> v,
                              const BatteryOptions& options = {});

// Two-sided tail probability helpers shared with the simulators and tests.
[[nodiscard]] double chi2_sf(double x, double df);
[[nodiscard]] double normal_cdf(double x);
[[nodiscard]] double normal_quantile(double p);

}  // namespace wismc
