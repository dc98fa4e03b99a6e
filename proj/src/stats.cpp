#include "wismc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "wismc/error.hpp"

namespace wismc {

double chi2_sf(double x, double df) {
    if (!(x > 0.0)) return 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(df), x));
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double normal_quantile(double p) {
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

namespace {

struct Moments {
    double mean = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;
};

Moments central_moments(std::span<const double> x) {
    Moments m;
    const double n = static_cast<double>(x.size());
    m.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    for (double v : x) {
        const double d = v - m.mean;
        const double d2 = d * d;
        m.m2 += d2;
        m.m3 += d2 * d;
        m.m4 += d2 * d2;
    }
    m.m2 /= n;
    m.m3 /= n;
    m.m4 /= n;
    return m;
}

}  // namespace

DescriptiveStats descriptive_stats(std::span<const double> x) {
    if (x.size() < 2) throw Error(ErrorKind::insufficient_data, "descriptive statistics need at least 2 values");
    DescriptiveStats s;
    s.n = x.size();
    const auto m = central_moments(x);
    s.mean = m.mean;
    const double n = static_cast<double>(x.size());
    s.standard_deviation = std::sqrt(m.m2 * n / (n - 1.0));
    if (m.m2 > 0.0) {
        s.skewness = m.m3 / std::pow(m.m2, 1.5);
        s.kurtosis = m.m4 / (m.m2 * m.m2) - 3.0;
    }
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    const auto h = sorted.size() / 2;
    s.median = sorted.size() % 2 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
    return s;
}

JarqueBera jarque_bera(std::span<const double> x, double alpha) {
    if (x.size() < 8) throw Error(ErrorKind::insufficient_data, "Jarque-Bera needs at least 8 values");
    const auto m = central_moments(x);
    JarqueBera jb;
    if (m.m2 > 0.0) {
        const double skew = m.m3 / std::pow(m.m2, 1.5);
        const double kurt = m.m4 / (m.m2 * m.m2) - 3.0;
        jb.statistic = static_cast<double>(x.size()) / 6.0 * (skew * skew + kurt * kurt / 4.0);
    }
    jb.p_value = chi2_sf(jb.statistic, 2.0);
    jb.reject = jb.p_value < alpha;
    return jb;
}

std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag) {
    if (x.size() <= max_lag) {
        throw Error(ErrorKind::insufficient_data, "autocorrelation needs more values than max_lag");
    }
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    std::vector<double> d(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) d[k] = x[k] - mean;
    double var = 0.0;
    for (double v : d) var += v * v;
    if (!(var > 0.0)) throw Error(ErrorKind::undefined, "autocorrelation undefined for zero variance");
    std::vector<double> acf(max_lag + 1);
    acf[0] = 1.0;
    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        double c = 0.0;
        for (std::size_t t = 0; t + lag < d.size(); ++t) c += d[t] * d[t + lag];
        acf[lag] = c / var;
    }
    return acf;
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(ErrorKind::alignment, "correlation inputs differ in length");
    if (x.size() < 3) throw Error(ErrorKind::insufficient_data, "correlation needs at least 3 pairs");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double dx = x[k] - mx, dy = y[k] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw Error(ErrorKind::undefined, "correlation undefined for zero variance");
    Correlation c;
    c.n = x.size();
    c.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double df = n - 2.0;
    if (std::abs(c.rho) >= 1.0) {
        c.p_value = 0.0;
    } else {
        const double t = c.rho * std::sqrt(df / (1.0 - c.rho * c.rho));
        c.p_value = 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(df),
                                                                    std::abs(t)));
    }
    return c;
}

std::vector<Correlation> cross_correlation_battery(std::span<const double> r, std::span<const double> v) {
    if (r.size() != v.size()) throw Error(ErrorKind::alignment, "r and v differ in length");
    std::vector<double> ar(r.size()), av(v.size());
    std::transform(r.begin(), r.end(), ar.begin(), [](double z) { return std::abs(z); });
    std::transform(v.begin(), v.end(), av.begin(), [](double z) { return std::abs(z); });
    std::vector<Correlation> out;
    auto add = [&](const char* name, std::span<const double> a, std::span<const double> b) {
        auto c = pearson(a, b);
        c.name = name;
        out.push_back(std::move(c));
    };
    add("r,v", r, v);
    add("|r|,v", ar, v);
    add("r,|v|", r, av);
    add("|r|,|v|", ar, av);
    return out;
}

ContingencyTable contingency_from_counts(std::vector<std::vector<std::int64_t>> observed) {
    ContingencyTable t;
    const std::size_t rows = observed.size();
    const std::size_t cols = rows ? observed[0].size() : 0;
    for (const auto& row : observed) {
        if (row.size() != cols) throw Error(ErrorKind::parameter, "ragged contingency table");
        for (auto c : row) {
            if (c < 0) throw Error(ErrorKind::parameter, "negative count in contingency table");
        }
    }
    std::vector<double> row_tot(rows, 0.0), col_tot(cols, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            const auto c = static_cast<double>(observed[i][j]);
            row_tot[i] += c;
            col_tot[j] += c;
            grand += c;
        }
    }
    for (double r : row_tot) t.dropped_rows += r == 0.0;
    for (double c : col_tot) t.dropped_cols += c == 0.0;
    const auto eff_rows = rows - t.dropped_rows;
    const auto eff_cols = cols - t.dropped_cols;
    if (eff_rows < 2 || eff_cols < 2) {
        throw Error(ErrorKind::insufficient_data, "contingency table is degenerate: fewer than 2 non-empty rows or columns");
    }
    if (t.dropped_rows || t.dropped_cols) {
        t.warnings.push_back("dropped " + std::to_string(t.dropped_rows) + " empty rows and " +
                             std::to_string(t.dropped_cols) + " empty columns; degrees of freedom reduced");
    }
    t.expected.assign(rows, std::vector<double>(cols, 0.0));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            const double e = row_tot[i] * col_tot[j] / grand;
            t.expected[i][j] = e;
            if (e > 0.0) {
                const double d = static_cast<double>(observed[i][j]) - e;
                t.chi2_statistic += d * d / e;
                if (e < 5.0) ++t.low_expected_cells;
            }
        }
    }
    if (t.low_expected_cells) {
        t.warnings.push_back(std::to_string(t.low_expected_cells) + " cells have expected count below 5");
    }
    t.degrees_of_freedom = static_cast<int>((eff_rows - 1) * (eff_cols - 1));
    t.p_value = chi2_sf(t.chi2_statistic, t.degrees_of_freedom);
    t.observed = std::move(observed);
    return t;
}

namespace {

std::size_t bin_of(double x, std::span<const double> edges, const char* what) {
    const bool last_closed = std::isfinite(edges.back());
    if (x < edges.front() || x > edges.back() || (x == edges.back() && !last_closed)) {
        throw Error(ErrorKind::parameter, std::string(what) + " bins do not cover value " + std::to_string(x));
    }
    auto it = std::upper_bound(edges.begin(), edges.end(), x);
    auto k = static_cast<std::size_t>(it - edges.begin());
    return std::min(k, edges.size() - 1) - 1;
}

}  // namespace

ContingencyTable contingency(std::span<const double> values, std::span<const std::int64_t> waits,
                             std::span<const double> state_edges, std::span<const double> wait_edges) {
    if (values.size() != waits.size()) throw Error(ErrorKind::alignment, "values and waits differ in length");
    if (state_edges.size() < 3 || wait_edges.size() < 3) {
        throw Error(ErrorKind::parameter, "contingency needs at least two bins per axis");
    }
    if (!std::is_sorted(state_edges.begin(), state_edges.end()) ||
        !std::is_sorted(wait_edges.begin(), wait_edges.end())) {
        throw Error(ErrorKind::parameter, "bin edges must be ascending");
    }
    std::vector<std::vector<std::int64_t>> counts(wait_edges.size() - 1,
                                                  std::vector<std::int64_t>(state_edges.size() - 1, 0));
    for (std::size_t k = 0; k < values.size(); ++k) {
        const auto r = bin_of(static_cast<double>(waits[k]), wait_edges, "waiting-time");
        const auto c = bin_of(values[k], state_edges, "state");
        ++counts[r][c];
    }
    auto t = contingency_from_counts(std::move(counts));
    t.row_edges.assign(wait_edges.begin(), wait_edges.end());
    t.col_edges.assign(state_edges.begin(), state_edges.end());
    return t;
}

}  // namespace wismc
