#include <cmath>
#include <limits>

#include "wismc/core.hpp"
#include "wismc/error.hpp"
#include "wismc/stats.hpp"

namespace wismc {

namespace {

std::vector<double> absolute(std::span<const double> x) {
    std::vector<double> out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = std::abs(x[k]);
    return out;
}

// Rows: sojourn bins; columns: the chain's states on a symmetric grid.
ContingencyTable state_wait_table(std::span<const double> x, int states, std::span<const double> wait_edges) {
    const auto grid = make_symmetric_grid(x, states);
    const auto chain = discretize(x, grid);
    if (chain.transitions() < 2) throw Error(ErrorKind::insufficient_data, "too few transitions for a contingency table");
    std::vector<double> values;
    std::vector<std::int64_t> waits;
    for (std::size_t n = 0; n + 1 < chain.size(); ++n) {
        values.push_back(chain.values[n]);
        waits.push_back(chain.sojourn(n));
    }
    std::vector<double> state_edges;
    state_edges.push_back(-std::numeric_limits<double>::infinity());
    state_edges.insert(state_edges.end(), grid.edges.begin(), grid.edges.end());
    state_edges.push_back(std::numeric_limits<double>::infinity());
    return contingency(values, waits, state_edges, wait_edges);
}

}  // namespace

Battery analyze(std::span<const double> r, std::span<const double> v, const BatteryOptions& options) {
    if (r.size() != v.size()) throw Error(ErrorKind::alignment, "return and volume series differ in length");
    Battery b;
    b.n_returns = r.size();
    auto attempt = [&](const char* section, auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            b.warnings.push_back(std::string(section) + " omitted: " + e.what());
        }
    };
    attempt("price descriptive statistics", [&] { b.r_stats = descriptive_stats(r); });
    attempt("volume descriptive statistics", [&] { b.v_stats = descriptive_stats(v); });
    attempt("price Jarque-Bera", [&] { b.r_jb = jarque_bera(r, options.alpha); });
    attempt("volume Jarque-Bera", [&] { b.v_jb = jarque_bera(v, options.alpha); });
    const std::size_t lag = r.size() > 1 ? std::min(options.max_lag, r.size() - 1) : 0;
    if (lag < options.max_lag) {
        b.warnings.push_back("autocorrelation truncated at lag " + std::to_string(lag));
    }
    attempt("|r| autocorrelation", [&] { b.acf_abs_r = autocorrelation(absolute(r), lag); });
    attempt("|v| autocorrelation", [&] { b.acf_abs_v = autocorrelation(absolute(v), lag); });
    attempt("cross correlations", [&] { b.cross = cross_correlation_battery(r, v); });
    attempt("price contingency table",
            [&] { b.contingency_r = state_wait_table(r, options.contingency_states, options.wait_edges); });
    attempt("volume contingency table",
            [&] { b.contingency_v = state_wait_table(v, options.contingency_states, options.wait_edges); });
    for (const auto* t : {&b.contingency_r, &b.contingency_v}) {
        if (*t) {
            for (const auto& w : (*t)->warnings) b.warnings.push_back(w);
        }
    }
    return b;
}

}  // namespace wismc
