#include "wismc/optimize.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

#include "wismc/core.hpp"
#include "wismc/error.hpp"
#include "wismc/model.hpp"
#include "wismc/rng.hpp"
#include "wismc/simulate.hpp"
#include "wismc/stats.hpp"

namespace wismc {

MapeResult mape(std::span<const double> real_acf, std::span<const double> synth_acf, std::size_t max_lag) {
    if (max_lag < 1) throw Error(ErrorKind::parameter, "max_lag must be at least 1");
    if (real_acf.size() <= max_lag || synth_acf.size() <= max_lag) {
        throw Error(ErrorKind::parameter, "acf sequences must cover lags 1..max_lag");
    }
    MapeResult out;
    double acc = 0.0;
    std::size_t used = 0;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        if (real_acf[k] == 0.0) {
            out.excluded_lags.push_back(k);
            continue;
        }
        acc += std::abs(real_acf[k] - synth_acf[k]) / std::abs(real_acf[k]);
        ++used;
    }
    if (used == 0) throw Error(ErrorKind::undefined, "reference acf is zero at every lag");
    out.value = 100.0 * acc / static_cast<double>(used);
    return out;
}

void GridSpec::validate() const {
    if (state_counts.empty() || lambdas.empty()) throw Error(ErrorKind::parameter, "grid lists must be non-empty");
    if (max_lag < 1) throw Error(ErrorKind::parameter, "max_lag must be at least 1");
    if (reps_per_point < 1) throw Error(ErrorKind::parameter, "reps_per_point must be at least 1");
    for (int s : state_counts) {
        if (s < 2) throw Error(ErrorKind::parameter, "state counts must be at least 2");
    }
    for (double l : lambdas) {
        if (!(l > 0.0 && l <= 1.0)) throw Error(ErrorKind::parameter, "lambda must lie in (0, 1]");
    }
    if (bins < 1) throw Error(ErrorKind::parameter, "index bins must be at least 1");
}

namespace {

std::vector<double> abs_acf(std::span<const double> x, std::size_t max_lag) {
    std::vector<double> a(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) a[k] = std::abs(x[k]);
    return autocorrelation(a, max_lag);
}

OptRecord evaluate_point(std::span<const double> values, const std::vector<double>& real_acf, int s, double lambda,
                         const GridSpec& spec, std::uint64_t seed) {
    OptRecord rec;
    rec.states = s;
    rec.lambda = lambda;
    const auto start = std::chrono::steady_clock::now();
    try {
        const auto grid = make_symmetric_grid(values, s);
        const auto chain = discretize(values, grid);
        IndexParams params;
        params.lambda = lambda;
        params.bins = spec.bins;
        const auto est = estimate_kernel(chain, grid, params);
        const auto inverse = EmpiricalInverse::build(values, grid);
        Rng rng(seed, derive_seed(static_cast<std::uint64_t>(s), std::bit_cast<std::uint64_t>(lambda)));
        std::vector<double> mean(spec.max_lag + 1, 0.0);
        for (std::size_t r = 0; r < spec.reps_per_point; ++r) {
            const auto sim = simulate_univariate(est.kernel, inverse, chain.states.front(),
                                                 static_cast<std::int64_t>(values.size()), rng);
            const auto acf = abs_acf(sim, spec.max_lag);
            for (std::size_t k = 0; k <= spec.max_lag; ++k) mean[k] += acf[k];
        }
        for (auto& m : mean) m /= static_cast<double>(spec.reps_per_point);
        rec.mape = mape(real_acf, mean, spec.max_lag).value;
    } catch (const Error& e) {
        rec.failed = true;
        rec.error = std::string(to_string(e.kind())) + ": " + e.what();
    }
    rec.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

}  // namespace

OptResult grid_search(std::span<const double> values, const GridSpec& grid, std::uint64_t seed, unsigned threads) {
    grid.validate();
    if (values.size() <= grid.max_lag + 1) {
        throw Error(ErrorKind::insufficient_data, "series is too short for the requested max_lag");
    }
    const auto real_acf = abs_acf(values, grid.max_lag);

    auto states = grid.state_counts;
    std::sort(states.begin(), states.end());
    states.erase(std::unique(states.begin(), states.end()), states.end());
    auto lambdas = grid.lambdas;
    std::sort(lambdas.begin(), lambdas.end());
    lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());

    OptResult result;
    std::optional<double> previous_best;
    for (int s : states) {
        std::vector<OptRecord> level(lambdas.size());
        const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), lambdas.size());
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (std::size_t k = next++; k < lambdas.size(); k = next++) {
                level[k] = evaluate_point(values, real_acf, s, lambdas[k], grid, seed);
            }
        };
        if (workers == 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
            for (auto& t : pool) t.join();
        }
        std::optional<double> level_best;
        for (const auto& rec : level) {
            result.records.push_back(rec);
            if (!rec.failed && (!level_best || rec.mape < *level_best)) level_best = rec.mape;
        }
        if (grid.epsilon && previous_best && level_best && *previous_best - *level_best < *grid.epsilon) {
            result.stopped_early = s != states.back();
            break;
        }
        if (level_best && (!previous_best || *level_best < *previous_best)) previous_best = level_best;
    }

    bool found = false;
    for (const auto& rec : result.records) {
        if (rec.failed) continue;
        if (!found || rec.mape < result.best_mape) {
            found = true;
            result.best_states = rec.states;
            result.best_lambda = rec.lambda;
            result.best_mape = rec.mape;
        }
    }
    if (!found) throw Error(ErrorKind::estimation, "every grid point failed to estimate");
    return result;
}

}  // namespace wismc
