#include "wismc/model.hpp"

#include <algorithm>
#include <cmath>

#include "wismc/error.hpp"

namespace wismc {

EmpiricalInverse EmpiricalInverse::build(std::span<const double> values, const StateGrid& grid,
                                         std::size_t max_points) {
    if (max_points < 2) throw Error(ErrorKind::parameter, "an empirical inverse needs at least two points");
    EmpiricalInverse inv;
    inv.samples.resize(static_cast<std::size_t>(grid.size()));
    for (double x : values) inv.samples[static_cast<std::size_t>(grid.locate(x))].push_back(x);
    for (auto& s : inv.samples) {
        std::sort(s.begin(), s.end());
        if (s.size() <= max_points) continue;
        std::vector<double> kept(max_points);
        const auto n = s.size();
        for (std::size_t k = 0; k < max_points; ++k) {
            kept[k] = s[(k * (n - 1) + (max_points - 1) / 2) / (max_points - 1)];
        }
        kept.front() = s.front();
        kept.back() = s.back();
        s = std::move(kept);
    }
    return inv;
}

double backtransform(int state, double u, const EmpiricalInverse& inv, double fallback, bool* used_fallback) {
    if (used_fallback) *used_fallback = false;
    if (state < 0 || static_cast<std::size_t>(state) >= inv.samples.size() ||
        inv.samples[static_cast<std::size_t>(state)].empty()) {
        if (used_fallback) *used_fallback = true;
        return fallback;
    }
    const auto& s = inv.samples[static_cast<std::size_t>(state)];
    if (s.size() == 1) return s.front();
    const double pos = std::clamp(u, 0.0, 1.0) * static_cast<double>(s.size() - 1);
    const auto lo = std::min(static_cast<std::size_t>(pos), s.size() - 2);
    const double frac = pos - static_cast<double>(lo);
    return s[lo] + frac * (s[lo + 1] - s[lo]);
}

void FitConfig::validate() const {
    if (states_j < 2 || states_v < 2) throw Error(ErrorKind::parameter, "state counts must be at least 2");
    if (!(lambda_j > 0.0 && lambda_j <= 1.0) || !(lambda_v > 0.0 && lambda_v <= 1.0)) {
        throw Error(ErrorKind::parameter, "lambda must lie in (0, 1]");
    }
    if (bins < 1) throw Error(ErrorKind::parameter, "index bins must be at least 1");
    if (nu < 1) throw Error(ErrorKind::parameter, "t copula degrees of freedom must be at least 1");
    if (t_max && *t_max < 1) throw Error(ErrorKind::parameter, "t_max must be at least 1");
    if (!(t_max_quantile > 0.0 && t_max_quantile <= 1.0)) {
        throw Error(ErrorKind::parameter, "t_max quantile must lie in (0, 1]");
    }
}

FittedModel fit_model(std::span<const double> r, std::span<const double> v, const FitConfig& config) {
    config.validate();
    if (r.size() != v.size()) throw Error(ErrorKind::alignment, "return and volume series differ in length");
    if (r.size() < 2) throw Error(ErrorKind::insufficient_data, "at least two observations are required");

    const auto grid_j = make_symmetric_grid(r, config.states_j);
    const auto grid_v = make_symmetric_grid(v, config.states_v);
    auto chain_j = discretize(r, grid_j);
    auto chain_v = discretize(v, grid_v);
    chain_j.history_length = std::min(config.history_m, chain_j.size());
    chain_v.history_length = std::min(config.history_m, chain_v.size());

    KernelOptions kopt;
    kopt.t_max = config.t_max;
    kopt.t_max_quantile = config.t_max_quantile;
    IndexParams pj;
    pj.lambda = config.lambda_j;
    pj.history_m = chain_j.history_length;
    pj.bins = config.bins;
    IndexParams pv = pj;
    pv.lambda = config.lambda_v;
    pv.history_m = chain_v.history_length;
    auto est_j = estimate_kernel(chain_j, grid_j, pj, kopt);
    auto est_v = estimate_kernel(chain_v, grid_v, pv, kopt);

    const auto sync = synchronize(chain_j, chain_v);
    const auto bins = sync_index_bins(sync, est_j.index_bins, est_v.index_bins);
    auto cw = estimate_cond_wait(sync, bins, grid_j.size(), grid_v.size(), est_j.kernel.bins(), est_v.kernel.bins(),
                                 config.t_max, config.t_max_quantile);
    const auto signs = estimate_signs(sync);

    std::vector<double> mj, mv;
    mj.reserve(sync.size());
    mv.reserve(sync.size());
    for (std::size_t n = 0; n + 1 < sync.size(); ++n) {
        mj.push_back(std::abs(chain_j.raw_values[sync.j_visit[n + 1]]));
        mv.push_back(std::abs(chain_v.raw_values[sync.v_visit[n + 1]]));
    }
    auto copula = fit_copula(mj, mv, config.copula, config.nu);

    FittedModel m;
    m.config = config;
    m.n_returns = r.size();
    m.sync_events = sync.size();
    m.initial_weights.assign(static_cast<std::size_t>(grid_j.size()) * static_cast<std::size_t>(grid_v.size()), 0.0);
    for (std::size_t n = 0; n < sync.size(); ++n) {
        m.initial_weights[static_cast<std::size_t>(sync.j_states[n]) * static_cast<std::size_t>(grid_v.size()) +
                          static_cast<std::size_t>(sync.v_states[n])] += 1.0;
    }
    for (auto& w : m.initial_weights) w /= static_cast<double>(sync.size());
    m.inverse_j = EmpiricalInverse::build(r, grid_j);
    m.inverse_v = EmpiricalInverse::build(v, grid_v);
    m.triplet = TripletKernel(std::move(est_j.kernel), std::move(est_v.kernel), std::move(cw), std::move(copula),
                              signs);
    return m;
}

}  // namespace wismc
