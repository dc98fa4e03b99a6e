#include "wismc/triplet.hpp"

#include <algorithm>
#include <cmath>

#include "wismc/error.hpp"

namespace wismc {

SyncChain synchronize(const JumpChain& chain_j, const JumpChain& chain_v) {
    if (chain_j.size() == 0 || chain_v.size() == 0) {
        throw Error(ErrorKind::insufficient_data, "cannot synchronize an empty chain");
    }
    if (chain_j.times.front() != chain_v.times.front()) {
        throw Error(ErrorKind::alignment, "return and volume chains must share their time origin");
    }
    SyncChain s;
    s.end_time = std::min(chain_j.end_time, chain_v.end_time);
    std::size_t pj = 0, pv = 0;
    std::size_t nj = 0, nv = 0;  // next unread jump of each chain
    while (nj < chain_j.size() || nv < chain_v.size()) {
        std::int64_t t = std::numeric_limits<std::int64_t>::max();
        if (nj < chain_j.size()) t = std::min(t, chain_j.times[nj]);
        if (nv < chain_v.size()) t = std::min(t, chain_v.times[nv]);
        if (nj < chain_j.size() && chain_j.times[nj] == t) pj = nj++;
        if (nv < chain_v.size() && chain_v.times[nv] == t) pv = nv++;
        s.times.push_back(t);
        s.j_states.push_back(chain_j.states[pj]);
        s.v_states.push_back(chain_v.states[pv]);
        s.j_values.push_back(chain_j.values[pj]);
        s.v_values.push_back(chain_v.values[pv]);
        s.backward_j.push_back(t - chain_j.times[pj]);
        s.backward_v.push_back(t - chain_v.times[pv]);
        s.j_visit.push_back(pj);
        s.v_visit.push_back(pv);
    }
    return s;
}

SyncBins sync_index_bins(const SyncChain& sync, std::span<const int> j_visit_bins, std::span<const int> v_visit_bins) {
    SyncBins b;
    b.x_bins.resize(sync.size());
    b.w_bins.resize(sync.size());
    for (std::size_t n = 0; n < sync.size(); ++n) {
        b.x_bins[n] = j_visit_bins[sync.j_visit[n]];
        b.w_bins[n] = v_visit_bins[sync.v_visit[n]];
    }
    return b;
}

CondWaitDist::CondWaitDist(int states_j, int states_v, int bins_j, int bins_v, int t_max,
                           std::vector<std::int64_t> counts)
    : sj_(states_j), sv_(states_v), bj_(bins_j), bv_(bins_v), t_max_(t_max), counts_(std::move(counts)) {
    if (sj_ < 1 || sv_ < 1 || bj_ < 1 || bv_ < 1 || t_max_ < 1) {
        throw Error(ErrorKind::parameter, "conditional waiting-time table has invalid dimensions");
    }
    const auto cells = static_cast<std::size_t>(sj_) * static_cast<std::size_t>(sv_) * static_cast<std::size_t>(bj_) *
                       static_cast<std::size_t>(bv_);
    const auto tm = static_cast<std::size_t>(t_max_);
    if (counts_.size() != cells * tm) throw Error(ErrorKind::parameter, "conditional waiting-time table has wrong size");
    totals_.assign(cells, 0);
    for (std::size_t c = 0; c < cells; ++c) {
        for (std::size_t t = 0; t < tm; ++t) {
            if (counts_[c * tm + t] < 0) throw Error(ErrorKind::parameter, "negative waiting-time count");
            totals_[c] += counts_[c * tm + t];
        }
    }

    resolved_.assign(cells * tm, 0.0);
    fallback_.assign(cells, 3);
    std::vector<std::int64_t> global(tm, 0);
    for (std::size_t c = 0; c < cells; ++c) {
        for (std::size_t t = 0; t < tm; ++t) global[t] += counts_[c * tm + t];
    }
    std::int64_t global_total = 0;
    for (auto g : global) global_total += g;

    std::vector<std::int64_t> marg(tm);
    for (int i = 0; i < sj_; ++i) {
        for (int v = 0; v < sv_; ++v) {
            std::fill(marg.begin(), marg.end(), 0);
            std::int64_t marg_total = 0;
            for (int x = 0; x < bj_; ++x) {
                for (int w = 0; w < bv_; ++w) {
                    const auto c = cell(i, v, x, w);
                    for (std::size_t t = 0; t < tm; ++t) marg[t] += counts_[c * tm + t];
                    marg_total += totals_[c];
                }
            }
            for (int x = 0; x < bj_; ++x) {
                for (int w = 0; w < bv_; ++w) {
                    const auto c = cell(i, v, x, w);
                    const std::int64_t* src = nullptr;
                    std::int64_t total = 0;
                    if (totals_[c] > 0) {
                        src = &counts_[c * tm];
                        total = totals_[c];
                        fallback_[c] = 0;
                    } else if (marg_total > 0) {
                        src = marg.data();
                        total = marg_total;
                        fallback_[c] = 1;
                    } else if (global_total > 0) {
                        src = global.data();
                        total = global_total;
                        fallback_[c] = 2;
                    }
                    if (!src) continue;
                    for (std::size_t t = 0; t < tm; ++t) {
                        resolved_[c * tm + t] = static_cast<double>(src[t]) / static_cast<double>(total);
                    }
                }
            }
        }
    }
}

std::size_t CondWaitDist::cell(int i, int v, int x, int w) const {
    if (i < 0 || i >= sj_ || v < 0 || v >= sv_ || x < 0 || x >= bj_ || w < 0 || w >= bv_) {
        throw Error(ErrorKind::parameter, "conditioning cell out of range");
    }
    return ((static_cast<std::size_t>(i) * static_cast<std::size_t>(sv_) + static_cast<std::size_t>(v)) *
                static_cast<std::size_t>(bj_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(bv_) +
           static_cast<std::size_t>(w);
}

std::int64_t CondWaitDist::cell_total(int i, int v, int x, int w) const { return totals_[cell(i, v, x, w)]; }

int CondWaitDist::fallback_level(int i, int v, int x, int w) const { return fallback_[cell(i, v, x, w)]; }

std::span<const double> CondWaitDist::pmf(int i, int v, int x, int w) const {
    return {resolved_.data() + cell(i, v, x, w) * static_cast<std::size_t>(t_max_), static_cast<std::size_t>(t_max_)};
}

double CondWaitDist::h(int i, int v, int x, int w, int t) const {
    if (t < 1 || t > t_max_) return 0.0;
    return pmf(i, v, x, w)[static_cast<std::size_t>(t - 1)];
}

double CondWaitDist::H(int i, int v, int x, int w, int t) const {
    if (t < 1) return 0.0;
    const auto p = pmf(i, v, x, w);
    double acc = 0.0;
    for (int u = 1; u <= std::min(t, t_max_); ++u) acc += p[static_cast<std::size_t>(u - 1)];
    return t >= t_max_ && fallback_level(i, v, x, w) < 3 ? 1.0 : acc;
}

CondWaitDist estimate_cond_wait(const SyncChain& sync, const SyncBins& bins, int states_j, int states_v, int bins_j,
                                int bins_v, std::optional<int> t_max, double t_max_quantile) {
    if (sync.size() < 2) throw Error(ErrorKind::insufficient_data, "synchronized chain has no transitions");
    int tm = 0;
    if (t_max) {
        tm = *t_max;
    } else {
        std::vector<std::int64_t> soj;
        soj.reserve(sync.size() - 1);
        for (std::size_t n = 0; n + 1 < sync.size(); ++n) soj.push_back(sync.times[n + 1] - sync.times[n]);
        tm = nearest_rank(std::move(soj), t_max_quantile);
    }
    if (tm < 1) throw Error(ErrorKind::parameter, "t_max must be at least 1");
    std::vector<std::int64_t> counts(static_cast<std::size_t>(states_j) * static_cast<std::size_t>(states_v) *
                                         static_cast<std::size_t>(bins_j) * static_cast<std::size_t>(bins_v) *
                                         static_cast<std::size_t>(tm),
                                     0);
    for (std::size_t n = 0; n + 1 < sync.size(); ++n) {
        const auto t = std::min<std::int64_t>(sync.times[n + 1] - sync.times[n], tm);
        const auto c = ((static_cast<std::size_t>(sync.j_states[n]) * static_cast<std::size_t>(states_v) +
                         static_cast<std::size_t>(sync.v_states[n])) *
                            static_cast<std::size_t>(bins_j) +
                        static_cast<std::size_t>(bins.x_bins[n])) *
                           static_cast<std::size_t>(bins_v) +
                       static_cast<std::size_t>(bins.w_bins[n]);
        ++counts[c * static_cast<std::size_t>(tm) + static_cast<std::size_t>(t - 1)];
    }
    return CondWaitDist(states_j, states_v, bins_j, bins_v, tm, std::move(counts));
}

SignModel estimate_signs(const SyncChain& sync) {
    std::size_t pos_j = 0, nz_j = 0, pos_v = 0, nz_v = 0;
    for (std::size_t n = 0; n < sync.size(); ++n) {
        if (sync.j_values[n] != 0.0) {
            ++nz_j;
            pos_j += sync.j_values[n] > 0.0;
        }
        if (sync.v_values[n] != 0.0) {
            ++nz_v;
            pos_v += sync.v_values[n] > 0.0;
        }
    }
    if (nz_j == 0 || nz_v == 0) throw Error(ErrorKind::estimation, "sign probability undefined: all states are zero");
    return {static_cast<double>(pos_j) / static_cast<double>(nz_j),
            static_cast<double>(pos_v) / static_cast<double>(nz_v)};
}

ModulusLevels ModulusLevels::from_grid(const StateGrid& grid) {
    if (!grid.symmetric()) throw Error(ErrorKind::parameter, "triplet model needs symmetric state grids");
    ModulusLevels m;
    for (double r : grid.representatives) m.values.push_back(std::abs(r));
    std::sort(m.values.begin(), m.values.end());
    m.values.erase(std::unique(m.values.begin(), m.values.end()), m.values.end());
    m.positive.assign(m.values.size(), -1);
    m.negative.assign(m.values.size(), -1);
    m.level_of.resize(grid.representatives.size());
    for (int k = 0; k < grid.size(); ++k) {
        const double r = grid.representatives[static_cast<std::size_t>(k)];
        const auto level = static_cast<int>(std::lower_bound(m.values.begin(), m.values.end(), std::abs(r)) -
                                            m.values.begin());
        m.level_of[static_cast<std::size_t>(k)] = level;
        // Higher-index state wins for a zero level: the one holding zero itself.
        if (r > 0.0 || (r == 0.0)) m.positive[static_cast<std::size_t>(level)] = k;
        if (r < 0.0 || (r == 0.0 && m.negative[static_cast<std::size_t>(level)] < 0)) {
            m.negative[static_cast<std::size_t>(level)] = k;
        }
    }
    return m;
}

int ModulusLevels::count_le(double y) const noexcept {
    return static_cast<int>(std::upper_bound(values.begin(), values.end(), y) - values.begin());
}

int ModulusLevels::count_lt(double y) const noexcept {
    return static_cast<int>(std::lower_bound(values.begin(), values.end(), y) - values.begin());
}

double modulus_marginal_F(const IndexedKernel& kernel, int i, int x_bin, int t_plus_b, double j) {
    if (!kernel.occupied(i, x_bin)) throw Error(ErrorKind::undefined, "modulus cdf requested on an empty cell");
    if (t_plus_b < 1) throw Error(ErrorKind::parameter, "sojourn must be at least 1");
    const int s = std::min(t_plus_b, kernel.t_max());
    double num = 0.0, den = 0.0;
    for (int k = 0; k < kernel.states(); ++k) {
        const double p = kernel.pmf(i, x_bin, k, s);
        den += p;
        if (std::abs(kernel.grid().representatives[static_cast<std::size_t>(k)]) <= j) num += p;
    }
    if (!(den > 0.0)) {
        throw Error(ErrorKind::undefined, "modulus cdf undefined: no transitions with that sojourn in the cell");
    }
    return num / den;
}

namespace {

std::vector<double> modulus_table(const IndexedKernel& k, const ModulusLevels& levels) {
    const int s = k.states(), b = k.bins(), tm = k.t_max(), nl = levels.size();
    std::vector<double> out(static_cast<std::size_t>(s) * static_cast<std::size_t>(b) * static_cast<std::size_t>(tm) *
                                static_cast<std::size_t>(nl),
                            0.0);
    std::vector<double> w(static_cast<std::size_t>(nl));
    for (int i = 0; i < s; ++i) {
        for (int x = 0; x < b; ++x) {
            if (k.fallback_level(i, x) == 3) continue;
            const auto row = k.resolved(i, x);
            for (int soj = 1; soj <= tm; ++soj) {
                // Exact sojourn, then the tail beyond it, then the whole row.
                double total = 0.0;
                const std::pair<int, int> ranges[] = {{soj, soj}, {soj, tm}, {1, tm}};
                for (const auto& [first, last] : ranges) {
                    std::fill(w.begin(), w.end(), 0.0);
                    for (int st = 0; st < s; ++st) {
                        for (int t = first; t <= last; ++t) {
                            w[static_cast<std::size_t>(levels.level_of[static_cast<std::size_t>(st)])] +=
                                row[static_cast<std::size_t>(st) * static_cast<std::size_t>(tm) +
                                    static_cast<std::size_t>(t - 1)];
                        }
                    }
                    total = 0.0;
                    for (double v : w) total += v;
                    if (total > 0.0) break;
                }
                if (!(total > 0.0)) throw Error(ErrorKind::estimation, "kernel row carries no mass");
                const auto base = ((static_cast<std::size_t>(i) * static_cast<std::size_t>(b) + static_cast<std::size_t>(x)) *
                                       static_cast<std::size_t>(tm) +
                                   static_cast<std::size_t>(soj - 1)) *
                                  static_cast<std::size_t>(nl);
                double acc = 0.0;
                for (int l = 0; l < nl; ++l) {
                    acc += w[static_cast<std::size_t>(l)];
                    out[base + static_cast<std::size_t>(l)] = acc / total;
                }
                out[base + static_cast<std::size_t>(nl - 1)] = 1.0;
            }
        }
    }
    return out;
}

}  // namespace

TripletKernel::TripletKernel(IndexedKernel kernel_j, IndexedKernel kernel_v, CondWaitDist cond_wait,
                             CopulaSpec copula, SignModel signs)
    : kj_(std::move(kernel_j)),
      kv_(std::move(kernel_v)),
      cw_(std::move(cond_wait)),
      copula_(std::move(copula)),
      signs_(signs) {
    copula_.validate();
    if (!(signs_.p_j >= 0.0 && signs_.p_j <= 1.0 && signs_.p_v >= 0.0 && signs_.p_v <= 1.0)) {
        throw Error(ErrorKind::parameter, "sign probabilities must lie in [0, 1]");
    }
    if (cw_.states_j() != kj_.states() || cw_.states_v() != kv_.states() || cw_.bins_j() != kj_.bins() ||
        cw_.bins_v() != kv_.bins()) {
        throw Error(ErrorKind::parameter, "waiting-time table does not match the kernels");
    }
    lj_ = ModulusLevels::from_grid(kj_.grid());
    lv_ = ModulusLevels::from_grid(kv_.grid());
    build_tables();
}

void TripletKernel::build_tables() {
    fj_ = modulus_table(kj_, lj_);
    fv_ = modulus_table(kv_, lv_);
}

std::span<const double> TripletKernel::modulus_cdf_j(int i, int x_bin, std::int64_t sojourn) const {
    const auto s = static_cast<std::size_t>(std::clamp<std::int64_t>(sojourn, 1, kj_.t_max()) - 1);
    const auto nl = static_cast<std::size_t>(lj_.size());
    const auto base = ((static_cast<std::size_t>(i) * static_cast<std::size_t>(kj_.bins()) + static_cast<std::size_t>(x_bin)) *
                           static_cast<std::size_t>(kj_.t_max()) +
                       s) *
                      nl;
    return {fj_.data() + base, nl};
}

std::span<const double> TripletKernel::modulus_cdf_v(int v, int w_bin, std::int64_t sojourn) const {
    const auto s = static_cast<std::size_t>(std::clamp<std::int64_t>(sojourn, 1, kv_.t_max()) - 1);
    const auto nl = static_cast<std::size_t>(lv_.size());
    const auto base = ((static_cast<std::size_t>(v) * static_cast<std::size_t>(kv_.bins()) + static_cast<std::size_t>(w_bin)) *
                           static_cast<std::size_t>(kv_.t_max()) +
                       s) *
                      nl;
    return {fv_.data() + base, nl};
}

double TripletKernel::h(const ConditioningCell& c, int t) const { return cw_.h(c.i, c.v, c.x_bin, c.w_bin, t); }

double TripletKernel::H(const ConditioningCell& c, int t) const { return cw_.H(c.i, c.v, c.x_bin, c.w_bin, t); }

namespace {

double cdf_at(std::span<const double> cdf, int count) { return count == 0 ? 0.0 : cdf[static_cast<std::size_t>(count - 1)]; }

}  // namespace

double TripletKernel::eval(const ConditioningCell& c, double j, double a, int t) const {
    const double ht = h(c, t);
    if (ht == 0.0) return 0.0;
    const auto fj = modulus_cdf_j(c.i, c.x_bin, t + c.b_j);
    const auto fv = modulus_cdf_v(c.v, c.w_bin, t + c.b_v);
    const double pj = signs_.p_j, pv = signs_.p_v;

    if (j >= 0.0 && a >= 0.0) {
        const double FJ = cdf_at(fj, lj_.count_le(j));
        const double FV = cdf_at(fv, lv_.count_le(a));
        const double C = copula_eval(copula_, FJ, FV);
        return ht * (1.0 + pj * pv * (1.0 - FJ - FV + C) - pv * (1.0 - FV) - pj * (1.0 - FJ));
    }
    if (j < 0.0 && a < 0.0) {
        const double GJ = cdf_at(fj, lj_.count_lt(-j));
        const double GV = cdf_at(fv, lv_.count_lt(-a));
        const double C = copula_eval(copula_, GJ, GV);
        return ht * (1.0 - pj) * (1.0 - pv) * (1.0 - GJ - GV + C);
    }
    if (j < 0.0) {
        const double GJ = cdf_at(fj, lj_.count_lt(-j));
        const double FV = cdf_at(fv, lv_.count_le(a));
        const double C = copula_eval(copula_, GJ, FV);
        return ht * ((1.0 - pj) * (FV - C) + (1.0 - pj) * (1.0 - pv) * (1.0 - GJ - FV + C));
    }
    const double FJ = cdf_at(fj, lj_.count_le(j));
    const double GV = cdf_at(fv, lv_.count_lt(-a));
    const double C = copula_eval(copula_, FJ, GV);
    return ht * ((1.0 - pv) * (FJ - C) + (1.0 - pj) * (1.0 - pv) * (1.0 - FJ - GV + C));
}

std::vector<double> TripletKernel::pair_pmf(const ConditioningCell& c, int t) const {
    const int sj = kj_.states(), sv = kv_.states();
    std::vector<double> q(static_cast<std::size_t>(sj) * static_cast<std::size_t>(sv));
    for (int k = 0; k < sj; ++k) {
        for (int l = 0; l < sv; ++l) {
            q[static_cast<std::size_t>(k) * static_cast<std::size_t>(sv) + static_cast<std::size_t>(l)] =
                eval(c, value_j(k), value_v(l), t);
        }
    }
    auto Q = [&](int k, int l) {
        if (k < 0 || l < 0) return 0.0;
        return q[static_cast<std::size_t>(k) * static_cast<std::size_t>(sv) + static_cast<std::size_t>(l)];
    };
    std::vector<double> p(q.size());
    for (int k = 0; k < sj; ++k) {
        for (int l = 0; l < sv; ++l) {
            p[static_cast<std::size_t>(k) * static_cast<std::size_t>(sv) + static_cast<std::size_t>(l)] =
                Q(k, l) - Q(k - 1, l) - Q(k, l - 1) + Q(k - 1, l - 1);
        }
    }
    return p;
}

TripletState state_from_history(const TripletKernel& tk, std::span<const HistoryPoint> history) {
    if (history.empty()) throw Error(ErrorKind::parameter, "history must contain at least one point");
    for (const auto& p : history) {
        if (p.j_state < 0 || p.j_state >= tk.kernel_j().states() || p.v_state < 0 ||
            p.v_state >= tk.kernel_v().states()) {
            throw Error(ErrorKind::parameter, "history state outside the grid");
        }
    }
    TripletState st;
    st.index_j = EwmaIndex(tk.kernel_j().params().lambda);
    st.index_v = EwmaIndex(tk.kernel_v().params().lambda);
    st.j_state = history[0].j_state;
    st.v_state = history[0].v_state;
    st.time = history[0].time;
    st.x_bin = tk.kernel_j().bin_of(st.index_j.index(tk.value_j(st.j_state)));
    st.w_bin = tk.kernel_v().bin_of(st.index_v.index(tk.value_v(st.v_state)));
    for (std::size_t k = 1; k < history.size(); ++k) {
        const auto dt = history[k].time - history[k - 1].time;
        if (dt <= 0) throw Error(ErrorKind::parameter, "history times must be strictly increasing");
        apply_step(tk, st, static_cast<int>(dt), history[k].j_state, history[k].v_state);
    }
    return st;
}

int invert_step_cdf(std::span<const double> cdf, double u) noexcept {
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) return static_cast<int>(cdf.size()) - 1;
    return static_cast<int>(it - cdf.begin());
}

Step sample_step(const TripletKernel& tk, const TripletState& state, Rng& rng, bool redraw_null, int after) {
    const auto& cw = tk.cond_wait();
    const auto wait = cw.pmf(state.j_state, state.v_state, state.x_bin, state.w_bin);
    std::size_t drawn = 0;
    if (after > 0) {
        std::vector<double> tail(wait.begin(), wait.end());
        for (std::size_t k = 0; k < tail.size() && k < static_cast<std::size_t>(after); ++k) tail[k] = 0.0;
        drawn = rng.discrete(tail);
    } else {
        drawn = rng.discrete(wait);
    }
    if (drawn == wait.size()) throw Error(ErrorKind::estimation, "waiting-time distribution carries no mass");
    Step step;
    step.t = static_cast<int>(drawn) + 1;
    const auto fj = tk.modulus_cdf_j(state.j_state, state.x_bin, step.t + state.b_j);
    const auto fv = tk.modulus_cdf_v(state.v_state, state.w_bin, step.t + state.b_v);
    const auto& lj = tk.levels_j();
    const auto& lv = tk.levels_v();
    for (int attempt = 0;; ++attempt) {
        const auto [u1, u2] = copula_sample(tk.copula(), rng);
        const int mj = invert_step_cdf(fj, u1);
        const int mv = invert_step_cdf(fv, u2);
        const auto uj = static_cast<std::size_t>(mj);
        const auto uv = static_cast<std::size_t>(mv);
        step.j_state = lj.values[uj] == 0.0 || rng.bernoulli(tk.signs().p_j) ? lj.positive[uj] : lj.negative[uj];
        step.v_state = lv.values[uv] == 0.0 || rng.bernoulli(tk.signs().p_v) ? lv.positive[uv] : lv.negative[uv];
        step.null_event = step.j_state == state.j_state && step.v_state == state.v_state;
        if (!step.null_event || !redraw_null || attempt >= 1) break;
        ++step.redraws;
    }
    return step;
}

void apply_step(const TripletKernel& tk, TripletState& st, int t, int j_state, int v_state) {
    st.index_j.advance(tk.value_j(st.j_state), t);
    st.index_v.advance(tk.value_v(st.v_state), t);
    st.time += t;
    if (j_state != st.j_state) {
        st.j_state = j_state;
        st.x_bin = tk.kernel_j().bin_of(st.index_j.index(tk.value_j(j_state)));
        st.b_j = 0;
    } else {
        st.b_j += t;
    }
    if (v_state != st.v_state) {
        st.v_state = v_state;
        st.w_bin = tk.kernel_v().bin_of(st.index_v.index(tk.value_v(v_state)));
        st.b_v = 0;
    } else {
        st.b_v += t;
    }
}

}  // namespace wismc
