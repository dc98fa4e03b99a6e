#include "wismc/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wismc/error.hpp"

namespace wismc {

StateGrid::StateGrid(std::vector<double> interior_edges, std::vector<double> reps)
    : edges(std::move(interior_edges)), representatives(std::move(reps)) {
    if (representatives.size() != edges.size() + 1) {
        throw Error(ErrorKind::parameter, "state grid needs one representative per state");
    }
    if (representatives.size() < 2) throw Error(ErrorKind::parameter, "state grid needs at least 2 states");
    for (std::size_t k = 0; k < edges.size(); ++k) {
        if (!std::isfinite(edges[k]) || (k > 0 && !(edges[k] > edges[k - 1]))) {
            throw Error(ErrorKind::parameter, "state grid edges must be finite and strictly increasing");
        }
    }
}

int StateGrid::locate(double x) const noexcept {
    return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
}

double StateGrid::lower_edge(int state) const noexcept {
    return state == 0 ? -std::numeric_limits<double>::infinity() : edges[static_cast<std::size_t>(state - 1)];
}

double StateGrid::upper_edge(int state) const noexcept {
    return state == size() - 1 ? std::numeric_limits<double>::infinity() : edges[static_cast<std::size_t>(state)];
}

bool StateGrid::symmetric() const noexcept {
    const auto e = edges.size();
    for (std::size_t k = 0; k < e; ++k) {
        if (edges[k] != -edges[e - 1 - k]) return false;
    }
    const auto s = representatives.size();
    for (std::size_t k = 0; k < s; ++k) {
        if (representatives[k] != -representatives[s - 1 - k]) return false;
    }
    return true;
}

StateGrid make_symmetric_grid(std::span<const double> values, int s) {
    if (s < 2) throw Error(ErrorKind::parameter, "number of states must be at least 2");
    if (values.empty()) throw Error(ErrorKind::insufficient_data, "cannot build a state grid from no data");
    std::vector<double> a(values.size());
    std::transform(values.begin(), values.end(), a.begin(), [](double v) { return std::abs(v); });
    std::sort(a.begin(), a.end());
    const auto n = a.size();

    // Edge between the nearest-rank quantile and the next distinct larger |x|.
    auto edge_at = [&](double level) -> std::optional<double> {
        auto rank = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n) - 1e-9));
        rank = std::clamp<std::size_t>(rank, 1, n);
        const double q = a[rank - 1];
        auto it = std::upper_bound(a.begin(), a.end(), q);
        if (it == a.end()) return std::nullopt;
        return 0.5 * (q + *it);
    };

    const bool odd = s % 2 == 1;
    const int half = s / 2;
    std::vector<double> cuts;  // positive band boundaries, ascending
    if (odd) {
        for (int k = 0; k < half; ++k) {
            if (auto c = edge_at((1.0 + 2.0 * k) / s)) cuts.push_back(*c);
        }
    } else {
        for (int k = 1; k < half; ++k) {
            if (auto c = edge_at(2.0 * k / s)) cuts.push_back(*c);
        }
    }
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    if (odd && cuts.empty()) {
        throw Error(ErrorKind::insufficient_data, "data has a single distinct |value|; cannot split into states");
    }

    // Band means of |x|, pooled over both signs.
    std::vector<double> lows;
    if (odd) {
        lows = cuts;
    } else {
        lows.push_back(0.0);
        lows.insert(lows.end(), cuts.begin(), cuts.end());
    }
    std::vector<double> band_mean(lows.size(), 0.0);
    for (std::size_t b = 0; b < lows.size(); ++b) {
        const double hi = b + 1 < lows.size() ? lows[b + 1] : std::numeric_limits<double>::infinity();
        const auto lo_it = std::lower_bound(a.begin(), a.end(), lows[b]);
        const auto hi_it = std::lower_bound(a.begin(), a.end(), hi);
        if (hi_it > lo_it) {
            double sum = 0.0;
            for (auto it = lo_it; it != hi_it; ++it) sum += *it;
            band_mean[b] = sum / static_cast<double>(hi_it - lo_it);
        } else {
            band_mean[b] = b + 1 < lows.size() ? 0.5 * (lows[b] + hi) : lows[b];
        }
    }

    std::vector<double> edges, reps;
    for (auto it = cuts.rbegin(); it != cuts.rend(); ++it) edges.push_back(-*it);
    if (!odd) edges.push_back(0.0);
    for (double c : cuts) edges.push_back(c);
    for (auto it = band_mean.rbegin(); it != band_mean.rend(); ++it) reps.push_back(-*it);
    if (odd) reps.push_back(0.0);
    for (double m : band_mean) reps.push_back(m);
    return StateGrid(std::move(edges), std::move(reps));
}

JumpChain discretize(std::span<const double> values, const StateGrid& grid, std::int64_t start_time) {
    JumpChain chain;
    chain.end_time = start_time + static_cast<std::int64_t>(values.size());
    int last = -1;
    for (std::size_t k = 0; k < values.size(); ++k) {
        const int state = grid.locate(values[k]);
        if (state != last) {
            chain.states.push_back(state);
            chain.values.push_back(grid.representatives[static_cast<std::size_t>(state)]);
            chain.raw_values.push_back(values[k]);
            chain.times.push_back(start_time + static_cast<std::int64_t>(k));
            last = state;
        }
    }
    return chain;
}

double ewma_score(double j_value, std::int64_t elapsed, double lambda, double normalizer) {
    if (elapsed < 0) throw Error(ErrorKind::parameter, "elapsed time must be non-negative");
    if (!(lambda > 0.0 && lambda <= 1.0)) throw Error(ErrorKind::parameter, "lambda must lie in (0, 1]");
    if (!(normalizer > 0.0)) throw Error(ErrorKind::parameter, "normalizer must be positive");
    return std::pow(lambda, static_cast<double>(elapsed)) * j_value * j_value / normalizer;
}

ScoreFunction ScoreFunction::ewma(double lambda) {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw Error(ErrorKind::parameter, "lambda must lie in (0, 1]");
    ScoreFunction f;
    f.kind = Kind::ewma;
    f.lambda = lambda;
    return f;
}

ScoreFunction ScoreFunction::custom(std::function<double(double, std::int64_t, std::int64_t)> fn) {
    ScoreFunction f;
    f.kind = Kind::custom;
    f.fn = std::move(fn);
    return f;
}

double index_value(std::span<const Visit> visits, std::int64_t t, const ScoreFunction& score) {
    if (visits.empty()) throw Error(ErrorKind::parameter, "index needs at least one visit");
    const std::int64_t start = visits.front().time;
    if (t < start) throw Error(ErrorKind::parameter, "time precedes the start of the history");

    double num = 0.0, den = 0.0;
    std::size_t v = 0;
    for (std::int64_t a = start; a < t; ++a) {
        while (v + 1 < visits.size() && visits[v + 1].time <= a) ++v;
        const double value = visits[v].value;
        if (score.kind == ScoreFunction::Kind::ewma) {
            const double w = std::pow(score.lambda, static_cast<double>(t - a));
            num += w * value * value;
            den += w;
        } else {
            num += score.fn(value, t, a);
        }
    }
    while (v + 1 < visits.size() && visits[v + 1].time <= t) ++v;
    const double current = visits[v].value;
    if (score.kind == ScoreFunction::Kind::ewma) {
        return (num + current * current) / (den + 1.0);
    }
    return num + score.fn(current, t, t);
}

namespace {

std::vector<Visit> visits_of(const JumpChain& chain, std::size_t count) {
    std::vector<Visit> out(count);
    for (std::size_t k = 0; k < count; ++k) out[k] = {chain.values[k], chain.times[k]};
    return out;
}

}  // namespace

double index_at_jump(const JumpChain& chain, std::size_t n, const ScoreFunction& score) {
    if (n >= chain.size()) throw Error(ErrorKind::parameter, "jump index out of range");
    const auto visits = visits_of(chain, n + 1);
    return index_value(visits, chain.times[n], score);
}

double index_at_time(const JumpChain& chain, std::int64_t t, const ScoreFunction& score) {
    if (chain.size() == 0 || t < chain.times.front()) {
        throw Error(ErrorKind::parameter, "time precedes the start of the history");
    }
    const auto upto = static_cast<std::size_t>(std::upper_bound(chain.times.begin(), chain.times.end(), t) -
                                               chain.times.begin());
    const auto visits = visits_of(chain, upto);
    return index_value(visits, t, score);
}

std::vector<Visit> shift(std::span<const Visit> window) {
    std::vector<Visit> out(window.begin(), window.end());
    if (out.empty()) return out;
    const auto last = out.back().time;
    for (auto& v : out) v.time -= last;
    return out;
}

bool shift_check(std::span<const Visit> window, const ScoreFunction& score, double tol) {
    if (window.empty()) return true;
    const double before = index_value(window, window.back().time, score);
    const auto moved = shift(window);
    const double after = index_value(moved, moved.back().time, score);
    return std::abs(before - after) <= tol;
}

void EwmaIndex::advance(double value, std::int64_t minutes) noexcept {
    if (minutes <= 0) return;
    double decay, gain;
    if (lambda_ == 1.0) {
        decay = 1.0;
        gain = static_cast<double>(minutes);
    } else {
        decay = std::pow(lambda_, static_cast<double>(minutes));
        gain = lambda_ * (1.0 - decay) / (1.0 - lambda_);
    }
    s_ = decay * s_ + value * value * gain;
    d_ = decay * d_ + gain;
}

std::vector<double> index_trajectory(const JumpChain& chain, double lambda) {
    std::vector<double> out(chain.size());
    EwmaIndex tracker(lambda);
    for (std::size_t n = 0; n < chain.size(); ++n) {
        if (n > 0) tracker.advance(chain.values[n - 1], chain.times[n] - chain.times[n - 1]);
        out[n] = tracker.index(chain.values[n]);
    }
    return out;
}

int index_bin(std::span<const double> index_edges, double x) noexcept {
    return static_cast<int>(std::upper_bound(index_edges.begin(), index_edges.end(), x) - index_edges.begin());
}

std::vector<double> quantile_edges(std::span<const double> x, int bins) {
    if (bins < 1) throw Error(ErrorKind::parameter, "index bins must be at least 1");
    std::vector<double> edges;
    if (x.empty() || bins == 1) return edges;
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    const double last = static_cast<double>(sorted.size() - 1);
    for (int k = 1; k < bins; ++k) {
        const double pos = last * k / bins;
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, sorted.size() - 1);
        const double e = sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
        if (e > sorted.front() && (edges.empty() || e > edges.back())) edges.push_back(e);
    }
    return edges;
}

int nearest_rank(std::vector<std::int64_t> values, double q) {
    if (values.empty()) throw Error(ErrorKind::insufficient_data, "no sojourns observed");
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size()) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return static_cast<int>(values[rank - 1]);
}

IndexedKernel::IndexedKernel(StateGrid grid, IndexParams params, int t_max, std::vector<std::int64_t> counts)
    : grid_(std::move(grid)), params_(std::move(params)), t_max_(t_max), counts_(std::move(counts)) {
    if (t_max_ < 1) throw Error(ErrorKind::parameter, "t_max must be at least 1");
    const auto cells = static_cast<std::size_t>(states()) * static_cast<std::size_t>(bins());
    if (counts_.size() != cells * row_size()) throw Error(ErrorKind::parameter, "kernel count table has wrong size");
    totals_.assign(cells, 0);
    for (std::size_t c = 0; c < cells; ++c) {
        for (std::size_t k = 0; k < row_size(); ++k) {
            if (counts_[c * row_size() + k] < 0) throw Error(ErrorKind::parameter, "negative kernel count");
            totals_[c] += counts_[c * row_size() + k];
        }
    }
    build_resolved();
}

std::int64_t IndexedKernel::count(int i, int x, int j, int t) const {
    if (t < 1 || t > t_max_) return 0;
    return counts_.at(offset(i, x) + static_cast<std::size_t>(j) * static_cast<std::size_t>(t_max_) +
                      static_cast<std::size_t>(t - 1));
}

std::int64_t IndexedKernel::cell_total(int i, int x) const {
    return totals_.at(static_cast<std::size_t>(i) * static_cast<std::size_t>(bins()) + static_cast<std::size_t>(x));
}

double IndexedKernel::pmf(int i, int x, int j, int t) const {
    const auto total = cell_total(i, x);
    if (total == 0) return 0.0;
    return static_cast<double>(count(i, x, j, t)) / static_cast<double>(total);
}

void IndexedKernel::build_resolved() {
    const int s = states(), b = bins();
    const auto rs = row_size();
    resolved_.assign(static_cast<std::size_t>(s) * static_cast<std::size_t>(b) * rs, 0.0);
    fallback_.assign(static_cast<std::size_t>(s) * static_cast<std::size_t>(b), 3);

    std::vector<std::int64_t> global(rs, 0);
    for (int i = 0; i < s; ++i) {
        for (int x = 0; x < b; ++x) {
            for (std::size_t k = 0; k < rs; ++k) global[k] += counts_[offset(i, x) + k];
        }
    }

    std::vector<std::int64_t> acc(rs);
    for (int i = 0; i < s; ++i) {
        std::fill(acc.begin(), acc.end(), 0);
        for (int x = 0; x < b; ++x) {
            for (std::size_t k = 0; k < rs; ++k) acc[k] += counts_[offset(i, x) + k];
        }
        std::int64_t marginal_total = 0;
        for (auto c : acc) marginal_total += c;

        std::vector<std::int64_t> glob = global;
        for (int t = 0; t < t_max_; ++t) glob[static_cast<std::size_t>(i) * static_cast<std::size_t>(t_max_) + static_cast<std::size_t>(t)] = 0;
        std::int64_t glob_total = 0;
        for (auto c : glob) glob_total += c;

        for (int x = 0; x < b; ++x) {
            const auto cell = static_cast<std::size_t>(i) * static_cast<std::size_t>(b) + static_cast<std::size_t>(x);
            const std::int64_t* src = nullptr;
            std::int64_t total = 0;
            int level = 3;
            if (totals_[cell] > 0) {
                src = &counts_[offset(i, x)];
                total = totals_[cell];
                level = 0;
            } else if (marginal_total > 0) {
                src = acc.data();
                total = marginal_total;
                level = 1;
            } else if (glob_total > 0) {
                src = glob.data();
                total = glob_total;
                level = 2;
            }
            fallback_[cell] = level;
            if (!src) continue;
            for (std::size_t k = 0; k < rs; ++k) {
                resolved_[offset(i, x) + k] = static_cast<double>(src[k]) / static_cast<double>(total);
            }
        }
    }
}

int IndexedKernel::fallback_level(int i, int x) const {
    return fallback_.at(static_cast<std::size_t>(i) * static_cast<std::size_t>(bins()) + static_cast<std::size_t>(x));
}

std::span<const double> IndexedKernel::resolved(int i, int x) const {
    if (i < 0 || i >= states() || x < 0 || x >= bins()) throw Error(ErrorKind::parameter, "kernel cell out of range");
    return {resolved_.data() + offset(i, x), row_size()};
}

double IndexedKernel::resolved_pmf(int i, int x, int j, int t) const {
    if (t < 1 || t > t_max_) return 0.0;
    return resolved(i, x)[static_cast<std::size_t>(j) * static_cast<std::size_t>(t_max_) + static_cast<std::size_t>(t - 1)];
}

double IndexedKernel::h(int i, int x, int t) const {
    if (t < 1 || t > t_max_) return 0.0;
    const auto row = resolved(i, x);
    double sum = 0.0;
    for (int j = 0; j < states(); ++j) {
        sum += row[static_cast<std::size_t>(j) * static_cast<std::size_t>(t_max_) + static_cast<std::size_t>(t - 1)];
    }
    return sum;
}

double IndexedKernel::H(int i, int x, int t) const {
    double sum = 0.0;
    for (int u = 1; u <= std::min(t, t_max_); ++u) sum += h(i, x, u);
    return sum;
}

double WaitingTimeDist::at(int i, int x, int t) const {
    if (t < 1) return 0.0;
    const auto row = (static_cast<std::size_t>(i) * static_cast<std::size_t>(bins) + static_cast<std::size_t>(x)) *
                     static_cast<std::size_t>(t_max);
    return cdf.at(row + static_cast<std::size_t>(std::min(t, t_max) - 1));
}

namespace {

KernelEstimate estimate_from_index(const JumpChain& chain, const StateGrid& grid, const IndexParams& params,
                                   std::vector<double> index, const KernelOptions& options) {
    if (!(params.lambda > 0.0 && params.lambda <= 1.0)) throw Error(ErrorKind::parameter, "lambda must lie in (0, 1]");
    if (params.bins < 1) throw Error(ErrorKind::parameter, "index bins must be at least 1");
    const std::size_t m = params.history_m;
    if (chain.size() < m + 2) {
        throw Error(ErrorKind::insufficient_data, "chain has no transitions after the history window");
    }
    for (int st : chain.states) {
        if (st < 0 || st >= grid.size()) throw Error(ErrorKind::parameter, "chain state outside the grid");
    }
    const std::size_t last = chain.size() - 1;  // visits m..last-1 have an observed successor

    IndexParams p = params;
    if (p.index_edges.empty()) {
        p.index_edges = quantile_edges(std::span<const double>(index).subspan(m, last - m), params.bins);
    }

    int t_max = 0;
    if (options.t_max) {
        t_max = *options.t_max;
    } else {
        std::vector<std::int64_t> soj;
        soj.reserve(last - m);
        for (std::size_t n = m; n < last; ++n) soj.push_back(chain.sojourn(n));
        t_max = nearest_rank(std::move(soj), options.t_max_quantile);
    }
    if (t_max < 1) throw Error(ErrorKind::parameter, "t_max must be at least 1");

    const int s = grid.size();
    const int b = static_cast<int>(p.index_edges.size()) + 1;
    std::vector<std::int64_t> counts(static_cast<std::size_t>(s) * static_cast<std::size_t>(b) *
                                         static_cast<std::size_t>(s) * static_cast<std::size_t>(t_max),
                                     0);
    KernelEstimate est;
    est.index_bins.resize(chain.size());
    for (std::size_t n = 0; n < chain.size(); ++n) est.index_bins[n] = index_bin(p.index_edges, index[n]);
    for (std::size_t n = m; n < last; ++n) {
        const int i = chain.states[n], j = chain.states[n + 1], x = est.index_bins[n];
        if (i == j) throw Error(ErrorKind::parameter, "jump chain contains a self-transition");
        const auto t = static_cast<int>(std::min<std::int64_t>(chain.sojourn(n), t_max));
        const auto at = ((static_cast<std::size_t>(i) * static_cast<std::size_t>(b) + static_cast<std::size_t>(x)) *
                             static_cast<std::size_t>(s) +
                         static_cast<std::size_t>(j)) *
                            static_cast<std::size_t>(t_max) +
                        static_cast<std::size_t>(t - 1);
        ++counts[at];
    }
    est.kernel = IndexedKernel(grid, p, t_max, std::move(counts));

    auto& w = est.waiting;
    w.states = s;
    w.bins = b;
    w.t_max = t_max;
    w.cdf.assign(static_cast<std::size_t>(s) * static_cast<std::size_t>(b) * static_cast<std::size_t>(t_max), 0.0);
    for (int i = 0; i < s; ++i) {
        for (int x = 0; x < b; ++x) {
            if (!est.kernel.occupied(i, x)) continue;
            double acc = 0.0;
            for (int t = 1; t <= t_max; ++t) {
                for (int j = 0; j < s; ++j) acc += est.kernel.pmf(i, x, j, t);
                w.cdf[(static_cast<std::size_t>(i) * static_cast<std::size_t>(b) + static_cast<std::size_t>(x)) *
                          static_cast<std::size_t>(t_max) +
                      static_cast<std::size_t>(t - 1)] = t == t_max ? 1.0 : acc;
            }
        }
    }
    est.index = std::move(index);
    return est;
}

}  // namespace

KernelEstimate estimate_kernel(const JumpChain& chain, const StateGrid& grid, const IndexParams& params,
                               const KernelOptions& options) {
    if (!(params.lambda > 0.0 && params.lambda <= 1.0)) throw Error(ErrorKind::parameter, "lambda must lie in (0, 1]");
    return estimate_from_index(chain, grid, params, index_trajectory(chain, params.lambda), options);
}

KernelEstimate estimate_kernel(const JumpChain& chain, const StateGrid& grid, const IndexParams& params,
                               const ScoreFunction& score, const KernelOptions& options) {
    if (score.kind == ScoreFunction::Kind::ewma) {
        IndexParams p = params;
        p.lambda = score.lambda;
        return estimate_kernel(chain, grid, p, options);
    }
    std::vector<double> index(chain.size());
    for (std::size_t n = 0; n < chain.size(); ++n) index[n] = index_at_jump(chain, n, score);
    return estimate_from_index(chain, grid, params, std::move(index), options);
}

}  // namespace wismc
