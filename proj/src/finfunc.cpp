#include "wismc/finfunc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <thread>
#include <unordered_map>

#include "wismc/error.hpp"

namespace wismc {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

}  // namespace

double one_step_marginal_j(const TripletKernel& tk, const ConditioningCell& cell, double j) {
    double acc = 0.0;
    for (int t = 1; t <= tk.t_max(); ++t) acc += tk.eval(cell, j, inf, t);
    return acc;
}

double one_step_marginal_v(const TripletKernel& tk, const ConditioningCell& cell, double a) {
    double acc = 0.0;
    for (int t = 1; t <= tk.t_max(); ++t) acc += tk.eval(cell, inf, a, t);
    return acc;
}

std::vector<double> modulus_joint_pmf(const TripletKernel& tk, const ConditioningCell& cell) {
    const auto lj = static_cast<std::size_t>(tk.levels_j().size());
    const auto lv = static_cast<std::size_t>(tk.levels_v().size());
    std::vector<double> cdf(lj * lv, 0.0);
    for (int t = 1; t <= tk.t_max(); ++t) {
        const double ht = tk.h(cell, t);
        if (ht == 0.0) continue;
        const auto fj = tk.modulus_cdf_j(cell.i, cell.x_bin, t + cell.b_j);
        const auto fv = tk.modulus_cdf_v(cell.v, cell.w_bin, t + cell.b_v);
        for (std::size_t a = 0; a < lj; ++a) {
            for (std::size_t b = 0; b < lv; ++b) cdf[a * lv + b] += ht * copula_eval(tk.copula(), fj[a], fv[b]);
        }
    }
    std::vector<double> pmf(lj * lv);
    for (std::size_t a = 0; a < lj; ++a) {
        for (std::size_t b = 0; b < lv; ++b) {
            double p = cdf[a * lv + b];
            if (a > 0) p -= cdf[(a - 1) * lv + b];
            if (b > 0) p -= cdf[a * lv + b - 1];
            if (a > 0 && b > 0) p += cdf[(a - 1) * lv + b - 1];
            pmf[a * lv + b] = p;
        }
    }
    return pmf;
}

ModulusMoments modulus_covariance(const TripletKernel& tk, const ConditioningCell& cell) {
    const auto pmf = modulus_joint_pmf(tk, cell);
    const auto& mj = tk.levels_j().values;
    const auto& mv = tk.levels_v().values;
    double total = 0.0, ej = 0.0, ev = 0.0, ejj = 0.0, evv = 0.0, ejv = 0.0;
    for (std::size_t a = 0; a < mj.size(); ++a) {
        for (std::size_t b = 0; b < mv.size(); ++b) {
            const double p = pmf[a * mv.size() + b];
            total += p;
            ej += p * mj[a];
            ev += p * mv[b];
            ejj += p * mj[a] * mj[a];
            evv += p * mv[b] * mv[b];
            ejv += p * mj[a] * mv[b];
        }
    }
    if (!(total > 0.0)) throw Error(ErrorKind::undefined, "conditioning cell carries no mass");
    ModulusMoments m;
    m.mean_j = ej / total;
    m.mean_v = ev / total;
    m.sd_j = std::sqrt(std::max(0.0, ejj / total - m.mean_j * m.mean_j));
    m.sd_v = std::sqrt(std::max(0.0, evv / total - m.mean_v * m.mean_v));
    m.covariance = ejv / total - m.mean_j * m.mean_v;
    if (m.sd_j > 0.0 && m.sd_v > 0.0) m.rho = std::clamp(m.covariance / (m.sd_j * m.sd_v), -1.0, 1.0);
    return m;
}

double signed_covariance(const TripletKernel& tk, const ConditioningCell& cell) {
    return (2.0 * tk.signs().p_v - 1.0) * modulus_covariance(tk, cell).covariance;
}

double mutual_information(const std::vector<double>& joint, std::size_t rows, std::size_t cols) {
    std::vector<double> pr(rows, 0.0), pc(cols, 0.0);
    double total = 0.0;
    for (std::size_t a = 0; a < rows; ++a) {
        for (std::size_t b = 0; b < cols; ++b) {
            const double p = std::max(0.0, joint[a * cols + b]);
            pr[a] += p;
            pc[b] += p;
            total += p;
        }
    }
    if (!(total > 0.0)) throw Error(ErrorKind::undefined, "mutual information of an empty distribution");
    double mi = 0.0;
    for (std::size_t a = 0; a < rows; ++a) {
        for (std::size_t b = 0; b < cols; ++b) {
            const double p = std::max(0.0, joint[a * cols + b]) / total;
            if (p <= 0.0) continue;
            mi += p * std::log(p / ((pr[a] / total) * (pc[b] / total)));
        }
    }
    return std::max(0.0, mi);
}

double mutual_information(const TripletKernel& tk, const ConditioningCell& cell) {
    return mutual_information(modulus_joint_pmf(tk, cell), static_cast<std::size_t>(tk.levels_j().size()),
                              static_cast<std::size_t>(tk.levels_v().size()));
}

namespace {

void validate_query(const TripletKernel& tk, const FptQuery& q) {
    if (q.horizon < 0) throw Error(ErrorKind::parameter, "horizon must be non-negative");
    if (q.u < 0) throw Error(ErrorKind::parameter, "u must be non-negative");
    if (!(q.rho > 0.0) || !(q.psi > 0.0)) throw Error(ErrorKind::parameter, "thresholds must be positive");
    if (q.history.empty()) throw Error(ErrorKind::parameter, "query needs at least one history point");
    (void)tk;
}

struct MemoKey {
    std::uint64_t words[11];
    bool operator==(const MemoKey& o) const noexcept {
        return std::equal(std::begin(words), std::end(words), std::begin(o.words));
    }
};

struct MemoHash {
    std::size_t operator()(const MemoKey& k) const noexcept {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (auto w : k.words) {
            h ^= w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return static_cast<std::size_t>(h);
    }
};

class Recursion {
public:
    Recursion(const TripletKernel& tk, std::size_t limit) : tk_(tk), limit_(limit) {}

    // P(Gamma > t) from state, with log thresholds lr and lp and no jump during (0, u].
    double survival(const TripletState& st, double lr, double lp, int t, int u) {
        if (!(lr > 0.0) || !(lp > 0.0)) return 0.0;
        const double i0 = tk_.value_j(st.j_state);
        const double v0 = tk_.value_v(st.v_state);
        const double gi = std::max(0.0, i0);
        const double gv = std::max(0.0, v0);
        if (t <= u) return gi * t < lr && gv * t < lp ? 1.0 : 0.0;

        MemoKey key{};
        if (u == 0) {
            key = make_key(st, lr, lp, t);
            if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        }

        const auto cell = st.cell();
        const double denom = 1.0 - tk_.H(cell, u);
        if (!(denom > 0.0)) throw Error(ErrorKind::undefined, "no waiting-time mass beyond u");
        double value = 0.0;
        if (gi * t < lr && gv * t < lp) value += (1.0 - tk_.H(cell, t)) / denom;
        double acc = 0.0;
        for (int t1 = u + 1; t1 <= t; ++t1) {
            if (!(gi * t1 < lr && gv * t1 < lp)) break;
            if (tk_.h(cell, t1) == 0.0) continue;
            const auto pp = tk_.pair_pmf(cell, t1);
            const int sv = tk_.kernel_v().states();
            for (std::size_t k = 0; k < pp.size(); ++k) {
                if (!(pp[k] > 0.0)) continue;
                TripletState next = st;
                apply_step(tk_, next, t1, static_cast<int>(k) / sv, static_cast<int>(k) % sv);
                acc += pp[k] * survival(next, lr - i0 * t1, lp - v0 * t1, t - t1, 0);
            }
        }
        value += acc / denom;

        if (u == 0) {
            if (memo_.size() >= limit_) {
                throw Error(ErrorKind::resource,
                            "first-passage recursion exceeded its memo limit; use the Monte Carlo method");
            }
            memo_.emplace(key, value);
        }
        return value;
    }

    [[nodiscard]] std::size_t entries() const noexcept { return memo_.size(); }

private:
    static MemoKey make_key(const TripletState& st, double lr, double lp, int t) {
        MemoKey k{};
        k.words[0] = static_cast<std::uint64_t>(st.j_state) << 32 | static_cast<std::uint32_t>(st.v_state);
        k.words[1] = static_cast<std::uint64_t>(st.x_bin) << 32 | static_cast<std::uint32_t>(st.w_bin);
        k.words[2] = static_cast<std::uint64_t>(st.b_j);
        k.words[3] = static_cast<std::uint64_t>(st.b_v);
        k.words[4] = std::bit_cast<std::uint64_t>(lr);
        k.words[5] = std::bit_cast<std::uint64_t>(lp);
        k.words[6] = static_cast<std::uint64_t>(t);
        k.words[7] = std::bit_cast<std::uint64_t>(st.index_j.weighted_sum());
        k.words[8] = std::bit_cast<std::uint64_t>(st.index_j.normaliser());
        k.words[9] = std::bit_cast<std::uint64_t>(st.index_v.weighted_sum());
        k.words[10] = std::bit_cast<std::uint64_t>(st.index_v.normaliser());
        return k;
    }

    const TripletKernel& tk_;
    std::size_t limit_;
    std::unordered_map<MemoKey, double, MemoHash> memo_;
};

void horizon_warning(const TripletKernel& tk, const FptQuery& q, FptResult& r) {
    if (q.horizon > tk.t_max()) {
        r.warnings.push_back("horizon " + std::to_string(q.horizon) + " exceeds the waiting-time support t_max = " +
                             std::to_string(tk.t_max()) + "; longer waits are truncated at t_max");
    }
}

}  // namespace

FptResult fpt_survival_recursive(const TripletKernel& tk, const FptQuery& query, const FptOptions& options) {
    validate_query(tk, query);
    const auto root = state_from_history(tk, query.history);
    FptResult r;
    r.method = "recursion";
    horizon_warning(tk, query, r);
    Recursion rec(tk, options.memo_limit);
    const double lr = std::log(query.rho);
    const double lp = std::log(query.psi);
    for (int t = 0; t <= query.horizon; ++t) {
        r.survival.push_back(std::clamp(rec.survival(root, lr, lp, t, query.u), 0.0, 1.0));
    }
    for (std::size_t t = 1; t < r.survival.size(); ++t) {
        r.survival[t] = std::min(r.survival[t], r.survival[t - 1]);
    }
    r.memo_entries = rec.entries();
    return r;
}

FptResult fpt_survival_mc(const TripletKernel& tk, const FptQuery& query, std::size_t n_paths, std::uint64_t seed,
                          unsigned threads) {
    validate_query(tk, query);
    if (n_paths < 1) throw Error(ErrorKind::parameter, "at least one path is required");
    const auto root = state_from_history(tk, query.history);
    const double lr = std::log(query.rho);
    const double lp = std::log(query.psi);
    const int horizon = query.horizon;
    // gamma[k] counts paths whose first passage is k; index horizon+1 means beyond the horizon.
    auto run = [&](std::size_t begin, std::size_t end, std::vector<std::int64_t>& gamma) {
        for (std::size_t p = begin; p < end; ++p) {
            Rng rng(seed, p);
            int g = horizon + 1;
            if (!(lr > 0.0) || !(lp > 0.0)) {
                g = 0;
            } else {
                TripletState st = root;
                double sj = 0.0, sv = 0.0;
                int time = 0;
                bool first = true;
                while (time < horizon && g > horizon) {
                    const auto step = sample_step(tk, st, rng, false, first ? query.u : 0);
                    first = false;
                    const double i0 = tk.value_j(st.j_state);
                    const double v0 = tk.value_v(st.v_state);
                    for (int k = 1; k <= step.t && time + k <= horizon; ++k) {
                        sj += i0;
                        sv += v0;
                        if (sj >= lr || sv >= lp) {
                            g = time + k;
                            break;
                        }
                    }
                    apply_step(tk, st, step.t, step.j_state, step.v_state);
                    time += step.t;
                }
            }
            ++gamma[static_cast<std::size_t>(g)];
        }
    };

    const auto slots = static_cast<std::size_t>(horizon) + 2;
    threads = std::max(1u, threads);
    const std::size_t workers = std::min<std::size_t>(threads, n_paths);
    std::vector<std::vector<std::int64_t>> partial(workers, std::vector<std::int64_t>(slots, 0));
    if (workers == 1) {
        run(0, n_paths, partial[0]);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            const auto b = n_paths * w / workers;
            const auto e = n_paths * (w + 1) / workers;
            pool.emplace_back([&, w, b, e] {
                try {
                    run(b, e, partial[w]);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
    std::vector<std::int64_t> gamma(slots, 0);
    for (const auto& part : partial) {
        for (std::size_t k = 0; k < slots; ++k) gamma[k] += part[k];
    }

    FptResult r;
    r.method = "monte-carlo";
    r.paths = n_paths;
    horizon_warning(tk, query, r);
    const auto n = static_cast<double>(n_paths);
    std::int64_t alive = static_cast<std::int64_t>(n_paths);
    for (int t = 0; t <= horizon; ++t) {
        alive -= gamma[static_cast<std::size_t>(t)];
        const double p = static_cast<double>(alive) / n;
        const double se = std::sqrt(p * (1.0 - p) / n);
        // Wilson score interval at 95%.
        const double z = 1.959963984540054;
        const double centre = (p + z * z / (2.0 * n)) / (1.0 + z * z / n);
        const double half = z / (1.0 + z * z / n) * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n));
        r.survival.push_back(p);
        r.standard_error.push_back(se);
        r.lower.push_back(std::clamp(centre - half, 0.0, p));
        r.upper.push_back(std::clamp(centre + half, p, 1.0));
    }
    return r;
}

}  // namespace wismc
