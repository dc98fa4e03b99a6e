#include "wismc/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "wismc/error.hpp"

namespace wismc {

const char* to_string(Backtransform b) noexcept {
    return b == Backtransform::empirical ? "state-uniform-inverse-cdf" : "representative-value";
}

Backtransform parse_backtransform(const std::string& name) {
    if (name == "state-uniform-inverse-cdf" || name == "empirical") return Backtransform::empirical;
    if (name == "representative-value" || name == "representative") return Backtransform::representative;
    throw Error(ErrorKind::parameter, "unknown back-transform '" + name + "'");
}

void SimConfig::validate() const {
    if (length_minutes < 1) throw Error(ErrorKind::parameter, "simulation length must be at least one minute");
    if (n_replications < 1) throw Error(ErrorKind::parameter, "at least one replication is required");
    if (!(s0 > 0.0) || !(v0 > 0.0)) throw Error(ErrorKind::parameter, "initial price and volume must be positive");
    if (initial && initial->empty()) throw Error(ErrorKind::parameter, "initial history is empty");
}

namespace {

std::vector<double> integrate(const std::vector<double>& x, double start) {
    std::vector<double> out(x.size());
    double cum = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        cum += x[k];
        out[k] = start * std::exp(cum);
    }
    return out;
}

}  // namespace

SynthPath simulate_path(const FittedModel& model, const SimConfig& config, std::size_t replication) {
    config.validate();
    const auto& tk = model.triplet;
    Rng rng(config.seed, replication);

    TripletState st;
    if (config.initial) {
        st = state_from_history(tk, *config.initial);
    } else {
        const auto k = rng.discrete(model.initial_weights);
        if (k >= model.initial_weights.size()) {
            throw Error(ErrorKind::parameter, "model has no initial state distribution; supply an initial history");
        }
        const int sv = tk.kernel_v().states();
        const HistoryPoint start{static_cast<int>(k) / sv, static_cast<int>(k) % sv, 0};
        st = state_from_history(tk, std::span<const HistoryPoint>(&start, 1));
    }

    SynthPath path;
    auto draw = [&](bool j_side, int state) {
        const double rep = j_side ? tk.value_j(state) : tk.value_v(state);
        if (config.backtransform == Backtransform::representative) return rep;
        bool fb = false;
        const double u = rng.uniform();
        const double x = backtransform(state, u, j_side ? model.inverse_j : model.inverse_v, rep, &fb);
        path.backtransform_fallbacks += fb;
        return x;
    };
    double cur_j = draw(true, st.j_state);
    double cur_v = draw(false, st.v_state);

    const auto length = static_cast<std::size_t>(config.length_minutes);
    path.r.reserve(length);
    path.v.reserve(length);
    std::int64_t time = 0;
    std::size_t n = 0;
    const auto& cw = tk.cond_wait();
    while (time < config.length_minutes) {
        path.events.push_back({n, time, st.j_state, st.v_state, st.b_j, st.b_v, st.x_bin, st.w_bin});
        if (cw.fallback_level(st.j_state, st.v_state, st.x_bin, st.w_bin) > 0 ||
            tk.kernel_j().fallback_level(st.j_state, st.x_bin) > 0 ||
            tk.kernel_v().fallback_level(st.v_state, st.w_bin) > 0) {
            ++path.fallback_events;
        }
        const auto step = sample_step(tk, st, rng, config.redraw_null);
        path.redraws += static_cast<std::size_t>(step.redraws);
        path.null_events += step.null_event;
        const auto hold = std::min<std::int64_t>(step.t, config.length_minutes - time);
        path.r.insert(path.r.end(), static_cast<std::size_t>(hold), cur_j);
        path.v.insert(path.v.end(), static_cast<std::size_t>(hold), cur_v);
        const bool j_changed = step.j_state != st.j_state;
        const bool v_changed = step.v_state != st.v_state;
        apply_step(tk, st, step.t, step.j_state, step.v_state);
        time += step.t;
        if (j_changed) cur_j = draw(true, st.j_state);
        if (v_changed) cur_v = draw(false, st.v_state);
        ++n;
    }
    path.S = integrate(path.r, config.s0);
    path.V = integrate(path.v, config.v0);
    return path;
}

std::vector<SynthPath> simulate(const FittedModel& model, const SimConfig& config, unsigned threads) {
    config.validate();
    std::vector<SynthPath> out(config.n_replications);
    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), config.n_replications);
    if (workers == 1) {
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = simulate_path(model, config, k);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t k = next++; k < out.size(); k = next++) out[k] = simulate_path(model, config, k);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

JumpChain simulate_chain(const IndexedKernel& kernel, int initial_state, std::int64_t max_minutes,
                         std::size_t max_events, Rng& rng) {
    if (initial_state < 0 || initial_state >= kernel.states()) {
        throw Error(ErrorKind::parameter, "initial state outside the grid");
    }
    if (max_minutes < 1) throw Error(ErrorKind::parameter, "simulation length must be at least one minute");
    const auto& reps = kernel.grid().representatives;
    EwmaIndex index(kernel.params().lambda);
    JumpChain chain;
    int state = initial_state;
    std::int64_t time = 0;
    int x = kernel.bin_of(index.index(reps[static_cast<std::size_t>(state)]));
    const auto tm = static_cast<std::size_t>(kernel.t_max());
    for (;;) {
        chain.states.push_back(state);
        chain.values.push_back(reps[static_cast<std::size_t>(state)]);
        chain.raw_values.push_back(reps[static_cast<std::size_t>(state)]);
        chain.times.push_back(time);
        if (time >= max_minutes || chain.transitions() >= max_events) break;
        if (kernel.fallback_level(state, x) == 3) throw Error(ErrorKind::estimation, "kernel carries no mass");
        const auto k = rng.discrete(kernel.resolved(state, x));
        const int next = static_cast<int>(k / tm);
        const auto t = static_cast<std::int64_t>(k % tm) + 1;
        index.advance(reps[static_cast<std::size_t>(state)], t);
        time += t;
        state = next;
        x = kernel.bin_of(index.index(reps[static_cast<std::size_t>(state)]));
    }
    chain.end_time = time + 1;
    if (time >= max_minutes) {
        // The last visit starts at or after the horizon; it is not part of the path.
        chain.states.pop_back();
        chain.values.pop_back();
        chain.raw_values.pop_back();
        chain.times.pop_back();
        chain.end_time = max_minutes;
    }
    return chain;
}

std::vector<double> simulate_univariate(const IndexedKernel& kernel, const EmpiricalInverse& inverse,
                                        int initial_state, std::int64_t length_minutes, Rng& rng,
                                        Backtransform backtransform_kind) {
    const auto chain =
        simulate_chain(kernel, initial_state, length_minutes, std::numeric_limits<std::size_t>::max(), rng);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(length_minutes));
    for (std::size_t n = 0; n < chain.size(); ++n) {
        const auto end = n + 1 < chain.size() ? chain.times[n + 1] : length_minutes;
        double value = chain.values[n];
        if (backtransform_kind == Backtransform::empirical) {
            value = backtransform(chain.states[n], rng.uniform(), inverse, value);
        }
        out.insert(out.end(), static_cast<std::size_t>(end - chain.times[n]), value);
    }
    return out;
}

StylizedReport validate_stylized_facts(const std::vector<SynthPath>& paths, const Battery& reference,
                                       const BatteryOptions& options) {
    if (paths.empty()) throw Error(ErrorKind::parameter, "no synthetic paths to validate");
    StylizedReport report;
    report.reference = reference;
    for (const auto& p : paths) report.synthetic.push_back(analyze(p.r, p.v, options));
    return report;
}

}  // namespace wismc
