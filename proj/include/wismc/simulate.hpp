#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wismc/model.hpp"
#include "wismc/rng.hpp"
#include "wismc/stats.hpp"

namespace wismc {

enum class Backtransform { empirical, representative };

[[nodiscard]] const char* to_string(Backtransform b) noexcept;
[[nodiscard]] Backtransform parse_backtransform(const std::string& name);

struct SimConfig {
    std::int64_t length_minutes = 1000;
    std::uint64_t seed = 0;
    std::size_t n_replications = 1;
    Backtransform backtransform = Backtransform::empirical;
    // Synchronized history ending at minute 0; drawn from the fitted pair
    // frequencies when absent.
    std::optional<std::vector<HistoryPoint>> initial;
    double s0 = 1.0;
    double v0 = 1.0;
    bool redraw_null = true;

    void validate() const;
};

struct SimEvent {
    std::size_t n = 0;
    std::int64_t time = 0;
    int j_state = 0;
    int v_state = 0;
    std::int64_t b_j = 0;
    std::int64_t b_v = 0;
    int x_bin = 0;
    int w_bin = 0;
};

struct SynthPath {
    std::vector<double> r;
    std::vector<double> v;
    std::vector<double> S;
    std::vector<double> V;
    std::vector<SimEvent> events;
    std::size_t null_events = 0;   // events that left both states unchanged after the redraw
    std::size_t redraws = 0;
    std::size_t fallback_events = 0;  // events conditioned on a resolved (unobserved) cell
    std::size_t backtransform_fallbacks = 0;
};

[[nodiscard]] SynthPath simulate_path(const FittedModel& model, const SimConfig& config, std::size_t replication);

// Replications run on up to `threads` workers; output order is by replication.
[[nodiscard]] std::vector<SynthPath> simulate(const FittedModel& model, const SimConfig& config,
                                              unsigned threads = 1);

// Univariate chain driven by one indexed kernel, starting in `initial_state`
// with an empty index history. Stops at `max_minutes` or after `max_events` jumps.
[[nodiscard]] JumpChain simulate_chain(const IndexedKernel& kernel, int initial_state, std::int64_t max_minutes,
                                       std::size_t max_events, Rng& rng);

// Minute values of a univariate chain, one continuous draw per visit.
[[nodiscard]] std::vector<double> simulate_univariate(const IndexedKernel& kernel, const EmpiricalInverse& inverse,
                                                      int initial_state, std::int64_t length_minutes, Rng& rng,
                                                      Backtransform backtransform = Backtransform::empirical);

struct StylizedReport {
    Battery reference;
    std::vector<Battery> synthetic;
};

[[nodiscard]] StylizedReport validate_stylized_facts(const std::vector<SynthPath>& paths, const Battery& reference,
                                                     const BatteryOptions& options = {});

}  // namespace wismc
