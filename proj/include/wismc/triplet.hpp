#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "wismc/copula.hpp"
#include "wismc/core.hpp"
#include "wismc/rng.hpp"

namespace wismc {

// Union of the return and volume jump times with the values in force.
struct SyncChain {
    std::vector<std::int64_t> times;
    std::vector<int> j_states;
    std::vector<int> v_states;
    std::vector<double> j_values;
    std::vector<double> v_values;
    std::vector<std::int64_t> backward_j;
    std::vector<std::int64_t> backward_v;
    // Visit of each source chain in force at the event.
    std::vector<std::size_t> j_visit;
    std::vector<std::size_t> v_visit;
    std::int64_t end_time = 0;

    [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
};

[[nodiscard]] SyncChain synchronize(const JumpChain& chain_j, const JumpChain& chain_v);

// Per event, the index bin of each variable at its own last jump.
struct SyncBins {
    std::vector<int> x_bins;
    std::vector<int> w_bins;
};

[[nodiscard]] SyncBins sync_index_bins(const SyncChain& sync, std::span<const int> j_visit_bins,
                                       std::span<const int> v_visit_bins);

// h~(t | i, v, x, w) on a dense table with a fallback cascade for empty cells:
// the (i, v) marginal over index bins, then the global distribution.
class CondWaitDist {
public:
    CondWaitDist() = default;
    CondWaitDist(int states_j, int states_v, int bins_j, int bins_v, int t_max, std::vector<std::int64_t> counts);

    [[nodiscard]] int states_j() const noexcept { return sj_; }
    [[nodiscard]] int states_v() const noexcept { return sv_; }
    [[nodiscard]] int bins_j() const noexcept { return bj_; }
    [[nodiscard]] int bins_v() const noexcept { return bv_; }
    [[nodiscard]] int t_max() const noexcept { return t_max_; }
    [[nodiscard]] const std::vector<std::int64_t>& counts() const noexcept { return counts_; }

    [[nodiscard]] std::int64_t cell_total(int i, int v, int x, int w) const;
    [[nodiscard]] bool occupied(int i, int v, int x, int w) const { return cell_total(i, v, x, w) > 0; }
    [[nodiscard]] int fallback_level(int i, int v, int x, int w) const;
    // Resolved pmf over t = 1..t_max.
    [[nodiscard]] std::span<const double> pmf(int i, int v, int x, int w) const;
    [[nodiscard]] double h(int i, int v, int x, int w, int t) const;
    [[nodiscard]] double H(int i, int v, int x, int w, int t) const;

private:
    [[nodiscard]] std::size_t cell(int i, int v, int x, int w) const;

    int sj_ = 0, sv_ = 0, bj_ = 0, bv_ = 0, t_max_ = 1;
    std::vector<std::int64_t> counts_;
    std::vector<std::int64_t> totals_;
    std::vector<double> resolved_;
    std::vector<int> fallback_;
};

[[nodiscard]] CondWaitDist estimate_cond_wait(const SyncChain& sync, const SyncBins& bins, int states_j,
                                              int states_v, int bins_j, int bins_v,
                                              std::optional<int> t_max = std::nullopt,
                                              double t_max_quantile = 0.995);

struct SignModel {
    double p_j = 0.5;
    double p_v = 0.5;
};

// Share of positive values among nonzero J~ and V~; zero states are signless.
[[nodiscard]] SignModel estimate_signs(const SyncChain& sync);

struct ConditioningCell {
    int i = 0;
    int v = 0;
    int x_bin = 0;
    int w_bin = 0;
    std::int64_t b_j = 0;
    std::int64_t b_v = 0;
};

// Distinct |representative| values of a symmetric grid and the states carrying them.
struct ModulusLevels {
    std::vector<double> values;      // ascending
    std::vector<int> level_of;       // per state
    std::vector<int> positive;       // per level, state with +value (or the zero state)
    std::vector<int> negative;       // per level, state with -value (or the zero state)

    static ModulusLevels from_grid(const StateGrid& grid);
    [[nodiscard]] int size() const noexcept { return static_cast<int>(values.size()); }
    // Number of levels <= y, and < y.
    [[nodiscard]] int count_le(double y) const noexcept;
    [[nodiscard]] int count_lt(double y) const noexcept;
};

// Strict F^{|J|}: conditional cdf of |next state| given sojourn t_plus_b on the
// estimated (unresolved) cell. Throws `undefined` when that sojourn has no mass.
[[nodiscard]] double modulus_marginal_F(const IndexedKernel& kernel, int i, int x_bin, int t_plus_b, double j);

class TripletKernel {
public:
    TripletKernel() = default;
    TripletKernel(IndexedKernel kernel_j, IndexedKernel kernel_v, CondWaitDist cond_wait, CopulaSpec copula,
                  SignModel signs);

    [[nodiscard]] const IndexedKernel& kernel_j() const noexcept { return kj_; }
    [[nodiscard]] const IndexedKernel& kernel_v() const noexcept { return kv_; }
    [[nodiscard]] const CondWaitDist& cond_wait() const noexcept { return cw_; }
    [[nodiscard]] const CopulaSpec& copula() const noexcept { return copula_; }
    [[nodiscard]] const SignModel& signs() const noexcept { return signs_; }
    [[nodiscard]] const ModulusLevels& levels_j() const noexcept { return lj_; }
    [[nodiscard]] const ModulusLevels& levels_v() const noexcept { return lv_; }
    [[nodiscard]] int t_max() const noexcept { return cw_.t_max(); }

    // Resolved modulus cdf at each level, for the cell's sojourn t + b (clamped
    // to t_max). Without mass at that sojourn the tail beyond it is used, then
    // the whole row.
    [[nodiscard]] std::span<const double> modulus_cdf_j(int i, int x_bin, std::int64_t sojourn) const;
    [[nodiscard]] std::span<const double> modulus_cdf_v(int v, int w_bin, std::int64_t sojourn) const;

    [[nodiscard]] double h(const ConditioningCell& cell, int t) const;
    [[nodiscard]] double H(const ConditioningCell& cell, int t) const;

    // P(J~' <= j, V~' <= a, X~ = t | cell).
    [[nodiscard]] double eval(const ConditioningCell& cell, double j, double a, int t) const;
    // Joint pmf of next (J state, V state) together with X~ = t, laid out
    // [j_state * states_v + v_state]; sums to h~(t).
    [[nodiscard]] std::vector<double> pair_pmf(const ConditioningCell& cell, int t) const;

    [[nodiscard]] double value_j(int state) const { return kj_.grid().representatives.at(static_cast<std::size_t>(state)); }
    [[nodiscard]] double value_v(int state) const { return kv_.grid().representatives.at(static_cast<std::size_t>(state)); }

private:
    void build_tables();

    IndexedKernel kj_;
    IndexedKernel kv_;
    CondWaitDist cw_;
    CopulaSpec copula_;
    SignModel signs_;
    ModulusLevels lj_;
    ModulusLevels lv_;
    std::vector<double> fj_;  // [(i * B + x) * t_max + (s-1)] * levels + level
    std::vector<double> fv_;
};

// Dynamic state of the triplet process at a synchronized event.
struct TripletState {
    int j_state = 0;
    int v_state = 0;
    EwmaIndex index_j;
    EwmaIndex index_v;
    int x_bin = 0;
    int w_bin = 0;
    std::int64_t b_j = 0;
    std::int64_t b_v = 0;
    std::int64_t time = 0;

    [[nodiscard]] ConditioningCell cell() const { return {j_state, v_state, x_bin, w_bin, b_j, b_v}; }
};

struct HistoryPoint {
    int j_state = 0;
    int v_state = 0;
    std::int64_t time = 0;
};

// State after replaying a synchronized history (ascending times); the query
// time is the last point's time.
[[nodiscard]] TripletState state_from_history(const TripletKernel& tk, std::span<const HistoryPoint> history);

struct Step {
    int t = 1;
    int j_state = 0;
    int v_state = 0;
    bool null_event = false;
    int redraws = 0;
};

// Draws X~ from h~, moduli through the copula and the step-cdf inverse, then
// signs. With redraw_null, a draw equal to the current pair is re-drawn once.
// `after` > 0 conditions the waiting time on exceeding it.
[[nodiscard]] Step sample_step(const TripletKernel& tk, const TripletState& state, Rng& rng, bool redraw_null,
                               int after = 0);

// Advances the indices by t minutes and records the new states; a variable
// that changed state gets b = 0 and a fresh index bin, otherwise b grows by t.
void apply_step(const TripletKernel& tk, TripletState& state, int t, int j_state, int v_state);

// Sampling a modulus level from a cdf table: smallest level whose cdf >= u.
[[nodiscard]] int invert_step_cdf(std::span<const double> cdf, double u) noexcept;

}  // namespace wismc
