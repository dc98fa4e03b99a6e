#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace wismc {

// Partition of the real line into s states. `edges` holds the s-1 interior
// edges; the outer edges are -inf and +inf. Bins are left-closed, right-open.
struct StateGrid {
    std::vector<double> edges;
    std::vector<double> representatives;

    StateGrid() = default;
    StateGrid(std::vector<double> interior_edges, std::vector<double> reps);

    [[nodiscard]] int size() const noexcept { return static_cast<int>(representatives.size()); }
    [[nodiscard]] int locate(double x) const noexcept;
    [[nodiscard]] double lower_edge(int state) const noexcept;
    [[nodiscard]] double upper_edge(int state) const noexcept;
    // Mirror symmetry about zero of both edges and representatives.
    [[nodiscard]] bool symmetric() const noexcept;
};

// Symmetric grid from quantiles of |x|. Odd s gets a centre band around zero
// holding a 1/s share of the data, even s gets an edge at zero. Edges are
// placed halfway between a quantile and the next distinct larger |x| so no
// observation sits on an edge. Tied quantiles collapse bands, so the result
// may have fewer than s states.
[[nodiscard]] StateGrid make_symmetric_grid(std::span<const double> values, int s);

struct JumpChain {
    std::vector<int> states;
    std::vector<double> values;          // representative value of each visited state
    std::vector<double> raw_values;      // input value at each jump minute
    std::vector<std::int64_t> times;
    std::int64_t end_time = 0;           // one past the last observed minute
    std::size_t history_length = 0;      // leading visits used only as index history

    [[nodiscard]] std::size_t size() const noexcept { return states.size(); }
    [[nodiscard]] std::size_t transitions() const noexcept { return states.empty() ? 0 : states.size() - 1; }
    [[nodiscard]] std::int64_t sojourn(std::size_t n) const { return times.at(n + 1) - times.at(n); }
};

// Minute k of `values` is time start_time + k. Consecutive equal states are
// merged into one visit.
[[nodiscard]] JumpChain discretize(std::span<const double> values, const StateGrid& grid,
                                   std::int64_t start_time = 0);

// lambda^elapsed * j_value^2 / normalizer
[[nodiscard]] double ewma_score(double j_value, std::int64_t elapsed, double lambda, double normalizer);

// Score f(value, t, a) for the index sum. The EWMA kind carries its own
// normaliser (the double sum of lambda^(t-a) plus one).
struct ScoreFunction {
    enum class Kind { ewma, custom };
    Kind kind = Kind::ewma;
    double lambda = 1.0;
    std::function<double(double value, std::int64_t t, std::int64_t a)> fn;

    static ScoreFunction ewma(double lambda);
    static ScoreFunction custom(std::function<double(double, std::int64_t, std::int64_t)> f);
};

struct Visit {
    double value = 0.0;
    std::int64_t time = 0;
};

// Index at time t over visits (ascending times, visits[0] opens the window):
// every minute a in [visits[0].time, t) scores the value in force at a, plus
// the current-state term f(value(t), t, t).
[[nodiscard]] double index_value(std::span<const Visit> visits, std::int64_t t, const ScoreFunction& score);

// n counts from the first visit of the chain (including history).
[[nodiscard]] double index_at_jump(const JumpChain& chain, std::size_t n, const ScoreFunction& score);
[[nodiscard]] double index_at_time(const JumpChain& chain, std::int64_t t, const ScoreFunction& score);

// Shift operator: drops nothing, translates times so the last visit sits at 0.
[[nodiscard]] std::vector<Visit> shift(std::span<const Visit> window);

// Index at the last visit of `window` versus the same on shift(window).
[[nodiscard]] bool shift_check(std::span<const Visit> window, const ScoreFunction& score, double tol = 1e-10);

// Running EWMA index. Holds S = sum lambda^(t-a) J(a)^2 and D = sum lambda^(t-a)
// over the minutes already elapsed; index() adds the current-state term.
class EwmaIndex {
public:
    explicit EwmaIndex(double lambda = 1.0) : lambda_(lambda) {}

    // Hold `value` for `minutes` minutes.
    void advance(double value, std::int64_t minutes) noexcept;
    [[nodiscard]] double index(double current_value) const noexcept {
        return (s_ + current_value * current_value) / (d_ + 1.0);
    }
    [[nodiscard]] double lambda() const noexcept { return lambda_; }
    [[nodiscard]] double weighted_sum() const noexcept { return s_; }
    [[nodiscard]] double normaliser() const noexcept { return d_; }

private:
    double lambda_;
    double s_ = 0.0;
    double d_ = 0.0;
};

// Index at every visit of the chain, EWMA score.
[[nodiscard]] std::vector<double> index_trajectory(const JumpChain& chain, double lambda);

struct IndexParams {
    double lambda = 0.97;
    std::size_t history_m = 0;
    std::vector<double> index_edges;  // interior edges; empty means quantile bins
    int bins = 5;
};

[[nodiscard]] int index_bin(std::span<const double> index_edges, double x) noexcept;
// B-quantile interior edges with duplicates removed.
[[nodiscard]] std::vector<double> quantile_edges(std::span<const double> x, int bins);

struct KernelOptions {
    std::optional<int> t_max;          // default: 99.5th percentile of observed sojourns
    double t_max_quantile = 0.995;
};

// q(i, x; j, t) on a dense (state, index bin) x (next state, sojourn) table.
// Sojourns above t_max are counted at t_max.
class IndexedKernel {
public:
    IndexedKernel() = default;
    IndexedKernel(StateGrid grid, IndexParams params, int t_max, std::vector<std::int64_t> counts);

    [[nodiscard]] const StateGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] const IndexParams& params() const noexcept { return params_; }
    [[nodiscard]] int states() const noexcept { return grid_.size(); }
    [[nodiscard]] int bins() const noexcept { return static_cast<int>(params_.index_edges.size()) + 1; }
    [[nodiscard]] int t_max() const noexcept { return t_max_; }
    [[nodiscard]] const std::vector<std::int64_t>& counts() const noexcept { return counts_; }

    [[nodiscard]] std::int64_t count(int i, int x, int j, int t) const;
    [[nodiscard]] std::int64_t cell_total(int i, int x) const;
    [[nodiscard]] bool occupied(int i, int x) const { return cell_total(i, x) > 0; }
    // Empirical pmf; zero everywhere for an unoccupied cell.
    [[nodiscard]] double pmf(int i, int x, int j, int t) const;

    // 0 own cell, 1 state marginal over x, 2 global row without self-transition,
    // 3 no data at all.
    [[nodiscard]] int fallback_level(int i, int x) const;
    // pmf of the cell after the fallback cascade, laid out [j * t_max + (t-1)].
    [[nodiscard]] std::span<const double> resolved(int i, int x) const;
    [[nodiscard]] double resolved_pmf(int i, int x, int j, int t) const;
    // Sojourn pmf and cdf of the resolved row.
    [[nodiscard]] double h(int i, int x, int t) const;
    [[nodiscard]] double H(int i, int x, int t) const;

    [[nodiscard]] int bin_of(double index) const noexcept { return index_bin(params_.index_edges, index); }

private:
    [[nodiscard]] std::size_t offset(int i, int x) const noexcept {
        return (static_cast<std::size_t>(i) * static_cast<std::size_t>(bins()) + static_cast<std::size_t>(x)) *
               row_size();
    }
    [[nodiscard]] std::size_t row_size() const noexcept {
        return static_cast<std::size_t>(states()) * static_cast<std::size_t>(t_max_);
    }
    void build_resolved();

    StateGrid grid_;
    IndexParams params_;
    int t_max_ = 1;
    std::vector<std::int64_t> counts_;
    std::vector<std::int64_t> totals_;
    std::vector<double> resolved_;
    std::vector<int> fallback_;
};

struct WaitingTimeDist {
    int states = 0;
    int bins = 0;
    int t_max = 0;
    std::vector<double> cdf;  // [(i * bins + x) * t_max + (t-1)], zero rows for unoccupied cells

    [[nodiscard]] double at(int i, int x, int t) const;
};

struct KernelEstimate {
    IndexedKernel kernel;
    WaitingTimeDist waiting;
    std::vector<double> index;      // index at each visit
    std::vector<int> index_bins;    // bin of each visit
};

[[nodiscard]] KernelEstimate estimate_kernel(const JumpChain& chain, const StateGrid& grid,
                                             const IndexParams& params, const KernelOptions& options = {});

// Same, for an arbitrary score function (index computed by direct summation).
[[nodiscard]] KernelEstimate estimate_kernel(const JumpChain& chain, const StateGrid& grid,
                                             const IndexParams& params, const ScoreFunction& score,
                                             const KernelOptions& options = {});

[[nodiscard]] int nearest_rank(std::vector<std::int64_t> values, double q);

}  // namespace wismc
