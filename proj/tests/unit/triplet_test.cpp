#include <cmath>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "wismc/error.hpp"
#include "wismc/triplet.hpp"

using namespace wismc;

namespace {

JumpChain chain_with(std::vector<int> states, std::vector<std::int64_t> times, std::int64_t end, double scale = 1.0) {
    JumpChain c;
    c.states = std::move(states);
    c.times = std::move(times);
    c.end_time = end;
    for (int s : c.states) c.values.push_back(scale * s);
    c.raw_values = c.values;
    return c;
}

SyncChain signs_chain(const std::vector<double>& j) {
    SyncChain s;
    s.j_values = j;
    s.v_values = j;
    s.times.resize(j.size());
    return s;
}

const double inf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_CASE("synchronize merges jump times") {
    const auto j = chain_with({0, 1, 0}, {0, 2, 5}, 8);
    const auto v = chain_with({1, 0, 1}, {0, 3, 5}, 8);
    const auto s = synchronize(j, v);
    CHECK(s.times == std::vector<std::int64_t>{0, 2, 3, 5});
    CHECK(s.backward_j[2] == 1);
    CHECK(s.backward_v[2] == 0);
    CHECK(s.j_states == std::vector<int>{0, 1, 1, 0});
    CHECK(s.v_states == std::vector<int>{1, 1, 0, 1});
    CHECK(s.times.front() == 0);

    const auto same = synchronize(j, j);
    CHECK(same.times == j.times);
    for (auto b : same.backward_j) CHECK(b == 0);
    for (auto b : same.backward_v) CHECK(b == 0);

    const auto late = chain_with({0, 1}, {1, 4}, 8);
    try {
        (void)synchronize(j, late);
        FAIL("expected an alignment error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::alignment);
    }
}

TEST_CASE("conditional waiting times") {
    // Every sojourn is one minute.
    const auto j = chain_with({0, 1, 0, 1}, {0, 1, 2, 3}, 4);
    const auto s = synchronize(j, j);
    SyncBins b{std::vector<int>(s.size(), 0), std::vector<int>(s.size(), 0)};
    const auto cw = estimate_cond_wait(s, b, 2, 2, 1, 1);
    CHECK(cw.t_max() == 1);
    CHECK(cw.h(0, 0, 0, 0, 1) == 1.0);
    CHECK(cw.h(1, 1, 0, 0, 1) == 1.0);

    // Five events: (0,1) waits 2, (1,1) waits 1, (1,0) waits 2, (0,0) waits 3.
    const auto jj = chain_with({0, 1, 0}, {0, 2, 5}, 8);
    const auto vv = chain_with({1, 0, 1}, {0, 3, 5}, 8);
    const auto s2 = synchronize(jj, vv);
    SyncBins b2{std::vector<int>(s2.size(), 0), std::vector<int>(s2.size(), 0)};
    const auto cw2 = estimate_cond_wait(s2, b2, 2, 2, 1, 1, 3);
    CHECK(cw2.h(0, 1, 0, 0, 2) == 1.0);
    CHECK(cw2.h(1, 1, 0, 0, 1) == 1.0);
    CHECK(cw2.h(1, 0, 0, 0, 2) == 1.0);
    CHECK(cw2.cell_total(0, 1, 0, 0) == 1);
    // Last event has no successor, so (0,1) at time 5 adds nothing beyond the first.
    std::int64_t total = 0;
    for (auto c : cw2.counts()) total += c;
    CHECK(total == 3);
    // An unobserved cell falls back and still sums to one.
    CHECK(cw2.fallback_level(0, 0, 0, 0) > 0);
    double acc = 0.0;
    for (int t = 1; t <= 3; ++t) acc += cw2.h(0, 0, 0, 0, t);
    CHECK(acc == doctest::Approx(1.0));
    CHECK(cw2.H(0, 0, 0, 0, 3) == 1.0);
}

TEST_CASE("sign probabilities") {
    CHECK(estimate_signs(signs_chain({1, 1, -1, -1})).p_j == 0.5);
    CHECK(estimate_signs(signs_chain({1, 2, 3})).p_j == 1.0);
    CHECK(estimate_signs(signs_chain({1, 1, 1, -1})).p_j == 0.75);
    CHECK(estimate_signs(signs_chain({1, 0, 0, -1})).p_j == 0.5);  // zero states carry no sign
    CHECK_THROWS_AS((void)estimate_signs(signs_chain({0, 0})), Error);
}

TEST_CASE("modulus levels of symmetric grids") {
    const auto odd = ModulusLevels::from_grid(oracle::toy_grid(5));
    CHECK(odd.values == std::vector<double>{0, 1, 2});
    CHECK(odd.positive[0] == 2);
    CHECK(odd.negative[0] == 2);
    CHECK(odd.positive[2] == 4);
    CHECK(odd.negative[2] == 0);
    CHECK(odd.count_le(1.0) == 2);
    CHECK(odd.count_lt(1.0) == 1);
    CHECK_THROWS_AS((void)ModulusLevels::from_grid(StateGrid({0.0}, {-1.0, 2.0})), Error);
}

TEST_CASE("modulus marginal cdf") {
    // Two states (-1, +1): from state 0 with t = 1 the only modulus is 1.
    const auto g = oracle::toy_grid(4);
    IndexParams p;
    p.bins = 1;
    // Four states (-2, -1, 1, 2), t_max 2. From state 1 at sojourn 2: counts 3 (to -2), 1 (to 1), 4 (to 2).
    std::vector<std::int64_t> counts(4 * 1 * 4 * 2, 0);
    auto at = [](int i, int j, int t) { return (i * 4 + j) * 2 + (t - 1); };
    counts[at(1, 0, 2)] = 3;
    counts[at(1, 2, 2)] = 1;
    counts[at(1, 3, 2)] = 4;
    counts[at(1, 3, 1)] = 5;
    const IndexedKernel k(g, p, 2, counts);
    CHECK(modulus_marginal_F(k, 1, 0, 2, 1.0) == doctest::Approx(1.0 / 8.0));
    CHECK(modulus_marginal_F(k, 1, 0, 2, 1.5) == doctest::Approx(1.0 / 8.0));
    CHECK(modulus_marginal_F(k, 1, 0, 2, 2.0) == 1.0);
    CHECK(modulus_marginal_F(k, 1, 0, 2, 0.5) == 0.0);
    CHECK(modulus_marginal_F(k, 1, 0, 7, 1.0) == doctest::Approx(1.0 / 8.0));  // clamped to t_max
    CHECK(modulus_marginal_F(k, 1, 0, 1, 1.0) == 0.0);
    CHECK_THROWS_AS((void)modulus_marginal_F(k, 0, 0, 1, 1.0), Error);
}

TEST_CASE("triplet kernel reductions") {
    Rng rng(12);
    oracle::ToyOptions o;
    o.states_j = 3;
    o.states_v = 4;
    o.copula = CopulaSpec::independence();
    o.signs = {1.0, 1.0};
    const auto tk = oracle::random_triplet(rng, o);
    const ConditioningCell c{1, 2, 1, 0, 1, 0};
    for (int t = 1; t <= tk.t_max(); ++t) {
        const double h = oracle::wait_pmf(tk, c, t);
        CHECK(tk.eval(c, inf, inf, t) == doctest::Approx(h).epsilon(1e-14));
        for (double j : {0.0, 1.0, 1.5}) {
            for (double a : {0.5, 1.0, 2.0}) {
                const double fj = oracle::modulus_cdf(tk.kernel_j(), c.i, c.x_bin, t + c.b_j, j);
                const double fv = oracle::modulus_cdf(tk.kernel_v(), c.v, c.w_bin, t + c.b_v, a);
                CHECK(tk.eval(c, j, a, t) == doctest::Approx(h * fj * fv).epsilon(1e-13));
            }
        }
        double total = 0.0;
        for (double q : tk.pair_pmf(c, t)) total += q;
        CHECK(total == doctest::Approx(h).epsilon(1e-13));
    }
}

TEST_CASE("triplet kernel matches the enumeration oracle on a fixed cell") {
    Rng rng(13);
    oracle::ToyOptions o;
    o.states_j = 3;
    o.states_v = 3;
    o.copula = CopulaSpec::gaussian(0.3);
    o.signs = {0.6, 0.55};
    const auto tk = oracle::random_triplet(rng, o);
    const ConditioningCell c{0, 2, 1, 1, 0, 2};
    for (int t = 1; t <= tk.t_max(); ++t) {
        for (double j : {-1.5, -1.0, -0.2, 0.0, 0.4, 1.0, 3.0}) {
            for (double a : {-2.0, -1.0, 0.0, 0.7, 1.0}) {
                CHECK(tk.eval(c, j, a, t) == doctest::Approx(oracle::kernel_cdf(tk, c, j, a, t)).epsilon(1e-12));
            }
        }
        const auto law = oracle::pair_law(tk, c, t);
        const auto pmf = tk.pair_pmf(c, t);
        for (std::size_t k = 0; k < law.size(); ++k) CHECK(pmf[k] == doctest::Approx(law[k]).epsilon(1e-12));
    }
}

TEST_CASE("step sampler follows the pair law") {
    Rng rng(14);
    oracle::ToyOptions o;
    o.states_j = 3;
    o.states_v = 2;
    o.copula = CopulaSpec::gaussian(0.6);
    o.signs = {0.3, 0.7};
    const auto tk = oracle::random_triplet(rng, o);
    const auto st = state_from_history(tk, std::vector<HistoryPoint>{{0, 1, 0}, {2, 1, 3}});
    const int n = 300000;
    std::vector<double> freq(static_cast<std::size_t>(tk.t_max() * 6), 0.0);
    Rng draw(15);
    for (int k = 0; k < n; ++k) {
        const auto s = sample_step(tk, st, draw, false);
        freq[static_cast<std::size_t>((s.t - 1) * 6 + s.j_state * 2 + s.v_state)] += 1.0 / n;
    }
    for (int t = 1; t <= tk.t_max(); ++t) {
        const auto law = oracle::pair_law(tk, st.cell(), t);
        for (int k = 0; k < 6; ++k) {
            const double p = law[static_cast<std::size_t>(k)];
            CHECK(std::abs(freq[static_cast<std::size_t>((t - 1) * 6 + k)] - p) <= 4 * std::sqrt(p * (1 - p) / n) + 1e-12);
        }
    }
    // Conditioning on the wait exceeding u.
    for (int k = 0; k < 1000; ++k) CHECK(sample_step(tk, st, draw, false, 1).t > 1);
}

TEST_CASE("history replay tracks backward times and bins") {
    Rng rng(16);
    oracle::ToyOptions o;
    o.states_j = 3;
    o.states_v = 3;
    o.bins_j = 3;
    o.bins_v = 2;
    const auto tk = oracle::random_triplet(rng, o);
    const std::vector<HistoryPoint> h{{0, 1, 10}, {2, 1, 12}, {2, 0, 15}, {1, 0, 16}};
    const auto st = state_from_history(tk, h);
    CHECK(st.time == 16);
    CHECK(st.b_j == 0);
    CHECK(st.b_v == 1);
    // Index of J at its last jump (time 16), V at its last jump (time 15).
    std::vector<std::pair<double, std::int64_t>> vj{{-1, 10}, {1, 12}, {0, 16}};
    std::vector<std::pair<double, std::int64_t>> vv{{0, 10}, {-1, 15}};
    const double ij = oracle::brute_index(vj, 16, o.lambda);
    const double iv = oracle::brute_index(vv, 15, o.lambda);
    CHECK(st.x_bin == tk.kernel_j().bin_of(ij));
    CHECK(st.w_bin == tk.kernel_v().bin_of(iv));
    CHECK(st.index_j.index(0.0) == doctest::Approx(ij).epsilon(1e-13));
    CHECK_THROWS_AS((void)state_from_history(tk, std::vector<HistoryPoint>{{0, 0, 3}, {1, 1, 3}}), Error);
    CHECK_THROWS_AS((void)state_from_history(tk, std::vector<HistoryPoint>{{7, 0, 3}}), Error);
}

TEST_CASE("inverse of a step cdf") {
    const std::vector<double> cdf{0.2, 0.5, 1.0};
    CHECK(invert_step_cdf(cdf, 0.0) == 0);
    CHECK(invert_step_cdf(cdf, 0.2) == 0);
    CHECK(invert_step_cdf(cdf, 0.21) == 1);
    CHECK(invert_step_cdf(cdf, 0.999) == 2);
}

TEST_CASE("kernel construction validates its inputs") {
    Rng rng(17);
    oracle::ToyOptions o;
    o.signs = {1.2, 0.5};
    CHECK_THROWS_AS((void)oracle::random_triplet(rng, o), Error);
    o.signs = {0.5, 0.5};
    CHECK_THROWS_AS((void)CopulaSpec::gaussian(2.0), Error);
}
