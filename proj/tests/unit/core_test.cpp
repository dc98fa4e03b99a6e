#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "wismc/core.hpp"
#include "wismc/error.hpp"
#include "wismc/rng.hpp"
#include "wismc/simulate.hpp"

using namespace wismc;

namespace {

// Grid whose states 1, 2, 3 have representatives 1, 2, 3 (state 0 unused).
StateGrid counting_grid() { return StateGrid({0.5, 1.5, 2.5}, {0.0, 1.0, 2.0, 3.0}); }

}  // namespace

TEST_CASE("state grid locate is left-closed") {
    const StateGrid g({-1.0, 1.0}, {-2.0, 0.0, 2.0});
    CHECK(g.locate(-1.0) == 1);
    CHECK(g.locate(-1.0000001) == 0);
    CHECK(g.locate(1.0) == 2);
    CHECK(g.locate(0.99) == 1);
    CHECK(g.symmetric());
}

TEST_CASE("symmetric grid from data") {
    Rng rng(4);
    std::vector<double> x(5000);
    for (auto& v : x) v = rng.normal();
    for (int s : {2, 3, 4, 5, 7}) {
        const auto g = make_symmetric_grid(x, s);
        CHECK(g.size() == s);
        CHECK(g.symmetric());
        for (double v : x) {
            // No observation sits on an edge.
            for (double e : g.edges) CHECK(v != e);
        }
    }
    const auto odd = make_symmetric_grid(x, 5);
    CHECK(odd.representatives[2] == 0.0);
    const auto even = make_symmetric_grid(x, 4);
    CHECK(even.edges[1] == 0.0);
}

TEST_CASE("discretize merges equal consecutive states") {
    const auto g = counting_grid();
    const std::vector<double> v{2, 2, 2, 1, 1, 3};
    const auto c = discretize(v, g);
    CHECK(c.states == std::vector<int>{2, 1, 3});
    CHECK(c.times == std::vector<std::int64_t>{0, 3, 5});
    CHECK(c.end_time == 6);
    CHECK(c.sojourn(0) == 3);

    const std::vector<double> flat(10, 1.0);
    const auto one = discretize(flat, g);
    CHECK(one.size() == 1);
    CHECK(one.transitions() == 0);

    const std::vector<double> alt{1, 2, 1, 2, 1};
    const auto a = discretize(alt, g);
    for (std::size_t n = 0; n + 1 < a.size(); ++n) CHECK(a.sojourn(n) == 1);
}

TEST_CASE("EWMA score") {
    CHECK(ewma_score(0.0, 7, 0.9, 3.0) == 0.0);
    CHECK(ewma_score(2.0, 7, 1.0, 8.0) == doctest::Approx(0.5));
    CHECK(ewma_score(2.0, 0, 1.0, 8.0) == doctest::Approx(0.5));
    CHECK(ewma_score(0.5, 2, 0.9, 1.0) == doctest::Approx(0.2025));
}

TEST_CASE("index values") {
    const auto f = ScoreFunction::ewma(0.9);
    const std::vector<Visit> zero{{0.0, 0}, {0.0, 4}};
    CHECK(index_value(zero, 9, f) == 0.0);
    const std::vector<Visit> single{{0.03, 0}};
    CHECK(index_value(single, 0, f) == doctest::Approx(0.03 * 0.03));

    // Chain (0.01, -0.02) at times (0, 3), queried at the second jump.
    const std::vector<Visit> two{{0.01, 0}, {-0.02, 3}};
    const double want = oracle::brute_index({{0.01, 0}, {-0.02, 3}}, 3, 0.9);
    // Term by term: minutes 0, 1, 2 hold 0.01 with weights 0.9^3, 0.9^2, 0.9.
    const double w = 0.729 + 0.81 + 0.9;
    CHECK(want == doctest::Approx((w * 1e-4 + 4e-4) / (w + 1.0)));
    CHECK(index_value(two, 3, f) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("index along a chain matches the brute-force oracle") {
    const StateGrid g({-0.015, 0.0, 0.015}, {-0.02, -0.01, 0.01, 0.02});
    const std::vector<double> v{0.01, 0.01, 0.02, -0.01, -0.01, -0.01, -0.02, 0.01, 0.02, 0.02};
    const auto c = discretize(v, g);
    const auto f = ScoreFunction::ewma(0.85);
    const auto traj = index_trajectory(c, 0.85);
    std::vector<std::pair<double, std::int64_t>> visits;
    for (std::size_t n = 0; n < c.size(); ++n) {
        visits.emplace_back(c.values[n], c.times[n]);
        const double want = oracle::brute_index(visits, c.times[n], 0.85);
        CHECK(index_at_jump(c, n, f) == doctest::Approx(want).epsilon(1e-13));
        CHECK(traj[n] == doctest::Approx(want).epsilon(1e-13));
        CHECK(index_at_time(c, c.times[n], f) == doctest::Approx(index_at_jump(c, n, f)).epsilon(1e-15));
    }
    // Mid-sojourn queries.
    for (std::int64_t t = 0; t < c.end_time; ++t) {
        std::vector<std::pair<double, std::int64_t>> upto;
        for (std::size_t n = 0; n < c.size() && c.times[n] <= t; ++n) upto.emplace_back(c.values[n], c.times[n]);
        CHECK(index_at_time(c, t, f) == doctest::Approx(oracle::brute_index(upto, t, 0.85)).epsilon(1e-13));
    }
}

TEST_CASE("running index equals direct summation") {
    EwmaIndex idx(0.95);
    std::vector<std::pair<double, std::int64_t>> visits{{0.3, 0}};
    std::int64_t t = 0;
    double cur = 0.3;
    Rng rng(5);
    for (int k = 0; k < 20; ++k) {
        const auto dt = 1 + static_cast<std::int64_t>(rng() % 5);
        idx.advance(cur, dt);
        t += dt;
        cur = rng.uniform() - 0.5;
        visits.emplace_back(cur, t);
        CHECK(idx.index(cur) == doctest::Approx(oracle::brute_index(visits, t, 0.95)).epsilon(1e-12));
    }
    EwmaIndex flat(1.0);
    flat.advance(2.0, 3);
    CHECK(flat.index(0.0) == doctest::Approx(12.0 / 4.0));
}

TEST_CASE("shift invariance") {
    const auto f = ScoreFunction::ewma(0.9);
    const std::vector<Visit> w{{0.01, 100}, {0.02, 103}, {-0.01, 107}};
    CHECK(shift_check(w, f));
    const auto moved = shift(w);
    CHECK(moved.back().time == 0);
    CHECK(moved.front().time == -7);
    const auto bad = ScoreFunction::custom([](double v, std::int64_t, std::int64_t a) {
        return v * v * static_cast<double>(a);
    });
    CHECK_FALSE(shift_check(w, bad));
}

TEST_CASE("quantile index edges") {
    const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9};
    const auto e = quantile_edges(x, 2);
    REQUIRE(e.size() == 1);
    CHECK(e[0] == doctest::Approx(5.0));
    CHECK(index_bin(e, 5.0) == 1);
    CHECK(index_bin(e, 4.999) == 0);
    const std::vector<double> tied{1, 1, 1, 1, 2};
    CHECK(quantile_edges(tied, 4).size() <= 1);
    CHECK(quantile_edges(x, 1).empty());
}

TEST_CASE("nearest-rank percentile") {
    std::vector<std::int64_t> v(200);
    for (int k = 0; k < 200; ++k) v[k] = k + 1;
    CHECK(nearest_rank(v, 0.995) == 199);
    CHECK(nearest_rank(v, 1.0) == 200);
    CHECK(nearest_rank({5}, 0.5) == 5);
}

TEST_CASE("single transition gives a point mass") {
    const auto g = counting_grid();
    const std::vector<double> v{1, 1, 2};
    const auto c = discretize(v, g);
    IndexParams p;
    p.bins = 1;
    const auto k = estimate_kernel(c, g, p).kernel;
    CHECK(k.pmf(1, 0, 2, 2) == 1.0);
    CHECK(k.t_max() == 2);
}

TEST_CASE("kernel counts match a counting oracle") {
    const auto g = counting_grid();
    // Six transitions: 1-2 (2), 2-3 (1), 3-1 (3), 1-3 (1), 3-2 (2), 2-1 (1).
    const std::vector<double> v{1, 1, 2, 3, 3, 3, 1, 3, 3, 2, 1};
    const auto c = discretize(v, g);
    REQUIRE(c.transitions() == 6);
    IndexParams p;
    p.bins = 1;
    KernelOptions ko;
    ko.t_max = 3;
    const auto k = estimate_kernel(c, g, p, ko).kernel;
    CHECK(k.count(1, 0, 2, 2) == 1);
    CHECK(k.count(2, 0, 3, 1) == 1);
    CHECK(k.count(3, 0, 1, 3) == 1);
    CHECK(k.count(1, 0, 3, 1) == 1);
    CHECK(k.count(3, 0, 2, 2) == 1);
    CHECK(k.count(2, 0, 1, 1) == 1);
    CHECK(k.cell_total(1, 0) == 2);
    CHECK(k.pmf(1, 0, 2, 2) == 0.5);
    CHECK(k.pmf(0, 0, 1, 1) == 0.0);
}

TEST_CASE("occupied cells are normalised and empty cells fall back") {
    Rng rng(6);
    std::vector<double> x(3000);
    for (auto& v : x) v = rng.normal();
    const auto g = make_symmetric_grid(x, 5);
    const auto c = discretize(x, g);
    IndexParams p;
    p.bins = 4;
    const auto est = estimate_kernel(c, g, p);
    const auto& k = est.kernel;
    for (int i = 0; i < k.states(); ++i) {
        for (int b = 0; b < k.bins(); ++b) {
            double total = 0.0, resolved = 0.0;
            for (int j = 0; j < k.states(); ++j)
                for (int t = 1; t <= k.t_max(); ++t) {
                    total += k.pmf(i, b, j, t);
                    resolved += k.resolved_pmf(i, b, j, t);
                }
            if (k.occupied(i, b)) {
                CHECK(total == doctest::Approx(1.0));
                CHECK(k.fallback_level(i, b) == 0);
            } else {
                CHECK(total == 0.0);
                CHECK(k.fallback_level(i, b) > 0);
            }
            CHECK(resolved == doctest::Approx(1.0));
            CHECK(k.H(i, b, k.t_max()) == doctest::Approx(1.0));
            if (k.occupied(i, b)) CHECK(est.waiting.at(i, b, k.t_max()) == 1.0);
        }
    }
}

TEST_CASE("estimation errors") {
    const auto g = counting_grid();
    const std::vector<double> flat(5, 1.0);
    IndexParams p;
    CHECK_THROWS_AS((void)estimate_kernel(discretize(flat, g), g, p), Error);
    p.lambda = 1.5;
    const std::vector<double> v{1, 2, 1, 2};
    try {
        (void)estimate_kernel(discretize(v, g), g, p);
        FAIL("expected a parameter error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::parameter);
    }
}

TEST_CASE("history visits only feed the index") {
    const auto g = counting_grid();
    const std::vector<double> v{1, 2, 3, 1, 2, 3, 1};
    const auto c = discretize(v, g);
    IndexParams p;
    p.bins = 1;
    p.history_m = 2;
    KernelOptions ko;
    ko.t_max = 1;
    const auto k = estimate_kernel(c, g, p, ko).kernel;
    std::int64_t total = 0;
    for (int i = 0; i < 4; ++i) total += k.cell_total(i, 0);
    CHECK(total == 4);  // 6 transitions minus the 2 leaving history visits
    CHECK(k.count(1, 0, 2, 1) == 1);
}

TEST_CASE("univariate chain simulation reproduces the kernel") {
    const auto g = oracle::toy_grid(2);
    IndexParams p;
    p.bins = 1;
    p.lambda = 0.9;
    // 2 states, t_max 2: from 0 go to 1 after 1 (weight 1) or 2 minutes (weight 3).
    const IndexedKernel k(g, p, 2, {0, 0, 1, 3, 2, 2, 0, 0});
    Rng rng(7);
    const auto chain = simulate_chain(k, 0, 1'000'000'000, 1'000'000, rng);
    KernelOptions ko;
    ko.t_max = 2;
    const auto est = estimate_kernel(chain, g, p, ko).kernel;
    for (int i = 0; i < 2; ++i)
        for (int t = 1; t <= 2; ++t) {
            const double pt = k.pmf(i, 0, 1 - i, t);
            const double se = std::sqrt(pt * (1 - pt) / static_cast<double>(est.cell_total(i, 0)));
            CHECK(std::abs(est.pmf(i, 0, 1 - i, t) - pt) <= 3 * se);
        }
}
