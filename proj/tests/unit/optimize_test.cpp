#include <cmath>
#include <vector>

#include "doctest.h"
#include "wismc/error.hpp"
#include "wismc/optimize.hpp"
#include "wismc/rng.hpp"

using namespace wismc;

namespace {

std::vector<double> clustered(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n);
    double h = 0.0;
    for (auto& v : x) {
        h = 0.97 * h + 0.25 * rng.normal();
        v = std::round(std::exp(h) * rng.normal() * 3.0) / 3.0;
    }
    return x;
}

GridSpec small_grid() {
    GridSpec g;
    g.state_counts = {3, 5};
    g.lambdas = {0.9, 0.97};
    g.max_lag = 10;
    g.reps_per_point = 2;
    g.bins = 2;
    return g;
}

}  // namespace

TEST_CASE("MAPE") {
    const std::vector<double> a{1.0, 0.5, 0.4};
    CHECK(mape(a, a, 2).value == 0.0);
    const std::vector<double> b{1.0, 0.45, 0.44};
    CHECK(mape(a, b, 2).value == doctest::Approx(10.0));
    const std::vector<double> twice{1.0, 1.0, 0.8};
    CHECK(mape(a, twice, 2).value == doctest::Approx(100.0));
    // Not symmetric: the reference sits in the denominator.
    CHECK(mape(twice, a, 2).value == doctest::Approx(50.0));

    const std::vector<double> z{1.0, 0.0, 0.5};
    const std::vector<double> w{1.0, 0.3, 0.25};
    const auto m = mape(z, w, 2);
    CHECK(m.value == doctest::Approx(50.0));
    CHECK(m.excluded_lags == std::vector<std::size_t>{1});
    CHECK_THROWS_AS((void)mape(a, b, 5), Error);
}

TEST_CASE("grid search picks the smallest MAPE") {
    const auto x = clustered(6000, 41);
    const auto g = small_grid();
    const auto res = grid_search(x, g, 5, 2);
    REQUIRE(res.records.size() == 4);
    for (const auto& r : res.records) {
        CHECK_FALSE(r.failed);
        CHECK(res.best_mape <= r.mape);
    }
    CHECK(res.records[0].states == 3);
    CHECK(res.records[0].lambda == 0.9);
    CHECK(res.records[3].states == 5);

    bool found = false;
    for (const auto& r : res.records) found = found || (r.states == res.best_states && r.lambda == res.best_lambda);
    CHECK(found);

    // Same seed, different thread count.
    const auto again = grid_search(x, g, 5, 1);
    CHECK(again.best_states == res.best_states);
    CHECK(again.best_lambda == res.best_lambda);
    for (std::size_t k = 0; k < res.records.size(); ++k) CHECK(again.records[k].mape == res.records[k].mape);

    // A point's MAPE does not depend on the rest of the grid, so adding
    // points never makes the best worse.
    GridSpec one = g;
    one.state_counts = {5};
    one.lambdas = {0.97};
    const auto single = grid_search(x, one, 5, 1);
    REQUIRE(single.records.size() == 1);
    CHECK(single.best_states == 5);
    CHECK(single.best_lambda == 0.97);
    CHECK(single.records[0].mape == res.records[3].mape);
    CHECK(res.best_mape <= single.best_mape);
}

TEST_CASE("grid validation") {
    GridSpec g = small_grid();
    g.lambdas = {1.2};
    CHECK_THROWS_AS(g.validate(), Error);
    g = small_grid();
    g.state_counts = {};
    CHECK_THROWS_AS(g.validate(), Error);
    g = small_grid();
    g.reps_per_point = 0;
    CHECK_THROWS_AS(g.validate(), Error);
}
