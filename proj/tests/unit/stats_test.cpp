#include <cmath>

#include "doctest.h"
#include "wismc/error.hpp"
#include "wismc/rng.hpp"
#include "wismc/stats.hpp"

using namespace wismc;

TEST_CASE("descriptive statistics") {
    const std::vector<double> ones{1, 1, 1, 1};
    const auto a = descriptive_stats(ones);
    CHECK(a.mean == 1.0);
    CHECK(a.standard_deviation == 0.0);

    const std::vector<double> pm{-1, 1};
    const auto b = descriptive_stats(pm);
    CHECK(b.mean == 0.0);
    CHECK(b.skewness == 0.0);
    CHECK(b.median == 0.0);

    // Hand values for (1, 2, 3, 10): mean 4, m2 = 12.5, m3 = 45, m4 = 348.5.
    const std::vector<double> x{1, 2, 3, 10};
    const auto c = descriptive_stats(x);
    CHECK(c.mean == doctest::Approx(4.0));
    CHECK(c.median == doctest::Approx(2.5));
    CHECK(c.standard_deviation == doctest::Approx(std::sqrt(50.0 / 3.0)));
    CHECK(c.skewness == doctest::Approx(45.0 / std::pow(12.5, 1.5)));
    CHECK(c.kurtosis == doctest::Approx(348.5 / (12.5 * 12.5) - 3.0));
    CHECK(c.kurtosis_convention == "excess");
}

TEST_CASE("Jarque-Bera") {
    Rng rng(1);
    std::vector<double> normal(100000), heavy(100000);
    for (auto& z : normal) z = rng.normal();
    for (auto& z : heavy) {
        // Student t with 3 degrees of freedom.
        const double chi = 2.0 * rng.gamma(1.5);
        z = rng.normal() / std::sqrt(chi / 3.0);
    }
    CHECK_FALSE(jarque_bera(normal, 0.01).reject);
    CHECK(jarque_bera(heavy, 0.01).reject);

    // m2 = 1/3, m4 = 1/3: zero skewness and zero excess kurtosis.
    const std::vector<double> flat{-1, 0, 0, 0, 0, 1, -1, 0, 0, 0, 0, 1};
    const auto jb = jarque_bera(flat, 0.01);
    CHECK(jb.statistic == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_FALSE(jb.reject);
}

TEST_CASE("autocorrelation") {
    Rng rng(2);
    std::vector<double> noise(100000);
    for (auto& z : noise) z = rng.normal();
    const auto acf = autocorrelation(noise, 50);
    CHECK(acf[0] == 1.0);
    for (std::size_t k = 1; k <= 50; ++k) CHECK(std::abs(acf[k]) < 0.02);

    const std::vector<double> alt{1, -1, 1, -1, 1, -1, 1, -1};
    CHECK(autocorrelation(alt, 1)[1] == doctest::Approx(-7.0 / 8.0));
    // Biased estimator: the lag-1 sum has n-1 terms over an n-term denominator.
    const std::vector<double> alt2{1, -1};
    CHECK(autocorrelation(alt2, 1)[1] == doctest::Approx(-0.5));
}

TEST_CASE("Pearson correlation battery") {
    Rng rng(3);
    std::vector<double> x(100000), y(100000);
    for (auto& z : x) z = rng.normal();
    for (auto& z : y) z = rng.normal();
    const auto self = pearson(x, x);
    CHECK(self.rho == doctest::Approx(1.0));
    CHECK(self.p_value < 1e-12);
    for (const auto& c : cross_correlation_battery(x, y)) CHECK(std::abs(c.rho) < 0.02);
    CHECK(cross_correlation_battery(x, y).size() == 4);
}

TEST_CASE("contingency table expected counts") {
    const auto t = contingency_from_counts({{10, 0}, {0, 10}});
    for (const auto& row : t.expected)
        for (double e : row) CHECK(e == doctest::Approx(5.0));
    CHECK(t.chi2_statistic == doctest::Approx(20.0));
    CHECK(t.degrees_of_freedom == 1);

    const auto indep = contingency_from_counts({{2, 4}, {6, 12}});
    CHECK(indep.chi2_statistic == doctest::Approx(0.0));
}

TEST_CASE("published price-return contingency counts reproduce their expected counts") {
    const std::vector<std::vector<std::int64_t>> obs{{24647, 45762, 43459, 46381, 23984},
                                                     {696, 1487, 6805, 1553, 774},
                                                     {45, 70, 4217, 66, 53}};
    const std::vector<std::vector<double>> published{{23386.7, 43588.8, 50186.2, 44216.1, 22855.1},
                                                 {1436.3, 2677.1, 3082.3, 2715.6, 1403.7},
                                                 {565.0, 1053.1, 1212.5, 1068.2, 552.2}};
    const auto t = contingency_from_counts(obs);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(t.expected[i][j] - published[i][j]) <= 0.05);
    CHECK(t.p_value < 1e-10);
}

TEST_CASE("contingency from values bins with left-closed edges") {
    const double inf = std::numeric_limits<double>::infinity();
    const std::vector<double> values{-1, 0, 0, 1, 2};
    const std::vector<std::int64_t> waits{1, 2, 3, 4, 5};
    const std::vector<double> state_edges{-inf, 0, inf};
    const std::vector<double> wait_edges{0, 2, inf};
    const auto t = contingency(values, waits, state_edges, wait_edges);
    REQUIRE(t.observed.size() == 2);
    CHECK(t.observed[0][0] == 1);  // wait 1, value -1
    CHECK(t.observed[0][1] == 0);
    CHECK(t.observed[1][1] == 4);  // 0 lands in [0, inf)
}

TEST_CASE("battery degrades to warnings on short input") {
    const std::vector<double> r{0.01, -0.01, 0.02};
    const std::vector<double> v{0.1, 0.2, -0.1};
    const auto b = analyze(r, v);
    CHECK(b.n_returns == 3);
    CHECK_FALSE(b.warnings.empty());
    CHECK(b.acf_abs_r.size() == 3);
}
