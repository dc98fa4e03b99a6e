#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "wismc/copula.hpp"
#include "wismc/error.hpp"
#include "wismc/rng.hpp"

using namespace wismc;

namespace {

// Kendall tau-b by comparing every pair.
double tau_b_pairs(const std::vector<double>& x, const std::vector<double>& y) {
    double conc = 0, disc = 0, tx = 0, ty = 0;
    for (std::size_t a = 0; a < x.size(); ++a) {
        for (std::size_t b = a + 1; b < x.size(); ++b) {
            const double dx = x[a] - x[b], dy = y[a] - y[b];
            if (dx == 0 && dy == 0) continue;
            if (dx == 0) {
                ++tx;
            } else if (dy == 0) {
                ++ty;
            } else if (dx * dy > 0) {
                ++conc;
            } else {
                ++disc;
            }
        }
    }
    return (conc - disc) / std::sqrt((conc + disc + tx) * (conc + disc + ty));
}

std::vector<CopulaSpec> all_families() {
    return {CopulaSpec::independence(), CopulaSpec::gaussian(0.5),  CopulaSpec::clayton(2.0),
            CopulaSpec::clayton(-0.4),  CopulaSpec::gumbel(2.5),    CopulaSpec::student_t(0.4, 5),
            CopulaSpec::student_t(-0.6, 3)};
}

}  // namespace

TEST_CASE("copula boundaries") {
    for (const auto& c : all_families()) {
        for (double u : {0.0, 0.1, 0.3, 0.77, 1.0}) {
            CHECK(copula_eval(c, u, 1.0) == u);
            CHECK(copula_eval(c, 1.0, u) == u);
            CHECK(copula_eval(c, u, 0.0) == 0.0);
            CHECK(copula_eval(c, 0.3, 0.0) == 0.0);
        }
    }
}

TEST_CASE("Gaussian copula special values") {
    const auto zero = CopulaSpec::gaussian(0.0);
    for (double u : {0.1, 0.4, 0.9})
        for (double v : {0.2, 0.5, 0.95}) CHECK(copula_eval(zero, u, v) == doctest::Approx(u * v).epsilon(1e-12));
    const double want = 0.25 + std::asin(0.5) / (2 * std::numbers::pi);
    CHECK(std::abs(copula_eval(CopulaSpec::gaussian(0.5), 0.5, 0.5) - want) < 1e-8);
    // Orthant identity at other correlations.
    for (double r : {-0.9, -0.3, 0.2, 0.8}) {
        CHECK(std::abs(bivariate_normal_cdf(0, 0, r) - (0.25 + std::asin(r) / (2 * std::numbers::pi))) < 1e-10);
    }
}

TEST_CASE("t copula converges to the Gaussian one for large nu") {
    for (double u : {0.1, 0.5, 0.8}) {
        CHECK(copula_eval(CopulaSpec::student_t(0.5, 400), u, 0.3) ==
              doctest::Approx(copula_eval(CopulaSpec::gaussian(0.5), u, 0.3)).epsilon(2e-3));
    }
    // Orthant probability for the bivariate t is the same as for the normal.
    CHECK(bivariate_t_cdf(0, 0, 0.5, 4) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK(student_t_cdf(student_t_quantile(0.975, 5), 5) == doctest::Approx(0.975).epsilon(1e-12));
}

TEST_CASE("Clayton and Gumbel closed forms") {
    const double u = 0.3, v = 0.6;
    CHECK(copula_eval(CopulaSpec::clayton(2.0), u, v) ==
          doctest::Approx(std::pow(std::pow(u, -2.0) + std::pow(v, -2.0) - 1.0, -0.5)));
    const double a = std::pow(-std::log(u), 2.5) + std::pow(-std::log(v), 2.5);
    CHECK(copula_eval(CopulaSpec::gumbel(2.5), u, v) == doctest::Approx(std::exp(-std::pow(a, 1.0 / 2.5))));
    CHECK(copula_eval(CopulaSpec::gumbel(1.0), u, v) == doctest::Approx(u * v));
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(CopulaSpec::gaussian(1.5).validate(), Error);
    CHECK_THROWS_AS(CopulaSpec::clayton(0.0).validate(), Error);
    CHECK_THROWS_AS(CopulaSpec::clayton(-1.0).validate(), Error);
    CHECK_THROWS_AS(CopulaSpec::gumbel(0.9).validate(), Error);
    CHECK_THROWS_AS(CopulaSpec::student_t(0.2, 0).validate(), Error);
    CHECK(parse_copula_family("t") == CopulaFamily::student_t);
    CHECK_THROWS_AS((void)parse_copula_family("frank"), Error);
}

TEST_CASE("Kendall tau against the pairwise count") {
    Rng rng(8);
    std::vector<double> x(300), y(300);
    for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] = std::floor(rng.normal() * 3);  // ties on purpose
        y[k] = std::floor(x[k] + rng.normal() * 4);
    }
    CHECK(kendall_tau(x, y) == doctest::Approx(tau_b_pairs(x, y)).epsilon(1e-12));
}

TEST_CASE("sampling reproduces the copula") {
    for (const auto& c : all_families()) {
        Rng rng(9);
        const int n = 200000;
        int hits = 0;
        for (int k = 0; k < n; ++k) {
            const auto [u, v] = copula_sample(c, rng);
            hits += u <= 0.3 && v <= 0.6;
        }
        const double p = copula_eval(c, 0.3, 0.6);
        CHECK(std::abs(hits / double(n) - p) <= 4 * std::sqrt(p * (1 - p) / n));
    }
}

TEST_CASE("fitting") {
    Rng rng(10);
    std::vector<double> x(100000), y(100000);
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    CHECK(std::abs(fit_copula(x, y, CopulaFamily::gaussian).rho) < 0.02);

    const auto same = fit_copula(x, x, CopulaFamily::gaussian);
    CHECK(same.rho > 0.999);
    CHECK(fit_copula(x, x, CopulaFamily::gumbel).theta > 100);

    // Clayton theta from tau: 2 tau / (1 - tau).
    std::vector<double> a(2000), b(2000);
    Rng r2(11);
    for (std::size_t k = 0; k < a.size(); ++k) {
        const auto [u, v] = copula_sample(CopulaSpec::clayton(2.0), r2);
        a[k] = u;
        b[k] = v;
    }
    const double tau = tau_b_pairs(a, b);
    const auto cl = fit_copula(a, b, CopulaFamily::clayton);
    CHECK(cl.theta == doctest::Approx(2 * tau / (1 - tau)).epsilon(1e-10));
    CHECK(cl.theta == doctest::Approx(2.0).epsilon(0.1));
    CHECK(fit_copula(a, b, CopulaFamily::gumbel).theta == doctest::Approx(1 / (1 - tau)).epsilon(1e-10));
    CHECK(fit_copula(a, b, CopulaFamily::student_t, 6).rho ==
          doctest::Approx(std::sin(std::numbers::pi * tau / 2)).epsilon(1e-10));

    const std::vector<double> few(10, 1.0);
    CHECK_THROWS_AS((void)fit_copula(few, few, CopulaFamily::gaussian), Error);
}
