#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>

#include "wismc/rng.hpp"

namespace wismc {

enum class CopulaFamily { independence, gaussian, clayton, gumbel, student_t };

[[nodiscard]] const char* to_string(CopulaFamily family) noexcept;
[[nodiscard]] CopulaFamily parse_copula_family(const std::string& name);

struct CopulaFit {
    std::size_t n = 0;
    double kendall_tau = 0.0;
    std::string method;
};

struct CopulaSpec {
    CopulaFamily family = CopulaFamily::gaussian;
    double rho = 0.0;    // gaussian, student_t
    double theta = 0.0;  // clayton (-1, inf) minus {0}; gumbel [1, inf)
    int nu = 4;          // student_t degrees of freedom
    CopulaFit fitted_from;

    static CopulaSpec independence();
    static CopulaSpec gaussian(double rho);
    static CopulaSpec clayton(double theta);
    static CopulaSpec gumbel(double theta);
    static CopulaSpec student_t(double rho, int nu);

    // Throws a parameter error if outside the family's domain.
    void validate() const;
};

[[nodiscard]] double copula_eval(const CopulaSpec& spec, double u, double v);
[[nodiscard]] std::pair<double, double> copula_sample(const CopulaSpec& spec, Rng& rng);

// Pairs are raw observations; ranks are taken internally.
[[nodiscard]] CopulaSpec fit_copula(std::span<const double> x, std::span<const double> y, CopulaFamily family,
                                    int nu = 4);

// Kendall's tau-b, O(n log n).
[[nodiscard]] double kendall_tau(std::span<const double> x, std::span<const double> y);

// P(X <= h, Y <= k) for standard bivariate normal with correlation r.
[[nodiscard]] double bivariate_normal_cdf(double h, double k, double r);
// P(X <= h, Y <= k) for standard bivariate t with integer nu >= 1 and correlation r.
[[nodiscard]] double bivariate_t_cdf(double h, double k, double r, int nu);
[[nodiscard]] double student_t_cdf(double x, int nu);
[[nodiscard]] double student_t_quantile(double p, int nu);

}  // namespace wismc
