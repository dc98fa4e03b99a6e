#include "wismc/copula.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "wismc/error.hpp"
#include "wismc/stats.hpp"

namespace wismc {

const char* to_string(CopulaFamily family) noexcept {
    switch (family) {
        case CopulaFamily::independence: return "independence";
        case CopulaFamily::gaussian: return "gaussian";
        case CopulaFamily::clayton: return "clayton";
        case CopulaFamily::gumbel: return "gumbel";
        case CopulaFamily::student_t: return "t";
    }
    return "unknown";
}

CopulaFamily parse_copula_family(const std::string& name) {
    if (name == "independence") return CopulaFamily::independence;
    if (name == "gaussian") return CopulaFamily::gaussian;
    if (name == "clayton") return CopulaFamily::clayton;
    if (name == "gumbel") return CopulaFamily::gumbel;
    if (name == "t" || name == "student_t") return CopulaFamily::student_t;
    throw Error(ErrorKind::parameter, "unknown copula family '" + name + "'");
}

CopulaSpec CopulaSpec::independence() {
    CopulaSpec s;
    s.family = CopulaFamily::independence;
    return s;
}

CopulaSpec CopulaSpec::gaussian(double rho) {
    CopulaSpec s;
    s.family = CopulaFamily::gaussian;
    s.rho = rho;
    s.validate();
    return s;
}

CopulaSpec CopulaSpec::clayton(double theta) {
    CopulaSpec s;
    s.family = CopulaFamily::clayton;
    s.theta = theta;
    s.validate();
    return s;
}

CopulaSpec CopulaSpec::gumbel(double theta) {
    CopulaSpec s;
    s.family = CopulaFamily::gumbel;
    s.theta = theta;
    s.validate();
    return s;
}

CopulaSpec CopulaSpec::student_t(double rho, int nu) {
    CopulaSpec s;
    s.family = CopulaFamily::student_t;
    s.rho = rho;
    s.nu = nu;
    s.validate();
    return s;
}

void CopulaSpec::validate() const {
    switch (family) {
        case CopulaFamily::independence: return;
        case CopulaFamily::gaussian:
            if (!(rho > -1.0 && rho < 1.0)) throw Error(ErrorKind::parameter, "gaussian copula needs rho in (-1, 1)");
            return;
        case CopulaFamily::student_t:
            if (!(rho > -1.0 && rho < 1.0)) throw Error(ErrorKind::parameter, "t copula needs rho in (-1, 1)");
            if (nu < 1) throw Error(ErrorKind::parameter, "t copula needs integer nu >= 1");
            return;
        case CopulaFamily::clayton:
            if (!(theta > -1.0) || theta == 0.0 || !std::isfinite(theta)) {
                throw Error(ErrorKind::parameter, "clayton copula needs theta in (-1, inf) without 0");
            }
            return;
        case CopulaFamily::gumbel:
            if (!(theta >= 1.0) || !std::isfinite(theta)) {
                throw Error(ErrorKind::parameter, "gumbel copula needs theta >= 1");
            }
            return;
    }
}

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

double phid(double z) { return normal_cdf(z); }

// Upper orthant P(X > dh, Y > dk), Genz's port of Drezner-Wesolowsky.
double bvnu(double dh, double dk, double r) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (dh == inf || dk == inf) return 0.0;
    if (dh == -inf) return dk == -inf ? 1.0 : phid(-dk);
    if (dk == -inf) return phid(-dh);
    if (r == 0.0) return phid(-dh) * phid(-dk);

    static constexpr std::array<double, 3> w6{0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
    static constexpr std::array<double, 3> x6{0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
    static constexpr std::array<double, 6> w12{0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                                               0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
    static constexpr std::array<double, 6> x12{0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                                               0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
    static constexpr std::array<double, 10> w20{
        0.01761400713915212, 0.04060142980038694, 0.06267204833410906, 0.08327674157670475, 0.1019301198172404,
        0.1181945319615184,  0.1316886384491766,  0.1420961093183821,  0.1491729864726037,  0.1527533871307259};
    static constexpr std::array<double, 10> x20{
        0.9931285991850949, 0.9639719272779138, 0.9122344282513259, 0.8391169718222188, 0.7463319064601508,
        0.6360536807265150, 0.5108670019508271, 0.3737060887154196, 0.2277858511416451, 0.07652652113349733};

    std::span<const double> wh, xh;
    if (std::abs(r) < 0.3) {
        wh = w6;
        xh = x6;
    } else if (std::abs(r) < 0.75) {
        wh = w12;
        xh = x12;
    } else {
        wh = w20;
        xh = x20;
    }
    // Nodes 1 - x and 1 + x, same weights.
    std::vector<double> w, x;
    for (std::size_t i = 0; i < wh.size(); ++i) {
        w.push_back(wh[i]);
        x.push_back(1.0 - xh[i]);
    }
    for (std::size_t i = 0; i < wh.size(); ++i) {
        w.push_back(wh[i]);
        x.push_back(1.0 + xh[i]);
    }

    double h = dh, k = dk, hk = h * k, bvn = 0.0;
    if (std::abs(r) < 0.925) {
        const double hs = (h * h + k * k) / 2.0;
        const double asr = std::asin(r) / 2.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double sn = std::sin(asr * x[i]);
            bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
        }
        bvn = bvn * asr / two_pi + phid(-h) * phid(-k);
    } else {
        if (r < 0.0) {
            k = -k;
            hk = -hk;
        }
        if (std::abs(r) < 1.0) {
            const double as = 1.0 - r * r;
            double a = std::sqrt(as);
            const double bs = (h - k) * (h - k);
            double asr = -(bs / as + hk) / 2.0;
            const double c = (4.0 - hk) / 8.0;
            const double d = (12.0 - hk) / 80.0;
            if (asr > -100.0) bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
            if (hk > -100.0) {
                const double b = std::sqrt(bs);
                const double sp = std::sqrt(two_pi) * phid(-b / a);
                bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
            }
            a /= 2.0;
            double acc = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double xs = (a * x[i]) * (a * x[i]);
                asr = -(bs / xs + hk) / 2.0;
                if (asr > -100.0) {
                    const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                    const double rs = std::sqrt(1.0 - xs);
                    const double ep = std::exp(-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
                    acc += std::exp(asr) * (sp - ep) * w[i];
                }
            }
            bvn = (a * acc - bvn) / two_pi;
        }
        if (r > 0.0) {
            bvn += phid(-std::max(h, k));
        } else if (h >= k) {
            bvn = -bvn;
        } else {
            const double L = h < 0.0 ? phid(k) - phid(h) : phid(-h) - phid(-k);
            bvn = L - bvn;
        }
    }
    return std::clamp(bvn, 0.0, 1.0);
}

}  // namespace

double bivariate_normal_cdf(double h, double k, double r) { return bvnu(-h, -k, r); }

double student_t_cdf(double x, int nu) {
    if (x == std::numeric_limits<double>::infinity()) return 1.0;
    if (x == -std::numeric_limits<double>::infinity()) return 0.0;
    return boost::math::cdf(boost::math::students_t_distribution<double>(nu), x);
}

double student_t_quantile(double p, int nu) {
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    return boost::math::quantile(boost::math::students_t_distribution<double>(nu), p);
}

// Genz's closed-form series for integer degrees of freedom (Dunnett-Sobel).
double bivariate_t_cdf(double dh, double dk, double r, int nu) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (nu < 1) throw Error(ErrorKind::parameter, "bivariate t needs nu >= 1");
    if (dh == -inf || dk == -inf) return 0.0;
    if (dh == inf) return student_t_cdf(dk, nu);
    if (dk == inf) return student_t_cdf(dh, nu);
    const double snu = std::sqrt(static_cast<double>(nu));
    const double fnu = static_cast<double>(nu);
    const double ors = 1.0 - r * r;
    const double hrk = dh - r * dk;
    const double krh = dk - r * dh;
    double xnhk = 0.0, xnkh = 0.0;
    if (std::abs(hrk) + ors > 0.0) {
        xnhk = hrk * hrk / (hrk * hrk + ors * (fnu + dk * dk));
        xnkh = krh * krh / (krh * krh + ors * (fnu + dh * dh));
    }
    const double hs = (hrk > 0.0) - (hrk < 0.0);
    const double ks = (krh > 0.0) - (krh < 0.0);
    double bvt;
    if (nu % 2 == 0) {
        bvt = std::atan2(std::sqrt(ors), -r) / two_pi;
        double gmph = dh / std::sqrt(16.0 * (fnu + dh * dh));
        double gmpk = dk / std::sqrt(16.0 * (fnu + dk * dk));
        double btnckh = 2.0 * std::atan2(std::sqrt(xnkh), std::sqrt(1.0 - xnkh)) / std::numbers::pi;
        double btpdkh = 2.0 * std::sqrt(xnkh * (1.0 - xnkh)) / std::numbers::pi;
        double btnchk = 2.0 * std::atan2(std::sqrt(xnhk), std::sqrt(1.0 - xnhk)) / std::numbers::pi;
        double btpdhk = 2.0 * std::sqrt(xnhk * (1.0 - xnhk)) / std::numbers::pi;
        for (int j = 1; j <= nu / 2; ++j) {
            const double fj = j;
            bvt += gmph * (1.0 + ks * btnckh);
            bvt += gmpk * (1.0 + hs * btnchk);
            btnckh += btpdkh;
            btpdkh = 2.0 * fj * btpdkh * (1.0 - xnkh) / (2.0 * fj + 1.0);
            btnchk += btpdhk;
            btpdhk = 2.0 * fj * btpdhk * (1.0 - xnhk) / (2.0 * fj + 1.0);
            gmph = gmph * (2.0 * fj - 1.0) / (2.0 * fj * (1.0 + dh * dh / fnu));
            gmpk = gmpk * (2.0 * fj - 1.0) / (2.0 * fj * (1.0 + dk * dk / fnu));
        }
    } else {
        const double qhrk = std::sqrt(dh * dh + dk * dk - 2.0 * r * dh * dk + fnu * ors);
        const double hkrn = dh * dk + r * fnu;
        const double hkn = dh * dk - fnu;
        const double hpk = dh + dk;
        bvt = std::atan2(-snu * (hkn * qhrk + hpk * hkrn), hkn * hkrn - fnu * hpk * qhrk) / two_pi;
        if (bvt < -1e-15) bvt += 1.0;
        double gmph = dh / (two_pi * snu * (1.0 + dh * dh / fnu));
        double gmpk = dk / (two_pi * snu * (1.0 + dk * dk / fnu));
        double btnckh = std::sqrt(xnkh), btpdkh = btnckh;
        double btnchk = std::sqrt(xnhk), btpdhk = btnchk;
        for (int j = 1; j <= (nu - 1) / 2; ++j) {
            const double fj = j;
            bvt += gmph * (1.0 + ks * btnckh);
            bvt += gmpk * (1.0 + hs * btnchk);
            btpdkh = (2.0 * fj - 1.0) * btpdkh * (1.0 - xnkh) / (2.0 * fj);
            btnckh += btpdkh;
            btpdhk = (2.0 * fj - 1.0) * btpdhk * (1.0 - xnhk) / (2.0 * fj);
            btnchk += btpdhk;
            gmph = 2.0 * fj * gmph / ((2.0 * fj + 1.0) * (1.0 + dh * dh / fnu));
            gmpk = 2.0 * fj * gmpk / ((2.0 * fj + 1.0) * (1.0 + dk * dk / fnu));
        }
    }
    return std::clamp(bvt, 0.0, 1.0);
}

namespace {

double clayton(double u, double v, double theta) {
    if (theta > 0.0) {
        const double a = -theta * std::log(u);
        const double b = -theta * std::log(v);
        const double m = std::max(a, b);
        const double inner = m + std::log(std::exp(a - m) + std::exp(b - m) - std::exp(-m));
        return std::exp(-inner / theta);
    }
    const double base = std::pow(u, -theta) + std::pow(v, -theta) - 1.0;
    if (base <= 0.0) return 0.0;
    return std::pow(base, -1.0 / theta);
}

double gumbel(double u, double v, double theta) {
    const double x = -std::log(u);
    const double y = -std::log(v);
    const double m = std::max(x, y);
    const double lo = std::min(x, y);
    const double norm = m * std::pow(1.0 + std::pow(lo / m, theta), 1.0 / theta);
    return std::exp(-norm);
}

}  // namespace

double copula_eval(const CopulaSpec& spec, double u, double v) {
    if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorKind::parameter, "copula arguments must lie in [0, 1]");
    }
    if (u == 0.0 || v == 0.0) return 0.0;
    if (u == 1.0) return v;
    if (v == 1.0) return u;
    double c = 0.0;
    switch (spec.family) {
        case CopulaFamily::independence: c = u * v; break;
        case CopulaFamily::gaussian:
            if (spec.rho == 0.0) {
                c = u * v;
            } else {
                c = bivariate_normal_cdf(normal_quantile(u), normal_quantile(v), spec.rho);
            }
            break;
        case CopulaFamily::student_t:
            c = bivariate_t_cdf(student_t_quantile(u, spec.nu), student_t_quantile(v, spec.nu), spec.rho, spec.nu);
            break;
        case CopulaFamily::clayton: c = clayton(u, v, spec.theta); break;
        case CopulaFamily::gumbel: c = gumbel(u, v, spec.theta); break;
    }
    // Frechet-Hoeffding bounds absorb rounding at the extremes.
    return std::clamp(c, std::max(u + v - 1.0, 0.0), std::min(u, v));
}

std::pair<double, double> copula_sample(const CopulaSpec& spec, Rng& rng) {
    switch (spec.family) {
        case CopulaFamily::independence: return {rng.uniform_open(), rng.uniform_open()};
        case CopulaFamily::gaussian: {
            const double z1 = rng.normal();
            const double z2 = spec.rho * z1 + std::sqrt(1.0 - spec.rho * spec.rho) * rng.normal();
            return {normal_cdf(z1), normal_cdf(z2)};
        }
        case CopulaFamily::student_t: {
            const double z1 = rng.normal();
            const double z2 = spec.rho * z1 + std::sqrt(1.0 - spec.rho * spec.rho) * rng.normal();
            const double chi2 = 2.0 * rng.gamma(0.5 * spec.nu);
            const double scale = std::sqrt(chi2 / spec.nu);
            return {student_t_cdf(z1 / scale, spec.nu), student_t_cdf(z2 / scale, spec.nu)};
        }
        case CopulaFamily::clayton: {
            const double u = rng.uniform_open();
            const double w = rng.uniform_open();
            const double th = spec.theta;
            const double inner = std::pow(u, -th) * (std::pow(w, -th / (1.0 + th)) - 1.0) + 1.0;
            return {u, std::clamp(std::pow(inner, -1.0 / th), 0.0, 1.0)};
        }
        case CopulaFamily::gumbel: {
            const double alpha = 1.0 / spec.theta;
            double s = 1.0;
            if (alpha < 1.0) {
                const double th = std::numbers::pi * rng.uniform_open();
                const double w = rng.exponential();
                s = std::sin(alpha * th) / std::pow(std::sin(th), 1.0 / alpha) *
                    std::pow(std::sin((1.0 - alpha) * th) / w, (1.0 - alpha) / alpha);
            }
            const double e1 = rng.exponential();
            const double e2 = rng.exponential();
            return {std::exp(-std::pow(e1 / s, alpha)), std::exp(-std::pow(e2 / s, alpha))};
        }
    }
    return {0.5, 0.5};
}

namespace {

// Merge sort counting exchanges; used by Knight's algorithm.
std::int64_t merge_count(std::vector<double>& a, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::int64_t swaps = merge_count(a, buf, lo, mid) + merge_count(a, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (a[j] < a[i]) {
            buf[k++] = a[j++];
            swaps += static_cast<std::int64_t>(mid - i);
        } else {
            buf[k++] = a[i++];
        }
    }
    while (i < mid) buf[k++] = a[i++];
    while (j < hi) buf[k++] = a[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
              a.begin() + static_cast<std::ptrdiff_t>(lo));
    return swaps;
}

std::int64_t tie_pairs(const std::vector<double>& sorted) {
    std::int64_t total = 0, run = 1;
    for (std::size_t k = 1; k <= sorted.size(); ++k) {
        if (k < sorted.size() && sorted[k] == sorted[k - 1]) {
            ++run;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    return total;
}

std::vector<double> mid_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    std::size_t k = 0;
    while (k < order.size()) {
        std::size_t e = k + 1;
        while (e < order.size() && x[order[e]] == x[order[k]]) ++e;
        const double r = 0.5 * static_cast<double>(k + 1 + e);
        for (std::size_t q = k; q < e; ++q) ranks[order[q]] = r;
        k = e;
    }
    return ranks;
}

}  // namespace

double kendall_tau(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(ErrorKind::alignment, "kendall tau inputs differ in length");
    const auto n = x.size();
    if (n < 2) throw Error(ErrorKind::insufficient_data, "kendall tau needs at least 2 pairs");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });
    std::vector<double> xs(n), ys(n);
    for (std::size_t k = 0; k < n; ++k) {
        xs[k] = x[order[k]];
        ys[k] = y[order[k]];
    }
    const std::int64_t n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
    const std::int64_t n1 = tie_pairs(xs);
    std::int64_t n3 = 0;
    {
        std::int64_t run = 1;
        for (std::size_t k = 1; k <= n; ++k) {
            if (k < n && xs[k] == xs[k - 1] && ys[k] == ys[k - 1]) {
                ++run;
            } else {
                n3 += run * (run - 1) / 2;
                run = 1;
            }
        }
    }
    std::vector<double> buf(n);
    const std::int64_t swaps = merge_count(ys, buf, 0, n);
    const std::int64_t n2 = tie_pairs(ys);
    const double denom = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
    if (!(denom > 0.0)) throw Error(ErrorKind::estimation, "kendall tau undefined: a variable is constant");
    return static_cast<double>(n0 - n1 - n2 + n3 - 2 * swaps) / denom;
}

CopulaSpec fit_copula(std::span<const double> x, std::span<const double> y, CopulaFamily family, int nu) {
    if (x.size() != y.size()) throw Error(ErrorKind::alignment, "copula fit inputs differ in length");
    if (x.size() < 30) throw Error(ErrorKind::insufficient_data, "copula fit needs at least 30 pairs");
    constexpr double tau_cap = 0.9999;
    constexpr double rho_cap = 0.999999;

    CopulaFit meta;
    meta.n = x.size();
    meta.kendall_tau = std::clamp(kendall_tau(x, y), -tau_cap, tau_cap);
    const double tau = meta.kendall_tau;

    CopulaSpec spec;
    switch (family) {
        case CopulaFamily::independence:
            spec = CopulaSpec::independence();
            meta.method = "none";
            break;
        case CopulaFamily::gaussian: {
            const auto rx = mid_ranks(x);
            const auto ry = mid_ranks(y);
            const double n1 = static_cast<double>(x.size()) + 1.0;
            std::vector<double> zx(x.size()), zy(y.size());
            for (std::size_t k = 0; k < x.size(); ++k) {
                zx[k] = normal_quantile(rx[k] / n1);
                zy[k] = normal_quantile(ry[k] / n1);
            }
            double rho = 0.0;
            try {
                rho = pearson(zx, zy).rho;
            } catch (const Error&) {
                throw Error(ErrorKind::estimation, "gaussian copula fit failed: degenerate ranks");
            }
            spec = CopulaSpec::gaussian(std::clamp(rho, -rho_cap, rho_cap));
            meta.method = "normal-scores correlation";
            break;
        }
        case CopulaFamily::student_t:
            spec = CopulaSpec::student_t(std::clamp(std::sin(std::numbers::pi * tau / 2.0), -rho_cap, rho_cap), nu);
            meta.method = "kendall tau inversion";
            break;
        case CopulaFamily::clayton:
            if (tau == 0.0) {
                spec = CopulaSpec::independence();
                meta.method = "kendall tau is zero; independence";
            } else {
                spec = CopulaSpec::clayton(2.0 * tau / (1.0 - tau));
                meta.method = "kendall tau inversion";
            }
            break;
        case CopulaFamily::gumbel:
            spec = CopulaSpec::gumbel(tau > 0.0 ? 1.0 / (1.0 - tau) : 1.0);
            meta.method = tau > 0.0 ? "kendall tau inversion" : "kendall tau inversion clamped at theta = 1";
            break;
    }
    spec.fitted_from = meta;
    return spec;
}

}  // namespace wismc
