#pragma once

// Real roots and sublevel-set measure of low-degree univariate polynomials.
// Coefficients are stored in ascending order: c[0] + c[1] s + ... + c[k] s^k.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace formcount::poly {

inline double eval(std::span<const double> c, double s) noexcept
{
    double r = 0.0;
    for (std::size_t k = c.size(); k-- > 0;)
        r = r * s + c[k];
    return r;
}

inline std::size_t degree(std::span<const double> c) noexcept
{
    std::size_t k = c.size();
    while (k > 0 && c[k - 1] == 0.0)
        --k;
    return k == 0 ? 0 : k - 1;
}

namespace detail {

inline double bisect(std::span<const double> c, double lo, double hi, double flo)
{
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        const double fm = eval(c, mid);
        if (fm == 0.0)
            return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

/// Append the real roots of c inside the open interval (a, b), unsorted.
inline void roots_in(std::span<const double> c, double a, double b, std::vector<double>& out)
{
    const std::size_t deg = degree(c);
    if (deg == 0 || !(a < b))
        return;
    auto keep = [&](double r) {
        if (r > a && r < b)
            out.push_back(r);
    };
    if (deg == 1) {
        keep(-c[0] / c[1]);
        return;
    }
    if (deg == 2) {
        const double A = c[2], B = c[1], C = c[0];
        const double disc = B * B - 4.0 * A * C;
        if (disc < 0.0)
            return;
        const double sq = std::sqrt(disc);
        const double q = -0.5 * (B + (B >= 0.0 ? sq : -sq));
        if (q == 0.0) {
            keep(0.0);
            return;
        }
        keep(q / A);
        keep(C / q);
        return;
    }
    // Split (a, b) at the critical points; P is monotone on every piece.
    std::vector<double> deriv(deg);
    for (std::size_t k = 1; k <= deg; ++k)
        deriv[k - 1] = static_cast<double>(k) * c[k];
    std::vector<double> knots{a};
    roots_in(std::span<const double>(deriv), a, b, knots);
    std::sort(knots.begin() + 1, knots.end());
    knots.push_back(b);
    const std::span<const double> cs(c.data(), deg + 1);
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        const double x0 = knots[i], x1 = knots[i + 1];
        const double f0 = eval(cs, x0), f1 = eval(cs, x1);
        if (f0 == 0.0) {
            keep(x0);
            continue;
        }
        if ((f0 < 0.0) != (f1 < 0.0) && f1 != 0.0)
            keep(detail::bisect(cs, x0, x1, f0));
    }
    // The right end of the last piece is b itself, excluded by keep().
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
}

/// Lebesgue measure of {s in [a, b] : lo <= P(s) < hi}.
inline double band_measure(std::span<const double> c, double a, double b, double lo, double hi)
{
    if (!(a < b) || !(lo < hi))
        return 0.0;
    std::vector<double> knots{a, b};
    std::vector<double> shifted(c.begin(), c.end());
    if (shifted.empty())
        shifted.push_back(0.0);
    shifted[0] = c.empty() ? -lo : c[0] - lo;
    roots_in(shifted, a, b, knots);
    shifted[0] = c.empty() ? -hi : c[0] - hi;
    roots_in(shifted, a, b, knots);
    std::sort(knots.begin(), knots.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        const double x0 = knots[i], x1 = knots[i + 1];
        if (!(x1 > x0))
            continue;
        const double f = eval(c, 0.5 * (x0 + x1));
        if (lo <= f && f < hi)
            total += x1 - x0;
    }
    return total;
}

} // namespace formcount::poly
