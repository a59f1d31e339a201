#pragma once

// Exact integer/rational helpers backing the integer fast path.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "formcount/errors.hpp"
#include "formcount/linalg.hpp"

namespace formcount {

using int128 = __int128;
using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

namespace exact {

inline std::string to_string(int128 v)
{
    if (v == 0)
        return "0";
    const bool neg = v < 0;
    unsigned __int128 u = neg ? static_cast<unsigned __int128>(-(v + 1)) + 1u
                              : static_cast<unsigned __int128>(v);
    std::string s;
    while (u != 0) {
        s.push_back(static_cast<char>('0' + static_cast<int>(u % 10u)));
        u /= 10u;
    }
    if (neg)
        s.push_back('-');
    return {s.rbegin(), s.rend()};
}

inline BigInt to_big(int128 v)
{
    const bool neg = v < 0;
    unsigned __int128 u = neg ? static_cast<unsigned __int128>(-(v + 1)) + 1u
                              : static_cast<unsigned __int128>(v);
    BigInt hi = static_cast<std::uint64_t>(u >> 64);
    BigInt r = (hi << 64) | BigInt(static_cast<std::uint64_t>(u));
    return neg ? BigInt(-r) : r;
}

/// Narrow a big integer into int128, saturating to the representable range.
inline int128 to_int128_saturating(const BigInt& v)
{
    static const BigInt lim = (BigInt(1) << 126);
    if (v >= lim)
        return static_cast<int128>(1) << 126;
    if (v <= -lim)
        return -(static_cast<int128>(1) << 126);
    const bool neg = v < 0;
    const BigInt a = neg ? BigInt(-v) : v;
    const auto hi = static_cast<std::uint64_t>(a >> 64);
    const auto lo = static_cast<std::uint64_t>(a & BigInt(std::numeric_limits<std::uint64_t>::max()));
    const int128 r = (static_cast<int128>(hi) << 64) | static_cast<int128>(lo);
    return neg ? -r : r;
}

/// The exact rational value of a finite double.
inline BigRational to_rational(double x)
{
    if (!std::isfinite(x))
        throw ValidationError("non-finite value has no rational form");
    if (x == 0.0)
        return BigRational(0);
    int e = 0;
    const double m = std::frexp(x, &e); // x = m * 2^e, 0.5 <= |m| < 1
    const auto mant = static_cast<std::int64_t>(std::ldexp(m, 53));
    e -= 53;
    BigRational r(mant);
    if (e >= 0)
        r *= BigRational(BigInt(1) << e);
    else
        r /= BigRational(BigInt(1) << (-e));
    return r;
}

inline BigInt floor_big(const BigRational& r)
{
    BigInt q = boost::multiprecision::numerator(r) / boost::multiprecision::denominator(r);
    if (r < 0 && BigRational(q) != r)
        q -= 1;
    return q;
}

inline BigInt ceil_big(const BigRational& r)
{
    BigInt f = floor_big(r);
    if (BigRational(f) != r)
        f += 1;
    return f;
}

/// Smallest integer >= x * scale, computed exactly (saturating to int128).
inline int128 ceil_scaled(double x, int128 scale)
{
    return to_int128_saturating(ceil_big(to_rational(x) * BigRational(to_big(scale))));
}

/// floor(t^2 * scale) exactly, for t >= 0.
inline int128 floor_square_scaled(double t, int128 scale)
{
    const BigRational r = to_rational(t);
    return to_int128_saturating(floor_big(r * r * BigRational(to_big(scale))));
}

inline std::int64_t isqrt(std::int64_t x) noexcept
{
    if (x <= 0)
        return 0;
    auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(x)));
    while (r * r > x)
        --r;
    while ((r + 1) * (r + 1) <= x)
        ++r;
    return r;
}

inline bool checked_mul(int128 a, int128 b, int128& out) noexcept
{
    return !__builtin_mul_overflow(a, b, &out);
}

inline bool checked_add(int128 a, int128 b, int128& out) noexcept
{
    return !__builtin_add_overflow(a, b, &out);
}

} // namespace exact

/// Square matrix with a common positive denominator: entries num(i,j) / den.
class RationalMatrix {
public:
    RationalMatrix() = default;
    RationalMatrix(std::size_t n, std::vector<std::int64_t> num, std::int64_t den)
        : n_(n), num_(std::move(num)), den_(den)
    {
        if (num_.size() != n * n)
            throw DimensionMismatch("rational matrix needs " + std::to_string(n * n) +
                                    " numerators, got " + std::to_string(num_.size()));
        if (den_ <= 0)
            throw ValidationError("rational matrix denominator must be positive");
    }

    static RationalMatrix identity(std::size_t n)
    {
        std::vector<std::int64_t> num(n * n, 0);
        for (std::size_t i = 0; i < n; ++i)
            num[i * n + i] = 1;
        return {n, std::move(num), 1};
    }

    /// Convert from per-entry big rationals, clearing to a common denominator.
    static RationalMatrix from_big(std::size_t n, const std::vector<BigRational>& entries)
    {
        BigInt den = 1;
        for (const auto& e : entries) {
            const BigInt d = boost::multiprecision::denominator(e);
            den = den / boost::multiprecision::gcd(den, d) * d;
        }
        static const BigInt lim = BigInt(std::numeric_limits<std::int64_t>::max());
        if (den > lim)
            throw OverflowError("rational matrix denominator exceeds 64 bits");
        std::vector<std::int64_t> num(n * n);
        for (std::size_t i = 0; i < n * n; ++i) {
            const BigInt v = boost::multiprecision::numerator(entries[i]) *
                             (den / boost::multiprecision::denominator(entries[i]));
            if (v > lim || v < -lim)
                throw OverflowError("rational matrix numerator exceeds 64 bits");
            num[i] = static_cast<std::int64_t>(v);
        }
        return {n, std::move(num), static_cast<std::int64_t>(den)};
    }

    std::size_t size() const noexcept { return n_; }
    std::int64_t num(std::size_t i, std::size_t j) const noexcept { return num_[i * n_ + j]; }
    std::int64_t den() const noexcept { return den_; }
    const std::vector<std::int64_t>& numerators() const noexcept { return num_; }

    BigRational entry(std::size_t i, std::size_t j) const
    {
        return BigRational(BigInt(num(i, j)), BigInt(den_));
    }

    std::vector<BigRational> entries() const
    {
        std::vector<BigRational> e(n_ * n_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j)
                e[i * n_ + j] = entry(i, j);
        return e;
    }

    Matrix to_double() const
    {
        Matrix m(n_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j)
                m(i, j) = static_cast<double>(entry(i, j));
        return m;
    }

    bool is_integer() const noexcept { return den_ == 1; }

    friend bool operator==(const RationalMatrix&, const RationalMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<std::int64_t> num_;
    std::int64_t den_ = 1;
};

namespace exact {

inline BigRational determinant(const RationalMatrix& m)
{
    const std::size_t n = m.size();
    auto a = m.entries();
    BigRational det = 1;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        while (piv < n && a[piv * n + k] == 0)
            ++piv;
        if (piv == n)
            return 0;
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j)
                std::swap(a[k * n + j], a[piv * n + j]);
            det = -det;
        }
        det *= a[k * n + k];
        for (std::size_t i = k + 1; i < n; ++i) {
            const BigRational f = a[i * n + k] / a[k * n + k];
            if (f == 0)
                continue;
            for (std::size_t j = k; j < n; ++j)
                a[i * n + j] -= f * a[k * n + j];
        }
    }
    return det;
}

inline RationalMatrix inverse(const RationalMatrix& m)
{
    const std::size_t n = m.size();
    auto a = m.entries();
    std::vector<BigRational> inv(n * n, BigRational(0));
    for (std::size_t i = 0; i < n; ++i)
        inv[i * n + i] = 1;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        while (piv < n && a[piv * n + k] == 0)
            ++piv;
        if (piv == n)
            throw SingularMatrix("rational matrix is singular");
        if (piv != k)
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(a[k * n + j], a[piv * n + j]);
                std::swap(inv[k * n + j], inv[piv * n + j]);
            }
        const BigRational p = a[k * n + k];
        for (std::size_t j = 0; j < n; ++j) {
            a[k * n + j] /= p;
            inv[k * n + j] /= p;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (i == k || a[i * n + k] == 0)
                continue;
            const BigRational f = a[i * n + k];
            for (std::size_t j = 0; j < n; ++j) {
                a[i * n + j] -= f * a[k * n + j];
                inv[i * n + j] -= f * inv[k * n + j];
            }
        }
    }
    return RationalMatrix::from_big(n, inv);
}

inline RationalMatrix multiply(const RationalMatrix& a, const RationalMatrix& b)
{
    if (a.size() != b.size())
        throw DimensionMismatch("rational matrix product of mismatched sizes");
    const std::size_t n = a.size();
    std::vector<BigRational> c(n * n, BigRational(0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t j = 0; j < n; ++j)
                c[i * n + j] += a.entry(i, k) * b.entry(k, j);
    return RationalMatrix::from_big(n, c);
}

} // namespace exact

} // namespace formcount
