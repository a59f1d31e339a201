#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "formcount/errors.hpp"

namespace formcount {

/// Dense square matrix, row-major. Vectors act on the left (v -> v * M).
class Matrix {
public:
    Matrix() = default;
    explicit Matrix(std::size_t n) : n_(n), a_(n * n, 0.0) {}
    Matrix(std::size_t n, std::vector<double> row_major) : n_(n), a_(std::move(row_major))
    {
        if (a_.size() != n * n)
            throw DimensionMismatch("matrix needs " + std::to_string(n * n) + " entries, got " +
                                    std::to_string(a_.size()));
    }

    static Matrix identity(std::size_t n)
    {
        Matrix m(n);
        for (std::size_t i = 0; i < n; ++i)
            m(i, i) = 1.0;
        return m;
    }

    static Matrix diagonal(std::initializer_list<double> d)
    {
        Matrix m(d.size());
        std::size_t i = 0;
        for (double x : d) {
            m(i, i) = x;
            ++i;
        }
        return m;
    }

    std::size_t size() const noexcept { return n_; }
    double& operator()(std::size_t i, std::size_t j) noexcept { return a_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return a_[i * n_ + j]; }
    std::span<const double> row(std::size_t i) const noexcept { return {a_.data() + i * n_, n_}; }
    std::span<const double> data() const noexcept { return a_; }

    Matrix transpose() const
    {
        Matrix t(n_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j)
                t(j, i) = (*this)(i, j);
        return t;
    }

    friend Matrix operator*(const Matrix& a, const Matrix& b)
    {
        if (a.n_ != b.n_)
            throw DimensionMismatch("matrix product of sizes " + std::to_string(a.n_) + " and " +
                                    std::to_string(b.n_));
        Matrix c(a.n_);
        for (std::size_t i = 0; i < a.n_; ++i)
            for (std::size_t k = 0; k < a.n_; ++k) {
                const double aik = a(i, k);
                for (std::size_t j = 0; j < a.n_; ++j)
                    c(i, j) += aik * b(k, j);
            }
        return c;
    }

    Matrix& operator*=(double s)
    {
        for (double& x : a_)
            x *= s;
        return *this;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<double> a_;
};

/// Neumaier-compensated accumulator.
class CompensatedSum {
public:
    void add(double x) noexcept
    {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Row vector times matrix with compensated summation of each column.
inline std::vector<double> row_times(std::span<const double> v, const Matrix& m)
{
    if (v.size() != m.size())
        throw DimensionMismatch("vector of length " + std::to_string(v.size()) +
                                " against matrix of size " + std::to_string(m.size()));
    const std::size_t n = m.size();
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        CompensatedSum s;
        for (std::size_t i = 0; i < n; ++i)
            s.add(v[i] * m(i, j));
        out[j] = s.value();
    }
    return out;
}

inline double norm2(std::span<const double> v) noexcept
{
    double s = 0.0;
    for (double x : v)
        s += x * x;
    return std::sqrt(s);
}

namespace detail {

struct LuResult {
    Matrix lu;
    std::vector<std::size_t> perm;
    int sign = 1;
    bool singular = false;
};

inline LuResult lu_decompose(const Matrix& m)
{
    LuResult r{m, {}, 1, false};
    const std::size_t n = m.size();
    r.perm.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        r.perm[i] = i;
    double scale = 0.0;
    for (double x : m.data())
        scale = std::max(scale, std::abs(x));
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(r.lu(i, k)) > std::abs(r.lu(piv, k)))
                piv = i;
        if (std::abs(r.lu(piv, k)) <= 1e-15 * scale) {
            r.singular = true;
            return r;
        }
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j)
                std::swap(r.lu(k, j), r.lu(piv, j));
            std::swap(r.perm[k], r.perm[piv]);
            r.sign = -r.sign;
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = r.lu(i, k) / r.lu(k, k);
            r.lu(i, k) = f;
            for (std::size_t j = k + 1; j < n; ++j)
                r.lu(i, j) -= f * r.lu(k, j);
        }
    }
    return r;
}

} // namespace detail

inline double determinant(const Matrix& m)
{
    const auto r = detail::lu_decompose(m);
    if (r.singular)
        return 0.0;
    double det = r.sign;
    for (std::size_t i = 0; i < m.size(); ++i)
        det *= r.lu(i, i);
    return det;
}

inline Matrix inverse(const Matrix& m)
{
    const std::size_t n = m.size();
    const auto r = detail::lu_decompose(m);
    if (r.singular)
        throw SingularMatrix("matrix is singular");
    Matrix inv(n);
    std::vector<double> x(n);
    for (std::size_t col = 0; col < n; ++col) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = r.perm[i] == col ? 1.0 : 0.0;
            for (std::size_t j = 0; j < i; ++j)
                s -= r.lu(i, j) * x[j];
            x[i] = s;
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x[i];
            for (std::size_t j = i + 1; j < n; ++j)
                s -= r.lu(i, j) * x[j];
            x[i] = s / r.lu(i, i);
        }
        for (std::size_t i = 0; i < n; ++i)
            inv(i, col) = x[i];
    }
    for (double v : inv.data())
        if (!std::isfinite(v))
            throw SingularMatrix("matrix inverse is not finite");
    return inv;
}

/// Largest singular value of m, by power iteration on m^T m (Rayleigh quotient)
/// until successive eigenvalue estimates agree to `rel_tol`.
inline double operator_norm(const Matrix& m, double rel_tol = 1e-10, int max_iter = 100000)
{
    const std::size_t n = m.size();
    if (n == 0)
        return 0.0;
    const Matrix gram = m.transpose() * m;
    // Irregular start vector: generic with respect to any eigenbasis we meet in practice.
    std::vector<double> v(n), w(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = 1.0 + 0.3183098861837907 * static_cast<double>(i) +
               0.0577215664901533 * static_cast<double>(i * i);
    double nv = norm2(v);
    for (double& x : v)
        x /= nv;
    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                s += gram(i, j) * v[j];
            w[i] = s;
        }
        double rq = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            rq += v[i] * w[i];
        const double nw = norm2(w);
        if (nw == 0.0)
            return 0.0;
        for (std::size_t i = 0; i < n; ++i)
            v[i] = w[i] / nw;
        if (it > 0 && std::abs(rq - lambda) <= rel_tol * std::abs(rq)) {
            lambda = rq;
            break;
        }
        lambda = rq;
    }
    return std::sqrt(std::max(lambda, 0.0));
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
inline Matrix expm(const Matrix& x)
{
    const std::size_t n = x.size();
    double norm1 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += std::abs(x(i, j));
        norm1 = std::max(norm1, s);
    }
    int squarings = 0;
    while (norm1 > 0.25) {
        norm1 /= 2.0;
        ++squarings;
    }
    Matrix a = x;
    a *= std::ldexp(1.0, -squarings);
    Matrix result = Matrix::identity(n);
    Matrix term = Matrix::identity(n);
    for (int k = 1; k <= 20; ++k) {
        term = term * a;
        term *= 1.0 / k;
        Matrix next(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                next(i, j) = result(i, j) + term(i, j);
        result = std::move(next);
    }
    for (int s = 0; s < squarings; ++s)
        result = result * result;
    return result;
}

} // namespace formcount
