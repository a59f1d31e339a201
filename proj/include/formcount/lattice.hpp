#pragma once

// Integer points in Euclidean balls, counting and histogramming of form values,
// Goldstein-Mayer random unimodular lattices, and lattice points in form regions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "formcount/errors.hpp"
#include "formcount/exact.hpp"
#include "formcount/forms.hpp"
#include "formcount/parallel.hpp"
#include "formcount/polynomial.hpp"

namespace formcount {

/// Relative width of the band around interval endpoints reported as boundary cases.
inline constexpr double boundary_tau = 1e-9;

struct EnumerateOptions {
    /// Visit only v with first nonzero coordinate > 0 (and never the origin).
    bool half_space = false;
    /// Visitor is invoked concurrently from this many threads when > 1.
    unsigned workers = 1;
};

namespace detail {

/// floor(t^2) exactly.
inline std::int64_t radius_sq_floor(double t)
{
    if (!(t >= 0.0) || !std::isfinite(t))
        throw ValidationError("radius must be finite and >= 0");
    const int128 r2 = exact::floor_square_scaled(t, 1);
    if (r2 > static_cast<int128>(1) << 62)
        throw ValidationError("radius too large");
    return static_cast<std::int64_t>(r2);
}

/// Walks the lines {prefix} x [s_lo, s_hi] of Z^n within the ball |v|^2 <= r2 whose
/// first coordinate is fixed to `first`. For n == 1 there is no prefix and `first`
/// is ignored.
template <class LineFn>
class BallLines {
public:
    BallLines(int n, std::int64_t r2, bool half, LineFn& fn)
        : n_(n), r2_(r2), half_(half), fn_(fn), prefix_(static_cast<std::size_t>(std::max(n - 1, 0)))
    {
    }

    void run_slab(std::int64_t first)
    {
        if (n_ == 1) {
            const std::int64_t m = exact::isqrt(r2_);
            if (half_) {
                if (m >= 1)
                    fn_(std::span<const std::int64_t>(prefix_), std::int64_t{1}, m);
            } else {
                fn_(std::span<const std::int64_t>(prefix_), -m, m);
            }
            return;
        }
        const std::int64_t rem = r2_ - first * first;
        if (rem < 0)
            return;
        if (half_ && first < 0)
            return;
        prefix_[0] = first;
        recurse(1, rem, half_ ? (first > 0 ? 1 : 0) : 1);
    }

private:
    // state: 0 = prefix so far all zero (half mode), 1 = sign already settled.
    void recurse(int level, std::int64_t rem, int state)
    {
        if (level == n_ - 1) {
            const std::int64_t m = exact::isqrt(rem);
            if (state == 0) {
                if (m >= 1)
                    fn_(std::span<const std::int64_t>(prefix_), std::int64_t{1}, m);
            } else {
                fn_(std::span<const std::int64_t>(prefix_), -m, m);
            }
            return;
        }
        const std::int64_t m = exact::isqrt(rem);
        const auto lv = static_cast<std::size_t>(level);
        for (std::int64_t x = state == 0 ? 0 : -m; x <= m; ++x) {
            prefix_[lv] = x;
            recurse(level + 1, rem - x * x, state == 0 ? (x > 0 ? 1 : 0) : 1);
        }
    }

    int n_;
    std::int64_t r2_;
    bool half_;
    LineFn& fn_;
    std::vector<std::int64_t> prefix_;
};

/// Slab values of the first coordinate, in increasing order.
inline std::vector<std::int64_t> ball_slabs(int n, std::int64_t r2, bool half)
{
    if (n == 1)
        return {0};
    const std::int64_t R = exact::isqrt(r2);
    std::vector<std::int64_t> s;
    for (std::int64_t x = half ? 0 : -R; x <= R; ++x)
        s.push_back(x);
    return s;
}

/// Run `line(acc, prefix, s_lo, s_hi)` over every line of the ball, one accumulator per
/// slab of the first coordinate, merged by the caller in slab order.
template <class Acc, class LineFn>
std::vector<Acc> scan_ball_lines(int n, std::int64_t r2, bool half, unsigned workers, LineFn&& line)
{
    const auto slabs = ball_slabs(n, r2, half);
    return parallel_map<Acc>(slabs.size(), workers, [&](std::size_t i) {
        Acc acc{};
        auto fn = [&](std::span<const std::int64_t> prefix, std::int64_t lo, std::int64_t hi) {
            line(acc, prefix, lo, hi);
        };
        BallLines<decltype(fn)> walker(n, r2, half, fn);
        walker.run_slab(slabs[i]);
        return acc;
    });
}

} // namespace detail

/// Visit every v in Z^n with |v| <= t exactly once (or half of them, see options).
/// Returns the number of points visited.
template <class Visitor>
std::int64_t enumerate_ball(int n, double t, Visitor&& visit, EnumerateOptions opts = {})
{
    if (n < 1)
        throw ValidationError("enumerate_ball needs n >= 1");
    const std::int64_t r2 = detail::radius_sq_floor(t);
    const auto un = static_cast<std::size_t>(n);
    auto counts = detail::scan_ball_lines<std::int64_t>(
        n, r2, opts.half_space, opts.workers,
        [&](std::int64_t& acc, std::span<const std::int64_t> prefix, std::int64_t lo,
            std::int64_t hi) {
            std::vector<std::int64_t> v(un);
            std::copy(prefix.begin(), prefix.end(), v.begin());
            for (std::int64_t s = lo; s <= hi; ++s) {
                v[un - 1] = s;
                visit(std::span<const std::int64_t>(v));
                ++acc;
            }
        });
    return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

/// Number of integer points with |v| <= t.
inline std::int64_t ball_point_count(int n, double t)
{
    const std::int64_t r2 = detail::radius_sq_floor(t);
    auto counts = detail::scan_ball_lines<std::int64_t>(
        n, r2, false, 1,
        [](std::int64_t& acc, std::span<const std::int64_t>, std::int64_t lo, std::int64_t hi) {
            acc += hi - lo + 1;
        });
    return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

// ---------------------------------------------------------------------------
// Form value kernels
// ---------------------------------------------------------------------------

namespace detail {

/// Evaluates F along the lines of the ball scan: on a line prefix x [lo, hi] the form is
/// a degree-d polynomial in the last coordinate, evaluated by Horner per point.
class FloatLineKernel {
public:
    using value_type = double;

    explicit FloatLineKernel(const PolyForm& F)
        : sig_(F.sig()), n_(static_cast<std::size_t>(F.n())), d_(static_cast<std::size_t>(sig_.d)),
          gt_(n_ * n_), w_(n_ * (d_ + 1)), partial_(n_ * n_, 0.0), coeffs_(d_ + 1)
    {
        const Matrix& g = F.g();
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j)
                gt_[i * n_ + j] = g(i, j);
        // w(i, k) = sign_i * C(d, k) * b_i^k with b the last row of g.
        for (std::size_t i = 0; i < n_; ++i) {
            const double sign = static_cast<int>(i) < sig_.p ? 1.0 : -1.0;
            double binom = 1.0, bk = 1.0;
            for (std::size_t k = 0; k <= d_; ++k) {
                if (k > 0) {
                    binom = binom * static_cast<double>(d_ - k + 1) / static_cast<double>(k);
                    bk *= g(n_ - 1, i);
                }
                w_[i * (d_ + 1) + k] = sign * binom * bk;
            }
        }
        for (std::size_t i = 0; i < n_; ++i)
            lead_ += w_[i * (d_ + 1) + d_];
        cached_.assign(n_, std::numeric_limits<std::int64_t>::min());
    }

    /// Skip the per-line overflow bound when |F(v)| <= n (|g|_F t)^d is finite on the ball.
    void set_radius(double t)
    {
        double fro = 0.0;
        for (double x : gt_)
            fro += x * x;
        const double global = static_cast<double>(n_) * std::pow(std::sqrt(fro) * (t + 1.0), sig_.d);
        check_ = !(global < 1e300);
    }

    /// Prepare coefficients for a line; throws if values on it could be non-finite.
    void set_line(std::span<const std::int64_t> prefix, std::int64_t lo, std::int64_t hi)
    {
        // partial_[l] = sum_{i < l} prefix_i g_i; levels below the first changed
        // coordinate are reused, which gives the same sums as a fresh computation.
        std::size_t l = 0;
        while (l + 1 < n_ && cached_[l] == prefix[l])
            ++l;
        for (; l + 1 < n_; ++l) {
            cached_[l] = prefix[l];
            const double x = static_cast<double>(prefix[l]);
            const double* row = &gt_[l * n_];
            const double* src = &partial_[l * n_];
            double* dst = &partial_[(l + 1) * n_];
            for (std::size_t j = 0; j < n_; ++j)
                dst[j] = src[j] + x * row[j];
        }
        const double* alpha = &partial_[(n_ - 1) * n_];
        if (d_ == 2) {
            double c0 = 0.0, c1 = 0.0;
            for (std::size_t i = 0; i < n_; ++i) {
                const double* w = &w_[i * 3];
                c0 += w[0] * alpha[i] * alpha[i];
                c1 += w[1] * alpha[i];
            }
            coeffs_[0] = c0;
            coeffs_[1] = c1;
            coeffs_[2] = lead_;
        } else {
            std::fill(coeffs_.begin(), coeffs_.end(), 0.0);
            for (std::size_t i = 0; i < n_; ++i) {
                const double* w = &w_[i * (d_ + 1)];
                double ap = 1.0; // alpha_i^(d - k), built from k = d downwards
                for (std::size_t k = d_ + 1; k-- > 0;) {
                    coeffs_[k] += w[k] * ap;
                    ap *= alpha[i];
                }
            }
        }
        if (!check_)
            return;
        const double smax = static_cast<double>(std::max(std::abs(lo), std::abs(hi)));
        double bound = 0.0, sp = 1.0;
        for (double c : coeffs_) {
            bound += std::abs(c) * sp;
            sp *= smax;
        }
        if (!std::isfinite(bound)) {
            std::vector<std::int64_t> v(prefix.begin(), prefix.end());
            v.push_back(lo);
            throw OverflowError("form value is not finite near v = " + format_vector(v));
        }
    }

    /// Line polynomial in ascending order.
    std::span<const double> approx_coeffs() const noexcept { return coeffs_; }
    double to_double(double f) const noexcept { return f; }

    double operator()(std::int64_t s) const noexcept
    {
        const double x = static_cast<double>(s);
        double r = coeffs_[d_];
        for (std::size_t k = d_; k-- > 0;)
            r = r * x + coeffs_[k];
        return r;
    }

private:
    Signature sig_;
    std::size_t n_, d_;
    bool check_ = true;
    double lead_ = 0.0;
    std::vector<double> gt_;
    std::vector<double> w_;
    std::vector<double> partial_;
    std::vector<std::int64_t> cached_;
    std::vector<double> coeffs_;
};

/// Integer version for rational g = G / D: yields X = D^d F(v) = F0(v G) exactly.
class ExactLineKernel {
public:
    explicit ExactLineKernel(const PolyForm& F)
        : sig_(F.sig()), n_(static_cast<std::size_t>(F.n())), G_(&*F.exact()), alpha_(n_),
          coeffs_(static_cast<std::size_t>(sig_.d + 1)), approx_(coeffs_.size())
    {
        int128 scale;
        if (!ipow_checked(G_->den(), sig_.d, scale))
            throw OverflowError("den(g)^d overflows 128 bits");
        scale_ = static_cast<double>(scale);
    }

    void set_line(std::span<const std::int64_t> prefix, std::int64_t lo, std::int64_t hi)
    {
        auto overflow = [&] {
            std::vector<std::int64_t> v(prefix.begin(), prefix.end());
            v.push_back(lo);
            return OverflowError("form value overflows 128 bits near v = " + format_vector(v));
        };
        for (std::size_t j = 0; j < n_; ++j) {
            int128 s = 0;
            for (std::size_t i = 0; i + 1 < n_; ++i) {
                int128 t;
                if (!exact::checked_mul(prefix[i], G_->num(i, j), t) || !exact::checked_add(s, t, s))
                    throw overflow();
            }
            alpha_[j] = s;
        }
        // Bound |P(s)| in floating point before committing to 128-bit arithmetic.
        const double smax = static_cast<double>(std::max(std::abs(lo), std::abs(hi)));
        double bound = 0.0;
        for (std::size_t i = 0; i < n_; ++i)
            bound += std::pow(std::abs(static_cast<double>(alpha_[i])) +
                                  smax * std::abs(static_cast<double>(G_->num(n_ - 1, i))),
                              sig_.d);
        if (!(bound < 0x1p120))
            throw overflow();
        std::fill(coeffs_.begin(), coeffs_.end(), int128{0});
        const int d = sig_.d;
        for (std::size_t i = 0; i < n_; ++i) {
            const int128 sign = static_cast<int>(i) < sig_.p ? 1 : -1;
            const int128 a = alpha_[i], b = G_->num(n_ - 1, i);
            int128 binom = 1;
            for (int k = 0; k <= d; ++k) {
                if (k > 0)
                    binom = binom * (d - k + 1) / k;
                coeffs_[static_cast<std::size_t>(k)] += sign * binom * ipow(a, d - k) * ipow(b, k);
            }
        }
        for (std::size_t k = 0; k < coeffs_.size(); ++k)
            approx_[k] = static_cast<double>(coeffs_[k]) / scale_;
    }

    using value_type = int128;

    /// Overflow is checked per line against 2^120.
    void set_radius(double) noexcept {}

    std::span<const double> approx_coeffs() const noexcept { return approx_; }
    /// F(v) for a kernel value X = D^d F(v).
    double to_double(int128 X) const noexcept { return static_cast<double>(X) / scale_; }

    int128 operator()(std::int64_t s) const noexcept
    {
        int128 r = coeffs_[static_cast<std::size_t>(sig_.d)];
        for (int k = sig_.d - 1; k >= 0; --k)
            r = r * s + coeffs_[static_cast<std::size_t>(k)];
        return r;
    }

private:
    static int128 ipow(int128 x, int e) noexcept
    {
        int128 r = 1;
        for (int i = 0; i < e; ++i)
            r *= x;
        return r;
    }

    Signature sig_;
    std::size_t n_;
    const RationalMatrix* G_;
    double scale_ = 1.0;
    std::vector<int128> alpha_;
    std::vector<int128> coeffs_;
    std::vector<double> approx_;
};

inline int128 exact_scale(const PolyForm& F)
{
    int128 den;
    if (!ipow_checked(F.exact()->den(), F.sig().d, den))
        throw OverflowError("den(g)^d overflows 128 bits");
    return den;
}

inline bool near_boundary(double f, double edge) noexcept
{
    return std::abs(f - edge) < boundary_tau * std::max(1.0, std::abs(f));
}

/// Scan the ball (or its half-space) with `Kernel`, calling point(acc, value) per point.
template <class Acc, class Kernel, class PointFn>
std::vector<Acc> scan_form(const PolyForm& F, std::int64_t r2, bool half, unsigned workers,
                           PointFn&& point)
{
    struct Slab {
        Acc acc{};
        std::optional<Kernel> kernel;
    };
    auto slabs = scan_ball_lines<Slab>(
        F.n(), r2, half, workers,
        [&](Slab& slab, std::span<const std::int64_t> prefix, std::int64_t lo, std::int64_t hi) {
            if (!slab.kernel) {
                slab.kernel.emplace(F);
                slab.kernel->set_radius(std::sqrt(static_cast<double>(r2)));
            }
            Kernel& kernel = *slab.kernel;
            kernel.set_line(prefix, lo, hi);
            for (std::int64_t s = lo; s <= hi; ++s)
                point(slab.acc, kernel(s));
        });
    std::vector<Acc> out;
    out.reserve(slabs.size());
    for (auto& s : slabs)
        out.push_back(std::move(s.acc));
    return out;
}

} // namespace detail

namespace detail {

/// Per-line classification of form values into the cells of a sorted threshold list:
/// cell j holds values in [thr[j-1], thr[j]), cell 0 everything below thr[0].
/// Integers near threshold crossings and critical points of the line polynomial are
/// evaluated one by one; on the monotone runs between them only the two endpoints are.
template <class Kernel>
class LineClassifier {
public:
    using V = typename Kernel::value_type;

    LineClassifier(std::span<const V> thr, std::span<const double> thr_d)
        : cells(thr.size() + 1, 0), thr_(thr), thr_d_(thr_d)
    {
    }

    std::vector<std::int64_t> cells;
    std::int64_t points = 0;
    std::int64_t boundary = 0;

    void line(const Kernel& K, std::int64_t a, std::int64_t b)
    {
        points += b - a + 1;
        const auto pc = K.approx_coeffs();
        const double ra = static_cast<double>(a) - 1.0, rb = static_cast<double>(b) + 1.0;
        crit_.clear();
        roots_.clear();
        if (poly::degree(pc) == 2) {
            const double A = pc[2], B = pc[1];
            keep(crit_, -B / (2.0 * A), ra, rb);
            for (double e : thr_d_)
                quadratic_roots(A, B, pc[0] - e, ra, rb);
        } else {
            deriv_.assign(pc.size() > 1 ? pc.size() - 1 : 1, 0.0);
            for (std::size_t k = 1; k < pc.size(); ++k)
                deriv_[k - 1] = static_cast<double>(k) * pc[k];
            poly::roots_in(deriv_, ra, rb, crit_);
            shifted_.assign(pc.begin(), pc.end());
            for (double e : thr_d_) {
                shifted_[0] = pc[0] - e;
                poly::roots_in(shifted_, ra, rb, roots_);
            }
        }
        // Runs end after each cut. A critical point close to an integer m isolates m, so
        // that every run lies on one side of it and P is monotone on the run.
        cuts_.clear();
        for (double c : crit_) {
            const double m = std::nearbyint(c);
            if (std::abs(c - m) < 1e-6 * std::max(1.0, std::abs(c))) {
                cuts_.push_back(static_cast<std::int64_t>(m) - 1);
                cuts_.push_back(static_cast<std::int64_t>(m));
            } else {
                cuts_.push_back(static_cast<std::int64_t>(std::floor(c)));
            }
        }
        for (double r : roots_)
            cuts_.push_back(static_cast<std::int64_t>(std::floor(r)));
        std::sort(cuts_.begin(), cuts_.end());
        std::int64_t u = a;
        for (std::int64_t c : cuts_) {
            if (c < u || c >= b)
                continue;
            run(K, u, K(u), c, K(c));
            u = c + 1;
        }
        run(K, u, K(u), b, K(b));
    }

private:
    void keep(std::vector<double>& out, double r, double ra, double rb)
    {
        if (r > ra && r < rb)
            out.push_back(r);
    }

    void quadratic_roots(double A, double B, double C, double ra, double rb)
    {
        const double disc = B * B - 4.0 * A * C;
        if (disc < 0.0)
            return;
        const double q = -0.5 * (B + std::copysign(std::sqrt(disc), B));
        if (q == 0.0) {
            keep(roots_, 0.0, ra, rb);
            return;
        }
        keep(roots_, q / A, ra, rb);
        keep(roots_, C / q, ra, rb);
    }

    std::size_t cell(V x) const
    {
        if (thr_.size() <= 8) {
            std::size_t c = 0;
            for (const V& e : thr_)
                c += e <= x ? 1 : 0;
            return c;
        }
        return static_cast<std::size_t>(std::upper_bound(thr_.begin(), thr_.end(), x) - thr_.begin());
    }

    bool flagged(double f) const
    {
        for (double e : thr_d_)
            if (near_boundary(f, e))
                return true;
        return false;
    }

    void tally(const Kernel& K, V X)
    {
        ++cells[cell(X)];
        boundary += flagged(K.to_double(X)) ? 1 : 0;
    }

    // P is monotone on [u, v]; equal endpoint cells mean the whole run shares the cell,
    // otherwise bisect.
    void run(const Kernel& K, std::int64_t u, V Xu, std::int64_t v, V Xv)
    {
        if (u == v) {
            tally(K, Xu);
            return;
        }
        const std::size_t cu = cell(Xu);
        if (cu != cell(Xv)) {
            if (v - u == 1) {
                tally(K, Xu);
                tally(K, Xv);
                return;
            }
            const std::int64_t m = u + (v - u) / 2;
            run(K, u, Xu, m, K(m));
            run(K, m + 1, K(m + 1), v, Xv);
            return;
        }
        cells[cu] += v - u + 1;
        const double fu = K.to_double(Xu), fv = K.to_double(Xv);
        const double lo = std::min(fu, fv), hi = std::max(fu, fv);
        for (double e : thr_d_) {
            const double w = 2.0 * boundary_tau * std::max(1.0, std::abs(e));
            if (e + w > lo && e - w < hi) {
                for (std::int64_t x = u; x <= v; ++x)
                    boundary += flagged(K.to_double(K(x))) ? 1 : 0;
                return;
            }
        }
    }

    std::span<const V> thr_;
    std::span<const double> thr_d_;
    std::vector<double> shifted_, deriv_, roots_, crit_;
    std::vector<std::int64_t> cuts_;
};

struct CellCounts {
    std::vector<std::int64_t> cells;
    std::int64_t points = 0;
    std::int64_t boundary = 0;
};

/// Cell counts over the ball (or half ball); thresholds must be sorted and distinct.
template <class Kernel>
CellCounts scan_cells(const PolyForm& F, std::int64_t r2, bool half, unsigned workers,
                      std::span<const typename Kernel::value_type> thr,
                      std::span<const double> thr_d)
{
    struct Slab {
        std::optional<Kernel> kernel;
        std::optional<LineClassifier<Kernel>> cls;
    };
    auto slabs = scan_ball_lines<Slab>(
        F.n(), r2, half, workers,
        [&](Slab& slab, std::span<const std::int64_t> prefix, std::int64_t lo, std::int64_t hi) {
            if (!slab.kernel) {
                slab.kernel.emplace(F);
                slab.kernel->set_radius(std::sqrt(static_cast<double>(r2)));
                slab.cls.emplace(thr, thr_d);
            }
            slab.kernel->set_line(prefix, lo, hi);
            slab.cls->line(*slab.kernel, lo, hi);
        });
    CellCounts total;
    total.cells.assign(thr.size() + 1, 0);
    for (const auto& s : slabs) {
        if (!s.cls)
            continue;
        for (std::size_t j = 0; j < total.cells.size(); ++j)
            total.cells[j] += s.cls->cells[j];
        total.points += s.cls->points;
        total.boundary += s.cls->boundary;
    }
    return total;
}

} // namespace detail

struct CountOptions {
    /// 0 = FORMCOUNT_WORKERS or hardware concurrency.
    unsigned workers = 0;
    /// Use the 128-bit integer path when g is rational.
    bool exact = true;
    /// Scan only v with first nonzero coordinate > 0 and use F(-v) = F(v).
    bool half_space = true;
    /// Solve along lines instead of evaluating every point; same result.
    bool line_solve = true;
};

/// N_F(I, t) = #{v in Z^n : F(v) in I, |v| <= t}, origin included.
struct CountReport {
    std::int64_t count = 0;
    double t = 0.0;
    Interval interval;
    std::int64_t points_enumerated = 0;
    std::int64_t boundary_cases = 0;
    bool exact = false;
};

/// Counts for several intervals in one pass. `boundary` and `points` receive the number
/// of values within the boundary band of some endpoint and the number of points scanned.
inline std::vector<std::int64_t> count_in_intervals(const PolyForm& F,
                                                    std::span<const Interval> intervals, double t,
                                                    CountOptions opts = {},
                                                    std::int64_t* boundary = nullptr,
                                                    std::int64_t* points = nullptr)
{
    const std::int64_t r2 = detail::radius_sq_floor(t);
    const std::size_t K = intervals.size();
    std::vector<double> thr_d;
    for (const auto& I : intervals) {
        thr_d.push_back(I.lo);
        thr_d.push_back(I.hi);
    }
    std::sort(thr_d.begin(), thr_d.end());
    thr_d.erase(std::unique(thr_d.begin(), thr_d.end()), thr_d.end());
    auto index_of = [&](double x) {
        return static_cast<std::size_t>(std::lower_bound(thr_d.begin(), thr_d.end(), x) - thr_d.begin());
    };

    // Line solving costs grow with the number of thresholds; past a handful, evaluating
    // every point is cheaper.
    const bool solve = opts.line_solve && thr_d.size() <= 8;
    detail::CellCounts cc;
    if (opts.exact && F.exact()) {
        const int128 scale = detail::exact_scale(F);
        std::vector<int128> thr;
        for (double e : thr_d)
            thr.push_back(exact::ceil_scaled(e, scale));
        // Distinct doubles can share a scaled ceiling; keep the list strictly increasing.
        std::vector<double> thr_dd;
        std::vector<int128> thr_u;
        std::vector<std::size_t> map(thr_d.size());
        for (std::size_t i = 0; i < thr.size(); ++i) {
            if (thr_u.empty() || thr_u.back() != thr[i]) {
                thr_u.push_back(thr[i]);
                thr_dd.push_back(thr_d[i]);
            }
            map[i] = thr_u.size() - 1;
        }
        if (solve) {
            cc = detail::scan_cells<detail::ExactLineKernel>(F, r2, opts.half_space, opts.workers,
                                                             thr_u, thr_dd);
        } else {
            struct Acc {
                std::vector<std::int64_t> cells;
                std::int64_t points = 0, boundary = 0;
            };
            const double fscale = static_cast<double>(scale);
            auto parts = detail::scan_form<Acc, detail::ExactLineKernel>(
                F, r2, opts.half_space, opts.workers, [&](Acc& acc, int128 X) {
                    if (acc.cells.empty())
                        acc.cells.assign(thr_u.size() + 1, 0);
                    ++acc.points;
                    ++acc.cells[static_cast<std::size_t>(
                        std::upper_bound(thr_u.begin(), thr_u.end(), X) - thr_u.begin())];
                    const double f = static_cast<double>(X) / fscale;
                    for (double e : thr_dd)
                        if (detail::near_boundary(f, e)) {
                            ++acc.boundary;
                            break;
                        }
                });
            cc.cells.assign(thr_u.size() + 1, 0);
            for (const auto& p : parts) {
                for (std::size_t j = 0; j < p.cells.size(); ++j)
                    cc.cells[j] += p.cells[j];
                cc.points += p.points;
                cc.boundary += p.boundary;
            }
        }
        // Re-express in terms of the double threshold list: cell of index i+1 in thr_d
        // maps onto the cell above thr_u[map[i]]; merged thresholds give empty cells.
        std::vector<std::int64_t> cells(thr_d.size() + 1, 0);
        cells[0] = cc.cells[0];
        for (std::size_t i = 0; i < thr_d.size(); ++i)
            if (i + 1 == thr_d.size() || map[i + 1] != map[i])
                cells[i + 1] = cc.cells[map[i] + 1];
        cc.cells = std::move(cells);
    } else if (solve) {
        cc = detail::scan_cells<detail::FloatLineKernel>(F, r2, opts.half_space, opts.workers,
                                                         thr_d, thr_d);
    } else {
        struct Acc {
            std::vector<std::int64_t> cells;
            std::int64_t points = 0, boundary = 0;
        };
        auto parts = detail::scan_form<Acc, detail::FloatLineKernel>(
            F, r2, opts.half_space, opts.workers, [&](Acc& acc, double f) {
                if (acc.cells.empty())
                    acc.cells.assign(thr_d.size() + 1, 0);
                ++acc.points;
                ++acc.cells[static_cast<std::size_t>(
                    std::upper_bound(thr_d.begin(), thr_d.end(), f) - thr_d.begin())];
                for (double e : thr_d)
                    if (detail::near_boundary(f, e)) {
                        ++acc.boundary;
                        break;
                    }
            });
        cc.cells.assign(thr_d.size() + 1, 0);
        for (const auto& p : parts) {
            for (std::size_t j = 0; j < p.cells.size(); ++j)
                cc.cells[j] += p.cells[j];
            cc.points += p.points;
            cc.boundary += p.boundary;
        }
    }

    std::vector<std::int64_t> out(K, 0);
    for (std::size_t k = 0; k < K; ++k) {
        const auto& I = intervals[k];
        if (I.empty())
            continue;
        const std::size_t a = index_of(I.lo), b = index_of(I.hi);
        for (std::size_t j = a + 1; j <= b; ++j)
            out[k] += cc.cells[j];
    }
    std::int64_t origin_flag = 0;
    for (double e : thr_d)
        origin_flag = origin_flag || detail::near_boundary(0.0, e);
    if (opts.half_space) {
        // F(-v) = F(v): every half-space point stands for two; then the origin, F(0) = 0.
        for (std::size_t k = 0; k < K; ++k)
            out[k] = 2 * out[k] + (intervals[k].contains(0.0) ? 1 : 0);
        cc.points = 2 * cc.points + 1;
        cc.boundary = 2 * cc.boundary + origin_flag;
    }
    if (boundary)
        *boundary = cc.boundary;
    if (points)
        *points = cc.points;
    return out;
}

inline CountReport count_in_interval(const PolyForm& F, const Interval& I, double t,
                                     CountOptions opts = {})
{
    CountReport rep;
    rep.t = t;
    rep.interval = I;
    rep.exact = opts.exact && F.exact().has_value();
    rep.count = count_in_intervals(F, std::span<const Interval>(&I, 1), t, opts,
                                   &rep.boundary_cases, &rep.points_enumerated)
                    .front();
    return rep;
}

// ---------------------------------------------------------------------------
// Histogram
// ---------------------------------------------------------------------------

/// Counts of F-values in buckets [edge(i), edge(i+1)) of `range`; the last bucket is
/// truncated at range.hi. Values outside the range go to the overflow counters.
struct Histogram {
    Interval range;
    double width = 1.0;
    double t = 0.0;
    std::vector<std::int64_t> buckets;
    std::int64_t overflow_lo = 0;
    std::int64_t overflow_hi = 0;
    std::int64_t boundary_flags = 0;
    std::int64_t points_enumerated = 0;

    std::size_t size() const noexcept { return buckets.size(); }
    double edge(std::size_t i) const noexcept
    {
        return i >= buckets.size() ? range.hi : range.lo + static_cast<double>(i) * width;
    }
    Interval bucket(std::size_t i) const { return {edge(i), edge(i + 1)}; }
    /// Interval covered by buckets [first, last).
    Interval span(std::size_t first, std::size_t last) const { return {edge(first), edge(last)}; }
    std::int64_t sum(std::size_t first, std::size_t last) const
    {
        return std::accumulate(buckets.begin() + static_cast<std::ptrdiff_t>(first),
                               buckets.begin() + static_cast<std::ptrdiff_t>(last), std::int64_t{0});
    }
    std::int64_t total() const { return sum(0, buckets.size()); }
};

inline std::size_t histogram_bucket_count(const Interval& range, double width)
{
    if (!(width > 0.0))
        throw ValidationError("histogram width must be > 0");
    const double nb = std::ceil(range.length() / width);
    if (nb > 1e8)
        throw ValidationError("histogram would need more than 1e8 buckets");
    auto n = static_cast<std::size_t>(nb);
    // ceil() on a rounded quotient can overshoot by one; drop empty trailing buckets.
    while (n > 0 && range.lo + static_cast<double>(n - 1) * width >= range.hi)
        --n;
    return n;
}

inline Histogram histogram(const PolyForm& F, double t, const Interval& range, double width,
                           CountOptions opts = {})
{
    Histogram h;
    h.range = range;
    h.width = width;
    h.t = t;
    const std::size_t B = histogram_bucket_count(range, width);
    h.buckets.assign(B, 0);
    const std::int64_t r2 = detail::radius_sq_floor(t);

    struct Acc {
        std::vector<std::int64_t> buckets;
        std::int64_t lo = 0, hi = 0, boundary = 0, points = 0;
    };
    auto locate = [&](double f) {
        auto i = static_cast<std::ptrdiff_t>(std::floor((f - range.lo) / width));
        i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(B) - 1);
        while (i > 0 && f < h.edge(static_cast<std::size_t>(i)))
            --i;
        while (static_cast<std::size_t>(i) + 1 < B && f >= h.edge(static_cast<std::size_t>(i) + 1))
            ++i;
        return static_cast<std::size_t>(i);
    };
    auto flag = [&](double f, std::size_t i) {
        return detail::near_boundary(f, h.edge(i)) || detail::near_boundary(f, h.edge(i + 1));
    };
    const double band = 2.0 * boundary_tau * std::max({1.0, std::abs(range.lo), std::abs(range.hi)});
    std::vector<Acc> parts;

    if (opts.exact && F.exact()) {
        const int128 scale = detail::exact_scale(F);
        std::vector<int128> thr(B + 1);
        for (std::size_t i = 0; i <= B; ++i)
            thr[i] = exact::ceil_scaled(h.edge(i), scale);
        const double fscale = static_cast<double>(scale);
        parts = detail::scan_form<Acc, detail::ExactLineKernel>(
            F, r2, opts.half_space, opts.workers, [&](Acc& acc, int128 X) {
                if (acc.buckets.empty())
                    acc.buckets.assign(B, 0);
                ++acc.points;
                const double f = static_cast<double>(X) / fscale;
                if (X < thr[0]) {
                    ++acc.lo;
                    acc.boundary += detail::near_boundary(f, range.lo) ? 1 : 0;
                    return;
                }
                if (X >= thr[B]) {
                    ++acc.hi;
                    acc.boundary += detail::near_boundary(f, range.hi) ? 1 : 0;
                    return;
                }
                const auto it = std::upper_bound(thr.begin(), thr.end(), X);
                const auto i = static_cast<std::size_t>(it - thr.begin()) - 1;
                ++acc.buckets[i];
                acc.boundary += flag(f, i) ? 1 : 0;
            });
    } else {
        parts = detail::scan_form<Acc, detail::FloatLineKernel>(
            F, r2, opts.half_space, opts.workers, [&](Acc& acc, double f) {
                ++acc.points;
                if (f < range.lo || f >= range.hi) {
                    if (f < range.lo)
                        ++acc.lo;
                    else
                        ++acc.hi;
                    if (f > range.lo - band && f < range.hi + band)
                        acc.boundary += (detail::near_boundary(f, range.lo) ||
                                         detail::near_boundary(f, range.hi))
                                            ? 1
                                            : 0;
                    return;
                }
                if (acc.buckets.empty())
                    acc.buckets.assign(B, 0);
                const std::size_t i = locate(f);
                ++acc.buckets[i];
                acc.boundary += flag(f, i) ? 1 : 0;
            });
    }
    const std::int64_t mult = opts.half_space ? 2 : 1;
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < p.buckets.size(); ++i)
            h.buckets[i] += mult * p.buckets[i];
        h.overflow_lo += mult * p.lo;
        h.overflow_hi += mult * p.hi;
        h.boundary_flags += mult * p.boundary;
        h.points_enumerated += mult * p.points;
    }
    if (!opts.half_space)
        return h;
    // Origin, F(0) = 0.
    ++h.points_enumerated;
    if (0.0 < range.lo)
        ++h.overflow_lo;
    else if (0.0 >= range.hi)
        ++h.overflow_hi;
    else
        ++h.buckets[locate(0.0)];
    if (B > 0 && range.contains(0.0))
        h.boundary_flags += flag(0.0, locate(0.0)) ? 1 : 0;
    else
        h.boundary_flags +=
            (detail::near_boundary(0.0, range.lo) || detail::near_boundary(0.0, range.hi)) ? 1 : 0;
    return h;
}

// ---------------------------------------------------------------------------
// Lattices
// ---------------------------------------------------------------------------

/// Row basis of the lattice Z^n * rows.
struct LatticeBasis {
    Matrix rows;
    std::optional<RationalMatrix> exact;

    static LatticeBasis identity(std::size_t n)
    {
        return {Matrix::identity(n), RationalMatrix::identity(n)};
    }
    static LatticeBasis from_rational(const RationalMatrix& m) { return {m.to_double(), m}; }

    std::size_t dim() const noexcept { return rows.size(); }
    double covolume() const { return std::abs(determinant(rows)); }
};

inline bool is_prime(std::int64_t p) noexcept
{
    if (p < 2)
        return false;
    if (p % 2 == 0)
        return p == 2;
    for (std::int64_t f = 3; f * f <= p; f += 2)
        if (p % f == 0)
            return false;
    return true;
}

/// p^{-1/n} * B with rows e_i + a_i e_n (i < n) and p e_n; covolume 1.
inline LatticeBasis goldstein_mayer(int n, std::int64_t prime, std::span<const std::int64_t> a)
{
    if (n < 2)
        throw ValidationError("goldstein_mayer needs n >= 2");
    if (!is_prime(prime))
        throw ValidationError(std::to_string(prime) + " is not prime");
    if (a.size() != static_cast<std::size_t>(n - 1))
        throw DimensionMismatch("goldstein_mayer needs n - 1 residues");
    const auto un = static_cast<std::size_t>(n);
    Matrix B(un);
    for (std::size_t i = 0; i + 1 < un; ++i) {
        if (a[i] < 0 || a[i] >= prime)
            throw ValidationError("residues must lie in [0, prime)");
        B(i, i) = 1.0;
        B(i, un - 1) = static_cast<double>(a[i]);
    }
    B(un - 1, un - 1) = static_cast<double>(prime);
    B *= std::pow(static_cast<double>(prime), -1.0 / static_cast<double>(n));
    return {std::move(B), std::nullopt};
}

template <class URBG>
LatticeBasis sample_lattice(int n, std::int64_t prime, URBG& rng)
{
    if (!is_prime(prime))
        throw ValidationError(std::to_string(prime) + " is not prime");
    std::uniform_int_distribution<std::int64_t> res(0, prime - 1);
    std::vector<std::int64_t> a(static_cast<std::size_t>(std::max(n - 1, 0)));
    for (auto& x : a)
        x = res(rng);
    return goldstein_mayer(n, prime, a);
}

namespace detail {

/// Fincke-Pohst enumeration of coefficient vectors m with |m A| <= radius (plus a small
/// relative slack; callers re-check membership). Rows are Gram-Schmidt orthogonalized in
/// order of decreasing length, which keeps the search tree close to the point count for
/// Goldstein-Mayer bases.
class LatticeBallWalker {
public:
    LatticeBallWalker(const Matrix& A, double radius) : A_(A), n_(A.size())
    {
        order_.resize(n_);
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::stable_sort(order_.begin(), order_.end(), [&](std::size_t i, std::size_t j) {
            return norm2(A.row(i)) > norm2(A.row(j));
        });
        // Gram-Schmidt on the permuted rows.
        std::vector<std::vector<double>> bstar(n_, std::vector<double>(n_));
        mu_.assign(n_ * n_, 0.0);
        bnorm_.assign(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            const auto bi = A.row(order_[i]);
            std::copy(bi.begin(), bi.end(), bstar[i].begin());
            for (std::size_t j = 0; j < i; ++j) {
                double dot = 0.0;
                for (std::size_t k = 0; k < n_; ++k)
                    dot += bi[k] * bstar[j][k];
                const double m = dot / bnorm_[j];
                mu_[i * n_ + j] = m;
                for (std::size_t k = 0; k < n_; ++k)
                    bstar[i][k] -= m * bstar[j][k];
            }
            double s = 0.0;
            for (double x : bstar[i])
                s += x * x;
            if (!(s > 0.0))
                throw SingularMatrix("lattice basis is degenerate");
            bnorm_[i] = s;
        }
        r2_ = radius * radius * (1.0 + 1e-9) + 1e-12;
    }

    /// Coefficient values of the top level, in increasing order.
    std::vector<std::int64_t> top_values() const
    {
        const std::size_t top = n_ - 1;
        const double w = std::sqrt(r2_ / bnorm_[top]);
        std::vector<std::int64_t> v;
        for (auto c = static_cast<std::int64_t>(std::ceil(-w)); c <= static_cast<std::int64_t>(std::floor(w)); ++c)
            v.push_back(c);
        return v;
    }

    /// visit(coeffs) for every candidate with the top coefficient fixed; coefficients are
    /// reported in the original row order.
    template <class Visit>
    void walk(std::int64_t top_value, Visit&& visit) const
    {
        std::vector<std::int64_t> c(n_, 0), out(n_, 0);
        const std::size_t top = n_ - 1;
        c[top] = top_value;
        const double y = static_cast<double>(top_value);
        const double used = y * y * bnorm_[top];
        if (used > r2_)
            return;
        if (n_ == 1) {
            emit(c, out, visit);
            return;
        }
        recurse(top - 1, r2_ - used, c, out, visit);
    }

private:
    template <class Visit>
    void emit(const std::vector<std::int64_t>& c, std::vector<std::int64_t>& out, Visit& visit) const
    {
        for (std::size_t i = 0; i < n_; ++i)
            out[order_[i]] = c[i];
        visit(std::span<const std::int64_t>(out));
    }

    template <class Visit>
    void recurse(std::size_t level, double budget, std::vector<std::int64_t>& c,
                 std::vector<std::int64_t>& out, Visit& visit) const
    {
        double center = 0.0;
        for (std::size_t i = level + 1; i < n_; ++i)
            center -= mu_[i * n_ + level] * static_cast<double>(c[i]);
        const double w = std::sqrt(std::max(budget, 0.0) / bnorm_[level]);
        const auto lo = static_cast<std::int64_t>(std::ceil(center - w));
        const auto hi = static_cast<std::int64_t>(std::floor(center + w));
        for (std::int64_t x = lo; x <= hi; ++x) {
            const double y = static_cast<double>(x) - center;
            const double rem = budget - y * y * bnorm_[level];
            if (rem < 0.0)
                continue;
            c[level] = x;
            if (level == 0)
                emit(c, out, visit);
            else
                recurse(level - 1, rem, c, out, visit);
        }
        c[level] = 0;
    }

    const Matrix& A_;
    std::size_t n_;
    std::vector<std::size_t> order_;
    std::vector<double> mu_;
    std::vector<double> bnorm_;
    double r2_ = 0.0;
};

} // namespace detail

/// Visit candidate coefficient vectors m with |m A| <= radius (every such m is visited;
/// a few just outside may be too, so visitors re-check).
template <class Visit>
void enumerate_lattice_ball(const Matrix& A, double radius, Visit&& visit)
{
    detail::LatticeBallWalker walker(A, radius);
    for (std::int64_t top : walker.top_values())
        walker.walk(top, visit);
}

/// Number of nonzero points of Z^n L with |x| <= radius (the Siegel transform of the
/// indicator of the closed ball).
inline std::int64_t count_lattice_ball(const LatticeBasis& L, double radius)
{
    const std::size_t n = L.dim();
    std::int64_t count = 0;
    std::vector<double> x(n);
    const double r2 = radius * radius;
    enumerate_lattice_ball(L.rows, radius, [&](std::span<const std::int64_t> m) {
        bool zero = true;
        double norm_sq = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                s += static_cast<double>(m[i]) * L.rows(i, j);
            x[j] = s;
            norm_sq += s * s;
            zero = zero && m[j] == 0;
        }
        if (!zero && norm_sq <= r2)
            ++count;
    });
    return count;
}

struct RegionCountOptions {
    /// Siegel-transform mode: the origin is never counted.
    bool exclude_origin = false;
    unsigned workers = 0;
};

/// #(Z^n L  intersected with  F0^{-1}(I) and B_t h). Lattice points m L are enumerated
/// through |m L h^{-1}| <= t and tested with F0(m L) in I.
inline std::int64_t count_lattice_in_region(const LatticeBasis& L, const Interval& I,
                                            const Signature& sig, double t, const Matrix& h,
                                            RegionCountOptions opts = {})
{
    const std::size_t n = L.dim();
    if (n != static_cast<std::size_t>(sig.n()) || h.size() != n)
        throw DimensionMismatch("lattice, signature and h dimensions differ");
    if (!(t >= 0.0))
        throw ValidationError("radius must be >= 0");
    const Matrix A = L.rows * inverse(h);
    const detail::LatticeBallWalker walker(A, t);
    const auto tops = walker.top_values();
    const double t2 = t * t;
    auto parts = parallel_map<std::int64_t>(tops.size(), opts.workers, [&](std::size_t k) {
        std::int64_t count = 0;
        std::vector<double> md(n);
        walker.walk(tops[k], [&](std::span<const std::int64_t> m) {
            bool zero = true;
            for (std::size_t i = 0; i < n; ++i) {
                md[i] = static_cast<double>(m[i]);
                zero = zero && m[i] == 0;
            }
            if (zero && opts.exclude_origin)
                return;
            const auto y = row_times(md, A);
            double s = 0.0;
            for (double v : y)
                s += v * v;
            if (s > t2)
                return;
            const double f = eval_f0(sig, std::span<const double>(row_times(md, L.rows)));
            if (!std::isfinite(f))
                throw OverflowError("F0 is not finite at m = " + detail::format_vector(m));
            count += I.contains(f) ? 1 : 0;
        });
        return count;
    });
    return std::accumulate(parts.begin(), parts.end(), std::int64_t{0});
}

/// Exact version for rational L and h: norms and form values in integer arithmetic.
inline std::int64_t count_lattice_in_region(const LatticeBasis& L, const Interval& I,
                                            const Signature& sig, double t, const RationalMatrix& h,
                                            RegionCountOptions opts = {})
{
    if (!L.exact)
        return count_lattice_in_region(L, I, sig, t, h.to_double(), opts);
    const std::size_t n = L.dim();
    if (n != static_cast<std::size_t>(sig.n()) || h.size() != n)
        throw DimensionMismatch("lattice, signature and h dimensions differ");
    if (!(t >= 0.0))
        throw ValidationError("radius must be >= 0");
    const RationalMatrix A = exact::multiply(*L.exact, exact::inverse(h));
    const RationalMatrix& Lx = *L.exact;
    int128 norm_scale;
    if (!exact::checked_mul(A.den(), A.den(), norm_scale))
        throw OverflowError("denominator of L h^-1 too large");
    const int128 norm_limit = exact::floor_square_scaled(t, norm_scale);
    int128 f_scale;
    if (!detail::ipow_checked(Lx.den(), sig.d, f_scale))
        throw OverflowError("den(L)^d overflows 128 bits");
    const int128 lo_i = exact::ceil_scaled(I.lo, f_scale), hi_i = exact::ceil_scaled(I.hi, f_scale);

    const Matrix Ad = A.to_double();
    const detail::LatticeBallWalker walker(Ad, t);
    const auto tops = walker.top_values();
    auto parts = parallel_map<std::int64_t>(tops.size(), opts.workers, [&](std::size_t k) {
        std::int64_t count = 0;
        std::vector<int128> y(n), x(n);
        walker.walk(tops[k], [&](std::span<const std::int64_t> m) {
            bool zero = true;
            for (std::size_t i = 0; i < n; ++i)
                zero = zero && m[i] == 0;
            if (zero && opts.exclude_origin)
                return;
            auto overflow = [&] {
                return OverflowError("value overflows 128 bits at m = " + detail::format_vector(m));
            };
            int128 norm = 0;
            for (std::size_t j = 0; j < n; ++j) {
                int128 sy = 0, sx = 0, t1;
                for (std::size_t i = 0; i < n; ++i) {
                    if (!exact::checked_mul(m[i], A.num(i, j), t1) || !exact::checked_add(sy, t1, sy))
                        throw overflow();
                    if (!exact::checked_mul(m[i], Lx.num(i, j), t1) || !exact::checked_add(sx, t1, sx))
                        throw overflow();
                }
                y[j] = sy;
                x[j] = sx;
                if (!exact::checked_mul(sy, sy, t1) || !exact::checked_add(norm, t1, norm))
                    throw overflow();
            }
            if (norm > norm_limit)
                return;
            int128 X;
            if (!detail::f0_exact<int128>(sig, x, X))
                throw overflow();
            count += (X >= lo_i && X < hi_i) ? 1 : 0;
        });
        return count;
    });
    return std::accumulate(parts.begin(), parts.end(), std::int64_t{0});
}

} // namespace formcount
