#pragma once

// Forms F = g.F0 with F0(v) = sum_{i<=p} v_i^d - sum_{i>p} v_i^d, intervals, shrinking
// interval families, and the matrix norm max(|g|_op, |g^-1|_op).

#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "formcount/errors.hpp"
#include "formcount/exact.hpp"
#include "formcount/linalg.hpp"

namespace formcount {

using nlohmann::json;

struct Signature {
    int p = 1;
    int q = 1;
    int d = 2;

    Signature() = default;
    Signature(int p_, int q_, int d_) : p(p_), q(q_), d(d_)
    {
        if (p < 1 || q < 1)
            throw ValidationError("signature needs p >= 1 and q >= 1");
        if (d < 2 || d % 2 != 0)
            throw ValidationError("degree must be even and >= 2, got " + std::to_string(d));
    }

    int n() const noexcept { return p + q; }

    /// Counting asymptotics need n > d; the volume constant is undefined otherwise.
    void require_counting_regime() const
    {
        if (n() <= d)
            throw ValidationError("need n = p + q > d, got n = " + std::to_string(n()) +
                                  ", d = " + std::to_string(d));
    }

    /// Dimension of G/K = SL_n(R)/SO(n).
    int symmetric_space_dim() const noexcept { return (n() + 2) * (n() - 1) / 2; }

    friend bool operator==(const Signature&, const Signature&) = default;
};

/// Half-open interval [lo, hi).
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    Interval() = default;
    Interval(double lo_, double hi_) : lo(lo_), hi(hi_)
    {
        if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
            throw ValidationError("interval needs finite lo <= hi");
    }

    double length() const noexcept { return hi - lo; }
    bool empty() const noexcept { return hi <= lo; }
    bool contains(double x) const noexcept { return lo <= x && x < hi; }
    bool contains(const Interval& other) const noexcept
    {
        return other.empty() || (lo <= other.lo && other.hi <= hi);
    }
    Interval negated() const { return {-hi, -lo}; }

    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Intervals of length c * t^-kappa centred at xi.
struct ShrinkingFamily {
    double xi = 0.0;
    double c = 1.0;
    double kappa = 0.0;

    ShrinkingFamily() = default;
    ShrinkingFamily(double xi_, double c_, double kappa_) : xi(xi_), c(c_), kappa(kappa_)
    {
        if (!(c > 0.0))
            throw ValidationError("shrinking family needs c > 0");
        if (!(kappa >= 0.0))
            throw ValidationError("shrinking family needs kappa >= 0");
    }
};

inline Interval shrinking_interval(const ShrinkingFamily& fam, double t)
{
    if (!(t > 0.0))
        throw ValidationError("shrinking_interval needs t > 0");
    const double half = fam.kappa == 0.0 ? fam.c / 2.0 : fam.c * std::pow(t, -fam.kappa) / 2.0;
    return {fam.xi - half, fam.xi + half};
}

/// Monte Carlo estimate of the leading volume constant c_F.
struct CfEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t samples = 0;
    std::uint64_t seed = 0;
};

inline void to_json(json& j, const CfEstimate& e)
{
    j = json{{"value", e.value}, {"stderr", e.std_error}, {"samples", e.samples}, {"seed", e.seed}};
}

inline void from_json(const json& j, CfEstimate& e)
{
    e.value = j.at("value").get<double>();
    e.std_error = j.at("stderr").get<double>();
    e.samples = j.at("samples").get<std::int64_t>();
    e.seed = j.value("seed", std::uint64_t{0});
}

// ---------------------------------------------------------------------------
// F0
// ---------------------------------------------------------------------------

namespace detail {

inline void check_length(const Signature& sig, std::size_t len)
{
    if (len != static_cast<std::size_t>(sig.n()))
        throw DimensionMismatch("vector of length " + std::to_string(len) + " for n = " +
                                std::to_string(sig.n()));
}

inline bool ipow_checked(int128 x, int d, int128& out) noexcept
{
    int128 r = 1;
    for (int k = 0; k < d; ++k)
        if (!exact::checked_mul(r, x, r))
            return false;
    out = r;
    return true;
}

/// F0 of an integer vector into `out`; false on 128-bit overflow.
template <class Int>
bool f0_exact(const Signature& sig, std::span<const Int> v, int128& out) noexcept
{
    int128 acc = 0;
    for (int i = 0; i < sig.n(); ++i) {
        int128 term;
        if (!ipow_checked(static_cast<int128>(v[i]), sig.d, term))
            return false;
        if (i >= sig.p)
            term = -term;
        if (!exact::checked_add(acc, term, acc))
            return false;
    }
    out = acc;
    return true;
}

inline std::string format_vector(std::span<const std::int64_t> v)
{
    std::string s = "(";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i)
            s += ",";
        s += std::to_string(v[i]);
    }
    return s + ")";
}

} // namespace detail

/// Exact F0 on an integer vector.
inline int128 eval_f0(const Signature& sig, std::span<const std::int64_t> v)
{
    detail::check_length(sig, v.size());
    int128 out;
    if (!detail::f0_exact(sig, v, out))
        throw OverflowError("F0 overflows 128 bits at v = " + detail::format_vector(v));
    return out;
}

/// F0 on a real vector. Integer-valued inputs take the exact integer path.
inline double eval_f0(const Signature& sig, std::span<const double> v)
{
    detail::check_length(sig, v.size());
    bool integral = true;
    for (double x : v)
        if (!(std::abs(x) < 0x1p53) || std::trunc(x) != x) {
            integral = false;
            break;
        }
    if (integral) {
        std::vector<std::int64_t> iv(v.size());
        for (std::size_t i = 0; i < v.size(); ++i)
            iv[i] = static_cast<std::int64_t>(v[i]);
        int128 out;
        if (detail::f0_exact<std::int64_t>(sig, iv, out))
            return static_cast<double>(out);
    }
    CompensatedSum s;
    for (int i = 0; i < sig.n(); ++i) {
        const double term = std::pow(v[i], sig.d);
        s.add(i < sig.p ? term : -term);
    }
    return s.value();
}

// ---------------------------------------------------------------------------
// PolyForm
// ---------------------------------------------------------------------------

/// A form g.F0, v -> F0(v g), with g of determinant one.
///
/// Immutable after construction except for the shared c_F cache, which is
/// guarded by a mutex and shared between copies.
class PolyForm {
public:
    static constexpr double det_tolerance = 1e-9;

    PolyForm(Signature sig, Matrix g) : sig_(sig), g_(std::move(g)) { init(); }

    /// Exact rational g; also validates det(g) == 1 exactly.
    PolyForm(Signature sig, RationalMatrix g) : sig_(sig), g_(g.to_double()), exact_(std::move(g))
    {
        if (exact_->size() != static_cast<std::size_t>(sig_.n()))
            throw DimensionMismatch("matrix size does not match n");
        if (exact::determinant(*exact_) != 1)
            throw ValidationError("rational g must have determinant exactly 1");
        init();
    }

    static PolyForm identity(Signature sig)
    {
        return {sig, RationalMatrix::identity(static_cast<std::size_t>(sig.n()))};
    }

    const Signature& sig() const noexcept { return sig_; }
    int n() const noexcept { return sig_.n(); }
    const Matrix& g() const noexcept { return g_; }
    const Matrix& g_inv() const noexcept { return g_inv_; }
    const std::optional<RationalMatrix>& exact() const noexcept { return exact_; }

    std::optional<CfEstimate> cached_cf() const
    {
        std::lock_guard lock(cache_->mutex);
        return cache_->value;
    }
    void cache_cf(const CfEstimate& e) const
    {
        std::lock_guard lock(cache_->mutex);
        cache_->value = e;
    }

private:
    struct CfCache {
        std::mutex mutex;
        std::optional<CfEstimate> value;
    };

    void init()
    {
        if (g_.size() != static_cast<std::size_t>(sig_.n()))
            throw DimensionMismatch("g is " + std::to_string(g_.size()) + "x" +
                                    std::to_string(g_.size()) + " but n = " +
                                    std::to_string(sig_.n()));
        for (double x : g_.data())
            if (!std::isfinite(x))
                throw ValidationError("g has non-finite entries");
        const double det = determinant(g_);
        if (!(std::abs(det - 1.0) <= det_tolerance))
            throw ValidationError("det(g) = " + std::to_string(det) + " is not 1 within 1e-9");
        g_inv_ = inverse(g_);
        const Matrix prod = g_ * g_inv_;
        for (std::size_t i = 0; i < g_.size(); ++i)
            for (std::size_t j = 0; j < g_.size(); ++j)
                if (std::abs(prod(i, j) - (i == j ? 1.0 : 0.0)) > det_tolerance)
                    throw ValidationError("g is too ill-conditioned to invert within 1e-9");
    }

    Signature sig_;
    Matrix g_;
    Matrix g_inv_;
    std::optional<RationalMatrix> exact_;
    std::shared_ptr<CfCache> cache_ = std::make_shared<CfCache>();
};

/// F(v) = F0(v g), with compensated summation in the product v g.
inline double eval_form(const PolyForm& F, std::span<const double> v)
{
    detail::check_length(F.sig(), v.size());
    const auto vg = row_times(v, F.g());
    CompensatedSum s;
    for (int i = 0; i < F.n(); ++i) {
        const double term = std::pow(vg[static_cast<std::size_t>(i)], F.sig().d);
        s.add(i < F.sig().p ? term : -term);
    }
    return s.value();
}

/// Exact value of F at an integer vector for rational g: returns (numerator, denominator)
/// with F(v) = numerator / denominator, denominator = den(g)^d.
inline std::pair<int128, int128> eval_form_exact(const PolyForm& F, std::span<const std::int64_t> v)
{
    detail::check_length(F.sig(), v.size());
    if (!F.exact())
        throw ValidationError("form has no exact rational matrix");
    const auto& G = *F.exact();
    const std::size_t n = G.size();
    std::vector<int128> vg(n, 0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            int128 term;
            if (!exact::checked_mul(static_cast<int128>(v[i]), G.num(i, j), term) ||
                !exact::checked_add(vg[j], term, vg[j]))
                throw OverflowError("v g overflows at v = " + detail::format_vector(v));
        }
    int128 value;
    if (!detail::f0_exact<int128>(F.sig(), vg, value))
        throw OverflowError("F(v) overflows 128 bits at v = " + detail::format_vector(v));
    int128 den;
    if (!detail::ipow_checked(G.den(), F.sig().d, den))
        throw OverflowError("den(g)^d overflows 128 bits");
    return {value, den};
}

inline double matrix_norm(const Matrix& g)
{
    return std::max(operator_norm(g), operator_norm(inverse(g)));
}

inline bool in_norm_ball(const Matrix& g, double eps)
{
    if (!(eps > 0.0))
        throw ValidationError("in_norm_ball needs eps > 0");
    return matrix_norm(g) < 1.0 + eps;
}

// ---------------------------------------------------------------------------
// Random forms
// ---------------------------------------------------------------------------

/// g = exp(eps X) for Gaussian trace-zero X, rescaled so det(g) = 1 to rounding.
template <class URBG>
PolyForm random_form(Signature sig, double eps, URBG& rng)
{
    if (!(eps > 0.0 && eps <= 0.5))
        throw ValidationError("random_form needs 0 < eps <= 0.5");
    const auto n = static_cast<std::size_t>(sig.n());
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix x(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            x(i, j) = normal(rng);
    double tr = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        tr += x(i, i);
    for (std::size_t i = 0; i < n; ++i)
        x(i, i) -= tr / static_cast<double>(n);
    x *= eps;
    Matrix g = expm(x);
    const double det = determinant(g);
    g *= 1.0 / std::pow(det, 1.0 / static_cast<double>(n));
    return {sig, std::move(g)};
}

/// Product of `factors` elementary unipotent matrices I + (k/den) E_ij with |k| <= max_k.
/// Determinant is exactly one.
template <class URBG>
RationalMatrix random_unipotent_rational(std::size_t n, std::int64_t den, int factors,
                                         std::int64_t max_k, URBG& rng)
{
    if (n < 2)
        throw ValidationError("random_unipotent_rational needs n >= 2");
    std::uniform_int_distribution<std::size_t> idx(0, n - 1);
    std::uniform_int_distribution<std::int64_t> kdist(-max_k, max_k);
    RationalMatrix g = RationalMatrix::identity(n);
    for (int f = 0; f < factors; ++f) {
        std::size_t i = idx(rng), j = idx(rng);
        while (j == i)
            j = idx(rng);
        std::vector<std::int64_t> num(n * n, 0);
        for (std::size_t k = 0; k < n; ++k)
            num[k * n + k] = den;
        num[i * n + j] = kdist(rng);
        g = exact::multiply(g, RationalMatrix(n, std::move(num), den));
    }
    return g;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline json form_to_json(const PolyForm& F)
{
    json j{{"p", F.sig().p}, {"q", F.sig().q}, {"d", F.sig().d}};
    if (F.exact()) {
        j["g_num"] = F.exact()->numerators();
        j["g_den"] = F.exact()->den();
    } else {
        j["g"] = std::vector<double>(F.g().data().begin(), F.g().data().end());
    }
    return j;
}

/// Accepts {p, q, d, g} or {p, q, d, g_num, g_den}; with neither, g is the identity.
inline PolyForm form_from_json(const json& j)
{
    const Signature sig(j.at("p").get<int>(), j.at("q").get<int>(), j.at("d").get<int>());
    const auto n = static_cast<std::size_t>(sig.n());
    if (j.contains("g_num")) {
        const auto den = j.value("g_den", std::int64_t{1});
        return {sig, RationalMatrix(n, j.at("g_num").get<std::vector<std::int64_t>>(), den)};
    }
    if (j.contains("g") && !j.at("g").is_null())
        return {sig, Matrix(n, j.at("g").get<std::vector<double>>())};
    return PolyForm::identity(sig);
}

/// FNV-1a over the canonical JSON dump.
inline std::uint64_t fnv1a(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t form_hash(const PolyForm& F) { return fnv1a(form_to_json(F).dump()); }

} // namespace formcount
