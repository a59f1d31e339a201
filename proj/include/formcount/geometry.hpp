#pragma once

// Cone measure on l^d spheres, the volume constant c_F, leading-term volume
// prediction and Monte Carlo volume estimation for F^{-1}(I) within a ball.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "formcount/errors.hpp"
#include "formcount/forms.hpp"
#include "formcount/parallel.hpp"
#include "formcount/polynomial.hpp"
#include "formcount/rng.hpp"

namespace formcount {

/// Samples per RNG substream block. Fixed so results do not depend on worker count.
inline constexpr std::int64_t sample_block = 1 << 14;

/// Total cone-measure mass of the unit l^d sphere in R^k: k * vol(B_d^k), so that
/// dv = r^{k-1} dr dw in l^d polar coordinates.
inline double sphere_mass(int k, int d)
{
    if (k < 1 || d < 2 || d % 2 != 0)
        throw ValidationError("sphere_mass needs k >= 1 and even d >= 2");
    const double kd = static_cast<double>(k), dd = static_cast<double>(d);
    return kd * std::pow(2.0 * std::tgamma(1.0 + 1.0 / dd), kd) / std::tgamma(1.0 + kd / dd);
}

/// A point on the unit l^d sphere.
struct SpherePoint {
    std::vector<double> u;
};

/// Fill `out` with a cone-measure-uniform point of the unit l^d sphere: normalize
/// i.i.d. variates with density proportional to exp(-|x|^d).
template <class URBG>
void sample_cone_into(std::span<double> out, int d, URBG& rng)
{
    std::gamma_distribution<double> gamma(1.0 / static_cast<double>(d), 1.0);
    std::uniform_int_distribution<int> coin(0, 1);
    const double inv_d = 1.0 / static_cast<double>(d);
    for (;;) {
        double norm_d = 0.0;
        for (double& x : out) {
            const double g = gamma(rng); // |x|^d
            x = std::pow(g, inv_d);
            if (coin(rng))
                x = -x;
            norm_d += g;
        }
        if (norm_d > 0.0) {
            // Rescale, then correct the residual rounding of sum |x|^d.
            double scale = std::pow(norm_d, -inv_d);
            for (double& x : out)
                x *= scale;
            double s = 0.0;
            for (double x : out)
                s += std::pow(std::abs(x), d);
            scale = std::pow(s, -inv_d);
            for (double& x : out)
                x *= scale;
            return;
        }
    }
}

template <class URBG>
SpherePoint sample_cone(int k, int d, URBG& rng)
{
    if (k < 1 || d < 2 || d % 2 != 0)
        throw ValidationError("sample_cone needs k >= 1 and even d >= 2");
    SpherePoint p{std::vector<double>(static_cast<std::size_t>(k))};
    sample_cone_into(std::span<double>(p.u), d, rng);
    return p;
}

namespace detail {

struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::int64_t count = 0;

    void add(double x) noexcept
    {
        sum += x;
        sum_sq += x * x;
        ++count;
    }
    void merge(const Moments& o) noexcept
    {
        sum += o.sum;
        sum_sq += o.sum_sq;
        count += o.count;
    }
    double mean() const noexcept { return count ? sum / static_cast<double>(count) : 0.0; }
    /// Standard error of the mean.
    double std_error() const noexcept
    {
        if (count < 2)
            return 0.0;
        const double m = mean();
        const double var = std::max(0.0, (sum_sq / static_cast<double>(count) - m * m)) *
                           static_cast<double>(count) / static_cast<double>(count - 1);
        return std::sqrt(var / static_cast<double>(count));
    }
};

/// Run `per_block(engine, count, moments)` over fixed-size blocks and merge in block order.
template <class PerBlock>
Moments blocked_moments(std::int64_t samples, std::uint64_t seed, unsigned workers,
                        PerBlock&& per_block)
{
    const auto blocks = static_cast<std::size_t>((samples + sample_block - 1) / sample_block);
    auto parts = parallel_map<Moments>(blocks, workers, [&](std::size_t b) {
        Engine rng = substream(seed, b);
        const std::int64_t begin = static_cast<std::int64_t>(b) * sample_block;
        const std::int64_t count = std::min(sample_block, samples - begin);
        Moments m;
        per_block(rng, count, m);
        return m;
    });
    Moments total;
    for (const auto& p : parts)
        total.merge(p);
    return total;
}

} // namespace detail

/// Monte Carlo estimate of c_F = mass_p mass_q / (d (n - d)) * E |(w1 + w2) g^{-1}|^{d-n},
/// with w1, w2 independent cone samples embedded in complementary coordinates.
/// The result is cached on the form.
inline CfEstimate compute_cf(const PolyForm& F, std::int64_t samples, std::uint64_t seed,
                             unsigned workers = 0)
{
    if (samples < 1)
        throw ValidationError("compute_cf needs samples >= 1");
    const Signature& sig = F.sig();
    sig.require_counting_regime();
    const int n = sig.n(), p = sig.p, d = sig.d;
    const Matrix& ginv = F.g_inv();
    const double power = -static_cast<double>(n - d);

    auto m = detail::blocked_moments(samples, seed, workers, [&](Engine& rng, std::int64_t count,
                                                                 detail::Moments& acc) {
        std::vector<double> w(static_cast<std::size_t>(n));
        std::vector<double> y(static_cast<std::size_t>(n));
        std::span<double> w1(w.data(), static_cast<std::size_t>(p));
        std::span<double> w2(w.data() + p, static_cast<std::size_t>(n - p));
        for (std::int64_t s = 0; s < count; ++s) {
            sample_cone_into(w1, d, rng);
            sample_cone_into(w2, d, rng);
            double norm_sq = 0.0;
            for (int j = 0; j < n; ++j) {
                double acc_j = 0.0;
                for (int i = 0; i < n; ++i)
                    acc_j += w[static_cast<std::size_t>(i)] * ginv(static_cast<std::size_t>(i),
                                                                   static_cast<std::size_t>(j));
                norm_sq += acc_j * acc_j;
            }
            const double val = std::pow(norm_sq, 0.5 * power);
            if (!std::isfinite(val))
                throw InternalError("c_F integrand is not finite");
            acc.add(val);
        }
    });

    const double factor = sphere_mass(p, d) * sphere_mass(sig.q, d) / (d * (n - d));
    CfEstimate est{factor * m.mean(), factor * m.std_error(), samples, seed};
    F.cache_cf(est);
    return est;
}

inline constexpr std::int64_t default_cf_samples = 1'000'000;
inline constexpr std::uint64_t default_cf_seed = 0;

/// Cached c_F, computing it with default settings if absent.
inline CfEstimate cf_of(const PolyForm& F, unsigned workers = 0)
{
    if (auto c = F.cached_cf())
        return *c;
    return compute_cf(F, default_cf_samples, default_cf_seed, workers);
}

/// Leading term c_F |I| T^{n-d}. The O(T^{n-d-1} log T) remainder belongs to the caller.
inline double predicted_volume(double cf, const Signature& sig, const Interval& I, double T)
{
    if (!(T > 0.0))
        throw ValidationError("predicted_volume needs T > 0");
    if (I.empty())
        return 0.0;
    return cf * I.length() * std::pow(T, sig.n() - sig.d);
}

inline double predicted_volume(const PolyForm& F, const Interval& I, double T)
{
    return predicted_volume(cf_of(F).value, F.sig(), I, T);
}

// ---------------------------------------------------------------------------
// Monte Carlo volume of F^{-1}(I) within B_T
// ---------------------------------------------------------------------------

inline double ball_volume(int n, double r)
{
    const double nd = static_cast<double>(n);
    return std::pow(std::numbers::pi, nd / 2.0) / std::tgamma(nd / 2.0 + 1.0) * std::pow(r, nd);
}

enum class VolumeMethod {
    /// Uniform points in B_T; estimate vol(B_T) * hit fraction, binomial error.
    hit_or_miss,
    /// Uniform random chords of B_T, each integrated exactly along its line.
    chord,
};

inline const char* to_string(VolumeMethod m) noexcept
{
    return m == VolumeMethod::chord ? "chord" : "hit_or_miss";
}

inline VolumeMethod volume_method_from_string(const std::string& s)
{
    if (s == "chord")
        return VolumeMethod::chord;
    if (s == "hit_or_miss")
        return VolumeMethod::hit_or_miss;
    throw ValidationError("unknown volume method '" + s + "'");
}

struct VolumeEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    std::int64_t samples = 0;
    VolumeMethod method = VolumeMethod::chord;
};

/// One region F^{-1}(I) within B_T.
struct FormRegion {
    Interval I;
    double T = 0.0;
};

namespace detail {

inline double binomial(int n, int k)
{
    double r = 1.0;
    for (int i = 1; i <= k; ++i)
        r = r * (n - k + i) / i;
    return r;
}

/// Coefficients of s -> F(a + s b) where a g = alpha, b g = beta.
inline void line_polynomial(const Signature& sig, std::span<const double> alpha,
                            std::span<const double> beta, std::span<double> coeffs)
{
    const int d = sig.d;
    std::fill(coeffs.begin(), coeffs.end(), 0.0);
    for (int i = 0; i < sig.n(); ++i) {
        const double sign = i < sig.p ? 1.0 : -1.0;
        const double a = alpha[static_cast<std::size_t>(i)], b = beta[static_cast<std::size_t>(i)];
        for (int k = 0; k <= d; ++k)
            coeffs[static_cast<std::size_t>(k)] +=
                sign * binomial(d, k) * std::pow(a, d - k) * std::pow(b, k);
    }
}

template <class URBG>
void gaussian_unit(std::span<double> v, URBG& rng, std::normal_distribution<double>& normal)
{
    for (;;) {
        double s = 0.0;
        for (double& x : v) {
            x = normal(rng);
            s += x * x;
        }
        if (s > 0.0) {
            const double inv = 1.0 / std::sqrt(s);
            for (double& x : v)
                x *= inv;
            return;
        }
    }
}

} // namespace detail

/// Volumes of several regions from one common sample set. For nested regions the
/// estimates are monotone and differences are exact differences of estimates.
inline std::vector<VolumeEstimate> mc_volume_batch(const PolyForm& F,
                                                   std::span<const FormRegion> regions,
                                                   std::int64_t samples, std::uint64_t seed,
                                                   VolumeMethod method = VolumeMethod::chord,
                                                   unsigned workers = 0)
{
    if (samples < 1)
        throw ValidationError("mc_volume needs samples >= 1");
    double T_max = 0.0;
    for (const auto& r : regions) {
        if (!(r.T > 0.0))
            throw ValidationError("mc_volume needs T > 0");
        T_max = std::max(T_max, r.T);
    }
    const std::size_t R = regions.size();
    std::vector<VolumeEstimate> out(R);
    if (R == 0)
        return out;
    const Signature& sig = F.sig();
    const int n = sig.n();
    const auto un = static_cast<std::size_t>(n);
    const Matrix& g = F.g();

    const auto blocks = static_cast<std::size_t>((samples + sample_block - 1) / sample_block);
    auto parts = parallel_map<std::vector<detail::Moments>>(blocks, workers, [&](std::size_t b) {
        Engine rng = substream(seed, b);
        const std::int64_t begin = static_cast<std::int64_t>(b) * sample_block;
        const std::int64_t count = std::min(sample_block, samples - begin);
        std::vector<detail::Moments> acc(R);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::vector<double> e(un), w(un), alpha(un), beta(un), x(un),
            coeffs(static_cast<std::size_t>(sig.d + 1));
        auto times_g = [&](std::span<const double> v, std::span<double> outv) {
            for (std::size_t j = 0; j < un; ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < un; ++i)
                    s += v[i] * g(i, j);
                outv[j] = s;
            }
        };
        for (std::int64_t s = 0; s < count; ++s) {
            if (method == VolumeMethod::hit_or_miss) {
                detail::gaussian_unit(e, rng, normal);
                const double r = T_max * std::pow(unif(rng), 1.0 / n);
                for (std::size_t i = 0; i < un; ++i)
                    x[i] = r * e[i];
                times_g(x, alpha);
                double val = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double t = std::pow(alpha[static_cast<std::size_t>(i)], sig.d);
                    val += i < sig.p ? t : -t;
                }
                for (std::size_t k = 0; k < R; ++k)
                    acc[k].add(r <= regions[k].T && regions[k].I.contains(val) ? 1.0 : 0.0);
            } else {
                // Line w + s e: e uniform on the sphere, w uniform in the orthogonal
                // (n-1)-disk of radius T_max.
                detail::gaussian_unit(e, rng, normal);
                for (;;) {
                    double dot = 0.0;
                    for (std::size_t i = 0; i < un; ++i) {
                        w[i] = normal(rng);
                        dot += w[i] * e[i];
                    }
                    double nn = 0.0;
                    for (std::size_t i = 0; i < un; ++i) {
                        w[i] -= dot * e[i];
                        nn += w[i] * w[i];
                    }
                    if (nn > 0.0) {
                        const double rad =
                            T_max * std::pow(unif(rng), 1.0 / static_cast<double>(n - 1));
                        const double scale = rad / std::sqrt(nn);
                        for (double& wi : w)
                            wi *= scale;
                        break;
                    }
                }
                double w_sq = 0.0;
                for (double wi : w)
                    w_sq += wi * wi;
                times_g(w, alpha);
                times_g(e, beta);
                detail::line_polynomial(sig, alpha, beta, coeffs);
                for (std::size_t k = 0; k < R; ++k) {
                    const double T = regions[k].T;
                    double len = 0.0;
                    if (w_sq < T * T && !regions[k].I.empty()) {
                        const double h = std::sqrt(T * T - w_sq);
                        len = poly::band_measure(coeffs, -h, h, regions[k].I.lo, regions[k].I.hi);
                    }
                    acc[k].add(len);
                }
            }
        }
        return acc;
    });

    std::vector<detail::Moments> total(R);
    for (const auto& part : parts)
        for (std::size_t k = 0; k < R; ++k)
            total[k].merge(part[k]);
    const double measure = method == VolumeMethod::chord ? ball_volume(n - 1, T_max)
                                                         : ball_volume(n, T_max);
    for (std::size_t k = 0; k < R; ++k) {
        out[k].samples = samples;
        out[k].method = method;
        if (regions[k].I.empty())
            continue;
        out[k].estimate = measure * total[k].mean();
        if (method == VolumeMethod::hit_or_miss) {
            const double ph = total[k].mean();
            out[k].std_error = measure * std::sqrt(ph * (1.0 - ph) / static_cast<double>(samples));
        } else {
            out[k].std_error = measure * total[k].std_error();
        }
    }
    return out;
}

inline VolumeEstimate mc_volume(const PolyForm& F, const Interval& I, double T,
                                std::int64_t samples, std::uint64_t seed,
                                VolumeMethod method = VolumeMethod::chord, unsigned workers = 0)
{
    const FormRegion region{I, T};
    return mc_volume_batch(F, std::span<const FormRegion>(&region, 1), samples, seed, method,
                           workers)
        .front();
}

} // namespace formcount
