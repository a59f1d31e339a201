#pragma once

// Discrepancy of lattice counts against volumes, Siegel/Rogers moment experiments over
// random unimodular lattices, and the interpolation inequality for nested regions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "formcount/errors.hpp"
#include "formcount/forms.hpp"
#include "formcount/geometry.hpp"
#include "formcount/lattice.hpp"
#include "formcount/parallel.hpp"
#include "formcount/rng.hpp"

namespace formcount {

enum class VolumeMode {
    /// Leading term c_F |I| t^(n-d); the lower-order remainder ends up inside disc.
    predicted,
    monte_carlo,
    /// Exact volume (Euclidean balls).
    closed_form,
};

inline const char* to_string(VolumeMode m) noexcept
{
    switch (m) {
    case VolumeMode::predicted:
        return "predicted";
    case VolumeMode::monte_carlo:
        return "monte_carlo";
    case VolumeMode::closed_form:
        break;
    }
    return "closed_form";
}

inline VolumeMode volume_mode_from_string(const std::string& s)
{
    if (s == "predicted")
        return VolumeMode::predicted;
    if (s == "monte_carlo" || s == "mc")
        return VolumeMode::monte_carlo;
    if (s == "closed_form")
        return VolumeMode::closed_form;
    throw ValidationError("unknown volume mode '" + s + "'");
}

/// D = |count - volume| for one region and one lattice.
struct DiscrepancySample {
    std::uint64_t lattice_seed = 0;
    std::int64_t count = 0;
    double volume = 0.0;
    double disc = 0.0;
    /// Standard error of `volume` (0 for closed-form volumes).
    double volume_stderr = 0.0;
    VolumeMode volume_mode = VolumeMode::predicted;
};

inline DiscrepancySample make_sample(std::uint64_t seed, std::int64_t count, double volume,
                                     double volume_stderr, VolumeMode mode)
{
    return {seed, count, volume, std::abs(static_cast<double>(count) - volume), volume_stderr, mode};
}

struct DiscrepancyOptions {
    VolumeMode mode = VolumeMode::predicted;
    /// Monte Carlo volume samples and seed (also used for c_F in predicted mode).
    std::int64_t samples = default_cf_samples;
    std::uint64_t seed = default_cf_seed;
    unsigned workers = 0;
    bool exact = true;
};

/// D(Z^n g, A) for A = {v : F(v) in I, |v| <= t}; the lattice seed field is unused (0).
inline DiscrepancySample discrepancy(const PolyForm& F, const Interval& I, double t,
                                     const DiscrepancyOptions& opts = {})
{
    if (!(t > 0.0))
        throw ValidationError("discrepancy needs t > 0");
    F.sig().require_counting_regime();
    CountOptions co;
    co.workers = opts.workers;
    co.exact = opts.exact;
    const std::int64_t count = count_in_interval(F, I, t, co).count;
    if (I.empty())
        return make_sample(0, count, 0.0, 0.0, opts.mode);
    if (opts.mode == VolumeMode::predicted) {
        const auto cf = compute_cf(F, opts.samples, opts.seed, opts.workers);
        const double scale = I.length() * std::pow(t, F.n() - F.sig().d);
        return make_sample(0, count, cf.value * scale, cf.std_error * scale, opts.mode);
    }
    const auto v = mc_volume(F, I, t, opts.samples, opts.seed, VolumeMethod::chord, opts.workers);
    return make_sample(0, count, v.estimate, v.std_error, opts.mode);
}

// ---------------------------------------------------------------------------
// Moments over random lattices
// ---------------------------------------------------------------------------

/// Closed Euclidean ball of the given volume, centred at the origin.
struct EuclideanBall {
    int n = 3;
    double volume = 100.0;

    double radius() const
    {
        return std::pow(volume / ball_volume(n, 1.0), 1.0 / static_cast<double>(n));
    }
};

/// {v : F0(v) in I, |v| <= t} for the standard form of `sig`.
struct FormRegionSpec {
    Signature sig{2, 1, 2};
    Interval I{-0.5, 0.5};
    double t = 10.0;
    /// Samples for the Monte Carlo volume of the region.
    std::int64_t volume_samples = 1 << 20;
};

using MomentRegion = std::variant<EuclideanBall, FormRegionSpec>;

inline int region_dim(const MomentRegion& r)
{
    return std::visit(
        [](const auto& x) {
            if constexpr (std::is_same_v<std::decay_t<decltype(x)>, EuclideanBall>)
                return x.n;
            else
                return x.sig.n();
        },
        r);
}

struct MomentReport {
    std::int64_t k_samples = 0;
    double mean_count = 0.0;
    /// Standard error of mean_count.
    double mean_count_stderr = 0.0;
    double mean_sq_disc = 0.0;
    double vol = 0.0;
    double ratio = 0.0;
    std::int64_t prime = 0;
    std::uint64_t seed = 0;
    std::vector<DiscrepancySample> samples;
};

inline void to_json(json& j, const MomentReport& r)
{
    j = json{{"k_samples", r.k_samples}, {"mean_count", r.mean_count},
             {"mean_count_stderr", r.mean_count_stderr}, {"mean_sq_disc", r.mean_sq_disc},
             {"vol", r.vol}, {"ratio", r.ratio}, {"prime", r.prime}, {"seed", r.seed}};
}

struct MomentOptions {
    unsigned workers = 0;
    /// Seed for the Monte Carlo volume of form regions.
    std::uint64_t volume_seed = 0;
};

/// Samples k lattices p^(-1/n) L_a and counts their nonzero points in the region. Lattice i
/// uses the RNG substream (seed, i); its seed is recorded as lattice_seed.
inline MomentReport second_moment_experiment(const MomentRegion& region, std::int64_t k,
                                             std::int64_t prime, std::uint64_t seed,
                                             const MomentOptions& opts = {})
{
    if (k < 2)
        throw ValidationError("second_moment_experiment needs k >= 2");
    if (!is_prime(prime))
        throw ValidationError(std::to_string(prime) + " is not prime");
    const int n = region_dim(region);
    if (n < 2)
        throw ValidationError("lattice sampling needs n >= 2");

    double vol = 0.0, vol_err = 0.0;
    if (const auto* ball = std::get_if<EuclideanBall>(&region)) {
        if (!(ball->volume > 0.0) || !std::isfinite(ball->volume))
            throw ValidationError("ball volume must be finite and > 0");
        vol = ball->volume;
    } else {
        const auto& fr = std::get<FormRegionSpec>(region);
        fr.sig.require_counting_regime();
        const auto est = mc_volume(PolyForm::identity(fr.sig), fr.I, fr.t, fr.volume_samples,
                                   opts.volume_seed, VolumeMethod::chord, opts.workers);
        vol = est.estimate;
        vol_err = est.std_error;
    }
    if (!(vol > 1.0))
        throw ValidationError("region volume must exceed 1 (got " + std::to_string(vol) + ")");

    const VolumeMode mode =
        std::holds_alternative<EuclideanBall>(region) ? VolumeMode::closed_form : VolumeMode::monte_carlo;
    auto samples = parallel_map<DiscrepancySample>(
        static_cast<std::size_t>(k), opts.workers, [&](std::size_t i) {
            const std::uint64_t ls = substream_seed(seed, i);
            Engine rng(ls);
            const LatticeBasis L = sample_lattice(n, prime, rng);
            std::int64_t count = 0;
            if (const auto* ball = std::get_if<EuclideanBall>(&region)) {
                count = count_lattice_ball(L, ball->radius());
            } else {
                const auto& fr = std::get<FormRegionSpec>(region);
                RegionCountOptions ro;
                ro.exclude_origin = true;
                ro.workers = 1;
                count = count_lattice_in_region(L, fr.I, fr.sig, fr.t,
                                                Matrix::identity(static_cast<std::size_t>(n)), ro);
            }
            return make_sample(ls, count, vol, vol_err, mode);
        });

    MomentReport rep;
    rep.k_samples = k;
    rep.vol = vol;
    rep.prime = prime;
    rep.seed = seed;
    double sum = 0.0, sum_sq = 0.0, disc_sq = 0.0;
    for (const auto& s : samples) {
        const auto c = static_cast<double>(s.count);
        sum += c;
        sum_sq += c * c;
        disc_sq += s.disc * s.disc;
    }
    const auto kd = static_cast<double>(k);
    rep.mean_count = sum / kd;
    const double var = std::max(0.0, (sum_sq - kd * rep.mean_count * rep.mean_count) / (kd - 1.0));
    rep.mean_count_stderr = std::sqrt(var / kd);
    rep.mean_sq_disc = disc_sq / kd;
    rep.ratio = rep.mean_sq_disc / vol;
    rep.samples = std::move(samples);
    return rep;
}

struct Exceedance {
    double T = 0.0;
    double fraction = 0.0;
    /// Binomial standard error sqrt(f (1 - f) / k).
    double std_error = 0.0;
    /// Chebyshev bound mean_sq_disc / T^2 (infinite for T = 0).
    double chebyshev = 0.0;
    std::int64_t k = 0;
};

/// Fraction of the sampled lattices with disc >= T.
inline Exceedance exceedance_fraction(const MomentReport& rep, double T)
{
    if (!(T >= 0.0))
        throw ValidationError("exceedance threshold must be >= 0");
    if (rep.samples.empty())
        throw ValidationError("moment report has no samples");
    const auto hits = std::count_if(rep.samples.begin(), rep.samples.end(),
                                    [&](const DiscrepancySample& s) { return s.disc >= T; });
    Exceedance e;
    e.T = T;
    e.k = static_cast<std::int64_t>(rep.samples.size());
    e.fraction = static_cast<double>(hits) / static_cast<double>(e.k);
    e.std_error = std::sqrt(e.fraction * (1.0 - e.fraction) / static_cast<double>(e.k));
    e.chebyshev = T > 0.0 ? rep.mean_sq_disc / (T * T) : std::numeric_limits<double>::infinity();
    return e;
}

inline Exceedance exceedance_fraction(const MomentRegion& region, double T, std::int64_t k,
                                      std::int64_t prime, std::uint64_t seed,
                                      const MomentOptions& opts = {})
{
    if (k < 1)
        throw ValidationError("exceedance_fraction needs k >= 1");
    // The moment experiment needs two lattices for its variance; one is enough here.
    const auto rep = second_moment_experiment(region, std::max<std::int64_t>(k, 2), prime, seed, opts);
    if (k == 1) {
        auto one = rep;
        one.samples.resize(1);
        return exceedance_fraction(one, T);
    }
    return exceedance_fraction(rep, T);
}

// ---------------------------------------------------------------------------
// Interpolation inequality
// ---------------------------------------------------------------------------

/// A_{I,t} = {v : F(v) in I, |v| <= t}.
struct NestedRegion {
    Interval I;
    double t = 0.0;
};

struct InterpolationResult {
    bool holds = false;
    /// max(D_inner, D_outer) + vol(outer) - vol(inner) - D_mid.
    double slack = 0.0;
    /// Combined standard error of the three volume estimates.
    double volume_stderr = 0.0;
    DiscrepancySample inner, mid, outer;
};

struct InterpolationOptions {
    VolumeMode mode = VolumeMode::monte_carlo;
    std::int64_t samples = 1 << 20;
    std::uint64_t seed = 0;
    unsigned workers = 0;
    bool exact = true;
    /// The inequality is accepted when slack >= -tolerance * volume_stderr.
    double tolerance = 3.0;
};

inline bool region_contains(const NestedRegion& big, const NestedRegion& small)
{
    return small.t <= big.t && (small.I.empty() || big.I.contains(small.I));
}

/// Checks D(mid) <= max(D(inner), D(outer)) + vol(outer \ inner) for inner within mid
/// within outer. Monte Carlo volumes share one sample set, so they are nested as well.
inline InterpolationResult interpolation_check(const PolyForm& F, const NestedRegion& inner,
                                               const NestedRegion& mid, const NestedRegion& outer,
                                               const InterpolationOptions& opts = {})
{
    if (!region_contains(mid, inner) || !region_contains(outer, mid))
        throw ValidationError("regions are not nested: need inner within mid within outer");
    if (!(inner.t > 0.0))
        throw ValidationError("radii must be > 0");
    F.sig().require_counting_regime();

    const std::array<NestedRegion, 3> regs{inner, mid, outer};
    std::array<std::int64_t, 3> counts{};
    CountOptions co;
    co.workers = opts.workers;
    co.exact = opts.exact;
    for (std::size_t i = 0; i < 3; ++i)
        counts[i] = count_in_interval(F, regs[i].I, regs[i].t, co).count;

    std::array<double, 3> vols{}, errs{};
    if (opts.mode == VolumeMode::monte_carlo) {
        std::array<FormRegion, 3> fr;
        for (std::size_t i = 0; i < 3; ++i)
            fr[i] = FormRegion{regs[i].I, regs[i].t};
        const auto est = mc_volume_batch(F, fr, opts.samples, opts.seed, VolumeMethod::chord,
                                         opts.workers);
        for (std::size_t i = 0; i < 3; ++i) {
            vols[i] = est[i].estimate;
            errs[i] = est[i].std_error;
        }
    } else {
        const auto cf = compute_cf(F, opts.samples, opts.seed, opts.workers);
        for (std::size_t i = 0; i < 3; ++i) {
            const double scale = regs[i].I.length() * std::pow(regs[i].t, F.n() - F.sig().d);
            vols[i] = cf.value * scale;
            errs[i] = cf.std_error * scale;
        }
    }

    InterpolationResult r;
    r.inner = make_sample(0, counts[0], vols[0], errs[0], opts.mode);
    r.mid = make_sample(0, counts[1], vols[1], errs[1], opts.mode);
    r.outer = make_sample(0, counts[2], vols[2], errs[2], opts.mode);
    r.slack = std::max(r.inner.disc, r.outer.disc) + (vols[2] - vols[0]) - r.mid.disc;
    r.volume_stderr = std::sqrt(errs[0] * errs[0] + errs[1] * errs[1] + errs[2] * errs[2]);
    r.holds = r.slack >= -opts.tolerance * r.volume_stderr;
    return r;
}

} // namespace formcount
