#pragma once

// Experiment drivers: shrinking-target series, uniform interval sweeps over histogram
// windows, sup-min distances to the value set, and power-law fits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "formcount/errors.hpp"
#include "formcount/forms.hpp"
#include "formcount/geometry.hpp"
#include "formcount/lattice.hpp"
#include "formcount/rng.hpp"

namespace formcount {

/// Run configuration shared by the experiment drivers. JSON keys equal the CLI flags.
struct ExperimentConfig {
    Signature sig{2, 1, 2};
    /// Explicit form as JSON ("g" or "g_num"/"g_den"); identity when absent and no g_seed.
    json form;
    /// Random form exp(g_eps X) from this seed when set.
    std::optional<std::uint64_t> g_seed;
    double g_eps = 0.3;

    double kappa = 0.0;
    double c = 1.0;
    double xi = 0.0;
    double eta = 0.0;
    /// Cap on N(t) = min(N, t^eta).
    double N = 1.0;
    /// Histogram resolution for uniform runs: buckets of width t^-kappa / ceil(t^(kappa' - kappa)).
    std::optional<double> kappa_prime;
    std::vector<double> t_grid;
    std::optional<double> nu_claimed;

    std::int64_t samples = default_cf_samples;
    std::int64_t prime = 10007;
    std::int64_t k = 200;
    std::uint64_t seed = 0;
    bool exact = true;
    /// Windows compared against direct counts in uniform runs.
    int spot_checks = 20;

    PolyForm make_form() const
    {
        if (g_seed) {
            Engine rng = substream(*g_seed, 0);
            return random_form(sig, g_eps, rng);
        }
        json j = form.is_object() ? form : json::object();
        j["p"] = sig.p;
        j["q"] = sig.q;
        j["d"] = sig.d;
        return form_from_json(j);
    }

    double kappa_prime_value() const { return kappa_prime.value_or(kappa + 0.25); }
};

inline void to_json(json& j, const ExperimentConfig& c)
{
    j = json{{"p", c.sig.p},        {"q", c.sig.q},       {"d", c.sig.d},     {"g_eps", c.g_eps},
             {"kappa", c.kappa},    {"c", c.c},           {"xi", c.xi},       {"eta", c.eta},
             {"N", c.N},            {"t_grid", c.t_grid}, {"samples", c.samples},
             {"prime", c.prime},    {"k", c.k},           {"seed", c.seed},   {"exact", c.exact},
             {"spot_checks", c.spot_checks}};
    for (const char* key : {"g", "g_num", "g_den"})
        if (c.form.is_object() && c.form.contains(key))
            j[key] = c.form.at(key);
    if (c.g_seed)
        j["g_seed"] = *c.g_seed;
    if (c.kappa_prime)
        j["kappa_prime"] = *c.kappa_prime;
    if (c.nu_claimed)
        j["nu_claimed"] = *c.nu_claimed;
}

inline void from_json(const json& j, ExperimentConfig& c)
{
    c = ExperimentConfig{};
    c.sig = Signature(j.value("p", 2), j.value("q", 1), j.value("d", 2));
    c.form = json::object();
    for (const char* key : {"g", "g_num", "g_den"})
        if (j.contains(key) && !j.at(key).is_null())
            c.form[key] = j.at(key);
    if (j.contains("g_seed") && !j.at("g_seed").is_null())
        c.g_seed = j.at("g_seed").get<std::uint64_t>();
    c.g_eps = j.value("g_eps", 0.3);
    c.kappa = j.value("kappa", 0.0);
    c.c = j.value("c", 1.0);
    c.xi = j.value("xi", 0.0);
    c.eta = j.value("eta", 0.0);
    c.N = j.value("N", 1.0);
    if (j.contains("kappa_prime") && !j.at("kappa_prime").is_null())
        c.kappa_prime = j.at("kappa_prime").get<double>();
    if (j.contains("nu_claimed") && !j.at("nu_claimed").is_null())
        c.nu_claimed = j.at("nu_claimed").get<double>();
    c.t_grid = j.value("t_grid", std::vector<double>{});
    c.samples = j.value("samples", default_cf_samples);
    c.prime = j.value("prime", std::int64_t{10007});
    c.k = j.value("k", std::int64_t{200});
    c.seed = j.value("seed", std::uint64_t{0});
    c.exact = j.value("exact", true);
    c.spot_checks = j.value("spot_checks", 20);
}

namespace detail {

inline void check_grid(const std::vector<double>& grid)
{
    if (grid.empty())
        throw ValidationError("t_grid must not be empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0) || !std::isfinite(grid[i]))
            throw ValidationError("t_grid values must be finite and > 0");
        if (i > 0 && !(grid[i] > grid[i - 1]))
            throw ValidationError("t_grid must be strictly increasing");
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Fixed shrinking target
// ---------------------------------------------------------------------------

struct SeriesPoint {
    double t = 0.0;
    Interval I;
    std::int64_t count = 0;
    double prediction = 0.0;
    double abs_error = 0.0;
    /// abs_error / t^(n - d - kappa).
    double normalized_error = 0.0;
    /// count >= 1.
    bool exists = false;
    std::int64_t boundary_cases = 0;
    /// Non-empty when this t failed; the other fields are then zero.
    std::string error;
};

inline void validate_fixed_target(const ExperimentConfig& cfg)
{
    cfg.sig.require_counting_regime();
    const int nd = cfg.sig.n() - cfg.sig.d;
    if (!(cfg.kappa >= 0.0 && cfg.kappa < nd))
        throw ValidationError("fixed-target runs need 0 <= kappa < n - d = " + std::to_string(nd));
    if (!(cfg.c > 0.0))
        throw ValidationError("c must be > 0");
    detail::check_grid(cfg.t_grid);
}

/// For each t: I_t = [xi - c t^-kappa / 2, xi + c t^-kappa / 2), N_F(I_t, t) and the
/// prediction c_F |I_t| t^(n-d). Failures at one t are recorded and the run continues.
inline std::vector<SeriesPoint> fixed_target_run(const ExperimentConfig& cfg, const PolyForm& F,
                                                 unsigned workers = 0)
{
    validate_fixed_target(cfg);
    const auto cf = compute_cf(F, cfg.samples, cfg.seed, workers);
    const ShrinkingFamily fam(cfg.xi, cfg.c, cfg.kappa);
    const int nd = cfg.sig.n() - cfg.sig.d;
    CountOptions co;
    co.workers = workers;
    co.exact = cfg.exact;
    std::vector<SeriesPoint> out;
    for (double t : cfg.t_grid) {
        SeriesPoint pt;
        pt.t = t;
        try {
            pt.I = shrinking_interval(fam, t);
            const auto rep = count_in_interval(F, pt.I, t, co);
            pt.count = rep.count;
            pt.boundary_cases = rep.boundary_cases;
            pt.prediction = predicted_volume(cf.value, cfg.sig, pt.I, t);
            pt.abs_error = std::abs(static_cast<double>(pt.count) - pt.prediction);
            pt.normalized_error = pt.abs_error / std::pow(t, nd - cfg.kappa);
            pt.exists = pt.count >= 1;
        } catch (const Error& e) {
            pt = SeriesPoint{};
            pt.t = t;
            pt.error = std::string(e.kind()) + ": " + e.what();
        }
        out.push_back(std::move(pt));
    }
    return out;
}

inline std::vector<SeriesPoint> fixed_target_run(const ExperimentConfig& cfg, unsigned workers = 0)
{
    return fixed_target_run(cfg, cfg.make_form(), workers);
}

// ---------------------------------------------------------------------------
// Uniform intervals
// ---------------------------------------------------------------------------

struct SpotCheck {
    Interval window;
    std::int64_t window_sum = 0;
    std::int64_t direct = 0;
};

struct UniformPoint {
    double t = 0.0;
    double N = 0.0;
    double window_length = 0.0;
    /// Buckets per window.
    std::size_t subdivisions = 1;
    std::size_t windows = 0;
    Interval worst;
    std::int64_t worst_count = 0;
    double worst_prediction = 0.0;
    double worst_rel_error = 0.0;
    std::int64_t min_count = 0;
    std::int64_t boundary_flags = 0;
    std::vector<SpotCheck> spot_checks;
    std::string error;

    std::size_t spot_mismatches() const
    {
        return static_cast<std::size_t>(std::count_if(spot_checks.begin(), spot_checks.end(),
                                                      [](const SpotCheck& s) { return s.window_sum != s.direct; }));
    }
};

inline void validate_uniform_target(const ExperimentConfig& cfg)
{
    cfg.sig.require_counting_regime();
    const int n = cfg.sig.n(), d = cfg.sig.d;
    if (!(cfg.eta >= 0.0 && cfg.eta < std::min(d, n - d)))
        throw ValidationError("uniform runs need 0 <= eta < min(d, n - d)");
    if (!(cfg.kappa >= 0.0 && cfg.kappa < (n - d - cfg.eta) / 2.0))
        throw ValidationError("uniform runs need 0 <= kappa < (n - d - eta) / 2");
    if (!(cfg.kappa_prime_value() >= cfg.kappa))
        throw ValidationError("kappa_prime must be >= kappa");
    if (!(cfg.N > 0.0))
        throw ValidationError("N must be > 0");
    if (cfg.spot_checks < 0)
        throw ValidationError("spot_checks must be >= 0");
    detail::check_grid(cfg.t_grid);
}

/// One histogram per t over [-N(t), N(t)) with buckets of width t^-kappa / M; every run
/// of M consecutive buckets is a window of length t^-kappa. Reports the window with the
/// largest relative error against c_F |I| t^(n-d).
inline std::vector<UniformPoint> uniform_target_run(const ExperimentConfig& cfg, const PolyForm& F,
                                                    unsigned workers = 0)
{
    validate_uniform_target(cfg);
    const auto cf = compute_cf(F, cfg.samples, cfg.seed, workers);
    const int nd = cfg.sig.n() - cfg.sig.d;
    CountOptions co;
    co.workers = workers;
    co.exact = cfg.exact;
    std::vector<UniformPoint> out;
    for (double t : cfg.t_grid) {
        UniformPoint up;
        up.t = t;
        try {
            up.N = std::min(cfg.N, std::pow(t, cfg.eta));
            up.window_length = std::pow(t, -cfg.kappa);
            up.subdivisions = static_cast<std::size_t>(
                std::max(1.0, std::ceil(std::pow(t, cfg.kappa_prime_value() - cfg.kappa) - 1e-9)));
            const double width = up.window_length / static_cast<double>(up.subdivisions);
            const Histogram h = histogram(F, t, Interval(-up.N, up.N), width, co);
            up.boundary_flags = h.boundary_flags;
            const std::size_t M = up.subdivisions;
            // Windows use full-width buckets only; the last one may be cut at N(t).
            std::size_t full = h.size();
            if (full > 0 && h.bucket(full - 1).length() < width * (1.0 - 1e-9))
                --full;
            if (full < M)
                throw ValidationError("window longer than [-N(t), N(t))");
            up.windows = full - M + 1;
            const double scale = std::pow(t, nd);
            std::int64_t sum = h.sum(0, M);
            up.min_count = std::numeric_limits<std::int64_t>::max();
            for (std::size_t j = 0;; ++j) {
                const Interval w = h.span(j, j + M);
                const double pred = cf.value * w.length() * scale;
                const double rel = std::abs(static_cast<double>(sum) - pred) / pred;
                if (j == 0 || rel > up.worst_rel_error) {
                    up.worst_rel_error = rel;
                    up.worst = w;
                    up.worst_count = sum;
                    up.worst_prediction = pred;
                }
                up.min_count = std::min(up.min_count, sum);
                if (j + 1 == up.windows)
                    break;
                sum += h.buckets[j + M] - h.buckets[j];
            }
            // Spot checks: evenly spaced windows recounted directly.
            const auto S = std::min<std::size_t>(static_cast<std::size_t>(cfg.spot_checks), up.windows);
            std::vector<Interval> spots;
            std::vector<std::int64_t> sums;
            for (std::size_t s = 0; s < S; ++s) {
                const std::size_t j = S == 1 ? 0 : s * (up.windows - 1) / (S - 1);
                spots.push_back(h.span(j, j + M));
                sums.push_back(h.sum(j, j + M));
            }
            const auto direct = count_in_intervals(F, spots, t, co);
            for (std::size_t s = 0; s < S; ++s)
                up.spot_checks.push_back({spots[s], sums[s], direct[s]});
        } catch (const Error& e) {
            up = UniformPoint{};
            up.t = t;
            up.error = std::string(e.kind()) + ": " + e.what();
        }
        out.push_back(std::move(up));
    }
    return out;
}

inline std::vector<UniformPoint> uniform_target_run(const ExperimentConfig& cfg, unsigned workers = 0)
{
    return uniform_target_run(cfg, cfg.make_form(), workers);
}

// ---------------------------------------------------------------------------
// sup over targets of the distance to the value set
// ---------------------------------------------------------------------------

struct SupminResult {
    /// max over xi in [-N, N] of min_v |F(v) - xi|; infinite when no values exist.
    double supmin = std::numeric_limits<double>::infinity();
    /// Smallest maximiser.
    double argmax_xi = 0.0;
    bool finite = false;
    /// Distinct values in [-N, N] plus the nearest value on each side outside it.
    std::size_t values = 0;
};

struct SupminOptions {
    unsigned workers = 0;
    bool exact = true;
    bool exclude_origin = false;
};

namespace detail {

struct ValueAcc {
    std::vector<double> inside;
    double below = -std::numeric_limits<double>::infinity();
    double above = std::numeric_limits<double>::infinity();
};

} // namespace detail

/// Values of F over |v| <= t in [-N, N], together with the nearest ones just outside (a
/// value outside the window can still be the nearest to a target inside it).
inline SupminResult supmin_run(const PolyForm& F, double t, double N, SupminOptions opts = {})
{
    if (!(t > 0.0))
        throw ValidationError("supmin needs t > 0");
    if (!(N > 0.0) || !std::isfinite(N))
        throw ValidationError("supmin needs finite N > 0");
    const std::int64_t r2 = detail::radius_sq_floor(t);
    auto visit = [&](detail::ValueAcc& acc, double f) {
        if (f < -N)
            acc.below = std::max(acc.below, f);
        else if (f > N)
            acc.above = std::min(acc.above, f);
        else
            acc.inside.push_back(f);
    };
    std::vector<detail::ValueAcc> parts;
    if (opts.exact && F.exact()) {
        const double scale = static_cast<double>(detail::exact_scale(F));
        parts = detail::scan_form<detail::ValueAcc, detail::ExactLineKernel>(
            F, r2, true, opts.workers,
            [&](detail::ValueAcc& acc, int128 X) { visit(acc, static_cast<double>(X) / scale); });
    } else {
        parts = detail::scan_form<detail::ValueAcc, detail::FloatLineKernel>(
            F, r2, true, opts.workers, visit);
    }
    detail::ValueAcc all;
    if (!opts.exclude_origin)
        all.inside.push_back(0.0);
    for (auto& p : parts) {
        all.inside.insert(all.inside.end(), p.inside.begin(), p.inside.end());
        all.below = std::max(all.below, p.below);
        all.above = std::min(all.above, p.above);
    }
    std::sort(all.inside.begin(), all.inside.end());
    all.inside.erase(std::unique(all.inside.begin(), all.inside.end()), all.inside.end());

    std::vector<double> vals;
    if (std::isfinite(all.below))
        vals.push_back(all.below);
    vals.insert(vals.end(), all.inside.begin(), all.inside.end());
    if (std::isfinite(all.above))
        vals.push_back(all.above);

    SupminResult r;
    r.values = vals.size();
    if (vals.empty())
        return r;
    auto dist = [&](double xi) {
        const auto it = std::lower_bound(vals.begin(), vals.end(), xi);
        double d = std::numeric_limits<double>::infinity();
        if (it != vals.end())
            d = *it - xi;
        if (it != vals.begin())
            d = std::min(d, xi - *std::prev(it));
        return d;
    };
    // Candidates: both ends of [-N, N] and gap midpoints inside it, in increasing order.
    std::vector<double> cand{-N};
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        const double m = 0.5 * (vals[i] + vals[i + 1]);
        if (m > -N && m < N)
            cand.push_back(m);
    }
    cand.push_back(N);
    r.supmin = -1.0;
    for (double xi : cand) {
        const double d = dist(xi);
        if (d > r.supmin) {
            r.supmin = d;
            r.argmax_xi = xi;
        }
    }
    r.finite = true;
    return r;
}

// ---------------------------------------------------------------------------
// Power-law fit
// ---------------------------------------------------------------------------

struct PowerFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 1.0;
};

/// Least-squares fit of log e = intercept + slope log t.
inline PowerFit fit_exponent(std::span<const double> t, std::span<const double> e)
{
    if (t.size() != e.size())
        throw DimensionMismatch("fit_exponent needs equally many t and e values");
    if (t.size() < 3)
        throw ValidationError("fit_exponent needs at least 3 points");
    const auto m = static_cast<double>(t.size());
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(t[i] > 0.0) || !(e[i] > 0.0) || !std::isfinite(t[i]) || !std::isfinite(e[i]))
            throw ValidationError("fit_exponent needs finite positive t and e");
        sx += std::log(t[i]);
        sy += std::log(e[i]);
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double dx = std::log(t[i]) - mx, dy = std::log(e[i]) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0))
        throw ValidationError("fit_exponent needs at least two distinct t");
    PowerFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    const double ss_res = std::max(0.0, syy - f.slope * sxy);
    f.r_squared = syy > 1e-300 ? 1.0 - ss_res / syy : 1.0;
    return f;
}

} // namespace formcount
