#pragma once

// The acceptance suite: one check per criterion, each printing a single PASS/FAIL line.
// Shared by the `acceptance` test binary and `formcount verify`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "formcount/commands.hpp"
#include "formcount/discrepancy.hpp"
#include "formcount/experiments.hpp"
#include "formcount/forms.hpp"
#include "formcount/geometry.hpp"
#include "formcount/lattice.hpp"
#include "formcount/rng.hpp"

namespace formcount::acceptance {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id = 0;
    std::string name;
    /// Wall-clock budget in seconds on the reference machine; exceeding it fails the check.
    double budget = 0.0;
    std::function<Outcome(unsigned workers)> run;
};

struct Result {
    int id = 0;
    std::string name;
    bool pass = false;
    double seconds = 0.0;
    std::string detail;
};

namespace detail {

inline std::string fmt(const char* f, double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

/// Value of a CSV column in the first data row of a command's output.
inline std::vector<std::string> csv_rows(const std::string& text)
{
    std::vector<std::string> rows;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line))
        if (!line.empty() && line[0] != '#')
            rows.push_back(line);
    return rows;
}

inline std::vector<std::string> split(const std::string& row)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : row) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double csv_value(const std::string& text, const std::string& column, std::size_t row = 0)
{
    const auto rows = csv_rows(text);
    const auto head = split(rows.at(0));
    for (std::size_t i = 0; i < head.size(); ++i)
        if (head[i] == column)
            return std::stod(split(rows.at(row + 1)).at(i));
    throw InternalError("no column " + column);
}

// Closed forms of c_F for d = 2 and the identity form.
inline constexpr double cf_212 = 4.44288293815836624701588; // pi sqrt 2
inline constexpr double cf_222 = 4.93480220054467930941724; // pi^2 / 2

// Exact volumes of {v in R^3 : |v1^2 + v2^2 - v3^2| < 1/2, |v| <= T} by quadrature.
inline constexpr double exact_volume_212[4][2] = {
    {10.0, 42.94782212194998},
    {20.0, 87.37669199877567},
    {40.0, 176.23435582382305},
    {80.0, 353.94967398289253},
};

inline Outcome c1_cf_closed_form(unsigned workers)
{
    std::ostringstream d;
    bool pass = true;
    const std::pair<json, double> cases[] = {
        {json{{"p", 2}, {"q", 1}, {"d", 2}, {"identity", true}, {"samples", 1000000}, {"seed", 7}}, cf_212},
        {json{{"p", 2}, {"q", 2}, {"d", 2}, {"identity", true}, {"samples", 1000000}, {"seed", 7}}, cf_222},
    };
    for (const auto& [cfg, exact] : cases) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::string out = run_command("cf", cfg, workers);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const double v = csv_value(out, "value");
        const double rel = std::abs(v - exact) / exact;
        const bool ok = rel <= 0.005 && secs < 10.0;
        pass = pass && ok;
        d << "(" << cfg["p"] << "," << cfg["q"] << ",2) c_F=" << fmt("%.6f", v) << " rel=" << fmt("%.2e", rel)
          << " " << fmt("%.2f", secs) << "s; ";
    }
    // Independent cross-check: Monte Carlo volume at T = 50 against c_F |I| T.
    const auto F = PolyForm::identity(Signature(2, 1, 2));
    const auto vol = mc_volume(F, Interval(-0.5, 0.5), 50.0, 1 << 22, 11, VolumeMethod::chord, workers);
    const double pred = cf_212 * 50.0;
    const double rel = std::abs(vol.estimate - pred) / pred;
    pass = pass && rel <= 0.05;
    d << "MC volume T=50 " << fmt("%.3f", vol.estimate) << " vs " << fmt("%.3f", pred) << " rel="
      << fmt("%.2e", rel);
    return {pass, d.str()};
}

inline Outcome c2_count_identity(unsigned workers)
{
    // Zn g is the lattice with basis g; for g in SL_n(Z) it is Z^n itself, so the
    // identity basis applies literally there.
    std::mt19937_64 rng(2024);
    const Signature sigs[] = {{2, 1, 2}, {1, 2, 2}, {2, 2, 2}, {3, 1, 2}, {3, 2, 4}};
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    int mismatches = 0, integral = 0, exact_paths = 0;
    std::int64_t total = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const Signature sig = sigs[trial % 5];
        const auto n = static_cast<std::size_t>(sig.n());
        const bool integer_g = trial % 2 == 0;
        const std::int64_t den = integer_g ? 1 : 2 + trial % 3;
        const RationalMatrix G = random_unipotent_rational(n, den, 3, sig.d == 4 ? 1 : 2, rng);
        const PolyForm F(sig, G);
        const double t = sig.d == 4 ? 2.0 + 6.0 * ud(rng) : 2.0 + 13.0 * ud(rng);
        const double scale = std::pow(t, sig.d) / 4.0;
        double a = (2.0 * ud(rng) - 1.0) * scale, b = (2.0 * ud(rng) - 1.0) * scale;
        if (a > b)
            std::swap(a, b);
        const Interval I(a, b);
        CountOptions co;
        co.workers = workers;
        const auto rep = count_in_interval(F, I, t, co);
        exact_paths += rep.exact ? 1 : 0;
        RegionCountOptions ro;
        ro.workers = workers;
        const LatticeBasis L = integer_g ? LatticeBasis::identity(n) : LatticeBasis::from_rational(G);
        const std::int64_t lat = count_lattice_in_region(L, I, sig, t, G, ro);
        if (integer_g)
            ++integral;
        mismatches += lat != rep.count ? 1 : 0;
        total += rep.count;
    }
    std::ostringstream d;
    d << "100 forms (" << integral << " in SL_n(Z) against the identity basis), mismatches="
      << mismatches << ", integer path " << exact_paths << "/100, total count " << total;
    return {mismatches == 0 && exact_paths == 100, d.str()};
}

inline Outcome c3_exhaustive(unsigned workers)
{
    const auto F = PolyForm::identity(Signature(2, 1, 2));
    CountOptions co;
    co.workers = workers;
    const auto c1 = count_in_interval(F, Interval(-0.5, 0.5), 1.0, co).count;
    const auto c2 = count_in_interval(F, Interval(-0.5, 0.5), 2.0, co).count;
    const auto h = histogram(F, 1.0, Interval(-2.0, 2.0), 1.0, co);
    const std::vector<std::int64_t> want{0, 2, 1, 4};
    std::ostringstream d;
    d << "t=1 -> " << c1 << ", t=2 -> " << c2 << ", histogram (";
    for (std::size_t i = 0; i < h.size(); ++i)
        d << (i ? "," : "") << h.buckets[i];
    d << ")";
    return {c1 == 1 && c2 == 9 && h.buckets == want, d.str()};
}

inline Outcome c4_volume_decay(unsigned workers)
{
    const auto t0 = std::chrono::steady_clock::now();
    const json cfg{{"p", 2}, {"q", 1}, {"d", 2}, {"identity", true}, {"lo", -0.5}, {"hi", 0.5},
                   {"T_grid", {10.0, 20.0, 40.0, 80.0}}, {"samples", 10000000}, {"seed", 4}};
    const std::string out = run_command("volume", cfg, workers);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::vector<double> Ts, devs;
    std::ostringstream d;
    bool oracle_ok = true;
    for (std::size_t i = 0; i < 4; ++i) {
        const double T = csv_value(out, "T", i), est = csv_value(out, "estimate", i);
        const double se = csv_value(out, "stderr", i), dev = csv_value(out, "rel_deviation", i);
        Ts.push_back(T);
        devs.push_back(dev);
        // The estimate must agree with the quadrature volume.
        const double exact = exact_volume_212[i][1];
        oracle_ok = oracle_ok && std::abs(est - exact) <= 5.0 * se + 1e-9 * exact;
        d << "T=" << T << " dev=" << fmt("%.3e", dev) << " z=" << fmt("%.2f", (est - exact) / se) << "; ";
    }
    const auto fit = fit_exponent(Ts, devs);
    d << "slope=" << fmt("%.3f", fit.slope) << " " << fmt("%.1f", secs) << "s";
    return {fit.slope <= -0.5 && devs.back() <= 0.05 && oracle_ok && secs < 120.0, d.str()};
}

inline Outcome c5_siegel_mean(unsigned workers)
{
    const auto t0 = std::chrono::steady_clock::now();
    MomentOptions mo;
    mo.workers = workers;
    const auto rep = second_moment_experiment(EuclideanBall{3, 100.0}, 200, 10007, 5, mo);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double rel = std::abs(rep.mean_count / 100.0 - 1.0);
    std::ostringstream d;
    d << "mean count " << fmt("%.3f", rep.mean_count) << " +- " << fmt("%.3f", rep.mean_count_stderr)
      << " rel=" << fmt("%.4f", rel) << " " << fmt("%.2f", secs) << "s";
    return {rel <= 0.05 && secs < 60.0, d.str()};
}

inline Outcome c6_rogers(unsigned workers)
{
    std::ostringstream d;
    bool pass = true;
    MomentOptions mo;
    mo.workers = workers;
    for (double V : {100.0, 300.0, 1000.0}) {
        const auto rep = second_moment_experiment(EuclideanBall{3, V}, 200, 10007, 6, mo);
        const double T = 10.0 * std::sqrt(V);
        const auto ex = exceedance_fraction(rep, T);
        const bool ok = rep.ratio <= 10.0 && ex.fraction <= ex.chebyshev + 3.0 * ex.std_error;
        pass = pass && ok;
        d << "V=" << V << " ratio=" << fmt("%.3f", rep.ratio) << " exceed=" << fmt("%.3f", ex.fraction)
          << " cheb=" << fmt("%.4f", ex.chebyshev) << "; ";
    }
    return {pass, d.str()};
}

inline Outcome c7_shrinking_target(unsigned workers)
{
    const auto t0 = std::chrono::steady_clock::now();
    int passed = 0;
    std::ostringstream d;
    for (std::uint64_t i = 0; i < 20; ++i) {
        ExperimentConfig cfg;
        cfg.sig = Signature(3, 2, 2);
        cfg.g_seed = 700 + i;
        cfg.g_eps = 0.3;
        cfg.kappa = 1.0;
        cfg.xi = 0.0;
        cfg.c = 2.0;
        cfg.t_grid = {20.0, 40.0, 60.0, 80.0};
        cfg.seed = i;
        const auto series = fixed_target_run(cfg, workers);
        bool ok = true;
        const double e0 = series.front().normalized_error;
        for (const auto& p : series)
            ok = ok && p.error.empty() && p.exists && p.normalized_error <= 2.0 * e0;
        passed += ok ? 1 : 0;
        if (!ok) {
            d << "form " << i << " failed (";
            for (const auto& p : series)
                d << fmt("%.3f", p.normalized_error) << (p.exists ? "" : "!") << " ";
            d << "); ";
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    d << passed << "/20 forms pass, " << fmt("%.0f", secs) << "s";
    return {passed >= 18, d.str()};
}

inline Outcome c8_uniform_windows(unsigned workers)
{
    ExperimentConfig cfg;
    cfg.sig = Signature(3, 2, 2);
    cfg.g_seed = 800;
    cfg.kappa = 0.5;
    cfg.kappa_prime = 0.75;
    cfg.eta = 0.0;
    cfg.N = 1.0;
    cfg.t_grid = {60.0};
    cfg.spot_checks = 20;
    const auto pts = uniform_target_run(cfg, workers);
    const auto& p = pts.front();
    std::ostringstream d;
    d << "t=60 windows=" << p.windows << " M=" << p.subdivisions << " spot checks=" << p.spot_checks.size()
      << " mismatches=" << p.spot_mismatches() << " worst rel error=" << fmt("%.4f", p.worst_rel_error)
      << " min count=" << p.min_count;
    if (!p.error.empty())
        d << " error: " << p.error;
    return {p.error.empty() && p.spot_checks.size() == 20 && p.spot_mismatches() == 0 &&
                p.worst_rel_error < 1.0,
            d.str()};
}

inline Outcome c9_supmin(unsigned workers)
{
    const auto F = PolyForm::identity(Signature(2, 1, 2));
    SupminOptions so;
    so.workers = workers;
    std::ostringstream d;
    bool pass = true;
    double prev = std::numeric_limits<double>::infinity();
    for (double t : {1.0, 2.0, 3.0, 4.0}) {
        const auto r = supmin_run(F, t, 1.0, so);
        if (t == 1.0)
            pass = pass && r.finite && r.supmin == 0.5;
        pass = pass && r.supmin <= prev;
        prev = r.supmin;
        d << "t=" << t << " supmin=" << r.supmin << " at " << r.argmax_xi << "; ";
    }
    return {pass, d.str()};
}

inline Outcome c10_interpolation(unsigned workers)
{
    std::mt19937_64 rng(1010);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    const Signature sigs[] = {{2, 1, 2}, {1, 2, 2}, {2, 2, 2}};
    int failures = 0, strict = 0;
    double worst = std::numeric_limits<double>::infinity();
    InterpolationOptions io;
    io.workers = workers;
    io.samples = 1 << 16;
    for (int trial = 0; trial < 1000; ++trial) {
        const Signature sig = sigs[trial % 3];
        const auto n = static_cast<std::size_t>(sig.n());
        const RationalMatrix G = random_unipotent_rational(n, 2 + trial % 4, 3, 2, rng);
        const PolyForm F(sig, G);
        // Nested radii and intervals: inner within mid within outer.
        const double t2 = 3.0 + 7.0 * ud(rng);
        const double t1 = t2 * (0.5 + 0.5 * ud(rng)), t3 = t2 * (1.0 + 0.5 * ud(rng));
        const double c = (2.0 * ud(rng) - 1.0) * 5.0;
        const double h2 = 0.5 + 5.0 * ud(rng);
        const double h1 = trial % 10 == 0 ? 0.0 : h2 * ud(rng), h3 = h2 * (1.0 + ud(rng));
        const NestedRegion inner{Interval(c - h1, c + h1), t1};
        const NestedRegion mid{Interval(c - h2, c + h2), t2};
        const NestedRegion outer{Interval(c - h3, c + h3), t3};
        io.seed = static_cast<std::uint64_t>(trial);
        const auto r = interpolation_check(F, inner, mid, outer, io);
        failures += r.holds ? 0 : 1;
        strict += r.slack >= 0.0 ? 1 : 0;
        worst = std::min(worst, r.volume_stderr > 0.0 ? r.slack / r.volume_stderr : r.slack);
    }
    std::ostringstream d;
    d << "1000 triples, failures=" << failures << ", slack >= 0 in " << strict
      << ", smallest slack/stderr=" << fmt("%.3f", worst);
    return {failures == 0, d.str()};
}

inline Outcome c11_determinism(unsigned workers)
{
    const unsigned w = std::max(2u, workers);
    const std::vector<std::pair<std::string, json>> runs{
        {"cf", {{"p", 2}, {"q", 2}, {"d", 2}, {"g_seed", 3}, {"samples", 200000}, {"seed", 9}}},
        {"volume", {{"p", 2}, {"q", 1}, {"d", 2}, {"g_seed", 4}, {"lo", -1.0}, {"hi", 2.0},
                    {"T_grid", {5.0, 10.0}}, {"samples", 100000}, {"seed", 9}}},
        {"count", {{"p", 3}, {"q", 2}, {"d", 2}, {"g_seed", 5}, {"lo", -0.2}, {"hi", 0.3}, {"t", 12.0}}},
        {"histogram", {{"p", 2}, {"q", 2}, {"d", 2}, {"g_seed", 6}, {"lo", -3.0}, {"hi", 3.0},
                       {"width", 0.25}, {"t", 15.0}}},
        {"rogers", {{"n", 3}, {"V", 150.0}, {"k", 40}, {"prime", 1009}, {"seed", 9}}},
        {"fixed-target", {{"p", 3}, {"q", 2}, {"d", 2}, {"g_seed", 7}, {"kappa", 1.0}, {"c", 2.0},
                          {"t_grid", {8.0, 12.0, 16.0}}, {"samples", 100000}, {"seed", 9}}},
        {"uniform-target", {{"p", 3}, {"q", 2}, {"d", 2}, {"g_seed", 8}, {"kappa", 0.5}, {"N", 1.0},
                            {"t_grid", {10.0, 14.0}}, {"samples", 100000}, {"seed", 9}}},
        {"supmin", {{"p", 2}, {"q", 1}, {"d", 2}, {"g_seed", 9}, {"t_grid", {2.0, 4.0, 6.0}}, {"N", 2.0}}},
    };
    std::ostringstream d;
    int same = 0;
    for (const auto& [name, cfg] : runs) {
        const std::string a = run_command(name, cfg, w), b = run_command(name, cfg, w);
        const bool eq = a == b && a.size() > 0;
        same += eq ? 1 : 0;
        if (!eq)
            d << name << " differs; ";
    }
    d << same << "/" << runs.size() << " subcommands byte-identical (workers=" << w << ")";
    return {same == static_cast<int>(runs.size()), d.str()};
}

} // namespace detail

inline std::vector<Criterion> criteria()
{
    using namespace detail;
    return {
        {1, "c_F closed form", 20.0, c1_cf_closed_form},
        {2, "count identity", 600.0, c2_count_identity},
        {3, "exhaustive counts", 10.0, c3_exhaustive},
        {4, "volume decay", 120.0, c4_volume_decay},
        {5, "Siegel mean value", 60.0, c5_siegel_mean},
        {6, "Rogers second moment", 300.0, c6_rogers},
        {7, "shrinking target", 1200.0, c7_shrinking_target},
        {8, "uniform windows", 600.0, c8_uniform_windows},
        {9, "supmin", 10.0, c9_supmin},
        {10, "interpolation inequality", 1200.0, c10_interpolation},
        {11, "determinism", 300.0, c11_determinism},
    };
}

/// Runs the selected criteria (all when `ids` is empty), writing one line per criterion.
inline std::vector<Result> run(const std::vector<int>& ids, unsigned workers, std::ostream& out)
{
    std::vector<Result> results;
    for (const auto& c : criteria()) {
        if (!ids.empty() && std::find(ids.begin(), ids.end(), c.id) == ids.end())
            continue;
        Result r{c.id, c.name, false, 0.0, {}};
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const Outcome o = c.run(workers);
            r.pass = o.pass;
            r.detail = o.detail;
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (r.seconds > c.budget) {
            r.pass = false;
            r.detail += "; over the " + detail::fmt("%.0f", c.budget) + "s budget";
        }
        out << (r.pass ? "PASS" : "FAIL") << " criterion " << r.id << " (" << r.name << "): " << r.detail
            << " [" << detail::fmt("%.1f", r.seconds) << "s]" << std::endl;
        results.push_back(std::move(r));
    }
    return results;
}

} // namespace formcount::acceptance
