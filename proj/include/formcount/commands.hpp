#pragma once

// Subcommands as functions from a JSON config to CSV text. The CLI and the acceptance
// runner both go through run_command, so their outputs are the same bytes.

#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "formcount/discrepancy.hpp"
#include "formcount/errors.hpp"
#include "formcount/experiments.hpp"
#include "formcount/forms.hpp"
#include "formcount/geometry.hpp"
#include "formcount/lattice.hpp"
#include "formcount/parallel.hpp"

namespace formcount {

inline constexpr const char* version = "1.0.0";

namespace io {

inline std::string num(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string num(std::int64_t x) { return std::to_string(x); }
inline std::string num(std::uint64_t x) { return std::to_string(x); }
inline std::string num(bool x) { return x ? "1" : "0"; }

/// Quote a CSV field when it contains a separator, quote or newline.
inline std::string field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

class Csv {
public:
    explicit Csv(std::ostringstream& os) : os_(os) {}

    template <class... Ts>
    void row(const Ts&... xs)
    {
        bool first = true;
        ((os_ << (first ? "" : ",") << cell(xs), first = false), ...);
        os_ << '\n';
    }

private:
    static std::string cell(const std::string& s) { return field(s); }
    static std::string cell(const char* s) { return field(s); }
    template <class T>
    static std::string cell(const T& x)
    {
        return num(x);
    }

    std::ostringstream& os_;
};

inline std::string hex64(std::uint64_t h)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

} // namespace io

/// Fields identifying a run: identical manifests give identical outputs.
struct RunManifest {
    std::string command;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::string tool_version = version;
    unsigned workers = 1;
    /// Not written to the CSV.
    double wall_seconds = 0.0;

    std::string line(const json& cfg) const
    {
        return "# formcount " + tool_version + " command=" + command +
               " config_hash=" + io::hex64(config_hash) + " seed=" + std::to_string(seed) +
               " workers=" + std::to_string(workers) + " config=" + cfg.dump();
    }
};

namespace detail {

inline double get_double(const json& cfg, const char* key, double fallback)
{
    return cfg.contains(key) && !cfg.at(key).is_null() ? cfg.at(key).get<double>() : fallback;
}

inline double require_double(const json& cfg, const char* key)
{
    if (!cfg.contains(key) || cfg.at(key).is_null())
        throw ValidationError(std::string("missing required key '") + key + "'");
    return cfg.at(key).get<double>();
}

/// Form from config keys: identity, g, g_num/g_den, or g_seed with g_eps.
inline PolyForm config_form(const json& cfg)
{
    ExperimentConfig ec = cfg.get<ExperimentConfig>();
    if (cfg.value("identity", false)) {
        ec.form = json::object();
        ec.g_seed.reset();
    }
    return ec.make_form();
}

inline Interval config_interval(const json& cfg)
{
    return {require_double(cfg, "lo"), require_double(cfg, "hi")};
}

inline std::vector<double> grid_or_single(const json& cfg, const char* grid_key, const char* key)
{
    if (cfg.contains(grid_key) && !cfg.at(grid_key).is_null())
        return cfg.at(grid_key).get<std::vector<double>>();
    return {require_double(cfg, key)};
}

inline CountOptions count_options(const json& cfg, unsigned workers)
{
    CountOptions co;
    co.workers = workers;
    co.exact = cfg.value("exact", true);
    return co;
}

using Command = std::function<void(const json&, unsigned, io::Csv&, std::ostringstream&)>;

inline void cmd_cf(const json& cfg, unsigned workers, io::Csv& csv, std::ostringstream&)
{
    const PolyForm F = config_form(cfg);
    const auto samples = cfg.value("samples", default_cf_samples);
    const auto seed = cfg.value("seed", std::uint64_t{0});
    const auto est = compute_cf(F, samples, seed, workers);
    csv.row("p", "q", "d", "samples", "seed", "value", "stderr");
    csv.row(std::int64_t{F.sig().p}, std::int64_t{F.sig().q}, std::int64_t{F.sig().d}, est.samples,
            est.seed, est.value, est.std_error);
}

inline void cmd_volume(const json& cfg, unsigned workers, io::Csv& csv, std::ostringstream&)
{
    const PolyForm F = config_form(cfg);
    const Interval I = config_interval(cfg);
    const auto Ts = grid_or_single(cfg, "T_grid", "T");
    const auto samples = cfg.value("samples", default_cf_samples);
    const auto seed = cfg.value("seed", std::uint64_t{0});
    const auto method = volume_method_from_string(cfg.value("method", std::string("chord")));
    const auto cf = compute_cf(F, samples, seed, workers);
    csv.row("T", "lo", "hi", "method", "samples", "estimate", "stderr", "predicted", "rel_deviation");
    for (double T : Ts) {
        const auto v = mc_volume(F, I, T, samples, seed, method, workers);
        const double pred = predicted_volume(cf.value, F.sig(), I, T);
        csv.row(T, I.lo, I.hi, std::string(to_string(method)), v.samples, v.estimate, v.std_error,
                pred, pred > 0.0 ? std::abs(v.estimate - pred) / pred : 0.0);
    }
}

inline void cmd_count(const json& cfg, unsigned workers, io::Csv& csv, std::ostringstream&)
{
    const PolyForm F = config_form(cfg);
    const Interval I = config_interval(cfg);
    const auto ts = grid_or_single(cfg, "t_grid", "t");
    csv.row("t", "lo", "hi", "count", "points", "boundary_cases", "exact");
    for (double t : ts) {
        const auto r = count_in_interval(F, I, t, count_options(cfg, workers));
        csv.row(t, I.lo, I.hi, r.count, r.points_enumerated, r.boundary_cases, r.exact);
    }
}

inline void cmd_histogram(const json& cfg, unsigned workers, io::Csv& csv, std::ostringstream& os)
{
    const PolyForm F = config_form(cfg);
    const Interval range = config_interval(cfg);
    const double t = require_double(cfg, "t");
    const double width = require_double(cfg, "width");
    const Histogram h = histogram(F, t, range, width, count_options(cfg, workers));
    csv.row("bucket", "lo", "hi", "count");
    for (std::size_t i = 0; i < h.size(); ++i)
        csv.row(i, h.edge(i), h.edge(i + 1), h.buckets[i]);
    os << "# overflow_lo=" << h.overflow_lo << " overflow_hi=" << h.overflow_hi
       << " boundary_flags=" << h.boundary_flags << " points=" << h.points_enumerated << '\n';
}

inline MomentRegion config_region(const json& cfg)
{
    const std::string kind = cfg.value("region", std::string("ball"));
    if (kind == "ball")
        return EuclideanBall{cfg.value("n", 3), get_double(cfg, "V", 100.0)};
    if (kind == "form") {
        FormRegionSpec fr;
        fr.sig = Signature(cfg.value("p", 2), cfg.value("q", 1), cfg.value("d", 2));
        fr.I = config_interval(cfg);
        fr.t = require_double(cfg, "t");
        fr.volume_samples = cfg.value("samples", std::int64_t{1} << 20);
        return fr;
    }
    throw ValidationError("region must be 'ball' or 'form'");
}

inline void cmd_rogers(const json& cfg, unsigned workers, io::Csv& csv, std::ostringstream& os)
{
    const MomentRegion region = config_region(cfg);
    MomentOptions mo;
    mo.workers = workers;
    mo.volume_seed = cfg.value("seed", std::uint64_t{0});
    const auto rep = second_moment_experiment(region, cfg.value("k", std::int64_t{200}),
                                              cfg.value("prime", std::int64_t{10007}),
                                              cfg.value("seed", std::uint64_t{0}), mo);
    const double T = get_double(cfg, "T", 10.0 * std::sqrt(rep.vol));
    const auto ex = exceedance_fraction(rep, T);
    csv.row("index", "lattice_seed", "count", "volume", "disc");
    for (std::size_t i = 0; i < rep.samples.size(); ++i) {
        const auto& s = rep.samples[i];
        csv.row(i, s.lattice_seed, s.count, s.volume, s.disc);
    }
    json summary = rep;
    summary["volume_mode"] = to_string(rep.samples.front().volume_mode);
    summary["exceedance"] = {{"T", ex.T}, {"fraction", ex.fraction}, {"stderr", ex.std_error},
                             {"chebyshev", ex.chebyshev}};
    os << "# summary " << summary.dump() << '\n';
}

inline void cmd_fixed_target(const json& cfg, unsigned workers, io::Csv& csv, std::ostringstream&)
{
    const auto ec = cfg.get<ExperimentConfig>();
    const auto series = fixed_target_run(ec, config_form(cfg), workers);
    csv.row("t", "lo", "hi", "count", "prediction", "abs_error", "normalized_error", "exists",
            "boundary_cases", "error");
    for (const auto& p : series)
        csv.row(p.t, p.I.lo, p.I.hi, p.count, p.prediction, p.abs_error, p.normalized_error,
                p.exists, p.boundary_cases, p.error);
}

inline void cmd_uniform_target(const json& cfg, unsigned workers, io::Csv& csv, std::ostringstream&)
{
    const auto ec = cfg.get<ExperimentConfig>();
    const auto pts = uniform_target_run(ec, config_form(cfg), workers);
    csv.row("t", "N", "window_length", "subdivisions", "windows", "worst_lo", "worst_hi",
            "worst_count", "worst_prediction", "worst_rel_error", "min_count", "spot_checks",
            "spot_mismatches", "boundary_flags", "error");
    for (const auto& p : pts)
        csv.row(p.t, p.N, p.window_length, p.subdivisions, p.windows, p.worst.lo, p.worst.hi,
                p.worst_count, p.worst_prediction, p.worst_rel_error, p.min_count,
                p.spot_checks.size(), p.spot_mismatches(), p.boundary_flags, p.error);
}

inline void cmd_supmin(const json& cfg, unsigned workers, io::Csv& csv, std::ostringstream&)
{
    const PolyForm F = config_form(cfg);
    const auto ts = grid_or_single(cfg, "t_grid", "t");
    const double N = get_double(cfg, "N", 1.0);
    SupminOptions so;
    so.workers = workers;
    so.exact = cfg.value("exact", true);
    csv.row("t", "N", "supmin", "argmax_xi", "finite", "values");
    for (double t : ts) {
        const auto r = supmin_run(F, t, N, so);
        csv.row(t, N, r.supmin, r.argmax_xi, r.finite, r.values);
    }
}

inline const std::map<std::string, Command>& command_table()
{
    static const std::map<std::string, Command> table{
        {"cf", cmd_cf},
        {"volume", cmd_volume},
        {"count", cmd_count},
        {"histogram", cmd_histogram},
        {"rogers", cmd_rogers},
        {"fixed-target", cmd_fixed_target},
        {"uniform-target", cmd_uniform_target},
        {"supmin", cmd_supmin},
    };
    return table;
}

} // namespace detail

inline bool is_data_command(const std::string& name)
{
    return detail::command_table().count(name) > 0;
}

/// Runs a data subcommand and returns its CSV, starting with the manifest comment line.
/// Throws formcount::Error (or a json exception) on invalid input.
inline std::string run_command(const std::string& name, const json& cfg, unsigned workers,
                               RunManifest* manifest = nullptr)
{
    const auto& table = detail::command_table();
    const auto it = table.find(name);
    if (it == table.end())
        throw ValidationError("unknown command '" + name + "'");
    if (!cfg.is_object())
        throw ValidationError("config must be a JSON object");
    RunManifest m;
    m.command = name;
    m.config_hash = fnv1a(cfg.dump());
    m.seed = cfg.value("seed", std::uint64_t{0});
    m.workers = resolve_workers(workers);
    std::ostringstream os;
    os << m.line(cfg) << '\n';
    io::Csv csv(os);
    it->second(cfg, m.workers, csv, os);
    if (manifest)
        *manifest = m;
    return os.str();
}

} // namespace formcount
