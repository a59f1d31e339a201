// formcount: command-line front end.
//
// Every data subcommand takes its parameters either as flags or from a JSON file
// (--config); flags win. Output is CSV on stdout or --out, preceded by a manifest line.
// Exit codes: 0 success, 1 invalid input or failed verification, 2 usage error.

#include <chrono>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "formcount/acceptance.hpp"
#include "formcount/commands.hpp"

namespace {

using formcount::json;

enum class Kind { real, integer, unsigned_integer, boolean, flag, list, text };

struct Key {
    const char* name;
    Kind kind;
    const char* help;
};

// One storage slot per registered flag; filled slots are copied into the config.
struct Slot {
    std::string key;
    Kind kind;
    std::optional<double> real;
    std::optional<std::int64_t> integer;
    std::optional<std::uint64_t> uinteger;
    std::optional<bool> boolean;
    bool flag = false;
    std::vector<double> list;
    std::optional<std::string> text;

    void apply(json& cfg) const
    {
        switch (kind) {
        case Kind::real:
            if (real)
                cfg[key] = *real;
            break;
        case Kind::integer:
            if (integer)
                cfg[key] = *integer;
            break;
        case Kind::unsigned_integer:
            if (uinteger)
                cfg[key] = *uinteger;
            break;
        case Kind::boolean:
            if (boolean)
                cfg[key] = *boolean;
            break;
        case Kind::flag:
            if (flag)
                cfg[key] = true;
            break;
        case Kind::list:
            if (!list.empty())
                cfg[key] = list;
            break;
        case Kind::text:
            if (text)
                cfg[key] = *text;
            break;
        }
    }
};

const std::vector<Key> form_keys{
    {"p", Kind::integer, "number of positive terms"},
    {"q", Kind::integer, "number of negative terms"},
    {"d", Kind::integer, "even degree"},
    {"g_seed", Kind::unsigned_integer, "draw g = exp(g_eps X) from this seed"},
    {"g_eps", Kind::real, "size of the random perturbation"},
    {"identity", Kind::flag, "use g = identity"},
};

struct Spec {
    const char* name;
    const char* help;
    std::vector<Key> keys;
};

std::vector<Spec> specs()
{
    const Key lo{"lo", Kind::real, "interval lower end (inclusive)"};
    const Key hi{"hi", Kind::real, "interval upper end (exclusive)"};
    const Key samples{"samples", Kind::integer, "Monte Carlo samples"};
    const Key seed{"seed", Kind::unsigned_integer, "RNG seed"};
    const Key exact{"exact", Kind::boolean, "exact integer evaluation when g is rational"};
    const Key t{"t", Kind::real, "ball radius"};
    const Key t_grid{"t_grid", Kind::list, "comma-separated radii"};
    return {
        {"cf", "Monte Carlo estimate of the volume constant c_F", {samples, seed}},
        {"volume",
         "volume of {|v| <= T, F(v) in [lo, hi)} against c_F |I| T^(n-d)",
         {lo, hi, {"T", Kind::real, "ball radius"}, {"T_grid", Kind::list, "comma-separated radii"},
          samples, seed, {"method", Kind::text, "chord or hit_or_miss"}}},
        {"count", "count integer vectors with |v| <= t and F(v) in [lo, hi)", {lo, hi, t, t_grid, exact}},
        {"histogram", "histogram of F over integer vectors with |v| <= t",
         {lo, hi, t, {"width", Kind::real, "bucket width"}, exact}},
        {"rogers",
         "discrepancy moments over random lattices",
         {{"region", Kind::text, "ball or form"},
          {"n", Kind::integer, "dimension of the ball region"},
          {"V", Kind::real, "volume of the ball region"},
          lo, hi, t,
          {"T", Kind::real, "exceedance threshold (default 10 sqrt(V))"},
          {"k", Kind::integer, "number of lattices"},
          {"prime", Kind::integer, "prime for the Hecke lattice family"},
          seed, samples}},
        {"fixed-target",
         "counts in I_t = [xi - c t^-kappa / 2, xi + c t^-kappa / 2) against the volume prediction",
         {{"kappa", Kind::real, "shrinking rate"}, {"c", Kind::real, "interval length at t = 1"},
          {"xi", Kind::real, "target value"}, t_grid, samples, seed, exact,
          {"nu_claimed", Kind::real, "claimed rate, recorded only"}}},
        {"uniform-target",
         "worst window of length t^-kappa over [-N(t), N(t)]",
         {{"kappa", Kind::real, "shrinking rate"}, {"kappa_prime", Kind::real, "histogram resolution exponent"},
          {"eta", Kind::real, "growth exponent of N(t)"}, {"N", Kind::real, "cap on N(t)"}, t_grid,
          samples, seed, exact, {"spot_checks", Kind::integer, "windows checked by direct counting"}}},
        {"supmin", "sup over xi in [-N, N] of the distance from xi to the value set",
         {t, t_grid, {"N", Kind::real, "half-width of the target range"}, exact}},
    };
}

Slot& add_key(CLI::App* cmd, std::deque<Slot>& slots, const Key& k)
{
    Slot& s = slots.emplace_back();
    s.key = k.name;
    s.kind = k.kind;
    const std::string flag = std::string("--") + k.name;
    switch (k.kind) {
    case Kind::real:
        cmd->add_option(flag, s.real, k.help);
        break;
    case Kind::integer:
        cmd->add_option(flag, s.integer, k.help);
        break;
    case Kind::unsigned_integer:
        cmd->add_option(flag, s.uinteger, k.help);
        break;
    case Kind::boolean:
        cmd->add_option(flag, s.boolean, k.help);
        break;
    case Kind::flag:
        cmd->add_flag(flag, s.flag, k.help);
        break;
    case Kind::list:
        cmd->add_option(flag, s.list, k.help)->delimiter(',');
        break;
    case Kind::text:
        cmd->add_option(flag, s.text, k.help);
        break;
    }
    return s;
}

json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw formcount::ValidationError("cannot open " + path);
    return json::parse(in);
}

void report_error(const char* kind, const std::string& message)
{
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Counting integer points where a diagonal form takes values in an interval", "formcount"};
    app.set_version_flag("--version", formcount::version);
    app.require_subcommand(1);

    unsigned workers = 0;
    app.add_option("--workers", workers, "worker threads (0 = hardware concurrency)")->capture_default_str();

    struct Bound {
        std::string name;
        std::deque<Slot> slots;
        std::string config_path;
        std::string form_path;
        std::string out_path;
        CLI::App* app = nullptr;
    };
    std::deque<Bound> bound;
    for (const auto& spec : specs()) {
        Bound& b = bound.emplace_back();
        b.name = spec.name;
        b.app = app.add_subcommand(spec.name, spec.help);
        b.app->add_option("--config", b.config_path, "JSON file with any of the flags below as keys");
        b.app->add_option("--out", b.out_path, "write CSV here instead of stdout");
        if (b.name != "rogers") {
            b.app->add_option("--form", b.form_path, "JSON file with g, or g_num and g_den");
            for (const auto& k : form_keys)
                add_key(b.app, b.slots, k);
        } else {
            for (const auto& k : form_keys)
                if (std::string(k.name) == "p" || std::string(k.name) == "q" || std::string(k.name) == "d")
                    add_key(b.app, b.slots, k);
        }
        for (const auto& k : spec.keys)
            add_key(b.app, b.slots, k);
    }

    auto* verify = app.add_subcommand("verify", "run the acceptance checks");
    std::vector<int> only;
    verify->add_option("--only", only, "criterion ids to run (default all)")->delimiter(',');

    if (argc < 2) {
        std::cerr << app.help();
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (verify->parsed()) {
            const auto results = formcount::acceptance::run(only, workers, std::cout);
            for (const auto& r : results)
                if (!r.pass)
                    return 1;
            return 0;
        }
        for (const auto& b : bound) {
            if (!b.app->parsed())
                continue;
            json cfg = b.config_path.empty() ? json::object() : read_json_file(b.config_path);
            if (!cfg.is_object())
                throw formcount::ValidationError("config file must hold a JSON object");
            if (!b.form_path.empty()) {
                const json form = read_json_file(b.form_path);
                for (const char* key : {"p", "q", "d", "g", "g_num", "g_den"})
                    if (form.contains(key))
                        cfg[key] = form.at(key);
            }
            for (const auto& s : b.slots)
                s.apply(cfg);

            formcount::RunManifest manifest;
            const auto t0 = std::chrono::steady_clock::now();
            const std::string csv = formcount::run_command(b.name, cfg, workers, &manifest);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (b.out_path.empty()) {
                std::cout << csv << std::flush;
            } else {
                std::ofstream out(b.out_path, std::ios::binary);
                if (!out)
                    throw formcount::ValidationError("cannot write " + b.out_path);
                out << csv;
            }
            std::cerr << "# wall_seconds=" << secs << std::endl;
            return 0;
        }
    } catch (const formcount::Error& e) {
        report_error(e.kind(), e.what());
        return 1;
    } catch (const json::exception& e) {
        report_error("json", e.what());
        return 1;
    }
    return 2;
}
