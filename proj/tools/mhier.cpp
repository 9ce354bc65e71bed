// mhier -- command-line front end over the moment-hierarchy library.
//
// Subcommands: evolve, compare, stationary, bounds, oracle, converge.
// All knobs live in a JSON config (--config); the global flags --out,
// --seed, --n-max, --flavor override the corresponding config fields, and
// --dump-config prints the effective resolved config without running.
//
// Every CSV starts with "# config=<fnv1a64-of-resolved-config> schema=N";
// JSON outputs carry the same pair as top-level fields (JSON has no
// comments). Identical config + seed reproduce every output byte for byte.
//
// Exit codes: 0 success, 2 config error, 3 numerical failure (partial
// outputs are kept), 4 constraint-invalid result (e.g. a rejected
// stationary branch).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mhier/diagnostics.hpp"
#include "mhier/eom.hpp"
#include "mhier/harmonic.hpp"
#include "mhier/inequalities.hpp"
#include "mhier/integrate.hpp"
#include "mhier/io.hpp"
#include "mhier/moments.hpp"
#include "mhier/oracle.hpp"
#include "mhier/potential.hpp"
#include "mhier/stationary.hpp"
#include "mhier/weyl.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace mhier;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitConstraint = 4;

// ---------------------------------------------------------------------------
// configuration

struct Settings {
    // potential
    std::string potential_type = "quartic";  // linear|harmonic|quartic|custom
    double lambda = 1.0;                     // quartic: V = lambda q^4
    double omega_sq = 1.0;                   // harmonic: V = omega_sq q^2 / 2
    double beta = 0.0;                       // linear: V = beta q
    std::vector<double> coefficients;        // custom: sum_k c_k q^k

    std::string flavor = "quantum";  // quantum|classical|both
    double hbar = 1e-2;
    std::vector<int> n_max{10};

    // initial state: Gaussian packet or explicit moment file
    bool width2_given = false;
    double width2 = 0.0;  // defaults to hbar when not given
    double q0 = 0.0;
    double p0 = 10.0;
    std::string moments_file;

    double rtol = 1e-10;
    double atol = 1e-10;
    int n_out = 512;

    std::string t_end_text = "2T";  // "<mult>T" or an absolute number
    std::string out_dir = "out";
    std::uint64_t seed = 1;

    // oracle
    std::string oracle_kind = "mc";  // mc|grid|ground
    std::uint64_t mc_samples = 100000;
    double mc_dt_max = 0.0;    // 0 -> dt_out/16
    double grid_half_width = 0.0;  // 0 -> auto
    int grid_points = 0;           // 0 -> auto
    double grid_dt = 0.0;          // 0 -> auto

    // stationary / converge
    double energy = 1.0;
    double g02 = 1.0;

    // bounds
    int bounds_order = 6;
    int bounds_grid = 61;
    double bounds_e_lo = 0.3;
    double bounds_e_hi = 1.2;

    bool dump_hierarchy = false;

    double width2_effective() const { return width2_given ? width2 : hbar; }
};

[[noreturn]] void config_error(const std::string& msg) {
    throw std::invalid_argument(msg);
}

void require_keys(const json& obj, const std::string& where,
                  std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* k) { return key == k; }) == allowed.end())
            config_error("unknown config key \"" + key + "\" in " + where);
    }
}

double number_at(const json& obj, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) config_error(std::string("config field \"") + key + "\" must be a number");
    return obj[key].get<double>();
}

std::uint64_t uint_at(const json& obj, const char* key, std::uint64_t fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_unsigned() && !obj[key].is_number_integer())
        config_error(std::string("config field \"") + key + "\" must be a non-negative integer");
    const auto v = obj[key].get<std::int64_t>();
    if (v < 0) config_error(std::string("config field \"") + key + "\" must be a non-negative integer");
    return static_cast<std::uint64_t>(v);
}

std::string string_at(const json& obj, const char* key, const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_string()) config_error(std::string("config field \"") + key + "\" must be a string");
    return obj[key].get<std::string>();
}

std::vector<int> cutoff_list(const json& v) {
    std::vector<int> out;
    if (v.is_number_integer() || v.is_number_unsigned()) {
        out.push_back(v.get<int>());
    } else if (v.is_array()) {
        for (const auto& e : v) {
            if (!e.is_number_integer() && !e.is_number_unsigned())
                config_error("n_max entries must be integers");
            out.push_back(e.get<int>());
        }
    } else {
        config_error("n_max must be an integer or an array of integers");
    }
    if (out.empty()) config_error("n_max list must not be empty");
    for (int n : out)
        if (n < 1 || n > 40) config_error("n_max entries must lie in [1, 40]");
    return out;
}

Settings settings_from_json(const json& cfg) {
    Settings s;
    require_keys(cfg, "the top level",
                 {"schema", "potential", "flavor", "hbar", "n_max", "initial", "integrator",
                  "t_end", "out", "seed", "oracle", "stationary", "bounds", "dump_hierarchy"});
    if (cfg.contains("schema")) {
        if (!cfg["schema"].is_number_integer() || cfg["schema"].get<int>() != kSchemaVersion)
            config_error("unsupported config schema version (expected " +
                         std::to_string(kSchemaVersion) + ")");
    }

    if (cfg.contains("potential")) {
        const json& pot = cfg["potential"];
        if (!pot.is_object()) config_error("potential must be an object");
        require_keys(pot, "potential", {"type", "lambda", "omega_sq", "beta", "coefficients"});
        s.potential_type = string_at(pot, "type", s.potential_type);
        s.lambda = number_at(pot, "lambda", s.lambda);
        s.omega_sq = number_at(pot, "omega_sq", s.omega_sq);
        s.beta = number_at(pot, "beta", s.beta);
        if (pot.contains("coefficients")) {
            if (!pot["coefficients"].is_array()) config_error("coefficients must be an array");
            for (const auto& c : pot["coefficients"]) {
                if (!c.is_number()) config_error("coefficients entries must be numbers");
                s.coefficients.push_back(c.get<double>());
            }
        }
        if (s.potential_type != "linear" && s.potential_type != "harmonic" &&
            s.potential_type != "quartic" && s.potential_type != "custom")
            config_error("potential type must be linear, harmonic, quartic, or custom");
        if (s.potential_type == "custom" && s.coefficients.empty())
            config_error("custom potential needs a coefficients array");
    }

    s.flavor = string_at(cfg, "flavor", s.flavor);
    if (s.flavor != "quantum" && s.flavor != "classical" && s.flavor != "both")
        config_error("flavor must be quantum, classical, or both");
    s.hbar = number_at(cfg, "hbar", s.hbar);
    if (s.hbar < 0.0) config_error("hbar must be >= 0");
    if (cfg.contains("n_max")) s.n_max = cutoff_list(cfg["n_max"]);

    if (cfg.contains("initial")) {
        const json& ini = cfg["initial"];
        if (!ini.is_object()) config_error("initial must be an object");
        require_keys(ini, "initial", {"width2", "q0", "p0", "moments"});
        s.moments_file = string_at(ini, "moments", "");
        if (!s.moments_file.empty() &&
            (ini.contains("width2") || ini.contains("q0") || ini.contains("p0")))
            config_error("initial: give either a moments file or Gaussian parameters, not both");
        if (ini.contains("width2")) {
            s.width2 = number_at(ini, "width2", 0.0);
            s.width2_given = true;
            if (s.width2 <= 0.0) config_error("width2 must be positive");
        }
        s.q0 = number_at(ini, "q0", s.q0);
        s.p0 = number_at(ini, "p0", s.p0);
    }

    if (cfg.contains("integrator")) {
        const json& it = cfg["integrator"];
        if (!it.is_object()) config_error("integrator must be an object");
        require_keys(it, "integrator", {"rtol", "atol", "n_out"});
        s.rtol = number_at(it, "rtol", s.rtol);
        s.atol = number_at(it, "atol", s.atol);
        if (s.rtol <= 0.0 || s.atol <= 0.0) config_error("tolerances must be positive");
        s.n_out = static_cast<int>(uint_at(it, "n_out", static_cast<std::uint64_t>(s.n_out)));
        if (s.n_out < 2 || s.n_out > 10000000) config_error("n_out must lie in [2, 1e7]");
    }

    if (cfg.contains("t_end")) {
        if (cfg["t_end"].is_number())
            s.t_end_text = format_g17(cfg["t_end"].get<double>());
        else if (cfg["t_end"].is_string())
            s.t_end_text = cfg["t_end"].get<std::string>();
        else
            config_error("t_end must be a number or a string like \"2T\"");
    }
    s.out_dir = string_at(cfg, "out", s.out_dir);
    s.seed = uint_at(cfg, "seed", s.seed);

    if (cfg.contains("oracle")) {
        const json& orc = cfg["oracle"];
        if (!orc.is_object()) config_error("oracle must be an object");
        require_keys(orc, "oracle", {"kind", "samples", "dt_max", "half_width", "points", "dt"});
        s.oracle_kind = string_at(orc, "kind", s.oracle_kind);
        if (s.oracle_kind != "mc" && s.oracle_kind != "grid" && s.oracle_kind != "ground")
            config_error("oracle kind must be mc, grid, or ground");
        s.mc_samples = uint_at(orc, "samples", s.mc_samples);
        if (s.mc_samples < 16) config_error("oracle samples must be >= 16");
        s.mc_dt_max = number_at(orc, "dt_max", s.mc_dt_max);
        s.grid_half_width = number_at(orc, "half_width", s.grid_half_width);
        s.grid_points = static_cast<int>(uint_at(orc, "points", 0));
        s.grid_dt = number_at(orc, "dt", s.grid_dt);
    }

    if (cfg.contains("stationary")) {
        const json& st = cfg["stationary"];
        if (!st.is_object()) config_error("stationary must be an object");
        require_keys(st, "stationary", {"energy", "g02"});
        s.energy = number_at(st, "energy", s.energy);
        s.g02 = number_at(st, "g02", s.g02);
    }

    if (cfg.contains("bounds")) {
        const json& b = cfg["bounds"];
        if (!b.is_object()) config_error("bounds must be an object");
        require_keys(b, "bounds", {"order", "grid", "e_lo", "e_hi"});
        s.bounds_order = static_cast<int>(uint_at(b, "order", static_cast<std::uint64_t>(s.bounds_order)));
        s.bounds_grid = static_cast<int>(uint_at(b, "grid", static_cast<std::uint64_t>(s.bounds_grid)));
        s.bounds_e_lo = number_at(b, "e_lo", s.bounds_e_lo);
        s.bounds_e_hi = number_at(b, "e_hi", s.bounds_e_hi);
    }

    if (cfg.contains("dump_hierarchy")) {
        if (!cfg["dump_hierarchy"].is_boolean()) config_error("dump_hierarchy must be a boolean");
        s.dump_hierarchy = cfg["dump_hierarchy"].get<bool>();
    }
    return s;
}

// canonical form: every field present, fixed order; the hash and the
// --dump-config output are both taken from this object
json canonical_config(const Settings& s) {
    json c;
    c["schema"] = kSchemaVersion;
    json pot;
    pot["type"] = s.potential_type;
    if (s.potential_type == "linear") pot["beta"] = s.beta;
    if (s.potential_type == "harmonic") pot["omega_sq"] = s.omega_sq;
    if (s.potential_type == "quartic") pot["lambda"] = s.lambda;
    if (s.potential_type == "custom") pot["coefficients"] = s.coefficients;
    c["potential"] = pot;
    c["flavor"] = s.flavor;
    c["hbar"] = s.hbar;
    c["n_max"] = s.n_max;
    json ini;
    if (s.moments_file.empty()) {
        ini["width2"] = s.width2_effective();
        ini["q0"] = s.q0;
        ini["p0"] = s.p0;
    } else {
        ini["moments"] = s.moments_file;
    }
    c["initial"] = ini;
    c["integrator"] = {{"rtol", s.rtol}, {"atol", s.atol}, {"n_out", s.n_out}};
    c["t_end"] = s.t_end_text;
    c["out"] = s.out_dir;
    c["seed"] = s.seed;
    c["oracle"] = {{"kind", s.oracle_kind},       {"samples", s.mc_samples},
                   {"dt_max", s.mc_dt_max},       {"half_width", s.grid_half_width},
                   {"points", s.grid_points},     {"dt", s.grid_dt}};
    c["stationary"] = {{"energy", s.energy}, {"g02", s.g02}};
    c["bounds"] = {{"order", s.bounds_order},
                   {"grid", s.bounds_grid},
                   {"e_lo", s.bounds_e_lo},
                   {"e_hi", s.bounds_e_hi}};
    c["dump_hierarchy"] = s.dump_hierarchy;
    return c;
}

PolynomialPotential build_potential(const Settings& s) {
    if (s.potential_type == "linear") return PolynomialPotential::linear(s.beta);
    if (s.potential_type == "harmonic") return PolynomialPotential({0.0, 0.0, 0.5 * s.omega_sq});
    if (s.potential_type == "quartic") {
        if (s.lambda <= 0.0) config_error("quartic coupling lambda must be positive");
        return PolynomialPotential::quartic(s.lambda);
    }
    return PolynomialPotential(s.coefficients);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) config_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// resolved run context

struct Context {
    Settings s;
    json config;       // canonical
    std::string hash;  // fnv1a64 of the canonical dump
    PolynomialPotential V;
    fs::path out;

    std::string provenance() const { return csv_provenance(hash); }

    json json_skeleton() const {
        json j;
        j["schema"] = kSchemaVersion;
        j["config"] = hash;
        return j;
    }

    void write(const std::string& name, const std::string& content) const {
        atomic_write(out / name, content);
    }

    void write_json(const std::string& name, const json& j) const {
        atomic_write(out / name, j.dump(2) + "\n");
    }
};

Context make_context(const Settings& s) {
    Context ctx;
    ctx.s = s;
    ctx.config = canonical_config(s);
    ctx.hash = hash_hex(fnv1a64(ctx.config.dump(2)));
    ctx.V = build_potential(s);
    ctx.out = s.out_dir;
    return ctx;
}

std::vector<Flavor> flavor_list(const Settings& s) {
    if (s.flavor == "quantum") return {Flavor::Quantum};
    if (s.flavor == "classical") return {Flavor::Classical};
    return {Flavor::Quantum, Flavor::Classical};
}

MomentSet make_initial(const Settings& s, Flavor f, int n) {
    MomentSet m;
    if (!s.moments_file.empty()) {
        m = moment_set_from_json(read_file(s.moments_file));
        if (m.n_max != n)
            config_error("moment file cutoff " + std::to_string(m.n_max) +
                         " does not match requested n_max " + std::to_string(n));
        if (f == Flavor::Classical) {
            m = m.as_classical();
        } else if (m.flavor == Flavor::Classical) {
            m.flavor = Flavor::Quantum;  // lift with the configured hbar
            m.hbar = s.hbar;
            m.validate_shape();
        }
    } else {
        m = gaussian_moments(s.width2_effective(), s.hbar, n, s.q0, s.p0);
        if (f == Flavor::Classical) m = m.as_classical();
    }
    return m;
}

void initial_centroid(const Settings& s, double& q0, double& p0) {
    if (!s.moments_file.empty()) {
        const MomentSet m = moment_set_from_json(read_file(s.moments_file));
        q0 = m.q;
        p0 = m.p;
    } else {
        q0 = s.q0;
        p0 = s.p0;
    }
}

// Oscillation period of the centroid-only flow, found by doubling the probe
// horizon until the zero-crossing estimator locks on. Used to resolve
// "<mult>T" time specifications.
double resolve_period(const PolynomialPotential& V, double q0, double p0) {
    double horizon = 1.0;
    for (int iter = 0; iter < 24; ++iter, horizon *= 2.0) {
        IntegrateOptions opt;
        opt.dt_out = horizon / 4096.0;
        const Trajectory probe = integrate_point(q0, p0, V, horizon, opt);
        if (probe.truncated) break;  // centroid flow blew up: not oscillatory
        const double t_rough = estimate_period(probe);
        if (t_rough > 0.0 && horizon >= 4.0 * t_rough) {
            IntegrateOptions fine;
            fine.dt_out = 8.0 * t_rough / 8192.0;
            const double t_fine = estimate_period(integrate_point(q0, p0, V, 8.0 * t_rough, fine));
            return t_fine > 0.0 ? t_fine : t_rough;
        }
    }
    config_error(
        "could not resolve an oscillation period for this potential and initial "
        "centroid (period detection uses zero crossings of q); give t_end as an "
        "absolute number instead");
}

struct TimeSpec {
    double t_end = 0.0;
    double period = 0.0;  // 0 when t_end was absolute
};

TimeSpec resolve_t_end(const Settings& s, const PolynomialPotential& V) {
    std::string text = s.t_end_text;
    text.erase(std::remove_if(text.begin(), text.end(),
                              [](unsigned char c) { return std::isspace(c); }),
               text.end());
    if (text.empty()) config_error("t_end must not be empty");

    TimeSpec ts;
    const bool in_periods = text.back() == 'T';
    if (in_periods) text.pop_back();
    double value = 1.0;
    if (!text.empty() || !in_periods) {
        std::size_t used = 0;
        try {
            value = std::stod(text, &used);
        } catch (const std::exception&) {
            config_error("cannot parse t_end \"" + s.t_end_text + "\"");
        }
        if (used != text.size()) config_error("cannot parse t_end \"" + s.t_end_text + "\"");
    }
    if (!(value > 0.0)) config_error("t_end must be positive");

    if (in_periods) {
        double q0 = 0.0, p0 = 0.0;
        initial_centroid(s, q0, p0);
        ts.period = resolve_period(V, q0, p0);
        ts.t_end = value * ts.period;
    } else {
        ts.t_end = value;
    }
    return ts;
}

double h_drift_rel(const Trajectory& traj) {
    if (traj.h_eff.empty()) return 0.0;
    const double h0 = traj.h_eff.front();
    double drift = 0.0;
    for (double h : traj.h_eff) drift = std::max(drift, std::abs(h - h0));
    return drift / std::max(std::abs(h0), 1e-300);
}

std::string run_tag(Flavor f, int n) {
    return std::string(flavor_name(f)) + "_n" + std::to_string(n);
}

// ---------------------------------------------------------------------------
// evolve

struct EvolveOutcome {
    bool truncated = false;
};

EvolveOutcome evolve_one(const Context& ctx, Flavor f, int n, const TimeSpec& ts) {
    const Settings& s = ctx.s;
    const MomentSet init = make_initial(s, f, n);

    IntegrateOptions opt;
    opt.rtol = s.rtol;
    opt.atol = s.atol;
    opt.dt_out = ts.t_end / s.n_out;
    opt.scales = default_error_scales(init, s.hbar);
    const Trajectory traj = integrate(init, ctx.V, TruncationPolicy{n}, ts.t_end, opt);

    const std::string tag = run_tag(f, n);
    ctx.write("evolve_" + tag + ".csv", trajectory_csv(traj, ctx.provenance()));

    std::string ineq = ctx.provenance() + "t,constraint_id,margin\n";
    const int max_half = std::max(1, n / 2);
    for (std::size_t k = 0; k < traj.size(); ++k)
        ineq += report_csv_rows(traj.times[k], traj.state_at(k), max_half);
    ctx.write("inequalities_" + tag + ".csv", ineq);

    json summary = ctx.json_skeleton();
    summary["flavor"] = flavor_name(f);
    summary["n_max"] = n;
    summary["t_end"] = ts.t_end;
    if (ts.period > 0.0) summary["period"] = ts.period;
    summary["t_reached"] = traj.t_reached;
    summary["truncated"] = traj.truncated;
    summary["stop_reason"] =
        traj.truncated ? "instability: step underflow or non-finite state" : "completed";
    summary["h_drift_rel"] = h_drift_rel(traj);

    std::vector<int> half_orders;
    for (int r = 2; r <= std::min(4, n / 2); ++r) half_orders.push_back(r);
    json violations = json::array();
    if (!half_orders.empty()) {
        for (const MonitorResult& m : monitor(traj, half_orders, ts.period)) {
            json v;
            v["half_order"] = m.half_order;
            v["violated"] = m.violated;
            if (m.violated) {
                v["t_first"] = m.t_first;
                if (ts.period > 0.0) v["t_first_over_T"] = m.t_first_over_T;
            }
            v["worst_margin"] = m.worst_margin;
            violations.push_back(v);
        }
    }
    summary["violations"] = violations;
    ctx.write_json("summary_" + tag + ".json", summary);

    if (s.dump_hierarchy)
        ctx.write("hierarchy_" + tag + ".json",
                  weyl::hierarchy_to_json(hand_hierarchy(ctx.V, f, TruncationPolicy{n})));

    return EvolveOutcome{traj.truncated};
}

int cmd_evolve(const Context& ctx) {
    const Settings& s = ctx.s;
    for (int n : s.n_max)
        if (n < 2)
            config_error("evolve needs n_max >= 2 (centroid-only runs live inside compare)");
    const TimeSpec ts = resolve_t_end(s, ctx.V);

    std::vector<std::future<EvolveOutcome>> jobs;
    for (Flavor f : flavor_list(s))
        for (int n : s.n_max)
            jobs.push_back(std::async(std::launch::async,
                                      [&ctx, f, n, &ts] { return evolve_one(ctx, f, n, ts); }));
    bool any_truncated = false;
    for (auto& j : jobs) any_truncated |= j.get().truncated;
    return any_truncated ? kExitNumerical : kExitOk;
}

// ---------------------------------------------------------------------------
// compare

int cmd_compare(const Context& ctx) {
    const Settings& s = ctx.s;
    std::vector<int> cutoffs = s.n_max;
    std::sort(cutoffs.begin(), cutoffs.end());
    cutoffs.erase(std::unique(cutoffs.begin(), cutoffs.end()), cutoffs.end());
    const std::vector<Flavor> flavors = flavor_list(s);
    if (cutoffs.size() < 2 && flavors.size() < 2)
        config_error("compare needs at least two cutoffs or flavor=both");
    for (int n : cutoffs)
        if (n < 2) config_error("compare cutoffs must be >= 2 (the point run is implicit)");

    const TimeSpec ts = resolve_t_end(s, ctx.V);
    IntegrateOptions opt;
    opt.rtol = s.rtol;
    opt.atol = s.atol;
    opt.dt_out = ts.t_end / s.n_out;

    double q0 = 0.0, p0 = 0.0;
    initial_centroid(s, q0, p0);
    const Trajectory point = integrate_point(q0, p0, ctx.V, ts.t_end, opt);
    const double period = estimate_period(point);

    // hierarchy runs, fanned out per (flavor, cutoff)
    auto run_one = [&](Flavor f, int n) {
        const MomentSet init = make_initial(s, f, n);
        IntegrateOptions o = opt;
        o.scales = default_error_scales(init, s.hbar);
        return integrate(init, ctx.V, TruncationPolicy{n}, ts.t_end, o);
    };
    std::vector<std::vector<Trajectory>> runs(flavors.size());
    {
        std::vector<std::future<Trajectory>> jobs;
        for (Flavor f : flavors)
            for (int n : cutoffs)
                jobs.push_back(std::async(std::launch::async, run_one, f, n));
        std::size_t j = 0;
        for (std::size_t fi = 0; fi < flavors.size(); ++fi) {
            runs[fi].reserve(cutoffs.size());
            for (std::size_t ci = 0; ci < cutoffs.size(); ++ci) runs[fi].push_back(jobs[j++].get());
        }
    }

    bool any_truncated = point.truncated;
    for (const auto& fr : runs)
        for (const Trajectory& t : fr) any_truncated |= t.truncated;

    json summary = ctx.json_skeleton();
    summary["t_end"] = ts.t_end;
    summary["period"] = period;
    summary["cutoffs"] = cutoffs;
    summary["flavors"] = json::array();
    for (Flavor f : flavors) summary["flavors"].push_back(flavor_name(f));

    // per-flavor Delta tables over consecutive listed cutoffs (first vs point)
    std::vector<double> t_over(point.size());
    for (std::size_t k = 0; k < point.size(); ++k)
        t_over[k] = period > 0.0 ? point.times[k] / period : point.times[k];
    for (std::size_t fi = 0; fi < flavors.size(); ++fi) {
        std::vector<std::string> names;
        std::vector<std::vector<double>> cols;
        json maxima;
        for (std::size_t ci = 0; ci < cutoffs.size(); ++ci) {
            const Trajectory& hi = runs[fi][ci];
            const Trajectory& lo = ci == 0 ? point : runs[fi][ci - 1];
            std::vector<double> dn = delta_n(hi, lo);
            dn.resize(point.size(), 0.0);
            names.push_back("delta_" + std::to_string(cutoffs[ci]));
            maxima[names.back()] = *std::max_element(dn.begin(), dn.end());
            cols.push_back(std::move(dn));
        }
        const std::string fname = std::string("delta_") + flavor_name(flavors[fi]) + ".csv";
        ctx.write(fname, wide_csv("t_over_T", t_over, names, cols, ctx.provenance()));
        summary[std::string("delta_max_") + flavor_name(flavors[fi])] = maxima;
    }

    // both flavors at the top cutoff: deviation split and phase report
    if (flavors.size() == 2) {
        const Trajectory& quantum = runs[0].back();
        const Trajectory& classical = runs[1].back();
        const ComparisonSet cmp = align_comparison(point, classical, quantum);

        std::string comparison = ctx.provenance();
        comparison += "t,t_over_T,q_point,p_point,q_classical,p_classical,q_quantum,p_quantum\n";
        for (std::size_t k = 0; k < cmp.times.size(); ++k) {
            comparison += format_g17(cmp.times[k]);
            comparison += ',';
            comparison += format_g17(t_over[k]);
            comparison += ',';
            comparison += format_g17(cmp.q_class[k]);
            comparison += ',';
            comparison += format_g17(cmp.p_class[k]);
            comparison += ',';
            comparison += format_g17(cmp.q_c[k]);
            comparison += ',';
            comparison += format_g17(cmp.p_c[k]);
            comparison += ',';
            comparison += format_g17(cmp.q_q[k]);
            comparison += ',';
            comparison += format_g17(cmp.p_q[k]);
            comparison += '\n';
        }
        ctx.write("comparison.csv", comparison);

        const Decomposition d = decompose(cmp);
        ctx.write("diagnostics.csv",
                  ctx.provenance() +
                      "t_over_T,delta1_q,delta2_q,delta1_p,delta2_p,delta1_sq,delta2_sq,"
                      "gamma_running\n" +
                      decomposition_csv_rows(d));

        double m1q = 0, m2q = 0, m1p = 0, m2p = 0;
        for (std::size_t k = 0; k < d.delta1_q.size(); ++k) {
            m1q = std::max(m1q, std::abs(d.delta1_q[k]));
            m2q = std::max(m2q, std::abs(d.delta2_q[k]));
            m1p = std::max(m1p, std::abs(d.delta1_p[k]));
            m2p = std::max(m2p, std::abs(d.delta2_p[k]));
        }
        summary["max_delta1_q"] = m1q;
        summary["max_delta2_q"] = m2q;
        summary["max_delta1_p"] = m1p;
        summary["max_delta2_p"] = m2p;
        if (d.gamma_defined) summary["gamma"] = d.gamma;
        summary["gamma_defined"] = d.gamma_defined;

        if (period > 0.0 && ts.t_end >= 2.0 * period * (1.0 - 1e-9)) {
            const PhaseStructure ps = phase_structure(cmp);
            json phase;
            phase["lag_q"] = ps.lag_q;
            phase["lag_p"] = ps.lag_p;
            phase["lag_q_over_T"] = ps.lag_q_over_T;
            phase["lag_p_over_T"] = ps.lag_p_over_T;
            phase["critical_points_q"] = ps.critical_points_q;
            phase["critical_points_p"] = ps.critical_points_p;
            phase["common_zero"] = ps.common_zero;
            summary["phase"] = phase;
        }
    }

    summary["truncated"] = any_truncated;
    ctx.write_json("summary.json", summary);
    return any_truncated ? kExitNumerical : kExitOk;
}

// ---------------------------------------------------------------------------
// stationary

// worst inequality margin of a candidate stationary state; used to reject
// towers that no distribution/state can realize
double candidate_margin(const MomentSet& m) {
    double margin = check_heisenberg(m).margin;
    for (const auto& e : check_even_even(m).entries) margin = std::min(margin, e.margin);
    for (int r = 1; 2 * r <= m.n_max; ++r)
        margin = std::min(margin, moment_matrix(m, r).min_eigenvalue);
    return margin;
}

int cmd_stationary(const Context& ctx) {
    const Settings& s = ctx.s;
    const int n = s.n_max.front();
    if (s.n_max.size() != 1) config_error("stationary takes a single n_max");
    if (n < 2) config_error("stationary needs n_max >= 2");

    json summary = ctx.json_skeleton();
    summary["n_max"] = n;
    const int degree = ctx.V.degree();
    int exit_code = kExitOk;

    if (degree <= 2) {
        const HarmonicSpec spec = HarmonicSpec::from_potential(ctx.V);
        summary["potential_kind"] = spec.kind() == HarmonicSpec::Kind::Oscillator
                                        ? "oscillator"
                                        : (spec.kind() == HarmonicSpec::Kind::InverseOscillator
                                               ? "inverse oscillator"
                                               : "uniform force");
        json branches = json::array();
        for (Flavor f : flavor_list(s)) {
            json br;
            br["flavor"] = flavor_name(f);
            const StationaryVerdict verdict = stationary_exists(spec, f);
            br["exists"] = verdict.exists;
            if (!verdict.exists) {
                br["reason"] = verdict.reason;
                exit_code = kExitConstraint;
            } else if (spec.kind() == HarmonicSpec::Kind::Oscillator) {
                if (s.energy <= 0.0) config_error("stationary.energy must be positive");
                const double omega = std::sqrt(spec.omega_sq);
                MomentSet m = f == Flavor::Quantum
                                  ? harmonic_stationary_quantum(s.energy, omega, s.hbar, n)
                                  : harmonic_stationary_classical(s.energy, omega, n);
                const double margin = candidate_margin(m);
                br["margin"] = margin;
                if (margin < -1e-12) {
                    br["exists"] = false;
                    br["reason"] = "energy below the reachable stationary band";
                    exit_code = kExitConstraint;
                } else {
                    ctx.write(std::string("stationary_") + flavor_name(f) + ".json", to_json(m));
                }
            } else {
                // uniform force with beta == 0 (free particle), classical branch:
                // a point at rest, every moment zero
                MomentSet m(Flavor::Classical, 0.0, n, s.q0, 0.0);
                ctx.write(std::string("stationary_") + flavor_name(f) + ".json", to_json(m));
            }
            branches.push_back(br);
        }
        summary["branches"] = branches;
    } else if (degree == 4 && ctx.V.coeffs.size() == 5 && ctx.V.coeffs[1] == 0.0 &&
               ctx.V.coeffs[2] == 0.0 && ctx.V.coeffs[3] == 0.0 && ctx.V.coeffs[4] > 0.0) {
        summary["potential_kind"] = "quartic";
        if (n < 6) config_error("quartic stationary solve needs n_max >= 6");
        json branches = json::array();
        for (Flavor f : flavor_list(s)) {
            const double hbar = f == Flavor::Quantum ? s.hbar : 0.0;
            StationarySolution sol =
                solve_quartic_stationary(s.energy, s.g02, ctx.V.coeffs[4], hbar, n);
            json br;
            br["flavor"] = flavor_name(f);
            br["energy"] = sol.E;
            br["g02"] = sol.G02;
            br["residual"] = sol.residual;
            br["exists"] = sol.valid;
            if (!sol.valid) {
                br["reason"] = sol.reject_reason;
                exit_code = kExitConstraint;
            } else {
                MomentSet m = f == Flavor::Classical ? sol.state.as_classical() : sol.state;
                ctx.write(std::string("stationary_") + flavor_name(f) + ".json", to_json(m));
            }
            branches.push_back(br);
        }
        summary["branches"] = branches;
    } else {
        config_error("stationary supports potentials of degree <= 2 and the pure quartic well");
    }

    summary["all_branches_exist"] = exit_code == kExitOk;
    ctx.write_json("summary.json", summary);
    return exit_code;
}

// ---------------------------------------------------------------------------
// bounds

int cmd_bounds(const Context& ctx) {
    const Settings& s = ctx.s;
    if (s.potential_type != "quartic")
        config_error("bounds requires the quartic potential");
    if (s.bounds_order < 4 || s.bounds_order % 2 != 0 || s.bounds_order > 12)
        config_error("bounds order must be an even number in [4, 12]");
    if (!(s.bounds_e_lo > 0.0 && s.bounds_e_hi > s.bounds_e_lo))
        config_error("bounds window must satisfy 0 < e_lo < e_hi");
    if (s.bounds_grid < 3 || s.bounds_grid > 100000)
        config_error("bounds grid must lie in [3, 1e5]");
    if (s.hbar <= 0.0) config_error("bounds requires hbar > 0");

    const BoundsResult r = ground_energy_bounds(s.lambda, s.hbar, s.bounds_order, s.bounds_grid,
                                                s.bounds_e_lo, s.bounds_e_hi);
    json out = ctx.json_skeleton();
    out["order"] = r.order;
    out["lower"] = r.lower;
    out["upper"] = r.upper;
    out["grid"] = r.grid;
    out["refined_by"] = r.refined_by;
    ctx.write_json("bounds.json", out);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// oracle

json column_report(const std::string& name, const std::vector<double>& a,
                   const std::vector<double>& b, const std::vector<double>* stderrs) {
    json col;
    col["name"] = name;
    double max_diff = 0.0, max_z = 0.0;
    int over3 = 0, compared = 0;
    for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) {
        if (!std::isfinite(b[k])) continue;
        ++compared;
        const double diff = std::abs(a[k] - b[k]);
        max_diff = std::max(max_diff, diff);
        if (stderrs) {
            const double z = diff / std::max((*stderrs)[k], 1e-300);
            max_z = std::max(max_z, z);
            if (z > 3.0) ++over3;
        }
    }
    col["samples"] = compared;
    col["max_abs_diff"] = max_diff;
    if (stderrs) {
        col["max_z"] = max_z;
        col["samples_over_3sigma"] = over3;
    }
    return col;
}

std::vector<double> state_column(const Trajectory& t, int idx) {
    std::vector<double> c(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) c[k] = t.states[k][static_cast<std::size_t>(idx)];
    return c;
}

int cmd_oracle(const Context& ctx) {
    const Settings& s = ctx.s;

    if (s.oracle_kind == "ground") {
        GridSpec spec{s.grid_half_width, s.grid_points, s.grid_dt};
        const GroundStateResult g = ground_state_grid(ctx.V, s.hbar, spec);
        json out = ctx.json_skeleton();
        out["energy"] = g.energy;
        out["energy_delta"] = g.energy_delta;
        if (s.potential_type == "quartic")
            out["energy_scaled"] = g.energy / std::cbrt(std::pow(s.hbar, 4) * s.lambda);
        out["position_moments"] = g.position_moments;
        out["momentum_moments"] = g.momentum_moments;
        out["points"] = g.points;
        out["half_width"] = g.half_width;
        ctx.write_json("ground.json", out);
        return kExitOk;
    }

    const int n = *std::max_element(s.n_max.begin(), s.n_max.end());
    if (n < 4) config_error("oracle comparison needs n_max >= 4");
    const TimeSpec ts = resolve_t_end(s, ctx.V);
    const double dt_out = ts.t_end / s.n_out;
    json report = ctx.json_skeleton();
    report["kind"] = s.oracle_kind;
    report["t_end"] = ts.t_end;
    if (ts.period > 0.0) report["period"] = ts.period;

    if (s.oracle_kind == "mc") {
        const MomentSet init = make_initial(s, Flavor::Classical, n);
        const EnsembleSpec ens = matching_ensemble(init, s.mc_samples, s.seed);
        const McResult mc = liouville_mc(ens, ctx.V, ts.t_end, dt_out, s.mc_dt_max);
        ctx.write("oracle_mc.csv", trajectory_csv(mc.traj, ctx.provenance(), "mc"));
        {
            Trajectory se = mc.traj;
            se.states = mc.stderrs;
            se.h_eff = mc.h_stderr;
            ctx.write("oracle_mc_stderr.csv", trajectory_csv(se, ctx.provenance(), "mc"));
        }

        IntegrateOptions opt;
        opt.rtol = s.rtol;
        opt.atol = s.atol;
        opt.dt_out = dt_out;
        opt.scales = default_error_scales(init, s.hbar);
        const Trajectory hier = integrate(init, ctx.V, TruncationPolicy{n}, ts.t_end, opt);

        json cols = json::array();
        const char* centroid_names[2] = {"q", "p"};
        for (int i = 0; i < 2; ++i) {
            auto se = state_column(mc.traj, i);
            for (std::size_t k = 0; k < se.size(); ++k) se[k] = mc.stderrs[k][static_cast<std::size_t>(i)];
            cols.push_back(column_report(centroid_names[i], state_column(hier, i),
                                         state_column(mc.traj, i), &se));
        }
        for (int i = 0; i < MomentLayout::count(4); ++i) {
            const MomentKey key = MomentLayout::key_at(i);
            std::vector<double> hcol(hier.size()), ocol(mc.traj.size()), secol(mc.traj.size());
            for (std::size_t k = 0; k < hier.size(); ++k)
                hcol[k] = hier.states[k][static_cast<std::size_t>(MomentLayout::index(key.a, key.b)) + 2];
            for (std::size_t k = 0; k < mc.traj.size(); ++k) {
                ocol[k] = mc.traj.states[k][static_cast<std::size_t>(i) + 2];
                secol[k] = mc.stderrs[k][static_cast<std::size_t>(i) + 2];
            }
            cols.push_back(column_report("G_" + std::to_string(key.a) + "_" + std::to_string(key.b),
                                         hcol, ocol, &secol));
        }
        cols.push_back(column_report("H_eff", hier.h_eff, mc.traj.h_eff, &mc.h_stderr));
        report["samples"] = s.mc_samples;
        report["batches"] = mc.batches;
        report["columns"] = cols;
        bool all3 = true;
        for (const auto& c : cols) all3 &= c["samples_over_3sigma"].get<int>() == 0;
        report["within_3sigma"] = all3;
        report["hierarchy_truncated"] = hier.truncated;
        ctx.write_json("oracle_report.json", report);
        return hier.truncated ? kExitNumerical : kExitOk;
    }

    // grid oracle: quantum wavefunction propagation for a Gaussian packet
    if (!s.moments_file.empty())
        config_error("the grid oracle propagates a Gaussian packet; explicit moment "
                     "files are not representable");
    const GridSpec spec{s.grid_half_width, s.grid_points, s.grid_dt};
    const GaussianPacket psi0{s.width2_effective(), s.q0, s.p0};
    const GridResult grid = schrodinger_grid(spec, ctx.V, psi0, s.hbar, ts.t_end, dt_out);
    ctx.write("oracle_grid.csv", trajectory_csv(grid.traj, ctx.provenance(), "grid"));

    const MomentSet init = make_initial(s, Flavor::Quantum, n);
    IntegrateOptions opt;
    opt.rtol = s.rtol;
    opt.atol = s.atol;
    opt.dt_out = dt_out;
    opt.scales = default_error_scales(init, s.hbar);
    const Trajectory hier = integrate(init, ctx.V, TruncationPolicy{n}, ts.t_end, opt);

    json cols = json::array();
    cols.push_back(column_report("q", state_column(hier, 0), state_column(grid.traj, 0), nullptr));
    cols.push_back(column_report("p", state_column(hier, 1), state_column(grid.traj, 1), nullptr));
    for (int i = 0; i < MomentLayout::count(4); ++i) {
        const MomentKey key = MomentLayout::key_at(i);
        std::vector<double> hcol(hier.size()), ocol(grid.traj.size());
        for (std::size_t k = 0; k < hier.size(); ++k)
            hcol[k] = hier.states[k][static_cast<std::size_t>(MomentLayout::index(key.a, key.b)) + 2];
        for (std::size_t k = 0; k < grid.traj.size(); ++k)
            ocol[k] = grid.traj.states[k][static_cast<std::size_t>(i) + 2];
        json c = column_report("G_" + std::to_string(key.a) + "_" + std::to_string(key.b), hcol,
                               ocol, nullptr);
        if (c["samples"].get<int>() > 0) cols.push_back(c);
    }
    cols.push_back(column_report("H_eff", hier.h_eff, grid.traj.h_eff, nullptr));
    report["columns"] = cols;
    report["half_width"] = grid.half_width;
    report["points"] = grid.points;
    report["dt"] = grid.dt;
    report["max_norm_drift"] = grid.max_norm_drift;
    report["max_boundary_prob"] = grid.max_boundary_prob;
    if (s.potential_type == "quartic") {
        const double e0 = centroid_energy(init, ctx.V);
        if (e0 > 0.0) report["q_max_classical"] = orbit_references(e0, s.lambda).q_max;
    }
    report["hierarchy_truncated"] = hier.truncated;
    ctx.write_json("oracle_report.json", report);
    return hier.truncated ? kExitNumerical : kExitOk;
}

// ---------------------------------------------------------------------------
// converge

int cmd_converge(const Context& ctx) {
    const Settings& s = ctx.s;
    if (s.potential_type != "quartic")
        config_error("converge studies the quartic stationary family");
    std::vector<int> cutoffs = s.n_max;
    std::sort(cutoffs.begin(), cutoffs.end());
    cutoffs.erase(std::unique(cutoffs.begin(), cutoffs.end()), cutoffs.end());
    if (cutoffs.size() < 2) config_error("converge needs at least two cutoffs");
    for (int n : cutoffs)
        if (n < 6) config_error("converge cutoffs must be >= 6");

    const ConvergenceStudy study =
        convergence_study(s.energy, s.g02, s.lambda, s.hbar, cutoffs);
    json out = ctx.json_skeleton();
    out["energy"] = s.energy;
    out["g02"] = s.g02;
    out["lambda"] = s.lambda;
    out["hbar"] = s.hbar;
    out["cutoffs"] = study.cutoffs;
    json pairs = json::array();
    for (const ConvergencePair& p : study.pairs) {
        json e;
        e["cutoff_lo"] = p.cutoff_lo;
        e["cutoff_hi"] = p.cutoff_hi;
        e["agreement_order"] = p.agreement_order;
        e["max_rel_by_order"] = p.max_rel_by_order;
        pairs.push_back(e);
    }
    out["pairs"] = pairs;
    ctx.write_json("converge.json", out);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"moment-hierarchy simulation engine"};
    app.require_subcommand(1);

    std::string config_path, out_dir, flavor, n_max_text;
    std::uint64_t seed = 0;
    bool dump_config = false;
    auto* opt_config = app.add_option("--config", config_path, "JSON run configuration");
    auto* opt_out = app.add_option("--out", out_dir, "output directory (overrides config)");
    auto* opt_seed = app.add_option("--seed", seed, "ensemble seed (overrides config)");
    auto* opt_nmax =
        app.add_option("--n-max", n_max_text, "cutoff list N[,N...] (overrides config)");
    auto* opt_flavor = app.add_option("--flavor", flavor, "quantum|classical|both (overrides config)");
    app.add_flag("--dump-config", dump_config,
                 "print the effective resolved config and exit without running");

    CLI::App* sub_evolve = app.add_subcommand(
        "evolve", "integrate the truncated hierarchy; trajectory, inequality and summary files");
    CLI::App* sub_compare = app.add_subcommand(
        "compare", "aligned multi-cutoff / multi-flavor runs with deviation splits");
    CLI::App* sub_stationary =
        app.add_subcommand("stationary", "stationary moment towers by potential branch");
    CLI::App* sub_bounds =
        app.add_subcommand("bounds", "two-sided ground-energy interval from the constraint suite");
    CLI::App* sub_oracle = app.add_subcommand(
        "oracle", "independent reference solvers and hierarchy-vs-oracle reports");
    CLI::App* sub_converge =
        app.add_subcommand("converge", "cutoff-convergence ladder of the stationary family");
    for (CLI::App* sub :
         {sub_evolve, sub_compare, sub_stationary, sub_bounds, sub_oracle, sub_converge})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        json raw = json::object();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) {
                std::fprintf(stderr, "error: cannot read config %s\n", config_path.c_str());
                return kExitConfig;
            }
            try {
                raw = json::parse(in);
            } catch (const nlohmann::json::exception& e) {
                std::fprintf(stderr, "error: config parse failure: %s\n", e.what());
                return kExitConfig;
            }
            if (!raw.is_object()) {
                std::fprintf(stderr, "error: config root must be a JSON object\n");
                return kExitConfig;
            }
        }
        (void)opt_config;

        Settings s = settings_from_json(raw);
        if (opt_out->count()) s.out_dir = out_dir;
        if (opt_seed->count()) s.seed = seed;
        if (opt_flavor->count()) {
            if (flavor != "quantum" && flavor != "classical" && flavor != "both")
                config_error("--flavor must be quantum, classical, or both");
            s.flavor = flavor;
        }
        if (opt_nmax->count()) {
            std::vector<int> ns;
            std::stringstream ss(n_max_text);
            std::string item;
            while (std::getline(ss, item, ',')) {
                try {
                    std::size_t used = 0;
                    const int v = std::stoi(item, &used);
                    if (used != item.size()) throw std::invalid_argument(item);
                    ns.push_back(v);
                } catch (const std::exception&) {
                    config_error("cannot parse --n-max entry \"" + item + "\"");
                }
            }
            if (ns.empty()) config_error("--n-max list must not be empty");
            for (int v : ns)
                if (v < 1 || v > 40) config_error("--n-max entries must lie in [1, 40]");
            s.n_max = ns;
        }

        Context ctx = make_context(s);
        if (dump_config) {
            std::printf("%s\n", ctx.config.dump(2).c_str());
            return kExitOk;
        }

        if (sub_evolve->parsed()) return cmd_evolve(ctx);
        if (sub_compare->parsed()) return cmd_compare(ctx);
        if (sub_stationary->parsed()) return cmd_stationary(ctx);
        if (sub_bounds->parsed()) return cmd_bounds(ctx);
        if (sub_oracle->parsed()) return cmd_oracle(ctx);
        if (sub_converge->parsed()) return cmd_converge(ctx);
        std::fprintf(stderr, "error: no subcommand\n");
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::runtime_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
}
