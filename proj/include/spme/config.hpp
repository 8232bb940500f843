#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "spme/analysis.hpp"
#include "spme/errors.hpp"
#include "spme/extinction.hpp"
#include "spme/report.hpp"
#include "spme/stats.hpp"
#include "spme/validation.hpp"

namespace spme {

/// Settings for the `barenblatt` subcommand.
struct ProfileTable {
    double C = 1.0;
    double t0 = 1.0;
    double center = 0.0;
    std::vector<double> times{0.0, 0.5, 1.0};
    double x_lo = -4.0, x_hi = 4.0;
    std::size_t points = 401;
};

/// Fully resolved configuration document.
struct RunConfig {
    SolverConfig solver;
    Profile initial = BumpProfile{};
    double path_dt = 0.0;
    std::size_t quadrature_nodes = 128;
    std::uint64_t seed = 1;
    double snapshot_dt = 0.01;
    unsigned workers = 1;

    std::size_t mc_paths = 20;
    std::vector<double> mc_horizons = stats::log_space(0.1, 20.0, 12);
    Convention convention = Convention::heuristic;
    std::optional<double> M_bar;

    std::vector<double> ladder{0.08, 0.04, 0.02, 0.01};
    std::size_t ladder_paths = 20;
    double tau = 0.05;
    ContractionSettings contraction{};

    ProfileTable barenblatt;

    BarenblattCheckConfig check_barenblatt;
    DominationCheckConfig check_domination;
    WeakformCheckConfig check_weakform;
    ConvergenceCheckConfig check_convergence;
    ContractionCheckConfig check_contraction;

    double path_step() const { return path_dt > 0.0 ? path_dt : solver.epsilon / 4.0; }

    McConfig mc() const {
        McConfig c;
        c.solver = solver;
        c.initial = initial;
        c.paths = mc_paths;
        c.horizons = mc_horizons;
        c.master_seed = seed;
        c.convention = convention;
        c.dt_path = path_dt;
        c.snapshot_dt = snapshot_dt;
        c.quadrature_nodes = quadrature_nodes;
        c.M_bar = M_bar;
        c.workers = workers;
        return c;
    }

    LadderConfig ladder_config() const {
        LadderConfig c;
        c.base = solver;
        c.initial = initial;
        c.ladder = ladder;
        c.paths = ladder_paths;
        c.master_seed = seed;
        c.snapshot_dt = snapshot_dt;
        c.dt_path = path_dt;
        c.quadrature_nodes = quadrature_nodes;
        c.workers = workers;
        return c;
    }
};

/// The default document; every accepted key appears here.
inline Json default_config_json() {
    const auto b = BarenblattCheckConfig{};
    const auto d = DominationCheckConfig{};
    const auto w = WeakformCheckConfig{};
    const auto lc = default_ladder_config();
    const auto cs = ContractionSettings{};
    Json tests = Json::array();
    for (const auto& t : w.tests) tests.push_back({{"center", t.center}, {"half_width", t.half_width}});
    auto ladder_json = [&](double tau) {
        Json j = {{"m", lc.base.m},
                  {"nu", lc.base.nu},
                  {"grid", to_json(lc.base.grid)},
                  {"t_end", lc.base.t_end},
                  {"initial", to_json(lc.initial)},
                  {"epsilons", lc.ladder},
                  {"paths", lc.paths},
                  {"snapshot_dt", lc.snapshot_dt},
                  {"seed", lc.master_seed}};
        if (tau > 0.0) j["tau"] = tau;
        else {
            j["kappa"] = cs.kappa;
            j["K"] = {cs.K_lo, cs.K_hi};
        }
        return j;
    };
    return {
        {"solver",
         {{"m", 2.0},
          {"nu", 1.0},
          {"epsilon", 0.01},
          {"grid", {{"a", -1.0}, {"b", 1.0}, {"n", 128}}},
          {"t_end", 1.0},
          {"cfl", 0.9},
          {"extinction_tol", nullptr},
          {"max_steps", 100000000},
          {"max_dt", nullptr},
          {"stop_when_extinct", false}}},
        {"initial", {{"kind", "bump"}, {"center", 0.0}, {"half_width", 0.5}, {"amplitude", 1.0}}},
        {"path", {{"dt", 0.0}, {"quadrature_nodes", 128}}},
        {"seed", 1},
        {"snapshot_dt", 0.01},
        {"workers", nullptr},
        {"mc",
         {{"paths", 20},
          {"horizons", {{"lo", 0.1}, {"hi", 20.0}, {"count", 12}}},
          {"convention", "heuristic"},
          {"M_bar", nullptr}}},
        {"ladder", {{"epsilons", {0.08, 0.04, 0.02, 0.01}}, {"paths", 20}, {"tau", 0.05}, {"kappa", cs.kappa}, {"K", {cs.K_lo, cs.K_hi}}}},
        {"barenblatt",
         {{"C", 1.0}, {"t0", 1.0}, {"center", 0.0}, {"times", {0.0, 0.5, 1.0}}, {"x_lo", -4.0}, {"x_hi", 4.0}, {"points", 401}}},
        {"validate",
         {{"barenblatt",
           {{"m", b.m},
            {"a", b.a},
            {"b", b.b},
            {"n", b.n},
            {"C", b.C},
            {"t0", b.t0},
            {"t_end", b.t_end},
            {"epsilon", b.epsilon},
            {"l1_rel_tol", b.l1_rel_tol},
            {"front_cells", b.front_cells},
            {"front_rel", b.front_rel},
            {"front_threshold_rel", b.front_threshold_rel},
            {"runtime_limit", b.runtime_limit}}},
          {"domination",
           {{"m", d.m},
            {"a", d.a},
            {"b", d.b},
            {"n", d.n},
            {"t_end", d.t_end},
            {"epsilon", d.epsilon},
            {"initial", to_json(Profile{d.initial})},
            {"checkpoints", d.checkpoints},
            {"tol_cells", d.tol_cells},
            {"spot_paths", d.spot_paths},
            {"seed", d.master_seed}}},
          {"weakform",
           {{"m", w.m},
            {"nu", w.nu},
            {"a", w.a},
            {"b", w.b},
            {"n", w.n},
            {"dt_path", w.dt_path},
            {"epsilon", w.epsilon},
            {"t_end", w.t_end},
            {"initial", to_json(Profile{w.initial})},
            {"tests", tests},
            {"checkpoints", w.checkpoints},
            {"min_ratio", w.min_ratio},
            {"seed", w.master_seed},
            {"path_index", w.path_index}}},
          {"convergence", ladder_json(0.05)},
          {"contraction", ladder_json(0.0)}}}};
}

namespace detail {

inline std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

/// Every key of `user` must exist in `ref`; objects are checked recursively.
inline void check_keys(const Json& user, const Json& ref, const std::string& prefix) {
    if (!user.is_object()) return;
    if (!ref.is_object()) throw ConfigError(prefix + ": expected a value, got an object");
    for (auto it = user.begin(); it != user.end(); ++it) {
        const auto key = join(prefix, it.key());
        if (!ref.contains(it.key())) throw ConfigError(key + ": unknown key");
        const auto& r = ref[it.key()];
        if (it.key() == "initial") {
            if (!it.value().is_object()) throw ConfigError(key + ": expected an object");
            continue;
        }
        if (r.is_object() && !(it.key() == "horizons" && it.value().is_array())) check_keys(it.value(), r, key);
    }
}

inline void merge(Json& base, const Json& patch) {
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        const bool replace = it.key() == "initial" && it.value().is_object() && it.value().contains("kind");
        if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object() && !replace)
            merge(base[it.key()], it.value());
        else
            base[it.key()] = it.value();
    }
}

inline const Json& at(const Json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) throw ConfigError(join(path, key) + ": missing");
    return j.at(key);
}

inline double real(const Json& j, const std::string& key, const std::string& path) {
    const auto& v = at(j, key, path);
    if (!v.is_number()) throw ConfigError(join(path, key) + ": expected a number");
    return v.get<double>();
}

inline std::optional<double> opt_real(const Json& j, const std::string& key, const std::string& path) {
    const auto& v = at(j, key, path);
    if (v.is_null()) return std::nullopt;
    if (!v.is_number()) throw ConfigError(join(path, key) + ": expected a number or null");
    return v.get<double>();
}

inline std::uint64_t count(const Json& j, const std::string& key, const std::string& path) {
    const auto& v = at(j, key, path);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw ConfigError(join(path, key) + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
}

inline bool flag(const Json& j, const std::string& key, const std::string& path) {
    const auto& v = at(j, key, path);
    if (!v.is_boolean()) throw ConfigError(join(path, key) + ": expected true or false");
    return v.get<bool>();
}

inline std::vector<double> reals(const Json& j, const std::string& key, const std::string& path) {
    const auto& v = at(j, key, path);
    if (!v.is_array()) throw ConfigError(join(path, key) + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw ConfigError(join(path, key) + ": expected an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

inline Grid1D grid(const Json& j, const std::string& path) {
    const double a = real(j, "a", path), b = real(j, "b", path);
    const auto n = count(j, "n", path);
    if (!(a < b)) throw ConfigError(path + ": a must be below b");
    if (n < 3) throw ConfigError(path + ".n: need at least 3 cells");
    return Grid1D{a, b, n};
}

inline Profile profile(const Json& j, const std::string& path) {
    const auto& kind = at(j, "kind", path);
    if (!kind.is_string()) throw ConfigError(path + ".kind: expected a string");
    const auto k = kind.get<std::string>();
    if (k == "zero") return ZeroProfile{};
    if (k == "bump") {
        BumpProfile b{real(j, "center", path), real(j, "half_width", path), real(j, "amplitude", path)};
        if (!(b.half_width > 0.0)) throw ConfigError(path + ".half_width: must be positive");
        if (!(b.amplitude >= 0.0)) throw ConfigError(path + ".amplitude: must be non-negative");
        return b;
    }
    if (k == "barenblatt") {
        BarenblattProfile p{real(j, "m", path), real(j, "C", path), real(j, "t0", path), real(j, "center", path)};
        p.validate();
        return BarenblattSlice{p, real(j, "time", path)};
    }
    throw ConfigError(path + ".kind: unknown profile '" + k + "' (zero, bump, barenblatt)");
}

inline std::vector<double> horizons(const Json& j, const std::string& path) {
    if (j.is_array()) return reals(Json{{"h", j}}, "h", path);
    if (!j.is_object()) throw ConfigError(path + ": expected {lo, hi, count} or an array");
    return stats::log_space(real(j, "lo", path), real(j, "hi", path), count(j, "count", path));
}

inline LadderConfig ladder(const Json& j, const std::string& path) {
    LadderConfig c = default_ladder_config();
    c.base.m = real(j, "m", path);
    c.base.nu = real(j, "nu", path);
    c.base.grid = grid(at(j, "grid", path), path + ".grid");
    c.base.t_end = real(j, "t_end", path);
    c.initial = profile(at(j, "initial", path), path + ".initial");
    c.ladder = reals(j, "epsilons", path);
    c.paths = count(j, "paths", path);
    c.snapshot_dt = real(j, "snapshot_dt", path);
    c.master_seed = count(j, "seed", path);
    return c;
}

}  // namespace detail

/// Applies a dotted override such as `solver.grid.n=256`; the value is parsed
/// as JSON and kept as a string if that fails.
inline void apply_override(Json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "': expected key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    Json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override '" + assignment + "': empty key segment");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            break;
        }
        if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = Json::object();
        node = &(*node)[part];
        start = dot + 1;
    }
}

/// Merges `user` into the defaults after rejecting unknown keys.
inline Json resolve_document(const Json& user) {
    if (!user.is_object()) throw ConfigError("config: top level must be an object");
    Json doc = default_config_json();
    detail::check_keys(user, doc, "");
    detail::merge(doc, user);
    return doc;
}

inline Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config: '" + path + "' is not valid JSON");
    return j;
}

/// Converts a resolved document into typed settings, with field-level errors.
inline RunConfig parse_config(const Json& doc) {
    using namespace detail;
    RunConfig c;
    const auto& s = at(doc, "solver", "");
    c.solver.m = real(s, "m", "solver");
    c.solver.nu = real(s, "nu", "solver");
    c.solver.epsilon = real(s, "epsilon", "solver");
    c.solver.grid = grid(at(s, "grid", "solver"), "solver.grid");
    c.solver.t_end = real(s, "t_end", "solver");
    c.solver.cfl = real(s, "cfl", "solver");
    c.solver.extinction_tol = opt_real(s, "extinction_tol", "solver");
    c.solver.max_steps = count(s, "max_steps", "solver");
    if (auto v = opt_real(s, "max_dt", "solver")) c.solver.max_dt = *v;
    c.solver.stop_when_extinct = flag(s, "stop_when_extinct", "solver");
    c.solver.validate();

    c.initial = profile(at(doc, "initial", ""), "initial");
    const auto& p = at(doc, "path", "");
    c.path_dt = real(p, "dt", "path");
    if (c.path_dt < 0.0) throw ConfigError("path.dt: must be non-negative (0 selects epsilon/4)");
    c.quadrature_nodes = count(p, "quadrature_nodes", "path");
    if (c.quadrature_nodes < 64) throw ConfigError("path.quadrature_nodes: need at least 64");
    c.seed = count(doc, "seed", "");
    c.snapshot_dt = real(doc, "snapshot_dt", "");
    if (!(c.snapshot_dt > 0.0)) throw ConfigError("snapshot_dt: must be positive");
    if (const auto& w = at(doc, "workers", ""); !w.is_null()) {
        const auto n = count(doc, "workers", "");
        if (n == 0) throw ConfigError("workers: must be at least 1");
        c.workers = static_cast<unsigned>(n);
    } else {
        c.workers = default_workers();
    }

    const auto& mc = at(doc, "mc", "");
    c.mc_paths = count(mc, "paths", "mc");
    c.mc_horizons = horizons(at(mc, "horizons", "mc"), "mc.horizons");
    const auto& conv = at(mc, "convention", "mc");
    if (!conv.is_string()) throw ConfigError("mc.convention: expected a string");
    try {
        c.convention = parse_convention(conv.get<std::string>());
    } catch (const Error& e) {
        throw ConfigError(std::string("mc.convention: ") + e.what());
    }
    c.M_bar = opt_real(mc, "M_bar", "mc");

    const auto& ld = at(doc, "ladder", "");
    c.ladder = reals(ld, "epsilons", "ladder");
    c.ladder_paths = count(ld, "paths", "ladder");
    c.tau = real(ld, "tau", "ladder");
    c.contraction.kappa = real(ld, "kappa", "ladder");
    const auto K = reals(ld, "K", "ladder");
    if (K.size() != 2) throw ConfigError("ladder.K: expected [lo, hi]");
    c.contraction.K_lo = K[0];
    c.contraction.K_hi = K[1];

    const auto& bt = at(doc, "barenblatt", "");
    c.barenblatt.C = real(bt, "C", "barenblatt");
    c.barenblatt.t0 = real(bt, "t0", "barenblatt");
    c.barenblatt.center = real(bt, "center", "barenblatt");
    c.barenblatt.times = reals(bt, "times", "barenblatt");
    c.barenblatt.x_lo = real(bt, "x_lo", "barenblatt");
    c.barenblatt.x_hi = real(bt, "x_hi", "barenblatt");
    c.barenblatt.points = count(bt, "points", "barenblatt");
    if (c.barenblatt.points < 2 || !(c.barenblatt.x_lo < c.barenblatt.x_hi))
        throw ConfigError("barenblatt: need x_lo < x_hi and at least 2 points");

    const auto& v = at(doc, "validate", "");
    {
        const auto& j = at(v, "barenblatt", "validate");
        const std::string pth = "validate.barenblatt";
        auto& b = c.check_barenblatt;
        b.m = real(j, "m", pth);
        b.a = real(j, "a", pth);
        b.b = real(j, "b", pth);
        b.n = count(j, "n", pth);
        b.C = real(j, "C", pth);
        b.t0 = real(j, "t0", pth);
        b.t_end = real(j, "t_end", pth);
        b.epsilon = real(j, "epsilon", pth);
        b.l1_rel_tol = real(j, "l1_rel_tol", pth);
        b.front_cells = real(j, "front_cells", pth);
        b.front_rel = real(j, "front_rel", pth);
        b.front_threshold_rel = real(j, "front_threshold_rel", pth);
        b.runtime_limit = real(j, "runtime_limit", pth);
    }
    {
        const auto& j = at(v, "domination", "validate");
        const std::string pth = "validate.domination";
        auto& d = c.check_domination;
        d.m = real(j, "m", pth);
        d.a = real(j, "a", pth);
        d.b = real(j, "b", pth);
        d.n = count(j, "n", pth);
        d.t_end = real(j, "t_end", pth);
        d.epsilon = real(j, "epsilon", pth);
        const auto prof = profile(at(j, "initial", pth), pth + ".initial");
        if (!std::holds_alternative<BumpProfile>(prof)) throw ConfigError(pth + ".initial: must be a bump");
        d.initial = std::get<BumpProfile>(prof);
        d.checkpoints = reals(j, "checkpoints", pth);
        d.tol_cells = real(j, "tol_cells", pth);
        d.spot_paths = count(j, "spot_paths", pth);
        d.master_seed = count(j, "seed", pth);
    }
    {
        const auto& j = at(v, "weakform", "validate");
        const std::string pth = "validate.weakform";
        auto& w = c.check_weakform;
        w.m = real(j, "m", pth);
        w.nu = real(j, "nu", pth);
        w.a = real(j, "a", pth);
        w.b = real(j, "b", pth);
        w.n = count(j, "n", pth);
        w.dt_path = real(j, "dt_path", pth);
        w.epsilon = real(j, "epsilon", pth);
        w.t_end = real(j, "t_end", pth);
        const auto prof = profile(at(j, "initial", pth), pth + ".initial");
        if (!std::holds_alternative<BumpProfile>(prof)) throw ConfigError(pth + ".initial: must be a bump");
        w.initial = std::get<BumpProfile>(prof);
        w.tests.clear();
        const auto& tests = at(j, "tests", pth);
        if (!tests.is_array()) throw ConfigError(pth + ".tests: expected an array");
        for (const auto& t : tests) w.tests.push_back({real(t, "center", pth + ".tests"), real(t, "half_width", pth + ".tests")});
        w.checkpoints = reals(j, "checkpoints", pth);
        w.min_ratio = real(j, "min_ratio", pth);
        w.master_seed = count(j, "seed", pth);
        w.path_index = count(j, "path_index", pth);
    }
    {
        const auto& j = at(v, "convergence", "validate");
        c.check_convergence.ladder = ladder(j, "validate.convergence");
        c.check_convergence.ladder.workers = c.workers;
        c.check_convergence.tau = real(j, "tau", "validate.convergence");
    }
    {
        const auto& j = at(v, "contraction", "validate");
        c.check_contraction.ladder = ladder(j, "validate.contraction");
        c.check_contraction.ladder.workers = c.workers;
        c.check_contraction.settings.kappa = real(j, "kappa", "validate.contraction");
        const auto k = reals(j, "K", "validate.contraction");
        if (k.size() != 2) throw ConfigError("validate.contraction.K: expected [lo, hi]");
        c.check_contraction.settings.K_lo = k[0];
        c.check_contraction.settings.K_hi = k[1];
    }
    return c;
}

}  // namespace spme
