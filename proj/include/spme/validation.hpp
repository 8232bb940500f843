#pragma once

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "spme/analysis.hpp"
#include "spme/barenblatt.hpp"
#include "spme/extinction.hpp"
#include "spme/pme_solver.hpp"
#include "spme/report.hpp"

namespace spme {

/// One checked inequality: `measured relation threshold`.
struct Assertion {
    std::string name;
    double measured = 0.0;
    std::string relation;
    double threshold = 0.0;
    bool passed = false;
};

struct SuiteReport {
    std::string suite;
    std::vector<Assertion> assertions;
    /// Wall-clock checks; kept apart so that reports stay byte-reproducible.
    std::vector<Assertion> timings;
    double seconds = 0.0;
    /// Full measurement payload.
    Json details = Json::object();

    bool passed() const {
        for (const auto& a : assertions)
            if (!a.passed) return false;
        for (const auto& a : timings)
            if (!a.passed) return false;
        return !assertions.empty();
    }

    void check_le(std::string name, double measured, double threshold) {
        assertions.push_back({std::move(name), measured, "<=", threshold, measured <= threshold});
    }
    void check_ge(std::string name, double measured, double threshold) {
        assertions.push_back({std::move(name), measured, ">=", threshold, measured >= threshold});
    }
    void check_lt(std::string name, double measured, double threshold) {
        assertions.push_back({std::move(name), measured, "<", threshold, measured < threshold});
    }
    void check_gt(std::string name, double measured, double threshold) {
        assertions.push_back({std::move(name), measured, ">", threshold, measured > threshold});
    }
    void check_runtime(std::string name, double seconds, double limit) {
        timings.push_back({std::move(name), seconds, "<", limit, seconds < limit});
    }
    void check_true(std::string name, bool ok) {
        assertions.push_back({std::move(name), ok ? 1.0 : 0.0, "==", 1.0, ok});
    }
};

inline Json to_json(const std::vector<Assertion>& v) {
    Json list = Json::array();
    for (const auto& a : v)
        list.push_back({{"name", a.name},
                        {"measured", num(a.measured)},
                        {"relation", a.relation},
                        {"threshold", num(a.threshold)},
                        {"passed", a.passed}});
    return list;
}

/// Timings are excluded; see SuiteReport::timings.
inline Json to_json(const SuiteReport& r) {
    const Json list = to_json(r.assertions);
    return {{"suite", r.suite}, {"passed", r.passed()}, {"assertions", list}, {"details", r.details}};
}

namespace detail {
class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Identically zero driving path for nu = 0 runs.
inline MollifiedPath still_path(double t_end) {
    auto p = std::make_shared<const BrownianPath>(BrownianPath::from_values({0.0, 0.0, 0.0}, t_end / 2.0));
    return mollify(p, t_end);
}

/// Mass of a Barenblatt profile outside [a, b] at time t (midpoint rule).
inline double exterior_mass(const BarenblattProfile& p, double a, double b, double t) {
    const double r = p.radius(t);
    double acc = 0.0;
    auto add = [&](double lo, double hi) {
        if (!(hi > lo)) return;
        const std::size_t cells = 20000;
        const double dx = (hi - lo) / static_cast<double>(cells);
        for (std::size_t i = 0; i < cells; ++i) acc += dx * eval_density(p, lo + (static_cast<double>(i) + 0.5) * dx, t);
    };
    add(p.center - r, a);
    add(b, p.center + r);
    return acc;
}
}  // namespace detail

/// Position where the excess u - floor first drops below `threshold`, walking
/// outward from the maximum; linear interpolation between cell centres. If
/// the excess never drops below the threshold the interval endpoint is
/// returned.
struct FrontPosition {
    double left = 0.0;
    double right = 0.0;
};

inline FrontPosition detect_front(const DensityField& f, double floor, double threshold) {
    const Grid1D& g = f.grid;
    const auto e = [&](std::size_t j) { return f.values[j] - floor - threshold; };
    std::size_t peak = 0;
    for (std::size_t j = 1; j < g.n; ++j)
        if (f.values[j] > f.values[peak]) peak = j;
    FrontPosition fp{g.a, g.b};
    for (std::size_t j = peak; j + 1 < g.n; ++j)
        if (e(j) > 0.0 && e(j + 1) <= 0.0) {
            fp.right = g.center(j) + g.h() * e(j) / (e(j) - e(j + 1));
            break;
        }
    for (std::size_t j = peak; j > 0; --j)
        if (e(j) > 0.0 && e(j - 1) <= 0.0) {
            fp.left = g.center(j) - g.h() * e(j) / (e(j) - e(j - 1));
            break;
        }
    return fp;
}

// ---------------------------------------------------------------------------
// Deterministic Barenblatt validation

struct BarenblattCheckConfig {
    double m = 2.0;
    double a = -2.0, b = 2.0;
    std::size_t n = 400;
    double C = 0.25;
    double t0 = 0.1;
    double t_end = 0.4;
    double epsilon = 1e-3;
    double cfl = 0.9;
    double l1_rel_tol = 1.5e-2;
    double front_cells = 3.0;
    double front_rel = 0.03;
    /// Front threshold relative to the final peak excess.
    double front_threshold_rel = 1e-3;
    double runtime_limit = 30.0;
};

inline SuiteReport barenblatt_suite(const BarenblattCheckConfig& c) {
    detail::Stopwatch clock;
    SuiteReport rep;
    rep.suite = "barenblatt";
    const BarenblattProfile prof{c.m, c.C, c.t0, 0.5 * (c.a + c.b)};
    prof.validate();
    SolverConfig sc;
    sc.m = c.m;
    sc.nu = 0.0;
    sc.epsilon = c.epsilon;
    sc.grid = Grid1D{c.a, c.b, c.n};
    sc.t_end = c.t_end;
    sc.cfl = c.cfl;
    const auto u0 = initial_density(BarenblattSlice{prof, 0.0}, sc.grid);
    const auto trace = solve(sc, detail::still_path(c.t_end), u0, c.t_end);
    const auto& fin = trace.snapshots.back();
    const double h = sc.grid.h();

    double l1 = 0.0, peak = 0.0;
    for (std::size_t j = 0; j < c.n; ++j) {
        const double w = fin.values[j] - c.epsilon;
        l1 += h * std::abs(w - eval_density(prof, sc.grid.center(j), c.t_end));
        peak = std::max(peak, w);
    }
    const double outside = detail::exterior_mass(prof, c.a, c.b, c.t_end);
    l1 += outside;
    const double mass = prof.mass();
    const auto front = detect_front(fin, c.epsilon, c.front_threshold_rel * peak);
    const double r = prof.radius(c.t_end);
    const double front_err = std::max(std::abs(front.right - prof.center - r), std::abs(prof.center - front.left - r));
    const double seconds = clock.seconds();

    rep.check_le("support_inside_interval", r, 0.5 * (c.b - c.a));
    rep.check_le("l1_error_over_mass", l1 / mass, c.l1_rel_tol);
    rep.check_le("free_boundary_error", front_err, std::max(c.front_cells * h, c.front_rel * r));
    rep.check_ge("min_u_minus_eps", trace.steps.size() ? *std::min_element(trace.steps.u_min.begin(), trace.steps.u_min.end()) - c.epsilon : 0.0, -1e-8);
    rep.check_runtime("runtime_seconds", seconds, c.runtime_limit);
    rep.seconds = seconds;
    rep.details = {{"profile", to_json(prof)},
                   {"radius_initial", prof.radius(0.0)},
                   {"radius_final", r},
                   {"front_left", front.left},
                   {"front_right", front.right},
                   {"exterior_mass", outside},
                   {"l1_error", l1},
                   {"mass", mass},
                   {"steps", trace.steps.size()}};
    return rep;
}

// ---------------------------------------------------------------------------
// Barenblatt domination

struct DominationCheckConfig {
    double m = 2.0;
    double a = -2.0, b = 2.0;
    std::size_t n = 400;
    double t_end = 0.4;
    double epsilon = 1e-3;
    BumpProfile initial{0.0, 1.0, 0.5};
    std::vector<double> checkpoints{0.1, 0.2, 0.3, 0.4};
    double tol_cells = 5.0;
    std::size_t spot_paths = 5;
    std::uint64_t master_seed = 1;
};

inline SuiteReport domination_suite(const DominationCheckConfig& c) {
    detail::Stopwatch clock;
    SuiteReport rep;
    rep.suite = "domination";
    SolverConfig sc;
    sc.m = c.m;
    sc.epsilon = c.epsilon;
    sc.grid = Grid1D{c.a, c.b, c.n};
    sc.t_end = c.t_end;
    const double h = sc.grid.h();
    const double tol = c.tol_cells * h;
    const double stride = c.checkpoints.size() > 1 ? c.checkpoints[1] - c.checkpoints[0] : c.t_end;
    const auto u0 = initial_density(c.initial, sc.grid);
    const auto dom = dominating_profile(u0, c.m);

    sc.nu = 0.0;
    const auto det = barenblatt_domination({solve(sc, detail::still_path(c.t_end), u0, stride)}, {nullptr}, dom.profile, c.checkpoints, 0.0, tol);
    rep.check_le("nu0_points_over_tolerance", static_cast<double>(det.points_over_tolerance), 0.0);

    sc.nu = 1.0;
    std::vector<SolveTrace> traces;
    std::vector<MollifiedPath> mpaths;
    for (std::size_t i = 0; i < c.spot_paths; ++i) {
        auto p = std::make_shared<const BrownianPath>(sample_path(c.t_end, c.epsilon / 4.0, derive_seed(c.master_seed, i)));
        mpaths.push_back(mollify(p, c.epsilon));
    }
    std::vector<const MollifiedPath*> ptrs;
    for (const auto& mp : mpaths) {
        traces.push_back(solve(sc, mp, u0, stride));
        ptrs.push_back(&mp);
    }
    const auto spot = barenblatt_domination(traces, ptrs, dom.profile, c.checkpoints, 1.0, tol);
    rep.check_le("nu1_max_violation", spot.max_violation, tol + spot.interpolation_bound);
    rep.seconds = clock.seconds();
    rep.details = {{"profile", to_json(dom.profile)},
                   {"domination_margin", dom.margin},
                   {"nu0", to_json(det)},
                   {"nu1", to_json(spot)}};
    return rep;
}

// ---------------------------------------------------------------------------
// Weak-form residual under refinement

struct WeakformCheckConfig {
    double m = 2.0;
    double nu = 1.0;
    double a = -1.0, b = 1.0;
    std::size_t n = 64;
    double dt_path = 0.01;
    double epsilon = 0.04;
    double t_end = 0.5;
    BumpProfile initial{0.0, 0.5, 1.0};
    std::vector<TestFunction> tests{{-0.4, 0.3}, {0.0, 0.3}, {0.4, 0.3}};
    std::vector<double> checkpoints{0.1, 0.2, 0.3, 0.4, 0.5};
    double min_ratio = 2.0;
    std::uint64_t master_seed = 1;
    std::uint64_t path_index = 0;
};

/// Coarse level (n, dt_path) and fine level (2n, dt_path/4) on nested paths:
/// the coarse path is the fine one restricted to every fourth node.
inline SuiteReport weakform_suite(const WeakformCheckConfig& c) {
    detail::Stopwatch clock;
    SuiteReport rep;
    rep.suite = "weakform";
    const auto fine = std::make_shared<const BrownianPath>(
        sample_path(c.t_end, c.dt_path / 4.0, derive_seed(c.master_seed, c.path_index)));
    const auto coarse = std::make_shared<const BrownianPath>(fine->restrict(4));
    std::vector<std::vector<double>> worst(2, std::vector<double>(c.tests.size(), 0.0));
    Json levels = Json::array();
    for (int lvl = 0; lvl < 2; ++lvl) {
        SolverConfig sc;
        sc.m = c.m;
        sc.nu = c.nu;
        sc.epsilon = c.epsilon;
        sc.grid = Grid1D{c.a, c.b, lvl ? 2 * c.n : c.n};
        sc.t_end = c.t_end;
        const auto& p = lvl ? fine : coarse;
        const auto tr = solve(sc, mollify(p, c.epsilon), initial_density(c.initial, sc.grid), p->dt());
        const auto rows = weak_form_residual(tr, *p, c.nu, c.m, c.tests, c.checkpoints);
        for (const auto& r : rows) worst[lvl][r.phi] = std::max(worst[lvl][r.phi], std::abs(r.residual));
        levels.push_back({{"n", sc.grid.n}, {"dt_path", p->dt()}, {"rows", to_json(rows)}, {"max_abs", worst[lvl]}});
    }
    for (std::size_t f = 0; f < c.tests.size(); ++f)
        rep.check_ge("residual_ratio_phi" + std::to_string(f), worst[0][f] / worst[1][f], c.min_ratio);
    rep.seconds = clock.seconds();
    rep.details = {{"seed", derive_seed(c.master_seed, c.path_index)}, {"levels", levels}};
    return rep;
}

// ---------------------------------------------------------------------------
// Multi-epsilon experiments

inline LadderConfig default_ladder_config() {
    LadderConfig c;
    c.base.m = 2.0;
    c.base.nu = 1.0;
    c.base.grid = Grid1D{-1.0, 1.0, 128};
    c.base.t_end = 0.5;
    c.initial = BumpProfile{0.0, 0.5, 1.0};
    c.ladder = {0.08, 0.04, 0.02, 0.01};
    c.paths = 20;
    c.master_seed = 1;
    c.snapshot_dt = 0.01;
    return c;
}

struct ConvergenceCheckConfig {
    LadderConfig ladder = default_ladder_config();
    double tau = 0.05;
    double runtime_limit = 600.0;
};

inline SuiteReport convergence_suite_from(const LadderEnsemble& ens, const ConvergenceCheckConfig& c, double seconds) {
    SuiteReport rep;
    rep.suite = "convergence";
    const auto tab = cauchy_from(ens, c.tau);
    rep.check_true("common_noise", tab.common_noise);
    for (std::size_t i = 1; i < tab.rows.size(); ++i)
        rep.check_lt("sup_l1_pair" + std::to_string(i) + "_below_pair" + std::to_string(i - 1), tab.rows[i].sup_l1,
                     tab.rows[i - 1].sup_l1);
    bool consistent = true;
    for (const auto& r : tab.rows) consistent = consistent && r.consistent;
    rep.check_true("integrated_consistency", consistent);
    rep.check_runtime("runtime_seconds", seconds, c.runtime_limit);
    rep.seconds = seconds;
    rep.details = to_json(tab);
    return rep;
}

inline SuiteReport convergence_suite(const ConvergenceCheckConfig& c) {
    detail::Stopwatch clock;
    const auto ens = simulate_ladder(c.ladder);
    return convergence_suite_from(ens, c, clock.seconds());
}

struct ContractionCheckConfig {
    LadderConfig ladder = default_ladder_config();
    ContractionSettings settings{};
};

inline SuiteReport contraction_suite_from(const LadderEnsemble& ens, const ContractionCheckConfig& c, double seconds) {
    SuiteReport rep;
    rep.suite = "contraction";
    const auto r = contraction_from(ens, c.settings);
    rep.check_true("common_noise", r.common_noise);
    rep.check_true("truncated_bounded_by_plain", r.truncation_bounded);
    if (r.pairs.size() >= 2)
        rep.check_gt("largest_pair_exceeds_smallest_pair", r.pairs.front().truncated, r.pairs.back().truncated);
    else
        rep.check_true("at_least_two_pairs", false);
    rep.check_true("theta_fit_finite", std::isfinite(r.theta_fit));
    rep.seconds = seconds;
    rep.details = to_json(r);
    return rep;
}

inline SuiteReport contraction_suite(const ContractionCheckConfig& c) {
    detail::Stopwatch clock;
    check_contraction_preconditions(c.ladder, c.settings);
    const auto ens = simulate_ladder(c.ladder);
    return contraction_suite_from(ens, c, clock.seconds());
}

// ---------------------------------------------------------------------------
// Maximum principle and energy inequality over a family of solves

struct InvariantCheckConfig {
    SolverConfig base = [] {
        SolverConfig s;
        s.grid = Grid1D{-1.0, 1.0, 128};
        s.t_end = 0.5;
        return s;
    }();
    BumpProfile initial{0.0, 0.5, 1.0};
    std::vector<double> epsilons{0.1, 0.02, 0.004};
    std::size_t paths = 10;
    std::uint64_t master_seed = 1;
    unsigned workers = 1;
};

struct InvariantResult {
    std::size_t solves = 0;
    std::size_t max_principle_violations = 0;
    std::size_t energy_violations = 0;
    double worst_lower = std::numeric_limits<double>::infinity();
    double worst_upper = -std::numeric_limits<double>::infinity();
    double worst_energy_ratio = 0.0;
};

inline InvariantResult invariant_sweep(const InvariantCheckConfig& c) {
    const auto u0 = initial_density(c.initial, c.base.grid);
    const double umax = u0.max();
    struct One {
        std::size_t mp = 0;
        bool energy = false;
        double lower = 0.0, upper = 0.0, ratio = 0.0;
    };
    const std::size_t total = c.paths * c.epsilons.size();
    auto runs = parallel_map(total, c.workers, [&](std::size_t k) {
        const std::size_t i = k / c.epsilons.size();
        SolverConfig sc = c.base;
        sc.epsilon = c.epsilons[k % c.epsilons.size()];
        auto p = std::make_shared<const BrownianPath>(sample_path(sc.t_end, sc.epsilon / 4.0, derive_seed(c.master_seed, i)));
        const auto tr = solve(sc, mollify(p, sc.epsilon), u0, sc.t_end / 10.0);
        One o;
        o.lower = std::numeric_limits<double>::infinity();
        o.upper = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < tr.steps.size(); ++s) {
            const double lo = tr.steps.u_min[s] - sc.epsilon;
            const double hi = tr.steps.u_max[s] - sc.epsilon - umax;
            if (lo < -1e-8 || hi > 1e-8) ++o.mp;
            o.lower = std::min(o.lower, lo);
            o.upper = std::max(o.upper, hi);
        }
        const auto d = diagnostics_report(tr, 1e-6);
        o.energy = d.energy_violation;
        o.ratio = d.energy_lhs_max / d.energy_rhs;
        return o;
    });
    InvariantResult r;
    for (const auto& o : runs) {
        ++r.solves;
        r.max_principle_violations += o.mp;
        r.energy_violations += o.energy ? 1 : 0;
        r.worst_lower = std::min(r.worst_lower, o.lower);
        r.worst_upper = std::max(r.worst_upper, o.upper);
        r.worst_energy_ratio = std::max(r.worst_energy_ratio, o.ratio);
    }
    return r;
}

}  // namespace spme
