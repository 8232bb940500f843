#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "spme/barenblatt.hpp"
#include "spme/brownian.hpp"
#include "spme/errors.hpp"
#include "spme/field.hpp"
#include "spme/grid.hpp"
#include "spme/io.hpp"

namespace spme {

/// Numerical parameters of the regularised problem
///
///   u_t = (u^m)_xx + nu * (dB^eps/dt) * u_x   in (a,b),
///   u = u0 + eps at t = 0,   u = eps on the boundary.
struct SolverConfig {
    double m = 2.0;
    double nu = 1.0;
    double epsilon = 0.01;
    Grid1D grid{-1.0, 1.0, 128};
    double t_end = 1.0;
    double cfl = 0.9;
    /// Threshold on max_j(u_j - eps); unset means 1e-6 * max(u0).
    std::optional<double> extinction_tol;
    std::size_t max_steps = 100'000'000;
    /// Upper bound on the adaptive step.
    double max_dt = std::numeric_limits<double>::infinity();
    /// Test hook: switch off the diffusion term to isolate transport.
    bool diffusion = true;
    /// Stop at the first snapshot at which the field is extinct. The discrete
    /// maximum principle keeps it extinct afterwards.
    bool stop_when_extinct = false;

    void validate() const {
        if (!(m > 1.0)) throw ConfigError("solver.m: must exceed 1");
        if (!(nu >= 0.0)) throw ConfigError("solver.nu: must be non-negative");
        if (!(epsilon > 0.0)) throw ConfigError("solver.epsilon: must be positive");
        grid.validate();
        if (!(t_end > 0.0)) throw ConfigError("solver.t_end: must be positive");
        if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("solver.cfl: must lie in (0, 1]");
        if (extinction_tol && !(*extinction_tol >= 0.0)) throw ConfigError("solver.extinction_tol: must be >= 0");
        if (!(max_dt > 0.0)) throw ConfigError("solver.max_dt: must be positive");
        if (max_steps == 0) throw ConfigError("solver.max_steps: must be positive");
    }

    std::uint64_t digest() const {
        io::Fnv1a h;
        h.value(m).value(nu).value(epsilon).value(grid.a).value(grid.b).value(grid.n).value(t_end).value(cfl);
        h.value(extinction_tol.value_or(-1.0)).value(max_steps).value(max_dt).value(diffusion).value(stop_when_extinct);
        return h.digest();
    }
};

// ---------------------------------------------------------------------------
// Initial data

struct ZeroProfile {};

/// A * exp(1 - 1/(1 - xi^2)), xi = (x - center)/half_width; peak A at the centre.
struct BumpProfile {
    double center = 0.0;
    double half_width = 0.5;
    double amplitude = 1.0;

    double operator()(double x) const {
        const double xi = (x - center) / half_width;
        if (std::abs(xi) >= 1.0) return 0.0;
        return amplitude * std::exp(1.0 - 1.0 / (1.0 - xi * xi));
    }
};

/// The Barenblatt density at a fixed time, used as initial data.
struct BarenblattSlice {
    BarenblattProfile profile;
    double time = 0.0;
};

using Profile = std::variant<ZeroProfile, BumpProfile, BarenblattSlice>;

inline DensityField initial_density(const Profile& profile, const Grid1D& grid) {
    grid.validate();
    const double collar = 2.0 * grid.h();
    auto check_support = [&](double lo, double hi) {
        if (lo < grid.a + collar || hi > grid.b - collar)
            throw ConfigError("initial_density: support [" + io::fmt(lo) + ", " + io::fmt(hi) +
                              "] must stay 2h inside [" + io::fmt(grid.a) + ", " + io::fmt(grid.b) + "]");
    };
    DensityField u(grid, 0.0, 0.0);
    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, BumpProfile>) {
                if (!(p.half_width > 0.0) || !(p.amplitude >= 0.0))
                    throw ConfigError("initial_density: bump needs half_width > 0 and amplitude >= 0");
                check_support(p.center - p.half_width, p.center + p.half_width);
                for (std::size_t j = 0; j < grid.n; ++j) u.values[j] = p(grid.center(j));
            } else if constexpr (std::is_same_v<P, BarenblattSlice>) {
                p.profile.validate();
                const double r = p.profile.radius(p.time);
                check_support(p.profile.center - r, p.profile.center + r);
                for (std::size_t j = 0; j < grid.n; ++j)
                    u.values[j] = eval_density(p.profile, grid.center(j), p.time);
            }
        },
        profile);
    return u;
}

// ---------------------------------------------------------------------------
// Trace

/// Per-step diagnostics, aligned with the step index. `time` is the time
/// reached by the step; `laplacian_sq` is evaluated on the state the step
/// started from, everything else on the state it produced.
struct StepDiagnostics {
    std::vector<double> time;
    std::vector<double> dt;
    /// 1/2 int u^2
    std::vector<double> energy;
    /// Discrete int m u^{m-1} |u_x|^2: face differences of u^m (old state)
    /// paired with face differences of u (new state).
    std::vector<double> dissipation;
    /// int |(u^m)_xx|^2
    std::vector<double> laplacian_sq;
    /// int |(u^m)_x|^2
    std::vector<double> grad_sq;
    std::vector<double> u_min;
    std::vector<double> u_max;

    std::size_t size() const { return time.size(); }
};

struct SolveTrace {
    std::vector<DensityField> snapshots;
    StepDiagnostics steps;
    /// 1/2 int u^2 at t = 0.
    double energy0 = 0.0;
    double epsilon = 0.0;
    double u0_max = 0.0;
    double extinction_tol = 0.0;
    /// Set when the run stopped early at an extinct snapshot.
    bool stopped_extinct = false;
    /// The driving noise; null for hand-built traces.
    std::shared_ptr<const BrownianPath> path;
};

/// Raised when max_steps is exhausted; carries everything computed so far.
struct BudgetError : Error {
    BudgetError(const std::string& what, SolveTrace partial_trace)
        : Error(Kind::budget, what), partial(std::move(partial_trace)) {}
    SolveTrace partial;
};

// ---------------------------------------------------------------------------
// Scheme

namespace detail {

inline double power(double u, double m) {
    if (m == 2.0) return u * u;
    if (m == 3.0) return u * u * u;
    return std::pow(u, m);
}

struct StepStats {
    double dissipation = 0.0;
    double laplacian_sq = 0.0;
    double grad_sq = 0.0;
    double energy = 0.0;
    double u_min = 0.0;
    double u_max = 0.0;
};

/// One explicit Euler step of the finite-volume scheme from `u` into `out`.
/// Diffusion: central difference of f = u^m across every face, ghost cells at
/// eps. Transport: first-order upwind in the direction of a = nu * drift,
/// inflow ghost at eps.
inline StepStats advance(std::span<const double> u, std::span<double> out, std::vector<double>& f,
                         const SolverConfig& cfg, double a, double dt) {
    const std::size_t n = u.size();
    const double h = cfg.grid.h();
    const double eps = cfg.epsilon;
    const double f_ghost = power(eps, cfg.m);
    f.resize(n + 2);
    f[0] = f_ghost;
    f[n + 1] = f_ghost;
    for (std::size_t j = 0; j < n; ++j) f[j + 1] = power(u[j], cfg.m);

    const double lam = cfg.diffusion ? dt / (h * h) : 0.0;
    const double c = dt * a / h;
    StepStats s;
    for (std::size_t j = 0; j < n; ++j) {
        const double lap = f[j + 2] - 2.0 * f[j + 1] + f[j];
        double v = u[j] + lam * lap;
        if (a > 0.0) {
            const double right = j + 1 < n ? u[j + 1] : eps;
            v += c * (right - u[j]);
        } else if (a < 0.0) {
            const double left = j > 0 ? u[j - 1] : eps;
            v += c * (u[j] - left);
        }
        out[j] = v;
        if (cfg.diffusion) s.laplacian_sq += lap * lap;
    }
    s.laplacian_sq *= h / (h * h * h * h);

    s.u_min = out[0];
    s.u_max = out[0];
    for (std::size_t j = 0; j < n; ++j) {
        s.energy += out[j] * out[j];
        s.u_min = std::min(s.u_min, out[j]);
        s.u_max = std::max(s.u_max, out[j]);
    }
    s.energy *= 0.5 * h;

    // Faces k = 0..n between cells k-1 and k (ghosts at both ends).
    double prev_u = eps;
    double prev_f_new = f_ghost;
    for (std::size_t k = 0; k <= n; ++k) {
        const double un = k < n ? out[k] : eps;
        const double fn = k < n ? power(out[k], cfg.m) : f_ghost;
        if (cfg.diffusion) s.dissipation += (un - prev_u) * (f[k + 1] - f[k]);
        s.grad_sq += (fn - prev_f_new) * (fn - prev_f_new);
        prev_u = un;
        prev_f_new = fn;
    }
    s.dissipation /= h;
    s.grad_sq /= h;
    return s;
}

}  // namespace detail

/// Largest step keeping the explicit update monotone:
///   cfl / (2 m max(u)^{m-1} / h^2 + |nu * drift| / h).
/// Infinite when neither term is active.
inline double stable_dt(const DensityField& field, double drift, const SolverConfig& cfg) {
    const double h = field.grid.h();
    const double umax = std::max(0.0, field.max());
    const double diff = cfg.diffusion ? 2.0 * cfg.m * detail::power(umax, cfg.m - 1.0) / (h * h) : 0.0;
    const double adv = std::abs(cfg.nu * drift) / h;
    const double denom = diff + adv;
    if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
    return cfg.cfl / denom;
}

/// One explicit step. Refuses steps beyond the monotonicity bound.
inline DensityField step(const DensityField& field, double drift, const SolverConfig& cfg, double dt) {
    if (!(field.grid == cfg.grid)) throw ShapeError("step: field grid differs from config grid");
    if (!(dt > 0.0)) throw StabilityError("step: dt must be positive");
    SolverConfig unit = cfg;
    unit.cfl = 1.0;
    const double bound = stable_dt(field, drift, unit);
    if (dt > bound * (1.0 + 1e-12))
        throw StabilityError("step: dt=" + io::fmt(dt) + " exceeds monotonicity bound " + io::fmt(bound));
    DensityField out(field.grid, field.time + dt, std::vector<double>(field.values.size()));
    std::vector<double> scratch;
    detail::advance(field.values, out.values, scratch, cfg, cfg.nu * drift, dt);
    return out;
}

/// Integrates the regularised problem from u0 (without the eps lift, which is
/// added here) to cfg.t_end along the mollified path. Snapshots are taken at
/// k * snapshot_dt and at t_end; the step is clipped to hit them exactly.
inline SolveTrace solve(const SolverConfig& cfg, const MollifiedPath& mpath, const DensityField& u0,
                        double snapshot_dt) {
    cfg.validate();
    if (!(u0.grid == cfg.grid)) throw ShapeError("solve: u0 grid differs from config grid");
    if (!(snapshot_dt > 0.0)) throw ConfigError("solve: snapshot_dt must be positive");
    if (cfg.nu > 0.0 && mpath.path().horizon() < cfg.t_end * (1.0 - 1e-12))
        throw RangeError("solve: path horizon " + io::fmt(mpath.path().horizon()) + " shorter than t_end " +
                         io::fmt(cfg.t_end));
    for (double v : u0.values)
        if (!(v >= 0.0)) throw ConfigError("solve: u0 must be non-negative");

    SolveTrace trace;
    trace.epsilon = cfg.epsilon;
    trace.u0_max = u0.max();
    trace.extinction_tol = cfg.extinction_tol.value_or(1e-6 * trace.u0_max);
    trace.path = mpath.shared_path();

    DensityField cur(cfg.grid, 0.0, u0.values);
    for (double& v : cur.values) v += cfg.epsilon;
    DensityField next(cfg.grid, 0.0, std::vector<double>(cfg.grid.n));
    {
        double e = 0.0;
        for (double v : cur.values) e += v * v;
        trace.energy0 = 0.5 * cfg.grid.h() * e;
    }
    trace.snapshots.push_back(cur);

    const auto snaps = static_cast<std::size_t>(std::ceil(cfg.t_end / snapshot_dt - 1e-9));
    auto snap_time = [&](std::size_t k) { return std::min(cfg.t_end, static_cast<double>(k) * snapshot_dt); };
    trace.steps.time.reserve(1024);

    std::vector<double> scratch;
    std::size_t next_snap = 1;
    std::size_t steps = 0;
    double t = 0.0;
    while (next_snap <= snaps) {
        const double target = snap_time(next_snap);
        const double drift = cfg.nu > 0.0 ? mpath.drift_at(t) : 0.0;
        double dt = std::min(stable_dt(cur, drift, cfg), cfg.max_dt);
        bool hit = false;
        if (dt >= target - t) {
            dt = target - t;
            hit = true;
        }
        if (++steps > cfg.max_steps)
            throw BudgetError("solve: max_steps=" + std::to_string(cfg.max_steps) + " exhausted at t=" + io::fmt(t),
                              std::move(trace));
        const auto st = detail::advance(cur.values, next.values, scratch, cfg, cfg.nu * drift, dt);
        t = hit ? target : t + dt;
        next.time = t;
        std::swap(cur, next);

        auto& d = trace.steps;
        d.time.push_back(t);
        d.dt.push_back(dt);
        d.energy.push_back(st.energy);
        d.dissipation.push_back(st.dissipation);
        d.laplacian_sq.push_back(st.laplacian_sq);
        d.grad_sq.push_back(st.grad_sq);
        d.u_min.push_back(st.u_min);
        d.u_max.push_back(st.u_max);

        if (hit) {
            trace.snapshots.push_back(cur);
            ++next_snap;
            if (cfg.stop_when_extinct && st.u_max - cfg.epsilon <= trace.extinction_tol) {
                trace.stopped_extinct = true;
                break;
            }
        }
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Diagnostics

struct DiagnosticsSummary {
    /// 1/2 int u^2 at t = 0.
    double energy_rhs = 0.0;
    /// max over T of 1/2 int u^2(T) + sum of dt * dissipation up to T.
    double energy_lhs_max = 0.0;
    /// min over T of (rhs - lhs(T)); negative values beyond tolerance flag a violation.
    double energy_residual = 0.0;
    double total_dissipation = 0.0;
    /// sup_T T/2 int |(u^m)_x|^2 (T)
    double sup_time_weighted_grad = 0.0;
    /// int int t |(u^m)_xx|^2
    double time_weighted_laplacian = 0.0;
    double u_min = 0.0;
    double u_max = 0.0;
    bool energy_violation = false;
};

inline DiagnosticsSummary diagnostics_report(const SolveTrace& trace, double rel_tol = 1e-6) {
    if (trace.snapshots.empty()) throw ShapeError("diagnostics_report: empty trace");
    const auto& d = trace.steps;
    DiagnosticsSummary s;
    s.energy_rhs = trace.energy0;
    s.energy_lhs_max = trace.energy0;
    s.energy_residual = 0.0;
    s.u_min = trace.snapshots.front().min();
    s.u_max = trace.snapshots.front().max();
    double cumulative = 0.0;
    double t_prev = 0.0;
    for (std::size_t n = 0; n < d.size(); ++n) {
        cumulative += d.dt[n] * d.dissipation[n];
        const double lhs = d.energy[n] + cumulative;
        s.energy_lhs_max = std::max(s.energy_lhs_max, lhs);
        s.energy_residual = std::min(s.energy_residual, s.energy_rhs - lhs);
        s.sup_time_weighted_grad = std::max(s.sup_time_weighted_grad, 0.5 * d.time[n] * d.grad_sq[n]);
        s.time_weighted_laplacian += d.dt[n] * t_prev * d.laplacian_sq[n];
        s.u_min = std::min(s.u_min, d.u_min[n]);
        s.u_max = std::max(s.u_max, d.u_max[n]);
        t_prev = d.time[n];
    }
    s.total_dissipation = cumulative;
    s.energy_violation = s.energy_residual < -rel_tol * s.energy_rhs;
    return s;
}

// ---------------------------------------------------------------------------
// Output

/// Snapshot CSV with columns t,x,u.
inline void write_snapshots_csv(std::ostream& os, const SolveTrace& trace) {
    os << "t,x,u\n";
    for (const auto& s : trace.snapshots)
        for (std::size_t j = 0; j < s.values.size(); ++j)
            os << io::fmt(s.time) << ',' << io::fmt(s.grid.center(j)) << ',' << io::fmt(s.values[j]) << '\n';
}

/// Binary frames: magic "SPMEFRAM", f64 a, f64 b, u64 n, u64 frames, f64 tag,
/// then per frame f64 t followed by n f64 values. `tag` carries m for
/// pressure frames and 0 for densities.
inline void write_frames_binary(std::ostream& os, const std::vector<DensityField>& frames, double tag = 0.0) {
    io::put_magic(os, "SPMEFRAM");
    const Grid1D g = frames.empty() ? Grid1D{} : frames.front().grid;
    io::put(os, g.a);
    io::put(os, g.b);
    io::put<std::uint64_t>(os, g.n);
    io::put<std::uint64_t>(os, frames.size());
    io::put(os, tag);
    for (const auto& f : frames) {
        io::put(os, f.time);
        os.write(reinterpret_cast<const char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    }
}

inline std::vector<DensityField> read_frames_binary(std::istream& is, double* tag = nullptr) {
    io::expect_magic(is, "SPMEFRAM");
    const double a = io::get<double>(is);
    const double b = io::get<double>(is);
    const auto n = io::get<std::uint64_t>(is);
    const auto count = io::get<std::uint64_t>(is);
    const double tg = io::get<double>(is);
    if (tag) *tag = tg;
    std::vector<DensityField> out;
    for (std::uint64_t k = 0; k < count; ++k) {
        const double t = io::get<double>(is);
        std::vector<double> v(n);
        for (auto& x : v) x = io::get<double>(is);
        out.emplace_back(Grid1D{a, b, n}, t, std::move(v));
    }
    return out;
}

}  // namespace spme
