#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spme/barenblatt.hpp"
#include "spme/brownian.hpp"
#include "spme/errors.hpp"
#include "spme/parallel.hpp"
#include "spme/pme_solver.hpp"
#include "spme/rng.hpp"
#include "spme/stats.hpp"
#include "spme/transforms.hpp"

namespace spme {

// ---------------------------------------------------------------------------
// Common-noise ladders

/// Settings shared by the multi-epsilon experiments.
struct LadderConfig {
    /// Template solver settings; epsilon is overwritten per ladder entry.
    SolverConfig base;
    Profile initial = BumpProfile{};
    std::vector<double> ladder;
    std::size_t paths = 20;
    std::uint64_t master_seed = 1;
    double snapshot_dt = 0.01;
    /// 0 selects min(ladder) / 4.
    double dt_path = 0.0;
    std::size_t quadrature_nodes = 128;
    unsigned workers = 1;

    double path_step() const {
        return dt_path > 0.0 ? dt_path : *std::min_element(ladder.begin(), ladder.end()) / 4.0;
    }
};

/// Shifted densities u_eps(x + nu (B_t - B^eps_t), t) on the solver cells for
/// one Brownian path and every ladder entry, at the common snapshot times.
struct PathLadder {
    std::uint64_t seed = 0;
    /// Digest of the path driving each entry; all equal under common noise.
    std::vector<std::uint64_t> path_digests;
    std::vector<double> times;
    /// shifted[e][n][j]: ladder entry e, snapshot n, cell j.
    std::vector<std::vector<std::vector<double>>> shifted;
};

struct LadderEnsemble {
    Grid1D grid;
    std::vector<double> ladder;
    std::vector<double> times;
    std::vector<PathLadder> paths;
    /// Initial densities without the eps lift.
    std::vector<double> u0;

    bool common_noise() const {
        for (const auto& p : paths)
            for (auto d : p.path_digests)
                if (d != p.path_digests.front()) return false;
        return true;
    }
};

/// Values of the shifted density on the solver cells. Outside the interval
/// the field is extended by `fill`.
inline std::vector<double> shifted_density(const DensityField& snapshot, double delta, double fill) {
    const double margin = std::abs(delta) + 4.0 * snapshot.grid.h();
    const auto ext = extend(snapshot, margin, fill);
    const auto sh = shift_field(ext, delta);
    const auto k = static_cast<std::size_t>(std::llround((snapshot.grid.center(0) - ext.grid.x0) / ext.grid.dx));
    return {sh.values.begin() + static_cast<std::ptrdiff_t>(k),
            sh.values.begin() + static_cast<std::ptrdiff_t>(k + snapshot.grid.n)};
}

inline PathLadder simulate_path_ladder(const LadderConfig& cfg, const DensityField& u0, std::size_t index) {
    PathLadder out;
    out.seed = derive_seed(cfg.master_seed, index);
    auto path = std::make_shared<const BrownianPath>(sample_path(cfg.base.t_end, cfg.path_step(), out.seed));
    const Mollifier rho(cfg.quadrature_nodes);
    for (double eps : cfg.ladder) {
        SolverConfig sc = cfg.base;
        sc.epsilon = eps;
        sc.stop_when_extinct = false;
        const auto mpath = mollify(path, eps, rho);
        out.path_digests.push_back(mpath.path().digest());
        const auto trace = solve(sc, mpath, u0, cfg.snapshot_dt);
        std::vector<std::vector<double>> frames;
        frames.reserve(trace.snapshots.size());
        if (out.times.empty())
            for (const auto& s : trace.snapshots) out.times.push_back(s.time);
        for (const auto& s : trace.snapshots) {
            const double delta = sc.nu * (path->value_at(s.time) - mpath.value_at(s.time));
            frames.push_back(shifted_density(s, delta, eps));
        }
        out.shifted.push_back(std::move(frames));
    }
    return out;
}

/// Solves every ladder entry on every path, reusing one Brownian path per
/// path index for all entries.
inline LadderEnsemble simulate_ladder(const LadderConfig& cfg) {
    if (cfg.ladder.empty()) throw ConfigError("ladder: empty epsilon ladder");
    if (cfg.paths == 0) throw ConfigError("ladder: need at least one path");
    cfg.base.validate();
    LadderEnsemble ens;
    ens.grid = cfg.base.grid;
    ens.ladder = cfg.ladder;
    const auto u0 = initial_density(cfg.initial, cfg.base.grid);
    ens.u0 = u0.values;
    ens.paths = parallel_map(cfg.paths, cfg.workers, [&](std::size_t i) { return simulate_path_ladder(cfg, u0, i); });
    ens.times = ens.paths.front().times;
    return ens;
}

// ---------------------------------------------------------------------------
// Contraction up to shift

struct ContractionPair {
    double eps = 0.0;
    double eps_hat = 0.0;
    /// sup over snapshot times T >= kappa of the path mean of
    /// int_K |max(kappa, a) - max(kappa, b)|.
    double truncated = 0.0;
    double truncated_se = 0.0;
    double truncated_at = 0.0;
    /// Same without truncation.
    double plain = 0.0;
    /// int_I |max(kappa, u0 + eps) - max(kappa, u0 + eps_hat)|.
    double initial_term = 0.0;
};

struct ContractionReport {
    double kappa = 0.0;
    double K_lo = 0.0, K_hi = 0.0;
    std::size_t paths = 0;
    std::vector<ContractionPair> pairs;
    /// Slope of log(truncated) against log(max(eps, eps_hat)); NaN when fewer
    /// than two pairs have a positive distance.
    double theta_fit = std::numeric_limits<double>::quiet_NaN();
    bool common_noise = true;
    /// Truncated distance never exceeded the plain one.
    bool truncation_bounded = true;
};

struct ContractionSettings {
    double kappa = 0.2;
    double K_lo = -0.5;
    double K_hi = 0.5;
};

inline void check_contraction_preconditions(const LadderConfig& cfg, const ContractionSettings& s) {
    if (!(s.kappa > 0.0)) throw ConfigError("contraction: kappa must be positive");
    for (double e : cfg.ladder)
        if (e > s.kappa / 2.0 * (1.0 + 1e-12))
            throw ConfigError("contraction: epsilon " + io::fmt(e) + " exceeds kappa/2 = " + io::fmt(s.kappa / 2.0));
    const Grid1D& g = cfg.base.grid;
    if (!(s.K_lo > g.a && s.K_hi < g.b && s.K_lo < s.K_hi))
        throw ConfigError("contraction: K must lie strictly inside the interval");
}

/// Pairs every ladder entry with the smallest one (eps_hat).
inline ContractionReport contraction_from(const LadderEnsemble& ens, const ContractionSettings& s) {
    ContractionReport rep;
    rep.kappa = s.kappa;
    rep.K_lo = s.K_lo;
    rep.K_hi = s.K_hi;
    rep.paths = ens.paths.size();
    rep.common_noise = ens.common_noise();
    const Grid1D& g = ens.grid;
    const double h = g.h();
    const std::size_t ref = static_cast<std::size_t>(
        std::min_element(ens.ladder.begin(), ens.ladder.end()) - ens.ladder.begin());
    const double eh = ens.ladder[ref];

    for (std::size_t e = 0; e < ens.ladder.size(); ++e) {
        ContractionPair pr;
        pr.eps = ens.ladder[e];
        pr.eps_hat = eh;
        for (double u : ens.u0)
            pr.initial_term += h * std::abs(std::max(s.kappa, u + pr.eps) - std::max(s.kappa, u + eh));
        pr.truncated = -1.0;
        for (std::size_t n = 0; n < ens.times.size(); ++n) {
            if (ens.times[n] < s.kappa - 1e-12) continue;
            std::vector<double> trunc(ens.paths.size()), plain(ens.paths.size());
            for (std::size_t p = 0; p < ens.paths.size(); ++p) {
                const auto& a = ens.paths[p].shifted[e][n];
                const auto& b = ens.paths[p].shifted[ref][n];
                double dt_ = 0.0, dp = 0.0;
                for (std::size_t j = 0; j < g.n; ++j) {
                    const double x = g.center(j);
                    if (x < s.K_lo || x > s.K_hi) continue;
                    dt_ += h * std::abs(std::max(s.kappa, a[j]) - std::max(s.kappa, b[j]));
                    dp += h * std::abs(a[j] - b[j]);
                }
                if (dt_ > dp + 1e-14) rep.truncation_bounded = false;
                trunc[p] = dt_;
                plain[p] = dp;
            }
            const auto mt = stats::mean_se(trunc);
            if (mt.mean > pr.truncated) {
                pr.truncated = mt.mean;
                pr.truncated_se = mt.se;
                pr.truncated_at = ens.times[n];
            }
            pr.plain = std::max(pr.plain, stats::mean_se(plain).mean);
        }
        pr.truncated = std::max(pr.truncated, 0.0);
        if (e != ref) rep.pairs.push_back(pr);
    }
    std::sort(rep.pairs.begin(), rep.pairs.end(), [](const auto& l, const auto& r) { return l.eps > r.eps; });

    std::vector<double> xs, ys;
    for (const auto& pr : rep.pairs)
        if (pr.truncated > 0.0) {
            xs.push_back(std::max(pr.eps, pr.eps_hat));
            ys.push_back(pr.truncated);
        }
    if (xs.size() >= 2) rep.theta_fit = stats::power_law_exponent(xs, ys);
    return rep;
}

inline ContractionReport contraction_experiment(const LadderConfig& cfg, const ContractionSettings& s) {
    check_contraction_preconditions(cfg, s);
    return contraction_from(simulate_ladder(cfg), s);
}

// ---------------------------------------------------------------------------
// Wong-Zakai Cauchy table

struct CauchyRow {
    double eps = 0.0;
    double eps_next = 0.0;
    /// sup over T in [tau, T*] of the path mean of ||u_eps(T) - u_eps'(T)||_L1(I).
    double sup_l1 = 0.0;
    double sup_se = 0.0;
    /// int_0^T* of the path-mean L1 distance (trapezoid over snapshots).
    double integrated = 0.0;
    /// Part of `integrated` over [0, tau].
    double integrated_head = 0.0;
    /// integrated <= (T* - tau) sup_l1 + integrated_head.
    bool consistent = true;
};

struct CauchyTable {
    double tau = 0.0;
    std::size_t paths = 0;
    std::vector<CauchyRow> rows;
    bool common_noise = true;
};

inline CauchyTable cauchy_from(const LadderEnsemble& ens, double tau) {
    CauchyTable tab;
    tab.tau = tau;
    tab.paths = ens.paths.size();
    tab.common_noise = ens.common_noise();
    const double h = ens.grid.h();
    const auto& T = ens.times;
    for (std::size_t e = 0; e + 1 < ens.ladder.size(); ++e) {
        CauchyRow row;
        row.eps = ens.ladder[e];
        row.eps_next = ens.ladder[e + 1];
        std::vector<double> mean(T.size());
        for (std::size_t n = 0; n < T.size(); ++n) {
            std::vector<double> d(ens.paths.size());
            for (std::size_t p = 0; p < ens.paths.size(); ++p) {
                const auto& a = ens.paths[p].shifted[e][n];
                const auto& b = ens.paths[p].shifted[e + 1][n];
                double acc = 0.0;
                for (std::size_t j = 0; j < a.size(); ++j) acc += h * std::abs(a[j] - b[j]);
                d[p] = acc;
            }
            const auto ms = stats::mean_se(d);
            mean[n] = ms.mean;
            if (T[n] >= tau - 1e-12 && ms.mean > row.sup_l1) {
                row.sup_l1 = ms.mean;
                row.sup_se = ms.se;
            }
        }
        for (std::size_t n = 0; n + 1 < T.size(); ++n) {
            const double piece = 0.5 * (mean[n] + mean[n + 1]) * (T[n + 1] - T[n]);
            row.integrated += piece;
            if (T[n + 1] <= tau + 1e-12) row.integrated_head += piece;
        }
        const double tail_len = T.back() - tau;
        row.consistent = row.integrated <= tail_len * row.sup_l1 + row.integrated_head + 1e-12 * (1.0 + row.integrated);
        tab.rows.push_back(row);
    }
    return tab;
}

inline CauchyTable wz_convergence(const LadderConfig& cfg, double tau) {
    if (!(tau > 0.0)) throw ConfigError("wz_convergence: tau must be positive");
    for (std::size_t i = 1; i < cfg.ladder.size(); ++i)
        if (!(cfg.ladder[i] < cfg.ladder[i - 1])) throw ConfigError("wz_convergence: ladder must be strictly decreasing");
    if (cfg.ladder.size() < 2) {
        CauchyTable empty;
        empty.tau = tau;
        empty.paths = cfg.paths;
        return empty;
    }
    return cauchy_from(simulate_ladder(cfg), tau);
}

// ---------------------------------------------------------------------------
// Weak-form residual

/// Smooth test function phi(x) = exp(1 - 1/(1 - xi^2)), xi = (x - center)/half_width.
struct TestFunction {
    double center = 0.0;
    double half_width = 0.25;

    double value(double x) const { return eval(x).v; }
    double d1(double x) const { return eval(x).d1; }
    double d2(double x) const { return eval(x).d2; }

    struct Values {
        double v = 0.0, d1 = 0.0, d2 = 0.0;
    };
    Values eval(double x) const {
        const double xi = (x - center) / half_width;
        if (std::abs(xi) >= 1.0) return {};
        const double q = 1.0 - xi * xi;
        const double phi = std::exp(1.0 - 1.0 / q);
        const double g1 = -2.0 * xi / (q * q);
        const double g2 = -2.0 / (q * q) - 8.0 * xi * xi / (q * q * q);
        return {phi, phi * g1 / half_width, phi * (g1 * g1 + g2) / (half_width * half_width)};
    }
};

struct WeakFormRow {
    std::size_t phi = 0;
    double T = 0.0;
    double lhs = 0.0;
    double drift_term = 0.0;
    double noise_term = 0.0;
    /// lhs - (drift_term - noise_term).
    double residual = 0.0;
};

/// Evaluates
///   int u(T) phi - int u(0) phi
///     - int_0^T int (u^m + nu^2/2 u) phi'' + sum_k (int nu u(t_k) phi') (B_{t_{k+1}} - B_{t_k})
/// on the shifted snapshots u(x, t) = u_eps(x + nu (B_t - B^eps_t), t). The
/// time integral uses the trapezoid rule and the stochastic integral
/// left-point (Ito) sums, both over consecutive snapshots. The eps-lifted
/// density enters as is: constants integrate to zero against phi' and phi''
/// up to the midpoint-rule error of the resolved test function.
/// The trace must have been driven by mollify(path, trace.epsilon) with a
/// kernel of `quadrature_nodes` nodes.
inline std::vector<WeakFormRow> weak_form_residual(const SolveTrace& trace, const BrownianPath& path, double nu,
                                                   double m, const std::vector<TestFunction>& phis,
                                                   const std::vector<double>& checkpoints,
                                                   std::size_t quadrature_nodes = 128) {
    if (trace.snapshots.size() < 2) throw ShapeError("weak_form_residual: need at least two snapshots");
    const Grid1D& g = trace.snapshots.front().grid;
    const double h = g.h();
    for (const auto& phi : phis)
        if (!(phi.center - phi.half_width > g.a && phi.center + phi.half_width < g.b) || !(phi.half_width > 0.0))
            throw ConfigError("weak_form_residual: test function support must lie strictly inside the interval");

    const auto& snaps = trace.snapshots;
    std::vector<std::vector<double>> u(snaps.size());
    if (nu != 0.0) {
        const auto mpath = mollify(path, trace.epsilon, Mollifier(quadrature_nodes));
        for (std::size_t k = 0; k < snaps.size(); ++k) {
            const double t = snaps[k].time;
            u[k] = shifted_density(snaps[k], nu * (path.value_at(t) - mpath.value_at(t)), trace.epsilon);
        }
    } else {
        for (std::size_t k = 0; k < snaps.size(); ++k) u[k] = snaps[k].values;
    }

    std::vector<WeakFormRow> rows;
    for (std::size_t f = 0; f < phis.size(); ++f) {
        std::vector<TestFunction::Values> tab(g.n);
        for (std::size_t j = 0; j < g.n; ++j) tab[j] = phis[f].eval(g.center(j));
        auto pairing = [&](const std::vector<double>& v, auto&& weight) {
            double acc = 0.0;
            for (std::size_t j = 0; j < g.n; ++j) acc += weight(v[j], tab[j]);
            return h * acc;
        };
        std::vector<double> mass(snaps.size()), drift(snaps.size()), flux(snaps.size());
        for (std::size_t k = 0; k < snaps.size(); ++k) {
            mass[k] = pairing(u[k], [](double v, const auto& t) { return v * t.v; });
            drift[k] = pairing(u[k], [&](double v, const auto& t) { return (detail::power(v, m) + 0.5 * nu * nu * v) * t.d2; });
            flux[k] = pairing(u[k], [&](double v, const auto& t) { return nu * v * t.d1; });
        }
        for (double T : checkpoints) {
            std::size_t last = snaps.size();
            for (std::size_t k = 0; k < snaps.size(); ++k)
                if (std::abs(snaps[k].time - T) <= 1e-9 * (1.0 + T)) last = k;
            if (last == snaps.size())
                throw ConfigError("weak_form_residual: checkpoint " + io::fmt(T) + " is not a snapshot time");
            WeakFormRow row;
            row.phi = f;
            row.T = T;
            row.lhs = mass[last] - mass[0];
            for (std::size_t k = 0; k < last; ++k) {
                const double dt = snaps[k + 1].time - snaps[k].time;
                row.drift_term += 0.5 * (drift[k] + drift[k + 1]) * dt;
                row.noise_term += flux[k] * (path.value_at(snaps[k + 1].time) - path.value_at(snaps[k].time));
            }
            row.residual = row.lhs - (row.drift_term - row.noise_term);
            rows.push_back(row);
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Barenblatt domination

struct DominationReport {
    /// max over checkpoints and ambient nodes of p - B_pressure (may be negative).
    double max_violation = -std::numeric_limits<double>::infinity();
    double tolerance = 0.0;
    std::size_t points_checked = 0;
    std::size_t points_over_tolerance = 0;
    /// Linear-interpolation error bound of the frame shift, in pressure units.
    double interpolation_bound = 0.0;
    std::vector<double> per_trace_max;
};

/// Moves each checkpoint snapshot into the frame x -> x + nu B^eps_t, removes
/// the eps floor, converts to pressure and compares with the Barenblatt
/// pressure pointwise.
inline DominationReport barenblatt_domination(const std::vector<SolveTrace>& traces,
                                              const std::vector<const MollifiedPath*>& paths,
                                              const BarenblattProfile& profile, const std::vector<double>& checkpoints,
                                              double nu, double tol) {
    if (traces.size() != paths.size()) throw ShapeError("barenblatt_domination: one path per trace required");
    const double m = profile.m;
    DominationReport rep;
    rep.tolerance = tol;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto& tr = traces[i];
        const auto& s0 = tr.snapshots.front();
        const Grid1D& g = s0.grid;
        for (std::size_t j = 0; j < g.n; ++j) {
            const double u0 = s0.values[j] - tr.epsilon;
            if (u0 > 0.0 && !(eval_density(profile, g.center(j), 0.0) > u0))
                throw ConfigError("barenblatt_domination: profile does not strictly dominate u0 at x=" +
                                  io::fmt(g.center(j)));
        }
        double sup_b = 0.0;
        if (paths[i])
            for (double v : paths[i]->values()) sup_b = std::max(sup_b, std::abs(v));
        const double margin = ambient_margin(nu, sup_b, g.h());
        double trace_max = -std::numeric_limits<double>::infinity();
        for (double T : checkpoints) {
            const DensityField* snap = nullptr;
            for (const auto& s : tr.snapshots)
                if (std::abs(s.time - T) <= 1e-9 * (1.0 + T)) snap = &s;
            if (!snap) throw ConfigError("barenblatt_domination: checkpoint " + io::fmt(T) + " is not a snapshot time");
            auto ext = extend(*snap, margin, 0.0, tr.epsilon);
            for (double& v : ext.values) v = std::max(0.0, v);
            const double shift = paths[i] ? nu * paths[i]->value_at(T) : 0.0;
            if (shift != 0.0) {
                double curv = 0.0, wmax = 0.0;
                for (std::size_t j = 1; j + 1 < ext.values.size(); ++j) {
                    curv = std::max(curv, std::abs(ext.values[j + 1] - 2.0 * ext.values[j] + ext.values[j - 1]));
                    wmax = std::max(wmax, ext.values[j]);
                }
                const double slope = m >= 2.0 ? m * std::pow(wmax, m - 2.0) : std::numeric_limits<double>::infinity();
                rep.interpolation_bound = std::max(rep.interpolation_bound, slope * curv / 8.0);
                ext = shift_field(ext, -shift);
            }
            const auto p = to_pressure(ext, m);
            for (std::size_t k = 0; k < p.values.size(); ++k) {
                const double v = p.values[k] - eval_pressure(profile, p.grid.x(k), T);
                trace_max = std::max(trace_max, v);
                ++rep.points_checked;
                if (v > tol) ++rep.points_over_tolerance;
            }
        }
        rep.per_trace_max.push_back(trace_max);
        rep.max_violation = std::max(rep.max_violation, trace_max);
    }
    return rep;
}

}  // namespace spme
