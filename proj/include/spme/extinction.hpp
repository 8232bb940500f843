#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "spme/barenblatt.hpp"
#include "spme/brownian.hpp"
#include "spme/errors.hpp"
#include "spme/io.hpp"
#include "spme/parallel.hpp"
#include "spme/pme_solver.hpp"
#include "spme/rng.hpp"
#include "spme/stats.hpp"

namespace spme {

/// Where the noise strength enters the hitting criterion:
///   paper:     |B_t|      >= L + M t^{1/(m+1)}
///   heuristic: nu |B_t|   >= L + M t^{1/(m+1)}
enum class Convention { paper, heuristic };

inline const char* to_string(Convention c) { return c == Convention::paper ? "paper" : "heuristic"; }

inline Convention parse_convention(const std::string& s) {
    if (s == "paper") return Convention::paper;
    if (s == "heuristic") return Convention::heuristic;
    throw ConfigError("convention: expected 'paper' or 'heuristic', got '" + s + "'");
}

/// First snapshot time with max_j(u_j - fill) <= tol; nullopt if never.
/// Every later snapshot must stay below tol, otherwise the trace is rejected.
inline std::optional<double> detect_extinction(const SolveTrace& trace, double tol, double fill) {
    std::optional<double> hit;
    for (const auto& s : trace.snapshots) {
        const double dev = s.max_excess(fill);
        if (!hit) {
            if (dev <= tol) hit = s.time;
        } else if (dev > tol * (1.0 + 1e-9) + 1e-14) {
            throw IntegrityError("detect_extinction: re-ignition at t=" + io::fmt(s.time) + " (excess " +
                                 io::fmt(dev) + " > tol " + io::fmt(tol) + ") after extinction at t=" +
                                 io::fmt(*hit));
        }
    }
    return hit;
}

inline std::optional<double> detect_extinction(const SolveTrace& trace) {
    return detect_extinction(trace, trace.extinction_tol, trace.epsilon);
}

/// The moving barrier L + M_bar t^{1/(m+1)} and the observable compared with it.
struct Barrier {
    double L = 2.0;
    double M_bar = 1.0;
    double m = 2.0;
    double nu = 1.0;
    Convention convention = Convention::heuristic;

    void validate() const {
        if (!(L > 0.0)) throw ConfigError("barrier: L must be positive");
        if (!(M_bar > 0.0)) throw ConfigError("barrier: M_bar must be positive");
        if (!(m > 1.0)) throw ConfigError("barrier: m must exceed 1");
    }

    double level(double t) const { return L + M_bar * std::pow(t, 1.0 / (m + 1.0)); }
    double observable(double b) const { return convention == Convention::heuristic ? nu * std::abs(b) : std::abs(b); }
    /// Positive once the criterion holds.
    double gap(double t, double b) const { return observable(b) - level(t); }
};

/// Feeds samples in time order and reports the first crossing, refined by
/// linear interpolation of the gap between the bracketing samples.
class CrossingScanner {
public:
    explicit CrossingScanner(const Barrier& barrier) : barrier_(barrier) {}

    std::optional<double> feed(double t, double b) {
        const double g = barrier_.gap(t, b);
        std::optional<double> out;
        if (g >= 0.0) {
            if (!started_ || g == prev_gap_) out = t;
            else out = prev_t_ + (t - prev_t_) * (-prev_gap_) / (g - prev_gap_);
        }
        started_ = true;
        prev_t_ = t;
        prev_gap_ = g;
        return out;
    }

private:
    Barrier barrier_;
    bool started_ = false;
    double prev_t_ = 0.0;
    double prev_gap_ = 0.0;
};

inline std::optional<double> hitting_time(const BrownianPath& path, const Barrier& barrier) {
    barrier.validate();
    CrossingScanner scan(barrier);
    const auto t = path.t_grid();
    const auto v = path.values();
    for (std::size_t k = 0; k < t.size(); ++k)
        if (auto hit = scan.feed(t[k], v[k])) return hit;
    return std::nullopt;
}

inline std::optional<double> hitting_time(const BrownianPath& path, double L, double M_bar, double m, double nu,
                                          Convention convention) {
    return hitting_time(path, Barrier{L, M_bar, m, nu, convention});
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct McConfig {
    SolverConfig solver;
    Profile initial = BumpProfile{};
    std::size_t paths = 20;
    /// Ascending horizons; the solve runs to the last one.
    std::vector<double> horizons = stats::log_space(0.1, 20.0, 12);
    std::uint64_t master_seed = 1;
    Convention convention = Convention::heuristic;
    /// Path sampling step; 0 selects epsilon / 4.
    double dt_path = 0.0;
    double snapshot_dt = 0.01;
    std::size_t quadrature_nodes = 128;
    /// Barrier constant; unset means support_rate_constant of the dominating profile.
    std::optional<double> M_bar;
    unsigned workers = 1;

    double path_step() const { return dt_path > 0.0 ? dt_path : solver.epsilon / 4.0; }
};

struct ExtinctionRecord {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::optional<double> T_extinct;
    /// Hitting time under the configured convention, plus both conventions.
    std::optional<double> T_hat;
    std::optional<double> T_hat_paper;
    std::optional<double> T_hat_heuristic;
    double epsilon = 0.0;
    std::string config_digest;
    std::uint64_t path_digest = 0;
    bool failed = false;
    std::string failure;
};

struct McSummary {
    std::vector<double> horizons;
    std::vector<double> p_ext, p_ext_lo, p_ext_hi;
    std::vector<double> p_hat, p_hat_lo, p_hat_hi;
    std::vector<double> p_hat_paper;
    std::size_t paths = 0;
    std::size_t valid = 0;
    std::size_t failed = 0;
    double m = 0.0, nu = 0.0, a = 0.0, b = 0.0, M_bar = 0.0, epsilon = 0.0;
    Convention convention = Convention::heuristic;
    /// Paths whose hitting time is finite, and how many of them were extinct by
    /// T_hat + snapshot_dt.
    std::size_t pathwise_checked = 0;
    std::size_t pathwise_held = 0;
    double snapshot_dt = 0.0;
};

struct McResult {
    McSummary summary;
    std::vector<ExtinctionRecord> records;
};

/// Empirical CDF at `horizons` of possibly censored event times.
inline std::vector<double> empirical_cdf(const std::vector<std::optional<double>>& times,
                                         const std::vector<double>& horizons) {
    std::vector<double> cdf(horizons.size(), 0.0);
    if (times.empty()) return cdf;
    for (std::size_t h = 0; h < horizons.size(); ++h) {
        std::size_t k = 0;
        for (const auto& t : times)
            if (t && *t <= horizons[h]) ++k;
        cdf[h] = static_cast<double>(k) / static_cast<double>(times.size());
    }
    return cdf;
}

inline double barrier_constant(const McConfig& cfg) {
    if (cfg.M_bar) return *cfg.M_bar;
    const auto u0 = initial_density(cfg.initial, cfg.solver.grid);
    return support_rate_constant(dominating_profile(u0, cfg.solver.m).profile).M_bar;
}

/// For every path: sample, mollify, solve, detect extinction and compute the
/// hitting times; then aggregate empirical CDFs with Wilson intervals.
/// Deterministic in (master_seed, config) for any worker count.
inline McResult mc_extinction(const McConfig& cfg) {
    if (cfg.paths < 2) throw ConfigError("mc: need at least 2 paths");
    if (cfg.horizons.empty() || !std::is_sorted(cfg.horizons.begin(), cfg.horizons.end()) || !(cfg.horizons.front() > 0.0))
        throw ConfigError("mc: horizons must be positive and ascending");
    SolverConfig solver = cfg.solver;
    solver.t_end = cfg.horizons.back();
    solver.validate();
    const auto u0 = initial_density(cfg.initial, solver.grid);
    const double M_bar = barrier_constant(cfg);
    const Barrier barrier{solver.grid.length(), M_bar, solver.m, solver.nu, cfg.convention};
    barrier.validate();
    const std::string digest = io::hex(solver.digest());
    const double dt_path = cfg.path_step();
    const Mollifier rho(cfg.quadrature_nodes);

    auto run = [&](std::size_t i) {
        ExtinctionRecord rec;
        rec.index = i;
        rec.seed = derive_seed(cfg.master_seed, i);
        rec.epsilon = solver.epsilon;
        rec.config_digest = digest;
        try {
            auto path = std::make_shared<const BrownianPath>(sample_path(solver.t_end, dt_path, rec.seed));
            rec.path_digest = path->digest();
            Barrier paper = barrier, heur = barrier;
            paper.convention = Convention::paper;
            heur.convention = Convention::heuristic;
            rec.T_hat_paper = hitting_time(*path, paper);
            rec.T_hat_heuristic = hitting_time(*path, heur);
            rec.T_hat = cfg.convention == Convention::paper ? rec.T_hat_paper : rec.T_hat_heuristic;
            const auto mpath = mollify(path, solver.epsilon, rho);
            const auto trace = solve(solver, mpath, u0, cfg.snapshot_dt);
            rec.T_extinct = detect_extinction(trace);
        } catch (const std::exception& e) {
            rec.failed = true;
            rec.failure = e.what();
        }
        return rec;
    };

    McResult res;
    res.records = parallel_map(cfg.paths, cfg.workers, run);

    McSummary& s = res.summary;
    s.horizons = cfg.horizons;
    s.paths = cfg.paths;
    s.m = solver.m;
    s.nu = solver.nu;
    s.a = solver.grid.a;
    s.b = solver.grid.b;
    s.M_bar = M_bar;
    s.epsilon = solver.epsilon;
    s.convention = cfg.convention;
    s.snapshot_dt = cfg.snapshot_dt;

    std::vector<std::optional<double>> ext, hat, hat_paper;
    for (const auto& r : res.records) {
        if (r.failed) {
            ++s.failed;
            continue;
        }
        ext.push_back(r.T_extinct);
        hat.push_back(r.T_hat);
        hat_paper.push_back(r.T_hat_paper);
        if (r.T_hat) {
            ++s.pathwise_checked;
            if (r.T_extinct && *r.T_extinct <= *r.T_hat + cfg.snapshot_dt + 1e-12) ++s.pathwise_held;
        }
    }
    s.valid = ext.size();
    if (static_cast<double>(s.failed) > 0.05 * static_cast<double>(cfg.paths))
        throw IntegrityError("mc: " + std::to_string(s.failed) + " of " + std::to_string(cfg.paths) +
                             " paths failed (more than 5%)");

    s.p_ext = empirical_cdf(ext, s.horizons);
    s.p_hat = empirical_cdf(hat, s.horizons);
    s.p_hat_paper = empirical_cdf(hat_paper, s.horizons);
    for (std::size_t h = 0; h < s.horizons.size(); ++h) {
        const auto ke = static_cast<std::size_t>(std::llround(s.p_ext[h] * static_cast<double>(s.valid)));
        const auto kh = static_cast<std::size_t>(std::llround(s.p_hat[h] * static_cast<double>(s.valid)));
        const auto ie = stats::wilson(ke, s.valid);
        const auto ih = stats::wilson(kh, s.valid);
        s.p_ext_lo.push_back(ie.lo);
        s.p_ext_hi.push_back(ie.hi);
        s.p_hat_lo.push_back(ih.lo);
        s.p_hat_hi.push_back(ih.hi);
    }
    return res;
}

/// Path-only estimate of P(T_hat <= T): Brownian increments are streamed with
/// the same generator contract as sample_path and each path stops at its
/// first crossing or at the last horizon.
struct HittingStudy {
    std::vector<double> horizons;
    std::vector<double> cdf;
    /// Sorted finite hitting times.
    std::vector<double> times;
    std::size_t paths = 0;

    /// Smallest T with empirical P(T_hat <= T) >= q; nullopt if not reached.
    std::optional<double> quantile(double q) const {
        const auto need = static_cast<std::size_t>(std::ceil(q * static_cast<double>(paths) - 1e-12));
        if (need == 0) return 0.0;
        if (need > times.size()) return std::nullopt;
        return times[need - 1];
    }

    double probability_by(double T) const {
        const auto k = std::upper_bound(times.begin(), times.end(), T) - times.begin();
        return static_cast<double>(k) / static_cast<double>(paths);
    }
};

inline std::optional<double> stream_hitting_time(const Barrier& barrier, double horizon, double dt,
                                                 std::uint64_t seed) {
    GaussianStream draw(seed);
    CrossingScanner scan(barrier);
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    const double sd = std::sqrt(dt);
    double b = 0.0;
    if (auto hit = scan.feed(0.0, 0.0)) return hit;
    for (std::size_t k = 1; k <= steps; ++k) {
        b += sd * draw();
        if (auto hit = scan.feed(static_cast<double>(k) * dt, b)) return hit;
    }
    return std::nullopt;
}

inline HittingStudy path_only_hitting(const Barrier& barrier, std::size_t paths, std::vector<double> horizons,
                                      double dt, std::uint64_t master_seed, unsigned workers = 1) {
    barrier.validate();
    if (paths == 0) throw ConfigError("path_only_hitting: need at least one path");
    if (horizons.empty() || !std::is_sorted(horizons.begin(), horizons.end()))
        throw ConfigError("path_only_hitting: horizons must be ascending");
    const double horizon = horizons.back();
    auto hits = parallel_map(paths, workers, [&](std::size_t i) {
        return stream_hitting_time(barrier, horizon, dt, derive_seed(master_seed, i));
    });
    HittingStudy s;
    s.paths = paths;
    s.horizons = std::move(horizons);
    s.cdf = empirical_cdf(hits, s.horizons);
    for (const auto& h : hits)
        if (h) s.times.push_back(*h);
    std::sort(s.times.begin(), s.times.end());
    return s;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string opt_csv(const std::optional<double>& v) { return v ? io::fmt(*v) : std::string("inf"); }

/// Columns T, p_ext, p_ext_lo, p_ext_hi, p_hat, p_hat_lo, p_hat_hi.
inline void write_summary_csv(std::ostream& os, const McSummary& s) {
    os << "T,p_ext,p_ext_lo,p_ext_hi,p_hat,p_hat_lo,p_hat_hi\n";
    for (std::size_t h = 0; h < s.horizons.size(); ++h)
        os << io::fmt(s.horizons[h]) << ',' << io::fmt(s.p_ext[h]) << ',' << io::fmt(s.p_ext_lo[h]) << ','
           << io::fmt(s.p_ext_hi[h]) << ',' << io::fmt(s.p_hat[h]) << ',' << io::fmt(s.p_hat_lo[h]) << ','
           << io::fmt(s.p_hat_hi[h]) << '\n';
}

/// One row per path; censored times are written as "inf".
inline void write_records_csv(std::ostream& os, const std::vector<ExtinctionRecord>& records) {
    os << "index,seed,T_extinct,T_hat,T_hat_paper,T_hat_heuristic,epsilon,config_digest,path_digest,failed\n";
    for (const auto& r : records)
        os << r.index << ',' << r.seed << ',' << opt_csv(r.T_extinct) << ',' << opt_csv(r.T_hat) << ','
           << opt_csv(r.T_hat_paper) << ',' << opt_csv(r.T_hat_heuristic) << ',' << io::fmt(r.epsilon) << ','
           << r.config_digest << ',' << io::hex(r.path_digest) << ',' << (r.failed ? 1 : 0) << '\n';
}

}  // namespace spme
