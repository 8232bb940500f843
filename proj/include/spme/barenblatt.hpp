#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "spme/errors.hpp"
#include "spme/field.hpp"
#include "spme/io.hpp"

namespace spme {

/// Delayed source-type (ZKB) solution of u_t = (u^m)_xx in one dimension,
///
///   u(x,t) = s^{-a} (C - k (x-c)^2 s^{-2a})_+^{1/(m-1)},   s = t + t0,
///
/// with a = 1/(m+1) and k = a(m-1)/(2m). Its free boundary sits at
/// |x - c| = sqrt(C/k) s^a.
struct BarenblattProfile {
    double m = 2.0;
    double C = 1.0;
    double t0 = 1.0;
    double center = 0.0;

    void validate() const {
        if (!(m > 1.0)) throw ConfigError("barenblatt: m must exceed 1");
        if (!(C > 0.0)) throw ConfigError("barenblatt: C must be positive");
        if (!(t0 > 0.0)) throw ConfigError("barenblatt: t0 must be positive");
    }

    double alpha() const { return 1.0 / (m + 1.0); }
    double k() const { return alpha() * (m - 1.0) / (2.0 * m); }
    double radius(double t) const { return std::sqrt(C / k()) * std::pow(t + t0, alpha()); }

    /// Total mass; time independent.
    double mass() const {
        const double p = 1.0 / (m - 1.0);
        return std::sqrt(C / k()) * std::pow(C, p) * std::beta(0.5, p + 1.0);
    }

    /// Profile with prescribed mass, delay and centre.
    static BarenblattProfile from_mass(double m, double mass, double t0, double center = 0.0) {
        BarenblattProfile b{m, 1.0, t0, center};
        const double p = 1.0 / (m - 1.0);
        const double scale = mass * std::sqrt(b.k()) / std::beta(0.5, p + 1.0);
        b.C = std::pow(scale, 1.0 / (0.5 + p));
        b.validate();
        return b;
    }

    /// Profile whose free boundary at t = 0 is at distance `r0` from `center`.
    static BarenblattProfile with_initial_radius(double m, double r0, double t0, double center = 0.0) {
        BarenblattProfile b{m, 1.0, t0, center};
        b.C = b.k() * r0 * r0 * std::pow(t0, -2.0 * b.alpha());
        b.validate();
        return b;
    }
};

inline double eval_density(const BarenblattProfile& b, double x, double t) {
    const double s = t + b.t0;
    const double dx = x - b.center;
    if (std::abs(dx) >= b.radius(t)) return 0.0;
    const double q = b.C - b.k() * dx * dx * std::pow(s, -2.0 * b.alpha());
    if (q <= 0.0) return 0.0;
    return std::pow(s, -b.alpha()) * std::pow(q, 1.0 / (b.m - 1.0));
}

/// m/(m-1) u^{m-1}: a downward parabola in x inside the support.
inline double eval_pressure(const BarenblattProfile& b, double x, double t) {
    const double s = t + b.t0;
    const double dx = x - b.center;
    if (std::abs(dx) >= b.radius(t)) return 0.0;
    const double q = b.C - b.k() * dx * dx * std::pow(s, -2.0 * b.alpha());
    if (q <= 0.0) return 0.0;
    return b.m / (b.m - 1.0) * std::pow(s, -b.alpha() * (b.m - 1.0)) * q;
}

struct DominationResult {
    BarenblattProfile profile;
    /// min over supp(u0) of B(x,0) - u0(x).
    double margin = 0.0;
    /// Margin the search was asked to guarantee (1% of max u0).
    double required_margin = 0.0;
};

/// Barenblatt profile whose free boundary at t = 0 is the boundary of the grid
/// interval and which dominates u0 with a margin of 1% of max u0 on its support.
/// The delay t0 is bisected (log scale) to the largest admissible value, which
/// gives the slowest-spreading dominating profile.
inline DominationResult dominating_profile(const DensityField& u0, double m) {
    const Grid1D& g = u0.grid;
    const double half = 0.5 * g.length();
    const double c = g.midpoint();
    const double required = 0.01 * std::max(0.0, u0.max());

    for (std::size_t j = 0; j < g.n; ++j)
        if (u0.values[j] > 0.0 && std::abs(g.center(j) - c) >= half)
            throw SearchError("dominating_profile: u0 > 0 at x=" + io::fmt(g.center(j)) +
                              " on or beyond the interval boundary; no profile can vanish there");

    auto margin_at = [&](double t0, std::size_t* worst = nullptr) {
        const auto b = BarenblattProfile::with_initial_radius(m, half, t0, c);
        double mg = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < g.n; ++j) {
            if (u0.values[j] <= 0.0) continue;
            const double d = eval_density(b, g.center(j), 0.0) - u0.values[j];
            if (d < mg) {
                mg = d;
                if (worst) *worst = j;
            }
        }
        return mg;
    };

    constexpr double t_lo_bound = 1e-12;
    constexpr double t_hi_bound = 1e3;
    auto feasible = [&](double t0) {
        const double mg = margin_at(t0);
        return mg >= required && mg > 0.0;
    };

    double lo = std::log(t_lo_bound), hi = std::log(t_hi_bound);
    if (!feasible(std::exp(lo))) {
        std::size_t worst = 0;
        const double mg = margin_at(std::exp(lo), &worst);
        throw SearchError("dominating_profile: no delay in [1e-12, 1e3] dominates u0; binding point x=" +
                          io::fmt(g.center(worst)) + " with margin " + io::fmt(mg) + " < required " +
                          io::fmt(required));
    }
    if (feasible(std::exp(hi))) lo = hi;
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        (feasible(std::exp(mid)) ? lo : hi) = mid;
    }
    const double t0 = std::exp(lo);
    return {BarenblattProfile::with_initial_radius(m, half, t0, c), margin_at(t0), required};
}

struct SupportRate {
    double M_bar = 0.0;
    bool certificate_ok = false;
    /// min over the certificate grid of r(0) + M_bar t^a - r(t).
    double worst_slack = 0.0;
};

/// M_bar with r(t) <= r(0) + M_bar t^{1/(m+1)} for all t >= 0. Since
/// (t+t0)^a - t0^a <= t^a for concave powers, M_bar = sqrt(C/k); the bound is
/// re-checked on log-spaced t in [1e-3, 1e3].
inline SupportRate support_rate_constant(const BarenblattProfile& b) {
    b.validate();
    SupportRate out;
    out.M_bar = std::sqrt(b.C / b.k());
    out.worst_slack = std::numeric_limits<double>::infinity();
    const double r0 = b.radius(0.0);
    constexpr int samples = 121;
    for (int i = 0; i < samples; ++i) {
        const double t = std::pow(10.0, -3.0 + 6.0 * i / (samples - 1));
        const double slack = r0 + out.M_bar * std::pow(t, b.alpha()) - b.radius(t);
        out.worst_slack = std::min(out.worst_slack, slack);
    }
    out.certificate_ok = out.worst_slack >= -1e-12 * (r0 + out.M_bar);
    return out;
}

}  // namespace spme
