#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "spme/errors.hpp"
#include "spme/field.hpp"
#include "spme/grid.hpp"
#include "spme/io.hpp"

namespace spme {

/// A solver field placed on a larger uniform node grid. Nodes outside the
/// translated solver interval carry `fill` (eps for approximations, 0 once
/// the eps floor is removed).
struct ExtendedField {
    NodeGrid grid;
    double time = 0.0;
    std::vector<double> values;
    double fill = 0.0;
    /// Largest admissible |delta| for shift_field.
    double margin = 0.0;
    /// Current location of the solver interval inside the ambient grid.
    double domain_lo = 0.0;
    double domain_hi = 0.0;
};

/// Ambient margin needed to translate by nu * sup|X| with room to spare.
inline double ambient_margin(double nu, double path_sup, double h) { return nu * path_sup + 4.0 * h; }

/// Embeds `field` into a node grid on its cell centres extended by at least
/// `margin` on both sides. `floor` is subtracted from the solver values.
inline ExtendedField extend(const DensityField& field, double margin, double fill, double floor = 0.0) {
    const double h = field.grid.h();
    const auto k = static_cast<std::size_t>(std::ceil(margin / h - 1e-12));
    ExtendedField e;
    e.grid = NodeGrid{field.grid.center(0) - static_cast<double>(k) * h, h, field.grid.n + 2 * k};
    e.time = field.time;
    e.fill = fill;
    e.margin = static_cast<double>(k) * h;
    e.domain_lo = field.grid.a;
    e.domain_hi = field.grid.b;
    e.values.assign(e.grid.n, fill);
    for (std::size_t j = 0; j < field.grid.n; ++j) e.values[k + j] = field.values[j] - floor;
    return e;
}

/// Linear interpolation of node values at fractional index `pos`; `fill`
/// outside the node range.
inline double interpolate(std::span<const double> v, double pos, double fill) {
    const double r = std::round(pos);
    if (std::abs(pos - r) < 1e-9) pos = r;
    const double last = static_cast<double>(v.size() - 1);
    if (pos < 0.0 || pos > last) return fill;
    const auto k = static_cast<std::size_t>(pos);
    if (k == v.size() - 1) return v[k];
    const double w = pos - static_cast<double>(k);
    return (1.0 - w) * v[k] + w * v[k + 1];
}

/// out(x) = field(x + delta).
inline ExtendedField shift_field(const ExtendedField& field, double delta) {
    if (std::abs(delta) > field.margin * (1.0 + 1e-12))
        throw RangeError("shift_field: |delta|=" + io::fmt(std::abs(delta)) + " exceeds ambient margin " +
                         io::fmt(field.margin));
    ExtendedField out = field;
    const double offset = delta / field.grid.dx;
    for (std::size_t i = 0; i < field.grid.n; ++i)
        out.values[i] = interpolate(field.values, static_cast<double>(i) + offset, field.fill);
    out.domain_lo = field.domain_lo - delta;
    out.domain_hi = field.domain_hi - delta;
    return out;
}

/// Pressure m/(m-1) u^{m-1} on a node grid.
struct PressureField {
    NodeGrid grid;
    double time = 0.0;
    std::vector<double> values;
    double m = 2.0;
};

inline double pressure_of(double u, double m) { return m / (m - 1.0) * std::pow(u, m - 1.0); }
inline double density_of(double p, double m) { return std::pow((m - 1.0) / m * p, 1.0 / (m - 1.0)); }

inline std::vector<double> to_pressure(std::span<const double> u, double m) {
    if (!(m > 1.0)) throw ConfigError("to_pressure: m must exceed 1");
    std::vector<double> p(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] < 0.0) throw ConfigError("to_pressure: negative density " + io::fmt(u[i]));
        p[i] = pressure_of(u[i], m);
    }
    return p;
}

inline PressureField to_pressure(const ExtendedField& f, double m) { return {f.grid, f.time, to_pressure(f.values, m), m}; }

inline PressureField to_pressure(const DensityField& f, double m) {
    return {NodeGrid{f.grid.center(0), f.grid.h(), f.grid.n}, f.time, to_pressure(f.values, m), m};
}

inline std::vector<double> from_pressure(std::span<const double> p, double m) {
    if (!(m > 1.0)) throw ConfigError("from_pressure: m must exceed 1");
    std::vector<double> u(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) u[i] = density_of(std::max(0.0, p[i]), m);
    return u;
}

enum class FrameMode { to_moving, to_lab };

/// Stochastic flow change of variables v(x,t) = u(x - nu X_t, t) (to_moving)
/// and its inverse (to_lab), applied snapshot by snapshot. `path` is any
/// object with value_at(t): a BrownianPath or a MollifiedPath.
template <class PathLike>
std::vector<ExtendedField> flow_frame(const std::vector<ExtendedField>& frames, const PathLike& path, double nu,
                                      FrameMode mode) {
    std::vector<ExtendedField> out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        const double x = nu * path.value_at(f.time);
        const double delta = mode == FrameMode::to_moving ? -x : x;
        if (std::abs(delta) > f.margin * (1.0 + 1e-12))
            throw RangeError("flow_frame: ambient grid too small at t=" + io::fmt(f.time) + ", required margin " +
                             io::fmt(std::abs(delta)) + " but have " + io::fmt(f.margin));
        out.push_back(shift_field(f, delta));
    }
    return out;
}

/// Convenience overload: embeds solver snapshots first.
template <class PathLike>
std::vector<ExtendedField> flow_frame(const std::vector<DensityField>& snapshots, const PathLike& path, double nu,
                                      FrameMode mode, double margin, double fill, double floor = 0.0) {
    std::vector<ExtendedField> ext;
    ext.reserve(snapshots.size());
    for (const auto& s : snapshots) ext.push_back(extend(s, margin, fill, floor));
    return flow_frame(ext, path, nu, mode);
}

/// Discrete upper semi-relaxed envelope of a family of pressure histories
/// family[k][n] (member k, time level n): at node i and level n, the max over
/// all members and all samples with |y - x_i| <= space_radius and
/// s in (t_n - time_radius^2, t_n].
inline std::vector<PressureField> upper_envelope(const std::vector<std::vector<PressureField>>& family,
                                                 double space_radius, double time_radius) {
    if (family.empty() || family.front().empty()) throw ConfigError("upper_envelope: empty family");
    const auto& head = family.front();
    const std::size_t levels = head.size();
    const std::size_t n = head.front().grid.n;
    for (const auto& member : family) {
        if (member.size() != levels) throw ShapeError("upper_envelope: members differ in number of time levels");
        for (std::size_t l = 0; l < levels; ++l)
            if (!(member[l].grid == head[l].grid) || member[l].time != head[l].time)
                throw ShapeError("upper_envelope: members live on different grids or times");
    }

    std::vector<std::vector<double>> pointwise(levels, std::vector<double>(n));
    for (std::size_t l = 0; l < levels; ++l)
        for (std::size_t i = 0; i < n; ++i) {
            double v = family.front()[l].values[i];
            for (const auto& member : family) v = std::max(v, member[l].values[i]);
            pointwise[l][i] = v;
        }

    const double dx = head.front().grid.dx;
    const auto reach = static_cast<std::size_t>(std::floor(space_radius / dx + 1e-9));
    const double window = time_radius * time_radius;
    std::vector<PressureField> out;
    out.reserve(levels);
    for (std::size_t l = 0; l < levels; ++l) {
        const double t = head[l].time;
        std::vector<double> in_time = pointwise[l];
        for (std::size_t s = l; s-- > 0;) {
            if (!(head[s].time > t - window)) break;
            for (std::size_t i = 0; i < n; ++i) in_time[i] = std::max(in_time[i], pointwise[s][i]);
        }
        PressureField env{head[l].grid, t, std::vector<double>(n), head[l].m};
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t lo = i >= reach ? i - reach : 0;
            const std::size_t hi = std::min(n - 1, i + reach);
            double v = in_time[i];
            for (std::size_t j = lo; j <= hi; ++j) v = std::max(v, in_time[j]);
            env.values[i] = v;
        }
        out.push_back(std::move(env));
    }
    return out;
}

struct ResidualNorms {
    double max = 0.0;
    /// Space-time L1 norm over the evaluated region.
    double l1 = 0.0;
    std::size_t points = 0;
};

/// Residual p_t - ((m-1) p p_xx + p_x^2) of a pressure history, with a
/// centred difference in time and centred differences in space. Only nodes at
/// least `inset` inside the per-level domains [lo_n, hi_n] of three
/// consecutive levels enter.
inline ResidualNorms pressure_residual(const std::vector<PressureField>& frames, const std::vector<double>& domain_lo,
                                       const std::vector<double>& domain_hi, double m, double inset) {
    if (frames.size() < 3) throw ShapeError("pressure_residual: need at least 3 time levels");
    if (domain_lo.size() != frames.size() || domain_hi.size() != frames.size())
        throw ShapeError("pressure_residual: domain bounds must be given per level");
    const NodeGrid& g = frames.front().grid;
    const double h = g.dx;
    ResidualNorms r;
    for (std::size_t l = 1; l + 1 < frames.size(); ++l) {
        const auto& pm = frames[l - 1].values;
        const auto& p = frames[l].values;
        const auto& pp = frames[l + 1].values;
        const double span = frames[l + 1].time - frames[l - 1].time;
        const double lo = std::max({domain_lo[l - 1], domain_lo[l], domain_lo[l + 1]}) + inset;
        const double hi = std::min({domain_hi[l - 1], domain_hi[l], domain_hi[l + 1]}) - inset;
        for (std::size_t i = 1; i + 1 < g.n; ++i) {
            const double x = g.x(i);
            if (x < lo || x > hi) continue;
            const double pt = (pp[i] - pm[i]) / span;
            const double px = (p[i + 1] - p[i - 1]) / (2.0 * h);
            const double pxx = (p[i + 1] - 2.0 * p[i] + p[i - 1]) / (h * h);
            const double res = pt - ((m - 1.0) * p[i] * pxx + px * px);
            r.max = std::max(r.max, std::abs(res));
            r.l1 += std::abs(res) * h * 0.5 * span;
            ++r.points;
        }
    }
    return r;
}

}  // namespace spme
