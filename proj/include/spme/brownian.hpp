#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spme/errors.hpp"
#include "spme/io.hpp"
#include "spme/rng.hpp"

namespace spme {

/// A Brownian trajectory sampled at t_k = k*dt, k = 0..n, with B_0 = 0.
class BrownianPath {
public:
    BrownianPath() = default;

    /// Wraps given samples. Used for injected deterministic paths in tests and
    /// for replaying serialized paths.
    static BrownianPath from_values(std::vector<double> values, double dt, std::uint64_t seed = 0) {
        if (!(dt > 0.0)) throw ConfigError("path: dt must be positive");
        if (values.size() < 2) throw ConfigError("path: need at least two samples");
        BrownianPath p;
        p.dt_ = dt;
        p.seed_ = seed;
        p.values_ = std::move(values);
        p.t_grid_.resize(p.values_.size());
        for (std::size_t k = 0; k < p.t_grid_.size(); ++k) p.t_grid_[k] = static_cast<double>(k) * dt;
        return p;
    }

    std::span<const double> t_grid() const { return t_grid_; }
    std::span<const double> values() const { return values_; }
    std::uint64_t seed() const { return seed_; }
    double dt() const { return dt_; }
    std::size_t size() const { return values_.size(); }
    double horizon() const { return t_grid_.back(); }

    /// Piecewise-linear interpolant, extended by B_0 = 0 for t < 0.
    double value_at(double t) const {
        if (t <= 0.0) return values_.front();
        const double pos = t / dt_;
        const auto last = values_.size() - 1;
        if (pos >= static_cast<double>(last)) {
            if (pos > static_cast<double>(last) * (1.0 + 1e-12))
                throw RangeError("path: evaluation at t=" + io::fmt(t) + " beyond horizon " +
                                 io::fmt(horizon()));
            return values_.back();
        }
        const auto k = static_cast<std::size_t>(pos);
        const double w = pos - static_cast<double>(k);
        return (1.0 - w) * values_[k] + w * values_[k + 1];
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    /// Every `stride`-th sample. Subsampling a Brownian path is again a Brownian
    /// path, which gives exactly nested coarse/fine noise for refinement studies.
    BrownianPath restrict(std::size_t stride) const {
        if (stride == 0) throw ConfigError("path: stride must be positive");
        std::vector<double> v;
        for (std::size_t k = 0; k < values_.size(); k += stride) v.push_back(values_[k]);
        if (v.size() < 2) throw ConfigError("path: stride leaves fewer than two samples");
        return from_values(std::move(v), dt_ * static_cast<double>(stride), seed_);
    }

    /// Content digest; identical noise gives identical digests.
    std::uint64_t digest() const {
        return io::Fnv1a{}.value(seed_).value(dt_).doubles(values_).digest();
    }

private:
    std::vector<double> t_grid_;
    std::vector<double> values_;
    std::uint64_t seed_ = 0;
    double dt_ = 0.0;
};

/// Samples a path on [0, horizon] with step dt using `draw()` as the source of
/// standard normal variates.
template <class NormalSource>
BrownianPath sample_path(double horizon, double dt, std::uint64_t seed, NormalSource&& draw) {
    if (!(horizon > 0.0) || !(dt > 0.0)) throw ConfigError("sample_path: horizon and dt must be positive");
    if (horizon / dt < 2.0) throw ConfigError("sample_path: need horizon/dt >= 2");
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    std::vector<double> values(steps + 1, 0.0);
    const double sd = std::sqrt(dt);
    for (std::size_t k = 1; k <= steps; ++k) values[k] = values[k - 1] + sd * draw();
    return BrownianPath::from_values(std::move(values), dt, seed);
}

inline BrownianPath sample_path(double horizon, double dt, std::uint64_t seed) {
    GaussianStream g(seed);
    return sample_path(horizon, dt, seed, g);
}

/// The unit mollifier rho(r) = c*exp(-1/(r(1-r))) on (0,1), tabulated at the
/// midpoints of `nodes` equal cells and normalised to unit discrete mass.
class Mollifier {
public:
    explicit Mollifier(std::size_t nodes = 128) {
        if (nodes < 64) throw ConfigError("mollifier: need at least 64 quadrature nodes");
        r_.resize(nodes);
        w_.resize(nodes);
        dw_.resize(nodes);
        double mass = 0.0;
        for (std::size_t i = 0; i < nodes; ++i) {
            const double r = (static_cast<double>(i) + 0.5) / static_cast<double>(nodes);
            const double q = r * (1.0 - r);
            const double rho = std::exp(-1.0 / q);
            r_[i] = r;
            w_[i] = rho / static_cast<double>(nodes);
            dw_[i] = rho * (1.0 - 2.0 * r) / (q * q) / static_cast<double>(nodes);
            mass += w_[i];
        }
        for (std::size_t i = 0; i < nodes; ++i) {
            w_[i] /= mass;
            dw_[i] /= mass;
        }
        for (std::size_t i = 0; i < nodes; ++i) moment_ += r_[i] * w_[i];
    }

    std::size_t nodes() const { return r_.size(); }
    std::span<const double> abscissae() const { return r_; }
    /// Quadrature weights of rho (sum to one).
    std::span<const double> weights() const { return w_; }
    /// Quadrature weights of rho'.
    std::span<const double> derivative_weights() const { return dw_; }
    /// First moment of rho.
    double first_moment() const { return moment_; }

private:
    std::vector<double> r_, w_, dw_;
    double moment_ = 0.0;
};

/// The adapted smooth approximation B^eps_t = int rho_eps(t-s) B_s ds of a
/// Brownian path, sampled on the path grid and evaluable at any time.
class MollifiedPath {
public:
    MollifiedPath(std::shared_ptr<const BrownianPath> path, double epsilon, Mollifier kernel)
        : path_(std::move(path)), epsilon_(epsilon), kernel_(std::move(kernel)) {
        if (!path_) throw ConfigError("mollify: null path");
        if (!(epsilon_ >= 2.0 * path_->dt() * (1.0 - 1e-12)))
            throw ResolutionError("mollify: epsilon=" + io::fmt(epsilon_) + " below 2*dt_path=" +
                                  io::fmt(2.0 * path_->dt()));
        const auto t = path_->t_grid();
        values_.resize(t.size());
        for (std::size_t k = 0; k < t.size(); ++k) values_[k] = value_at(t[k]);
    }

    const BrownianPath& path() const { return *path_; }
    std::shared_ptr<const BrownianPath> shared_path() const { return path_; }
    double epsilon() const { return epsilon_; }
    double kernel_moment() const { return kernel_.first_moment(); }
    std::span<const double> t_grid() const { return path_->t_grid(); }
    std::span<const double> values() const { return values_; }

    /// B^eps at an arbitrary time. Only B on [t - eps, t] enters.
    double value_at(double t) const {
        const auto r = kernel_.abscissae();
        const auto w = kernel_.weights();
        double acc = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) acc += w[i] * path_->value_at(t - epsilon_ * r[i]);
        return acc;
    }

    /// dB^eps/dt, as the convolution of B with the derivative of rho_eps.
    double drift_at(double t) const {
        const auto r = kernel_.abscissae();
        const auto dw = kernel_.derivative_weights();
        double acc = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) acc += dw[i] * path_->value_at(t - epsilon_ * r[i]);
        return acc / epsilon_;
    }

private:
    std::shared_ptr<const BrownianPath> path_;
    double epsilon_;
    Mollifier kernel_;
    std::vector<double> values_;
};

inline MollifiedPath mollify(std::shared_ptr<const BrownianPath> path, double epsilon,
                             const Mollifier& rho = Mollifier{}) {
    return MollifiedPath(std::move(path), epsilon, rho);
}

inline MollifiedPath mollify(const BrownianPath& path, double epsilon, const Mollifier& rho = Mollifier{}) {
    return mollify(std::make_shared<const BrownianPath>(path), epsilon, rho);
}

struct HoelderEstimate {
    double alpha = 0.4;
    double c_alpha = 0.0;
};

/// Smallest C with |B_t - B_s| <= C |t-s|^alpha over all sample pairs.
/// Lags are scanned in increasing order and the scan stops once the path's
/// total range can no longer beat the running maximum at that lag.
inline HoelderEstimate hoelder_constant(const BrownianPath& path, double alpha) {
    if (!(alpha > 1.0 / 3.0 && alpha < 0.5)) throw ConfigError("hoelder_constant: alpha must lie in (1/3, 1/2)");
    const auto v = path.values();
    const auto t = path.t_grid();
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double range = *hi - *lo;
    HoelderEstimate est{alpha, 0.0};
    const std::size_t n = v.size();
    for (std::size_t lag = 1; lag < n; ++lag) {
        if (range / std::pow(t[lag] - t[0], alpha) <= est.c_alpha) break;
        for (std::size_t i = 0; i + lag < n; ++i) {
            const double d = std::abs(v[i + lag] - v[i]);
            if (d <= 0.0) continue;
            est.c_alpha = std::max(est.c_alpha, d / std::pow(t[i + lag] - t[i], alpha));
        }
    }
    return est;
}

/// max_k |a_k - b_k|.
inline double sup_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("sup_distance: arrays differ in length");
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
    return d;
}

inline double sup_distance(const BrownianPath& path, const MollifiedPath& mpath) {
    const auto ta = path.t_grid();
    const auto tb = mpath.t_grid();
    if (ta.size() != tb.size() || !std::equal(ta.begin(), ta.end(), tb.begin()))
        throw ShapeError("sup_distance: path and mollified path live on different grids");
    return sup_distance(path.values(), mpath.values());
}

// ---------------------------------------------------------------------------
// Serialization

/// CSV with columns t,B,B_eps.
inline void write_path_csv(std::ostream& os, const BrownianPath& path, const MollifiedPath& mpath) {
    if (path.size() != mpath.values().size()) throw ShapeError("write_path_csv: grid mismatch");
    os << "t,B,B_eps\n";
    const auto t = path.t_grid();
    const auto b = path.values();
    const auto be = mpath.values();
    for (std::size_t k = 0; k < t.size(); ++k) os << io::fmt(t[k]) << ',' << io::fmt(b[k]) << ',' << io::fmt(be[k]) << '\n';
}

/// Binary record: magic "SPMEPATH", u64 seed, f64 dt, f64 epsilon, u64 n,
/// then n triples (t, B, B_eps) of little-endian f64.
inline void write_path_binary(std::ostream& os, const BrownianPath& path, const MollifiedPath& mpath) {
    io::put_magic(os, "SPMEPATH");
    io::put<std::uint64_t>(os, path.seed());
    io::put<double>(os, path.dt());
    io::put<double>(os, mpath.epsilon());
    io::put<std::uint64_t>(os, path.size());
    const auto t = path.t_grid();
    const auto b = path.values();
    const auto be = mpath.values();
    for (std::size_t k = 0; k < t.size(); ++k) {
        io::put(os, t[k]);
        io::put(os, b[k]);
        io::put(os, be[k]);
    }
}

struct PathRecord {
    BrownianPath path;
    double epsilon = 0.0;
    std::vector<double> mollified;
};

inline PathRecord read_path_binary(std::istream& is) {
    io::expect_magic(is, "SPMEPATH");
    const auto seed = io::get<std::uint64_t>(is);
    const auto dt = io::get<double>(is);
    const auto eps = io::get<double>(is);
    const auto n = io::get<std::uint64_t>(is);
    std::vector<double> b(n), be(n);
    for (std::size_t k = 0; k < n; ++k) {
        (void)io::get<double>(is);
        b[k] = io::get<double>(is);
        be[k] = io::get<double>(is);
    }
    return {BrownianPath::from_values(std::move(b), dt, seed), eps, std::move(be)};
}

}  // namespace spme
