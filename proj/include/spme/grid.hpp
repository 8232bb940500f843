#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "spme/errors.hpp"

namespace spme {

/// Uniform cell-centred grid on [a, b] with n cells.
struct Grid1D {
    double a = -1.0;
    double b = 1.0;
    std::size_t n = 0;

    Grid1D() = default;
    Grid1D(double lo, double hi, std::size_t cells) : a(lo), b(hi), n(cells) { validate(); }

    void validate() const {
        if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
            throw ConfigError("grid: need finite a < b");
        if (n < 3) throw ConfigError("grid: need at least 3 cells");
    }

    double h() const { return (b - a) / static_cast<double>(n); }
    double length() const { return b - a; }
    double midpoint() const { return 0.5 * (a + b); }
    double center(std::size_t j) const { return a + (static_cast<double>(j) + 0.5) * h(); }

    friend bool operator==(const Grid1D&, const Grid1D&) = default;
};

/// Uniform node grid x_i = x0 + i*dx, i = 0..n-1. Used for fields living on an
/// ambient interval that contains the solver domain.
struct NodeGrid {
    double x0 = 0.0;
    double dx = 1.0;
    std::size_t n = 0;

    double x(std::size_t i) const { return x0 + static_cast<double>(i) * dx; }
    double x_last() const { return x(n - 1); }

    friend bool operator==(const NodeGrid&, const NodeGrid&) = default;
};

}  // namespace spme
