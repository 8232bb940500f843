#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "spme/grid.hpp"

namespace spme {

/// Non-negative density sampled at the cell centres of a Grid1D at one time.
struct DensityField {
    Grid1D grid;
    double time = 0.0;
    std::vector<double> values;

    DensityField() = default;
    DensityField(Grid1D g, double t, std::vector<double> v) : grid(g), time(t), values(std::move(v)) {}
    DensityField(Grid1D g, double t, double fill) : grid(g), time(t), values(g.n, fill) {}

    double max() const { return *std::max_element(values.begin(), values.end()); }
    double min() const { return *std::min_element(values.begin(), values.end()); }
    /// Midpoint-rule integral over the grid interval.
    double mass() const { return grid.h() * std::accumulate(values.begin(), values.end(), 0.0); }
    /// max_j (u_j - fill), the distance from the constant state `fill`.
    double max_excess(double fill) const { return max() - fill; }
};

}  // namespace spme
