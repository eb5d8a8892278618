#pragma once

#include <cmath>
#include <functional>
#include <numbers>

#include "constrank/grid.hpp"

namespace constrank {

/// Quadrature weights for integrals over a ball on the torus: indicator
/// weights with a one-cell linear antialiasing ramp on the boundary shell.
struct BallMask {
    GridSpec grid;
    Eigen::VectorXd center;
    double radius = 0;
    std::vector<double> weights;  // per site, in [0,1]

    static BallMask make(const GridSpec& grid, const Eigen::VectorXd& center, double radius,
                         double min_cells = 4.0) {
        grid.validate();
        const double h = grid.cell();
        if (radius < min_cells * h)
            throw RadiusTooSmall("ball radius below " + std::to_string(min_cells) +
                                 " grid cells");
        if (radius > 0.5 * grid.period)
            throw ConfigError("ball does not embed in the torus");
        BallMask mask;
        mask.grid = grid;
        mask.center = center;
        mask.radius = radius;
        mask.weights.resize(static_cast<size_t>(grid.total_points()));
        for (int64_t s = 0; s < grid.total_points(); ++s) {
            Eigen::VectorXd x = grid.site_point(s);
            double d2 = 0;
            for (int i = 0; i < grid.dim_n; ++i) {
                double di = std::abs(x[i] - center[i]);
                di = std::min(di, grid.period - di);
                d2 += di * di;
            }
            double d = std::sqrt(d2);
            mask.weights[size_t(s)] = std::clamp((radius - d) / h + 0.5, 0.0, 1.0);
        }
        return mask;
    }

    /// sum of weights times cell volume; approximates |B_R|
    double volume() const {
        double v = 0;
        for (double w : weights) v += w;
        return v * grid.cell_volume();
    }

    double exact_ball_volume() const {
        switch (grid.dim_n) {
            case 1: return 2.0 * radius;
            case 2: return std::numbers::pi * radius * radius;
            default: return 4.0 / 3.0 * std::numbers::pi * radius * radius * radius;
        }
    }
};

/// integral over the mask of phi(f(x))
inline double ball_integral(const PeriodicField& f, const BallMask& mask,
                            const std::function<double(const Eigen::VectorXd&)>& phi) {
    if (!(f.grid() == mask.grid)) throw ShapeMismatch("mask grid mismatch");
    double acc = 0;
    for (int64_t s = 0; s < f.grid().total_points(); ++s) {
        double w = mask.weights[size_t(s)];
        if (w == 0.0) continue;
        acc += w * phi(f.at_site(s));
    }
    return acc * f.grid().cell_volume();
}

inline Eigen::VectorXd ball_average(const PeriodicField& f, const BallMask& mask) {
    if (!(f.grid() == mask.grid)) throw ShapeMismatch("mask grid mismatch");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(f.fiber_dim());
    double wsum = 0;
    for (int64_t s = 0; s < f.grid().total_points(); ++s) {
        double w = mask.weights[size_t(s)];
        if (w == 0.0) continue;
        wsum += w;
        for (int c = 0; c < f.fiber_dim(); ++c) acc[c] += w * f.value(s, c);
    }
    return acc / wsum;
}

}  // namespace constrank
