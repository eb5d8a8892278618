#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

#include "constrank/rng.hpp"

namespace constrank {

/// Deterministic low-discrepancy unit directions: golden-angle spiral on S^2,
/// golden-ratio rotation on S^1, endpoints on S^0.
inline std::vector<Eigen::VectorXd> low_discrepancy_directions(int dim, int count) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<size_t>(count));
    const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
    if (dim == 1) {
        for (int i = 0; i < count; ++i) {
            Eigen::VectorXd v(1);
            v[0] = (i % 2 == 0) ? 1.0 : -1.0;
            out.push_back(v);
        }
    } else if (dim == 2) {
        for (int i = 0; i < count; ++i) {
            double theta = 2.0 * std::numbers::pi * std::fmod(i / golden, 1.0);
            Eigen::VectorXd v(2);
            v << std::cos(theta), std::sin(theta);
            out.push_back(v);
        }
    } else {
        // Fibonacci sphere
        for (int i = 0; i < count; ++i) {
            double z = 1.0 - 2.0 * (i + 0.5) / count;
            double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            double theta = 2.0 * std::numbers::pi * std::fmod(i / golden, 1.0);
            Eigen::VectorXd v(3);
            v << r * std::cos(theta), r * std::sin(theta), z;
            out.push_back(v);
        }
    }
    return out;
}

/// Coordinate axes plus every +-1 diagonal, normalized. Rank drops of
/// algebraic symbols tend to sit on exactly these directions.
inline std::vector<Eigen::VectorXd> axis_and_diagonal_directions(int dim) {
    std::vector<Eigen::VectorXd> out;
    for (int i = 0; i < dim; ++i) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
        v[i] = 1.0;
        out.push_back(v);
    }
    int total = 1 << dim;
    for (int mask = 0; mask < total; ++mask) {
        Eigen::VectorXd v(dim);
        for (int i = 0; i < dim; ++i) v[i] = (mask >> i) & 1 ? -1.0 : 1.0;
        out.push_back(v / v.norm());
    }
    return out;
}

inline std::vector<Eigen::VectorXd> random_directions(int dim, int count, Rng& rng) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(rng.unit_vector(dim));
    return out;
}

}  // namespace constrank
