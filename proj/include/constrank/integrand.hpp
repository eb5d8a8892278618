#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "constrank/ball.hpp"
#include "constrank/spectral_ops.hpp"

namespace constrank {

// ---------------------------------------------------------------------------
// Reference integrand E and the V_p modulus
// ---------------------------------------------------------------------------

inline double eval_E(const Eigen::VectorXd& z) { return std::sqrt(1.0 + z.squaredNorm()) - 1.0; }
inline double eval_E(double t) { return std::sqrt(1.0 + t * t) - 1.0; }

inline Eigen::VectorXd grad_E(const Eigen::VectorXd& z) {
    return z / std::sqrt(1.0 + z.squaredNorm());
}

inline Eigen::MatrixXd hess_E(const Eigen::VectorXd& z) {
    double s = std::sqrt(1.0 + z.squaredNorm());
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(z.size(), z.size()) / s;
    h -= z * z.transpose() / (s * s * s);
    return h;
}

inline Eigen::VectorXd eval_Vp(const Eigen::VectorXd& z, double p) {
    if (!(p > 1.0)) throw ConfigError("V_p requires p in (1, infinity)");
    return std::pow(1.0 + z.squaredNorm(), (p - 2.0) / 4.0) * z;
}

// ---------------------------------------------------------------------------
// Integrand: f(x, z) with two derivative levels in z and the structural
// constants of a linear-growth strongly quasiconvex integrand.
// ---------------------------------------------------------------------------

struct Integrand {
    using Eval = std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>;
    using Grad = std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;
    using Hess = std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

    Eval eval;
    Grad grad_z;
    Hess hess_z;
    int fiber_dim = 0;
    double growth_L = 0;         // |f(x,z)| <= L (1 + |z|)
    double quasiconvexity_ell = 0;
    double lipschitz_x = 0;      // |d_z f(x,z) - d_z f(y,z)| <= L |x-y|
    bool autonomous = true;
    std::string family;
    std::optional<std::function<Eigen::VectorXd(const Eigen::VectorXd&)>> offset;
};

struct DerivativeCheck {
    double grad_error = 0;  // worst relative mismatch against central differences
    double hess_error = 0;
};

inline DerivativeCheck check_derivative_consistency(const Integrand& f, int n_probes, Rng& rng,
                                                    int space_dim = 2, double step = 1e-5) {
    DerivativeCheck out;
    for (int t = 0; t < n_probes; ++t) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(space_dim);
        if (!f.autonomous)
            for (int i = 0; i < space_dim; ++i) x[i] = rng.uniform();
        Eigen::VectorXd z = rng.gaussian_vector(f.fiber_dim) * rng.uniform(0.1, 3.0);
        Eigen::VectorXd g = f.grad_z(x, z);
        Eigen::MatrixXd h = f.hess_z(x, z);
        double gscale = std::max(1.0, g.norm());
        double hscale = std::max(1.0, h.norm());
        for (int i = 0; i < f.fiber_dim; ++i) {
            Eigen::VectorXd zp = z, zm = z;
            zp[i] += step;
            zm[i] -= step;
            double fd = (f.eval(x, zp) - f.eval(x, zm)) / (2 * step);
            out.grad_error = std::max(out.grad_error, std::abs(fd - g[i]) / gscale);
            Eigen::VectorXd hfd = (f.grad_z(x, zp) - f.grad_z(x, zm)) / (2 * step);
            out.hess_error = std::max(out.hess_error, (hfd - h.col(i)).norm() / hscale);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Built-in families
// ---------------------------------------------------------------------------

/// f = ell * E, the convex baseline.
inline Integrand make_ell_e(double ell, int fiber_dim) {
    Integrand f;
    f.fiber_dim = fiber_dim;
    f.growth_L = ell;
    f.quasiconvexity_ell = ell;
    f.family = "ellE";
    f.eval = [ell](const Eigen::VectorXd&, const Eigen::VectorXd& z) { return ell * eval_E(z); };
    f.grad_z = [ell](const Eigen::VectorXd&, const Eigen::VectorXd& z) {
        return (ell * grad_E(z)).eval();
    };
    f.hess_z = [ell](const Eigen::VectorXd&, const Eigen::VectorXd& z) {
        return (ell * hess_E(z)).eval();
    };
    return f;
}

/// f = ell E + mu q(z) exp(-|z|^2) with q(z) = z^T Q z; a compactly
/// concentrated quadratic bump, non-convex for visible mu yet strongly
/// quasiconvex for small mu.
inline Integrand make_perturbed(double ell, double mu, int fiber_dim,
                                std::optional<Eigen::MatrixXd> q_form = std::nullopt) {
    Eigen::MatrixXd Q =
        q_form ? *q_form : Eigen::MatrixXd::Identity(fiber_dim, fiber_dim).eval();
    Integrand f;
    f.fiber_dim = fiber_dim;
    double q_max = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Q).eigenvalues().maxCoeff();
    f.growth_L = ell + mu * q_max * std::exp(-1.0);
    f.quasiconvexity_ell = ell / 2;  // conservative declared modulus
    f.family = "perturbed";
    auto bump = [Q](const Eigen::VectorXd& z) { return z.dot(Q * z) * std::exp(-z.squaredNorm()); };
    f.eval = [ell, mu, bump](const Eigen::VectorXd&, const Eigen::VectorXd& z) {
        return ell * eval_E(z) + mu * bump(z);
    };
    f.grad_z = [ell, mu, Q](const Eigen::VectorXd&, const Eigen::VectorXd& z) {
        double w = std::exp(-z.squaredNorm());
        double q = z.dot(Q * z);
        return (ell * grad_E(z) + mu * 2.0 * w * (Q * z - q * z)).eval();
    };
    f.hess_z = [ell, mu, Q, fiber_dim](const Eigen::VectorXd&, const Eigen::VectorXd& z) {
        double w = std::exp(-z.squaredNorm());
        double q = z.dot(Q * z);
        Eigen::VectorXd Qz = Q * z;
        Eigen::MatrixXd hb = Q - q * Eigen::MatrixXd::Identity(fiber_dim, fiber_dim) +
                             2.0 * q * z * z.transpose() - 2.0 * Qz * z.transpose() -
                             2.0 * z * Qz.transpose();
        return (ell * hess_E(z) + mu * 2.0 * w * hb).eval();
    };
    return f;
}

/// f(x, z) = a(x) E(z) with a(x) = ell (1 + amp sin(2 pi x_1)), amp in [0, 1).
inline Integrand make_xdep(double ell, double amp, int fiber_dim) {
    if (!(amp >= 0 && amp < 1)) throw ConfigError("xdep amplitude must be in [0,1)");
    Integrand f;
    f.fiber_dim = fiber_dim;
    f.growth_L = ell * (1 + amp);
    f.quasiconvexity_ell = ell * (1 - amp);
    f.lipschitz_x = 2 * std::numbers::pi * ell * amp;
    f.autonomous = false;
    f.family = "xdep";
    auto a = [ell, amp](const Eigen::VectorXd& x) {
        return ell * (1 + amp * std::sin(2 * std::numbers::pi * x[0]));
    };
    f.eval = [a](const Eigen::VectorXd& x, const Eigen::VectorXd& z) { return a(x) * eval_E(z); };
    f.grad_z = [a](const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
        return (a(x) * grad_E(z)).eval();
    };
    f.hess_z = [a](const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
        return (a(x) * hess_E(z)).eval();
    };
    return f;
}

/// Reduced form g(x, z) = base(x, S(x) + z) for a smooth offset S.
inline Integrand make_offset(const Integrand& base,
                             std::function<Eigen::VectorXd(const Eigen::VectorXd&)> s_field,
                             double s_sup) {
    Integrand f;
    f.fiber_dim = base.fiber_dim;
    f.growth_L = base.growth_L * (1 + s_sup);
    f.quasiconvexity_ell = base.quasiconvexity_ell;
    f.lipschitz_x = base.lipschitz_x;
    f.autonomous = false;
    f.family = "offset[" + base.family + "]";
    f.offset = s_field;
    auto be = base.eval;
    auto bg = base.grad_z;
    auto bh = base.hess_z;
    f.eval = [be, s_field](const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
        return be(x, s_field(x) + z);
    };
    f.grad_z = [bg, s_field](const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
        return bg(x, s_field(x) + z);
    };
    f.hess_z = [bh, s_field](const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
        return bh(x, s_field(x) + z);
    };
    return f;
}

// ---------------------------------------------------------------------------
// Shifted integrand f_w: second-order Taylor remainder at w
// ---------------------------------------------------------------------------

struct ShiftedIntegrand {
    Integrand base;
    Eigen::VectorXd x0;
    Eigen::VectorXd w;
    double measured_c1 = 0;  // sup of |f_w| / E over a log ladder in |z|

    double eval(const Eigen::VectorXd& z) const {
        return base.eval(x0, w + z) - base.eval(x0, w) - base.grad_z(x0, w).dot(z);
    }
    Eigen::VectorXd grad(const Eigen::VectorXd& z) const {
        return base.grad_z(x0, w + z) - base.grad_z(x0, w);
    }
    Eigen::MatrixXd hess(const Eigen::VectorXd& z) const { return base.hess_z(x0, w + z); }
};

inline ShiftedIntegrand make_shifted(const Integrand& f, const Eigen::VectorXd& x0,
                                     const Eigen::VectorXd& w, double max_shift = 1e4) {
    if (w.norm() > max_shift) throw ConfigError("shift exceeds the configured bound");
    ShiftedIntegrand s{f, x0, w, 0.0};
    // measure the upper bound |f_w(z)| <= c1 E(z) over directions x log scales
    Rng rng(0x51f7);
    for (int d = 0; d < 16; ++d) {
        Eigen::VectorXd dir = rng.unit_vector(f.fiber_dim);
        for (double t = 1e-3; t <= 1e3; t *= 2.0) {
            Eigen::VectorXd z = t * dir;
            s.measured_c1 = std::max(s.measured_c1, std::abs(s.eval(z)) / eval_E(z));
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Probes
// ---------------------------------------------------------------------------

struct MeanBound {
    double lhs = 0;  // mean of |f| over the mask
    double rhs = 0;  // sqrt(e^2 + 2e) with e the mean of E(f)
    double e = 0;
};

inline MeanBound modular_mean_bound(const PeriodicField& f, const BallMask& mask) {
    double vol = 0;
    for (double w : mask.weights) vol += w;
    vol *= f.grid().cell_volume();
    MeanBound mb;
    mb.lhs = ball_integral(f, mask, [](const Eigen::VectorXd& v) { return v.norm(); }) / vol;
    mb.e = ball_integral(f, mask, [](const Eigen::VectorXd& v) { return eval_E(v); }) / vol;
    mb.rhs = std::sqrt(mb.e * mb.e + 2 * mb.e);
    return mb;
}

/// Worst Rayleigh quotient of the z-Hessian over the sampled wave cone;
/// +infinity for an elliptic constraint (empty cone).
inline double check_wave_cone_ellipticity(const Integrand& f, const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& z,
                                          const WaveConeReport& cone) {
    Eigen::MatrixXd h = f.hess_z(x, z);
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& s : cone.samples)
        for (int c = 0; c < s.kernel_basis.cols(); ++c) {
            Eigen::VectorXd v = s.kernel_basis.col(c);
            worst = std::min(worst, v.dot(h * v));
        }
    return worst;
}

/// Jensen-gap sampler for quasiconvexity with respect to B-gradients:
/// minimum over random band-limited test potentials (three amplitude scales
/// per direction) of the averaged f(x0, z + B phi) minus f(x0, z).
/// Negative margins falsify quasiconvexity; the sampler cannot certify it.
inline double quasiconvexity_probe(const Integrand& f, const DiffOperator& opB,
                                   const Eigen::VectorXd& z, int trials, const GridSpec& grid,
                                   uint64_t seed = 0x9c) {
    if (trials < 1) throw ConfigError("quasiconvexity_probe needs at least one trial");
    if (f.fiber_dim != opB.dim_to) throw ShapeMismatch("integrand fiber vs operator target");
    Rng rng(seed);
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(grid.dim_n);
    const double fz = f.eval(x0, z);
    const int64_t total = grid.total_points();
    double margin = std::numeric_limits<double>::infinity();
    const double scales[3] = {0.25, 1.0, 4.0};
    int dirs = (trials + 2) / 3;
    for (int d = 0; d < dirs; ++d) {
        PeriodicField phi =
            random_band_limited(grid, opB.dim_from, grid.points_per_axis / 4, 1.0, rng);
        PeriodicField bphi = apply_operator(opB, phi);
        for (double a : scales) {
            double acc = 0;
            for (int64_t s = 0; s < total; ++s) acc += f.eval(x0, z + a * bphi.at_site(s));
            margin = std::min(margin, acc / static_cast<double>(total) - fz);
        }
    }
    return margin;
}

struct RecessionResult {
    double value = 0;     // f(x, t z) / t at the largest ladder point
    double tail_gap = 0;  // relative difference over the last ladder step
    double max_gap = 0;   // worst successive relative difference
    bool non_cauchy = false;
};

/// Estimate the recession function along the ladder; the limsup need not
/// be a limit, so a loose tail is flagged rather than fatal.
inline RecessionResult recession(const Integrand& f, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& z, const std::vector<double>& t_ladder) {
    if (t_ladder.empty() || t_ladder.back() < 1e6)
        throw ConfigError("recession ladder must increase to at least 1e6");
    RecessionResult r;
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (double t : t_ladder) {
        double v = f.eval(x, t * z) / t;
        if (!std::isnan(prev)) {
            r.tail_gap = std::abs(v - prev) / std::max(1e-30, std::abs(v));
            r.max_gap = std::max(r.max_gap, r.tail_gap);
        }
        prev = v;
    }
    r.value = prev;
    r.non_cauchy = r.tail_gap > 1e-4;
    return r;
}

inline std::vector<double> default_t_ladder() {
    return {1e2, 1e3, 1e4, 1e5, 1e6, 1e7};
}

}  // namespace constrank
