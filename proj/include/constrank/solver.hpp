#pragma once

#include <optional>
#include <vector>

#include "constrank/integrand.hpp"

namespace constrank {

inline double energy(const Integrand& f, const PeriodicField& v) {
    if (f.fiber_dim != v.fiber_dim()) throw ShapeMismatch("energy fiber mismatch");
    double acc = 0;
    for (int64_t s = 0; s < v.grid().total_points(); ++s)
        acc += f.eval(v.grid().site_point(s), v.at_site(s));
    return acc * v.grid().cell_volume();
}

inline double energy(const Integrand& f, const PeriodicField& v, const BallMask& mask) {
    if (f.fiber_dim != v.fiber_dim()) throw ShapeMismatch("energy fiber mismatch");
    double acc = 0;
    for (int64_t s = 0; s < v.grid().total_points(); ++s) {
        double w = mask.weights[size_t(s)];
        if (w == 0.0) continue;
        acc += w * f.eval(v.grid().site_point(s), v.at_site(s));
    }
    return acc * v.grid().cell_volume();
}

namespace detail {

inline PeriodicField pointwise_gradient(const Integrand& f, const PeriodicField& v) {
    PeriodicField g = PeriodicField::zero(v.grid(), v.fiber_dim());
    std::vector<double> vals(v.values().size());
    for (int64_t s = 0; s < v.grid().total_points(); ++s) {
        Eigen::VectorXd gz = f.grad_z(v.grid().site_point(s), v.at_site(s));
        for (int c = 0; c < v.fiber_dim(); ++c) vals[v.index(s, c)] = gz[c];
    }
    return PeriodicField(v.grid(), v.fiber_dim(), std::move(vals));
}

/// Constrained gradient: project the pointwise gradient onto zero-mean
/// admissible oscillations. Its norm is the Euler-Lagrange residual.
inline PeriodicField constrained_gradient(const Integrand& f, const PeriodicField& v,
                                          const SpectralProjector& proj) {
    return proj.apply(pointwise_gradient(f, v));
}

}  // namespace detail

struct MinimizeProblem {
    enum class Kind {
        afree,      // v ranges over A-free fields with fixed mean
        potential,  // v = F + B u ranges over B-gradients around the datum
    };

    Integrand integrand;
    Kind kind = Kind::afree;
    DiffOperator constraint_op;    // A for afree, B for potential
    Eigen::VectorXd mean;          // fixed mean / affine datum F
    GridSpec grid;
    std::optional<PeriodicField> init;
};

struct MinimizeOptions {
    double tol = 1e-8;
    int max_iter = 20000;
    double initial_step = 1.0;
    double armijo_slope = 1e-4;
    double shrink = 0.5;
    int max_backtracks = 60;
};

struct HistoryEntry {
    double energy;
    double residual;
    double step;
};

struct MinimizerResult {
    PeriodicField field;  // the minimizing v (equals F + B u in the potential branch)
    double energy = 0;
    double el_residual = 0;
    int iterations = 0;
    bool converged = false;
    std::vector<HistoryEntry> history;
};

/// The zero-mean direction projector of the constraint: ker A(xi) for the
/// A-free branch, im B(xi) for the potential branch; the constant mode is
/// pinned separately.
inline SpectralProjector direction_projector(const MinimizeProblem& p,
                                             const OperatorCalculus& oc) {
    if (p.kind == MinimizeProblem::Kind::afree)
        return SpectralProjector(oc.ker_proj, p.grid, oc.op.dim_from,
                                 SpectralProjector::ZeroMode::zero);
    return SpectralProjector(oc.im_proj, p.grid, oc.op.dim_to, SpectralProjector::ZeroMode::zero);
}

/// Projected gradient descent with Armijo backtracking. Every iterate is
/// feasible: admissible oscillation plus the exact prescribed mean.
inline MinimizerResult minimize(const MinimizeProblem& p, const MinimizeOptions& opts = {}) {
    const Integrand& f = p.integrand;
    int fiber = p.kind == MinimizeProblem::Kind::afree ? p.constraint_op.dim_from
                                                       : p.constraint_op.dim_to;
    if (f.fiber_dim != fiber) throw ShapeMismatch("integrand fiber vs constraint");
    if (p.mean.size() != fiber) throw ShapeMismatch("mean fiber vs constraint");
    {
        Rng probe_rng(0xdc);
        DerivativeCheck dc = check_derivative_consistency(f, 5, probe_rng, p.grid.dim_n);
        if (dc.grad_error > 1e-4 || dc.hess_error > 1e-3)
            throw ConfigError("integrand derivatives disagree with finite differences");
    }

    OperatorCalculus oc = OperatorCalculus::make(p.constraint_op);
    SpectralProjector proj = direction_projector(p, oc);

    PeriodicField v = PeriodicField::constant(p.grid, p.mean);
    if (p.init) v = (proj.apply(*p.init)).shifted_mean(p.mean);

    MinimizerResult res;
    res.field = v;
    double e = energy(f, v);
    int rising = 0;
    double last_step = 0.0;
    for (int it = 0; it <= opts.max_iter; ++it) {
        PeriodicField g = detail::constrained_gradient(f, v, proj);
        double rnorm = g.l2_norm();
        res.history.push_back({e, rnorm, last_step});
        if (rnorm < opts.tol) {
            res.converged = true;
            res.iterations = it;
            break;
        }
        if (it == opts.max_iter) {
            res.iterations = it;
            break;
        }

        double tau = opts.initial_step;
        double e_new = e;
        PeriodicField v_new = v;
        bool accepted = false;
        for (int bt = 0; bt < opts.max_backtracks; ++bt) {
            PeriodicField trial = (v - tau * g).shifted_mean(p.mean);
            double e_trial = energy(f, trial);
            if (e_trial <= e - opts.armijo_slope * tau * rnorm * rnorm) {
                v_new = trial;
                e_new = e_trial;
                accepted = true;
                break;
            }
            tau *= opts.shrink;
        }
        if (!accepted) {  // numerical floor reached; no step can improve
            res.iterations = it;
            break;
        }
        if (e_new > e)
            ++rising;
        else
            rising = 0;
        if (rising >= 10)
            throw Diverged("energy increased across 10 accepted steps");
        v = v_new;
        e = e_new;
        last_step = tau;
        res.iterations = it + 1;
    }

    res.field = v;
    res.energy = e;
    res.el_residual = detail::constrained_gradient(f, v, proj).l2_norm();
    return res;
}

/// Norm of the constrained gradient: zero exactly characterizes discrete
/// extremality of v under the A-free constraint.
inline double el_residual(const Integrand& f, const PeriodicField& v,
                          const OperatorCalculus& opA) {
    SpectralProjector proj(opA.ker_proj, v.grid(), opA.op.dim_from,
                           SpectralProjector::ZeroMode::zero);
    return detail::constrained_gradient(f, v, proj).l2_norm();
}

inline double el_residual(const Integrand& f, const PeriodicField& v, const DiffOperator& opA) {
    return el_residual(f, v, OperatorCalculus::make(opA));
}

/// Extremality residual in the potential formulation: the projected
/// gradient over im B directions.
inline double el_residual_potential(const Integrand& f, const PeriodicField& v,
                                    const OperatorCalculus& opB) {
    SpectralProjector proj(opB.im_proj, v.grid(), opB.op.dim_to,
                           SpectralProjector::ZeroMode::zero);
    return detail::constrained_gradient(f, v, proj).l2_norm();
}

}  // namespace constrank
