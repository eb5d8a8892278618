#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "constrank/aharmonic.hpp"
#include "constrank/solver.hpp"

namespace constrank {

// ---------------------------------------------------------------------------
// Polynomial fields: a(x) = sum_alpha a_alpha (x - x0)^alpha / alpha!
// Evaluated through the wrapped displacement, so values are correct on any
// ball that embeds in the torus.
// ---------------------------------------------------------------------------

struct PolyField {
    int dim_n = 0;
    int fiber = 0;
    Eigen::VectorXd center;
    std::map<MultiIndex, Eigen::VectorXd> coeffs;

    static PolyField zero(int dim_n, int fiber, const Eigen::VectorXd& center) {
        return {dim_n, fiber, center, {}};
    }

    Eigen::VectorXd wrapped(const Eigen::VectorXd& x, double period) const {
        Eigen::VectorXd d = x - center;
        for (int i = 0; i < dim_n; ++i) d[i] -= period * std::round(d[i] / period);
        return d;
    }

    Eigen::VectorXd deriv_eval(const MultiIndex& beta, const Eigen::VectorXd& x,
                               double period) const {
        Eigen::VectorXd d = wrapped(x, period);
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(fiber);
        for (const auto& [alpha, a] : coeffs) {
            if (!alpha.dominates(beta)) continue;
            MultiIndex rem = alpha - beta;
            double mono = 1.0 / static_cast<double>(multiindex_factorial(rem));
            for (int i = 0; i < dim_n; ++i)
                for (int e = 0; e < rem[i]; ++e) mono *= d[i];
            acc += mono * a;
        }
        return acc;
    }

    Eigen::VectorXd eval(const Eigen::VectorXd& x, double period) const {
        return deriv_eval(MultiIndex{}, x, period);
    }

    /// Pointwise B a(x) for an operator acting on this fiber.
    Eigen::VectorXd apply_operator_at(const DiffOperator& op, const Eigen::VectorXd& x,
                                      double period) const {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(op.dim_to);
        for (const auto& [beta, mat] : op.coeffs) {
            Eigen::VectorXd db = deriv_eval(beta, x, period);
            for (int i = 0; i < op.dim_to; ++i)
                for (int j = 0; j < op.dim_from; ++j)
                    out[i] += to_double(mat[size_t(i)][size_t(j)]) * db[j];
        }
        return out;
    }
};

/// Homogeneous degree-k polynomial a with B a identically equal to the given
/// average: minimal-norm solution of sum_beta B_beta phi_beta = w_average.
inline PolyField fit_polynomial(const Eigen::VectorXd& w_average, const DiffOperator& opB,
                                const Eigen::VectorXd& center, double residual_tol = 1e-8) {
    auto alphas = multiindices_of_order(opB.dim_n, opB.order);
    const int cols = static_cast<int>(alphas.size()) * opB.dim_from;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(opB.dim_to, cols);
    for (size_t a = 0; a < alphas.size(); ++a) {
        auto it = opB.coeffs.find(alphas[a]);
        if (it == opB.coeffs.end()) continue;
        for (int i = 0; i < opB.dim_to; ++i)
            for (int j = 0; j < opB.dim_from; ++j)
                t(i, static_cast<int>(a) * opB.dim_from + j) =
                    to_double(it->second[size_t(i)][size_t(j)]);
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(t);
    Eigen::VectorXd phi = cod.solve(w_average);
    double resid = (t * phi - w_average).norm();
    if (resid > residual_tol * std::max(1.0, w_average.norm()))
        throw NotInImage("average lies outside the symbol image, residual " +
                         std::to_string(resid));
    PolyField a = PolyField::zero(opB.dim_n, opB.dim_from, center);
    for (size_t k = 0; k < alphas.size(); ++k) {
        Eigen::VectorXd c = phi.segment(static_cast<int>(k) * opB.dim_from, opB.dim_from);
        if (c.norm() > 0) a.coeffs[alphas[k]] = c;
    }
    return a;
}

// ---------------------------------------------------------------------------
// Excess energy
// ---------------------------------------------------------------------------

/// R^{2 alpha} + mean over B_R(x0) of E(w - (w)_{x0,R}); grid fields carry
/// no singular part, so that summand of the excess is identically zero.
inline double excess(const PeriodicField& w, const Eigen::VectorXd& x0, double radius,
                     double alpha) {
    if (!(alpha > 0 && alpha < 1)) throw ConfigError("excess exponent must be in (0,1)");
    BallMask mask = BallMask::make(w.grid(), x0, radius, 8.0);
    Eigen::VectorXd avg = ball_average(w, mask);
    double vol = 0;
    for (double wt : mask.weights) vol += wt;
    vol *= w.grid().cell_volume();
    double osc = ball_integral(w, mask, [&](const Eigen::VectorXd& v) {
        return eval_E((v - avg).eval());
    }) / vol;
    return std::pow(radius, 2 * alpha) + osc;
}

struct ExcessScanEntry {
    double radius = 0;
    double value = 0;
};

struct ExcessReport {
    Eigen::VectorXd center;
    double alpha = 0;
    double tau = 0;
    std::vector<ExcessScanEntry> scan;
    double fitted_exponent = 0;
    std::vector<bool> step_decay_ok;  // E(tau R) <= 2 tau^{2 alpha} E(R) per step
    bool smallness_ok = false;        // E(R0) below the configured threshold
    bool regular_regime = false;
};

/// Excess at radii R0 tau^j, the fitted log-log decay exponent, and the
/// per-step decay flags. A center is in the regular regime when the excess
/// starts small and every step decays.
inline ExcessReport excess_scan(const PeriodicField& w, const Eigen::VectorXd& center,
                                double r0, double tau, int depth, double alpha,
                                double smallness = 0.25) {
    if (!(tau > 0 && tau < 1.0 / 16.0))
        throw ConfigError("excess scan requires tau in (0, 1/16)");
    if (depth < 1) throw ConfigError("excess scan depth must be >= 1");
    if (r0 * std::pow(tau, depth) < 8 * w.grid().cell())
        throw RadiusTooSmall("deepest scan radius falls below 8 grid cells");
    ExcessReport rep;
    rep.center = center;
    rep.alpha = alpha;
    rep.tau = tau;
    double r = r0;
    for (int j = 0; j <= depth; ++j, r *= tau)
        rep.scan.push_back({r, excess(w, center, r, alpha)});
    // least squares slope of log excess against log radius
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& e : rep.scan) {
        double x = std::log(e.radius), y = std::log(e.value);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double n = static_cast<double>(rep.scan.size());
    rep.fitted_exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    bool all_steps = true;
    for (size_t j = 0; j + 1 < rep.scan.size(); ++j) {
        bool ok = rep.scan[j + 1].value <=
                  2.0 * std::pow(tau, 2 * alpha) * rep.scan[j].value + 1e-14;
        rep.step_decay_ok.push_back(ok);
        all_steps = all_steps && ok;
    }
    rep.smallness_ok = rep.scan.front().value < smallness;
    rep.regular_regime = rep.smallness_ok && all_steps;
    return rep;
}

/// Piecewise-constant two-phase field split along one axis; the jump set is
/// the standard counterexample input for excess scans.
inline PeriodicField two_phase_field(const GridSpec& grid, const Eigen::VectorXd& a,
                                     const Eigen::VectorXd& b, int axis = 0) {
    return PeriodicField::from_function(
        grid, static_cast<int>(a.size()), [&](const Eigen::VectorXd& x) {
            return x[axis] < 0.5 * grid.period ? a : b;
        });
}

// ---------------------------------------------------------------------------
// Inequality verifiers
// ---------------------------------------------------------------------------

struct InequalityReport {
    std::string name;
    double lhs = 0;
    double rhs = 0;
    double ratio = 0;
    double theta = 0;
    double q = 0;
    double p = 0;
    double radius = 0;
    std::string pi_info;
    double cap = 0;
    bool pass = false;

    void finish(double cap_value) {
        cap = cap_value;
        ratio = rhs > 0 ? lhs / rhs : (lhs > 0 ? std::numeric_limits<double>::infinity() : 0.0);
        pass = ratio <= cap;
    }
};

/// Exact polynomial solutions of B pi = 0 (and C^* pi = 0 when C is present)
/// up to total degree max_degree, as fields centered at x0. Found by exact
/// rational elimination on monomial coefficients.
inline std::vector<PolyField> kernel_polynomials(const DiffOperator& opB,
                                                 const DiffOperator* opC_adj_source,
                                                 int max_degree, const Eigen::VectorXd& x0) {
    auto gammas = multiindices_up_to_order(opB.dim_n, max_degree);
    std::map<MultiIndex, int> gamma_index;
    for (size_t i = 0; i < gammas.size(); ++i) gamma_index[gammas[i]] = static_cast<int>(i);
    const int fiber = opB.dim_from;
    const int cols = static_cast<int>(gammas.size()) * fiber;

    RationalMatrix rowsmat;
    auto add_operator_rows = [&](const std::map<MultiIndex, RationalMatrix>& coeffs, int order,
                                 int dim_to, bool transpose) {
        if (max_degree < order) return;
        for (const auto& delta : multiindices_up_to_order(opB.dim_n, max_degree - order)) {
            for (int i = 0; i < dim_to; ++i) {
                std::vector<Rational> row(static_cast<size_t>(cols), Rational(0));
                bool nonzero = false;
                for (const auto& [beta, mat] : coeffs) {
                    MultiIndex g = delta + beta;
                    auto it = gamma_index.find(g);
                    if (it == gamma_index.end()) continue;
                    for (int j = 0; j < fiber; ++j) {
                        Rational c = transpose ? mat[size_t(j)][size_t(i)]
                                               : mat[size_t(i)][size_t(j)];
                        if (c == 0) continue;
                        row[size_t(it->second * fiber + j)] += c;
                        nonzero = true;
                    }
                }
                if (nonzero) rowsmat.push_back(std::move(row));
            }
        }
    };
    add_operator_rows(opB.coeffs, opB.order, opB.dim_to, false);
    if (opC_adj_source && !opC_adj_source->coeffs.empty()) {
        // C maps U -> U; the adjoint constraint uses the transposed blocks
        add_operator_rows(opC_adj_source->coeffs, opC_adj_source->order,
                          opC_adj_source->dim_from, true);
    }

    std::vector<std::vector<Rational>> null_basis =
        rowsmat.empty() ? std::vector<std::vector<Rational>>() : exact_null_space(rowsmat);
    if (rowsmat.empty()) {
        // unconstrained: every monomial coefficient is free
        null_basis.resize(static_cast<size_t>(cols));
        for (int i = 0; i < cols; ++i) {
            null_basis[size_t(i)].assign(static_cast<size_t>(cols), Rational(0));
            null_basis[size_t(i)][size_t(i)] = 1;
        }
    }

    std::vector<PolyField> fields;
    for (const auto& v : null_basis) {
        PolyField pf = PolyField::zero(opB.dim_n, fiber, x0);
        for (size_t g = 0; g < gammas.size(); ++g) {
            Eigen::VectorXd c(fiber);
            bool nz = false;
            for (int j = 0; j < fiber; ++j) {
                c[j] = to_double(v[g * size_t(fiber) + size_t(j)]);
                nz = nz || c[j] != 0.0;
            }
            if (nz) pf.coeffs[gammas[g]] = c;
        }
        if (!pf.coeffs.empty()) fields.push_back(std::move(pf));
    }
    return fields;
}

namespace detail {

/// Residual of the C^*-freeness hypothesis, measured through the row-space
/// projector (scale free): || u - P_{im B^*} u || / ||u||.
inline double cstar_residual(const OperatorCalculus& opB, const PeriodicField& u) {
    SpectralProjector star(row_space_projector(opB.op, opB.dagger), u.grid(),
                           opB.op.dim_from, SpectralProjector::ZeroMode::identity);
    PeriodicField pu = star.apply(u);
    double denom = std::max(1e-30, u.l2_norm());
    return (u - pu).l2_norm() / denom;
}

struct PiFit {
    std::vector<double> coef;
    std::vector<PolyField> basis;
    int basis_dim = 0;

    Eigen::VectorXd deriv_eval(const MultiIndex& beta, const Eigen::VectorXd& x,
                               double period) const {
        Eigen::VectorXd acc;
        for (size_t s = 0; s < basis.size(); ++s) {
            Eigen::VectorXd v = basis[s].deriv_eval(beta, x, period);
            if (acc.size() == 0) acc = Eigen::VectorXd::Zero(v.size());
            acc += coef[s] * v;
        }
        return acc;
    }
};

/// Least squares projection of u onto the kernel polynomial space in the
/// metric sum_{j<=j_max} int_{mask} |D^j (u - pi)|^2.
inline PiFit fit_pi(const PeriodicField& u, const std::vector<PolyField>& basis,
                    const BallMask& mask, int j_max) {
    const GridSpec& grid = u.grid();
    const int nb = static_cast<int>(basis.size());
    PiFit fit;
    fit.basis = basis;
    fit.basis_dim = nb;
    if (nb == 0) return fit;
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(nb, nb);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nb);
    for (int j = 0; j <= j_max; ++j) {
        for (const auto& beta : multiindices_of_order(grid.dim_n, j)) {
            PeriodicField du = j == 0 ? u : derivative(u, beta);
            double mult = static_cast<double>(factorial(j)) /
                          static_cast<double>(multiindex_factorial(beta));
            for (int64_t s = 0; s < grid.total_points(); ++s) {
                double w = mask.weights[size_t(s)];
                if (w == 0) continue;
                Eigen::VectorXd x = grid.site_point(s);
                std::vector<Eigen::VectorXd> bvals(static_cast<size_t>(nb));
                for (int b = 0; b < nb; ++b)
                    bvals[size_t(b)] = basis[size_t(b)].deriv_eval(beta, x, grid.period);
                Eigen::VectorXd uval = du.at_site(s);
                for (int a = 0; a < nb; ++a) {
                    rhs[a] += mult * w * bvals[size_t(a)].dot(uval);
                    for (int b = a; b < nb; ++b)
                        gram(a, b) += mult * w * bvals[size_t(a)].dot(bvals[size_t(b)]);
                }
            }
        }
    }
    gram = gram.selfadjointView<Eigen::Upper>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    double emax = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (!(emax > 0) || eig.eigenvalues().minCoeff() < 1e-12 * emax)
        throw KernelBasisDeficient("kernel-projection Gram matrix is numerically singular");
    Eigen::VectorXd c = eig.eigenvectors() *
                        (eig.eigenvectors().transpose() * rhs).cwiseQuotient(
                            eig.eigenvalues().matrix());
    fit.coef.assign(c.data(), c.data() + nb);
    return fit;
}

}  // namespace detail

struct PoincareOptions {
    int kernel_degree = -1;  // default: order + 2
    double cap = 1e6;
    double cstar_tol = 1e-6;
};

/// Measured two-sided data for the modular kernel-subtracted inequality
/// sum_{j<k} ( int_{B_{theta R}} E(D^j(u-pi)/R^{k-j})^q )^{1/q}
///   against  int_{B_R} E(B u),
/// with pi the L^2-optimal polynomial kernel element on the inner ball.
inline InequalityReport verify_poincare_modular(const PeriodicField& u,
                                                const OperatorCalculus& opB,
                                                const DiffOperator* opC,
                                                const Eigen::VectorXd& x0, double radius,
                                                double theta, double q,
                                                const PoincareOptions& opts = {}) {
    const GridSpec& grid = u.grid();
    const int k = opB.op.order;
    if (!(theta > 0 && theta < 1)) throw ConfigError("theta must be in (0,1)");
    double n = grid.dim_n;
    if (!(q >= 1 && q < n / (n - 1 + 1e-12)))
        throw ConfigError("q must lie in [1, n/(n-1))");
    if (detail::cstar_residual(opB, u) > opts.cstar_tol)
        throw HypothesisViolated("C^* u residual above tolerance");

    int degree = opts.kernel_degree > 0 ? opts.kernel_degree : k + 2;
    std::vector<PolyField> basis = kernel_polynomials(opB.op, opC, degree, x0);

    BallMask outer = BallMask::make(grid, x0, radius);
    BallMask inner = BallMask::make(grid, x0, theta * radius);
    detail::PiFit pi = detail::fit_pi(u, basis, inner, k - 1);

    InequalityReport rep;
    rep.name = "poincare_modular";
    rep.theta = theta;
    rep.q = q;
    rep.radius = radius;
    rep.pi_info = "polynomial kernel, degree <= " + std::to_string(degree) + ", dim " +
                  std::to_string(pi.basis_dim);

    for (int j = 0; j < k; ++j) {
        double denom = std::pow(radius, k - j);
        double acc = 0;
        // accumulate |D^j(u-pi)|^2 pointwise, then integrate E(.)^q
        std::vector<double> sq(static_cast<size_t>(grid.total_points()), 0.0);
        for (const auto& beta : multiindices_of_order(grid.dim_n, j)) {
            PeriodicField du = j == 0 ? u : derivative(u, beta);
            double mult = static_cast<double>(factorial(j)) /
                          static_cast<double>(multiindex_factorial(beta));
            for (int64_t s = 0; s < grid.total_points(); ++s) {
                if (inner.weights[size_t(s)] == 0) continue;
                Eigen::VectorXd diff =
                    du.at_site(s) -
                    (pi.basis_dim
                         ? pi.deriv_eval(beta, grid.site_point(s), grid.period).eval()
                         : Eigen::VectorXd::Zero(u.fiber_dim()).eval());
                sq[size_t(s)] += mult * diff.squaredNorm();
            }
        }
        for (int64_t s = 0; s < grid.total_points(); ++s) {
            double w = inner.weights[size_t(s)];
            if (w == 0) continue;
            acc += w * std::pow(eval_E(std::sqrt(sq[size_t(s)]) / denom), q);
        }
        rep.lhs += std::pow(acc * grid.cell_volume(), 1.0 / q);
    }

    PeriodicField bu = apply_operator(opB.op, u);
    rep.rhs = ball_integral(bu, outer, [](const Eigen::VectorXd& v) { return eval_E(v); });
    rep.finish(opts.cap);
    return rep;
}

/// Same kernel subtraction in the V_p modular scale, with the top-order
/// j = k term included on the left.
inline InequalityReport verify_korn_vp(const PeriodicField& u, const OperatorCalculus& opB,
                                       const DiffOperator* opC, const Eigen::VectorXd& x0,
                                       double radius, double theta, double p,
                                       const PoincareOptions& opts = {}) {
    const GridSpec& grid = u.grid();
    const int k = opB.op.order;
    if (!(theta > 0 && theta < 1)) throw ConfigError("theta must be in (0,1)");
    if (!(p > 1)) throw ConfigError("p must lie in (1, infinity)");
    if (detail::cstar_residual(opB, u) > opts.cstar_tol)
        throw HypothesisViolated("C^* u residual above tolerance");

    int degree = opts.kernel_degree > 0 ? opts.kernel_degree : k + 2;
    std::vector<PolyField> basis = kernel_polynomials(opB.op, opC, degree, x0);
    BallMask outer = BallMask::make(grid, x0, radius);
    BallMask inner = BallMask::make(grid, x0, theta * radius);
    detail::PiFit pi = detail::fit_pi(u, basis, inner, k - 1);

    InequalityReport rep;
    rep.name = "korn_vp";
    rep.theta = theta;
    rep.p = p;
    rep.radius = radius;
    rep.pi_info = "polynomial kernel, degree <= " + std::to_string(degree) + ", dim " +
                  std::to_string(pi.basis_dim);

    auto vp_sq = [p](double t2) { return std::pow(1.0 + t2, (p - 2.0) / 2.0) * t2; };

    for (int j = 0; j <= k; ++j) {
        std::vector<double> sq(static_cast<size_t>(grid.total_points()), 0.0);
        for (const auto& beta : multiindices_of_order(grid.dim_n, j)) {
            PeriodicField du = j == 0 ? u : derivative(u, beta);
            double mult = static_cast<double>(factorial(j)) /
                          static_cast<double>(multiindex_factorial(beta));
            for (int64_t s = 0; s < grid.total_points(); ++s) {
                if (inner.weights[size_t(s)] == 0) continue;
                Eigen::VectorXd diff =
                    du.at_site(s) -
                    (pi.basis_dim
                         ? pi.deriv_eval(beta, grid.site_point(s), grid.period).eval()
                         : Eigen::VectorXd::Zero(u.fiber_dim()).eval());
                sq[size_t(s)] += mult * diff.squaredNorm();
            }
        }
        for (int64_t s = 0; s < grid.total_points(); ++s) {
            double w = inner.weights[size_t(s)];
            if (w == 0) continue;
            rep.lhs += w * vp_sq(sq[size_t(s)]) * grid.cell_volume();
        }
    }

    PeriodicField bu = apply_operator(opB.op, u);
    rep.rhs = ball_integral(bu, outer, [&](const Eigen::VectorXd& v) {
        return vp_sq(v.squaredNorm());
    });
    rep.finish(opts.cap);
    return rep;
}

struct CaccioppoliOptions {
    double cap = 1e6;
    double extremality_tol = 1e-4;
};

/// Reverse-Poincare data for an extremal potential: the top-order E-energy
/// on the half ball against the lower-order terms on the full ball, with
/// the degree-k polynomial a matching the average of the gradient field.
/// `tail` carries the non-periodic polynomial part of the potential (the
/// affine datum); pass the zero PolyField when there is none.
inline InequalityReport verify_caccioppoli(const PeriodicField& u, const PolyField& tail,
                                           const Integrand& f, const OperatorCalculus& opB,
                                           const Eigen::VectorXd& x0, double radius,
                                           const CaccioppoliOptions& opts = {}) {
    const GridSpec& grid = u.grid();
    const int k = opB.op.order;

    // full gradient field B(u + tail)
    PeriodicField bu = apply_operator(opB.op, u);
    std::vector<double> vvals(bu.values().size());
    for (int64_t s = 0; s < grid.total_points(); ++s) {
        Eigen::VectorXd tv = tail.coeffs.empty()
                                 ? Eigen::VectorXd::Zero(opB.op.dim_to).eval()
                                 : tail.apply_operator_at(opB.op, grid.site_point(s),
                                                          grid.period);
        for (int c = 0; c < opB.op.dim_to; ++c)
            vvals[bu.index(s, c)] = bu.value(s, c) + tv[c];
    }
    PeriodicField v(grid, opB.op.dim_to, std::move(vvals));

    double resid = el_residual_potential(f, v, opB);
    if (resid > opts.extremality_tol)
        throw NotExtremal("Euler-Lagrange residual " + std::to_string(resid));

    BallMask outer = BallMask::make(grid, x0, radius);
    BallMask half = BallMask::make(grid, x0, radius / 2);
    Eigen::VectorXd avg = ball_average(v, outer);
    PolyField a = fit_polynomial(avg, opB.op, x0);

    InequalityReport rep;
    rep.name = "caccioppoli";
    rep.radius = radius;
    rep.pi_info = "degree-k polynomial with B a = ball average";

    rep.lhs = ball_integral(v, half, [&](const Eigen::VectorXd& z) {
        return eval_E((z - avg).eval());
    });

    // lower-order terms: D^i(u + tail - a) for i < k
    for (int i = 0; i < k; ++i) {
        double denom = std::pow(radius, k - i);
        std::vector<double> sq(static_cast<size_t>(grid.total_points()), 0.0);
        for (const auto& beta : multiindices_of_order(grid.dim_n, i)) {
            PeriodicField du = i == 0 ? u : derivative(u, beta);
            double mult = static_cast<double>(factorial(i)) /
                          static_cast<double>(multiindex_factorial(beta));
            for (int64_t s = 0; s < grid.total_points(); ++s) {
                if (outer.weights[size_t(s)] == 0) continue;
                Eigen::VectorXd x = grid.site_point(s);
                Eigen::VectorXd val = du.at_site(s) - a.deriv_eval(beta, x, grid.period);
                if (!tail.coeffs.empty()) val += tail.deriv_eval(beta, x, grid.period);
                sq[size_t(s)] += mult * val.squaredNorm();
            }
        }
        double e_term = 0, l1_term = 0;
        for (int64_t s = 0; s < grid.total_points(); ++s) {
            double w = outer.weights[size_t(s)];
            if (w == 0) continue;
            double mag = std::sqrt(sq[size_t(s)]);
            e_term += w * eval_E(mag / denom);
            l1_term += w * mag / denom;
        }
        rep.rhs += (e_term + radius * l1_term) * grid.cell_volume();
    }
    rep.rhs += radius * ball_integral(v, outer, [&](const Eigen::VectorXd& z) {
        return (z - avg).norm();
    });
    rep.finish(opts.cap);
    return rep;
}

}  // namespace constrank
