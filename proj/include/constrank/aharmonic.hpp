#pragma once

#include <complex>
#include <vector>

#include "constrank/integrand.hpp"
#include "constrank/solver.hpp"

namespace constrank {

/// Constant symmetric bilinear form on the fiber, elliptic on the wave cone.
struct BilinearFormA {
    Eigen::MatrixXd matrix;
    double lambda = 0;   // measured cone ellipticity floor
    double Lambda = 0;   // measured cone bound

    static BilinearFormA make(const Eigen::MatrixXd& a, const WaveConeReport& cone) {
        BilinearFormA form;
        form.matrix = 0.5 * (a + a.transpose());
        form.lambda = std::numeric_limits<double>::infinity();
        form.Lambda = 0;
        for (const auto& s : cone.samples)
            for (int c = 0; c < s.kernel_basis.cols(); ++c) {
                Eigen::VectorXd v = s.kernel_basis.col(c);
                double q = v.dot(form.matrix * v);
                form.lambda = std::min(form.lambda, q);
                form.Lambda = std::max(form.Lambda, q);
            }
        if (!(form.lambda > 0))
            throw IllConditioned("bilinear form is not elliptic on the sampled wave cone");
        return form;
    }
};

namespace detail {

/// i^k on the unit circle, exactly.
inline std::complex<double> unit_imag_power(int k) {
    switch (((k % 4) + 4) % 4) {
        case 0: return {1, 0};
        case 1: return {0, 1};
        case 2: return {-1, 0};
        default: return {0, -1};
    }
}

/// Complex block workspace for the spectral normal equations: one
/// dim_from-vector per frequency, restricted to im B^*(xi).
struct SpectralVec {
    std::vector<std::complex<double>> data;

    double dot(const SpectralVec& o) const {
        double acc = 0;
        for (size_t i = 0; i < data.size(); ++i)
            acc += (std::conj(data[i]) * o.data[i]).real();
        return acc;
    }
    double norm2() const { return dot(*this); }

    void axpy(double a, const SpectralVec& o) {
        for (size_t i = 0; i < data.size(); ++i) data[i] += a * o.data[i];
    }
    void scale_add(double b, const SpectralVec& o) {  // this = o + b*this
        for (size_t i = 0; i < data.size(); ++i) data[i] = o.data[i] + b * data[i];
    }
};

}  // namespace detail

/// Per-frequency dense blocks of the A-harmonic normal operator
/// N(xi) = B(xi)^H A B(xi) on im B^*(xi), with the frequency-wise
/// pseudoinverse of B(xi)^H B(xi) as preconditioner (exact for A = Id).
class AHarmonicOperator {
  public:
    AHarmonicOperator(const OperatorCalculus& opB, const BilinearFormA& form,
                      const GridSpec& grid)
        : grid_(grid), fiber_(opB.op.dim_from), dim_to_(opB.op.dim_to), order_(opB.op.order) {
        grid.validate();
        PolySymbol sym = symbol_of(opB.op);
        const double two_pi_k =
            std::pow(2.0 * std::numbers::pi / grid.period, opB.op.order);
        const int64_t total = grid.total_points();
        normal_.resize(static_cast<size_t>(total));
        precond_.resize(static_cast<size_t>(total));
        subspace_.resize(static_cast<size_t>(total));
        bsym_.resize(static_cast<size_t>(total));
        for (int64_t s = 0; s < total; ++s) {
            auto m = grid.site_freq(s);
            if (s == 0 || grid.freq_is_nyquist(m)) {
                normal_[size_t(s)] = Eigen::MatrixXd::Zero(fiber_, fiber_);
                precond_[size_t(s)] = Eigen::MatrixXd::Zero(fiber_, fiber_);
                subspace_[size_t(s)] = Eigen::MatrixXd::Zero(fiber_, fiber_);
                bsym_[size_t(s)] = Eigen::MatrixXd::Zero(opB.op.dim_to, fiber_);
                continue;
            }
            Eigen::MatrixXd b = two_pi_k * sym.mat.eval(detail::freq_vector(m, grid.dim_n));
            Eigen::MatrixXd n = b.transpose() * form.matrix * b;
            Eigen::MatrixXd g = b.transpose() * b;
            // pseudoinverse of the Gram restricted to im B^*
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
            Eigen::VectorXd ev = eig.eigenvalues();
            double emax = ev.cwiseAbs().maxCoeff();
            Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
            Eigen::VectorXd ind = Eigen::VectorXd::Zero(ev.size());
            for (int i = 0; i < ev.size(); ++i)
                if (emax > 0 && ev[i] > 1e-12 * emax) {
                    inv[i] = 1.0 / ev[i];
                    ind[i] = 1.0;
                }
            normal_[size_t(s)] = n;
            precond_[size_t(s)] =
                eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
            subspace_[size_t(s)] =
                eig.eigenvectors() * ind.asDiagonal() * eig.eigenvectors().transpose();
            bsym_[size_t(s)] = b;
        }
    }

    const GridSpec& grid() const { return grid_; }
    int fiber() const { return fiber_; }

    detail::SpectralVec zero_vec() const {
        return {std::vector<std::complex<double>>(
            static_cast<size_t>(grid_.total_points()) * fiber_)};
    }

    void apply_block(const std::vector<Eigen::MatrixXd>& blocks, const detail::SpectralVec& in,
                     detail::SpectralVec& out) const {
        const int64_t total = grid_.total_points();
        for (int64_t s = 0; s < total; ++s) {
            const Eigen::MatrixXd& blk = blocks[size_t(s)];
            for (int i = 0; i < fiber_; ++i) {
                std::complex<double> acc(0, 0);
                for (int j = 0; j < fiber_; ++j)
                    acc += blk(i, j) * in.data[size_t(s * fiber_ + j)];
                out.data[size_t(s * fiber_ + i)] = acc;
            }
        }
    }

    void apply_normal(const detail::SpectralVec& in, detail::SpectralVec& out) const {
        apply_block(normal_, in, out);
    }
    void apply_precond(const detail::SpectralVec& in, detail::SpectralVec& out) const {
        apply_block(precond_, in, out);
    }
    void project_subspace(detail::SpectralVec& v) const { apply_block(subspace_, v, v); }

    /// RHS of the Galerkin system for datum d = B h0:
    /// r(xi) = -B(xi)^H A dhat(xi), restricted to im B^*. The stored blocks
    /// carry only the real magnitude of the multiplier, so the conjugated
    /// phase (-i)^k is applied here.
    detail::SpectralVec rhs_from_datum(const PeriodicField& datum,
                                       const Eigen::MatrixXd& form) const {
        detail::SpectralVec r = zero_vec();
        const auto& spec = datum.spectrum();
        const int dim_to = dim_to_;
        if (datum.fiber_dim() != dim_to) throw ShapeMismatch("datum fiber mismatch");
        const std::complex<double> phase = std::conj(detail::unit_imag_power(order_));
        const int64_t total = grid_.total_points();
        for (int64_t s = 1; s < total; ++s) {
            const Eigen::MatrixXd& b = bsym_[size_t(s)];
            for (int j = 0; j < fiber_; ++j) {
                std::complex<double> acc(0, 0);
                for (int i = 0; i < dim_to; ++i) {
                    std::complex<double> ad(0, 0);
                    for (int i2 = 0; i2 < dim_to; ++i2)
                        ad += form(i, i2) * spec[size_t(s * dim_to + i2)];
                    acc += b(i, j) * ad;
                }
                r.data[size_t(s * fiber_ + j)] = -phase * acc;
            }
        }
        project_subspace(r);
        return r;
    }

  private:
    GridSpec grid_;
    int fiber_;
    int dim_to_;
    int order_;
    std::vector<Eigen::MatrixXd> normal_;
    std::vector<Eigen::MatrixXd> precond_;
    std::vector<Eigen::MatrixXd> subspace_;  // projector onto im B^*(xi)
    std::vector<Eigen::MatrixXd> bsym_;
};

struct AHarmonicSolveStats {
    int iterations = 0;
    double relative_residual = 0;
};

/// Solve for v with C^* v = 0 and  integral A[B(h0+v), B phi] = 0 for all
/// periodic test fields phi, given the datum B h0. Preconditioned CG on the
/// spectral normal operator restricted to im B^dagger.
inline PeriodicField solve_a_harmonic(const BilinearFormA& form, const OperatorCalculus& opB,
                                      const PeriodicField& datum,
                                      AHarmonicSolveStats* stats = nullptr, double tol = 1e-12,
                                      int max_iter = 500) {
    AHarmonicOperator op(opB, form, datum.grid());
    detail::SpectralVec b = op.rhs_from_datum(datum, form.matrix);
    detail::SpectralVec x = op.zero_vec();
    detail::SpectralVec r = b;
    double b_norm = std::sqrt(b.norm2());
    if (b_norm == 0) return PeriodicField::zero(datum.grid(), op.fiber());

    detail::SpectralVec z = op.zero_vec();
    op.apply_precond(r, z);
    detail::SpectralVec p = z;
    detail::SpectralVec ap = op.zero_vec();
    double rz = r.dot(z);
    int it = 0;
    for (; it < max_iter; ++it) {
        if (std::sqrt(r.norm2()) / b_norm < tol) break;
        op.apply_normal(p, ap);
        double alpha = rz / p.dot(ap);
        x.axpy(alpha, p);
        r.axpy(-alpha, ap);
        op.apply_precond(r, z);
        double rz_new = r.dot(z);
        p.scale_add(rz_new / rz, z);
        rz = rz_new;
    }
    double rel = std::sqrt(r.norm2()) / b_norm;
    if (rel >= 1e-10)
        throw IllConditioned("a-harmonic CG stalled at relative residual " +
                             std::to_string(rel));
    if (stats) {
        stats->iterations = it;
        stats->relative_residual = rel;
    }
    op.project_subspace(x);
    return PeriodicField::from_spectrum(datum.grid(), op.fiber(), x.data);
}

// ---------------------------------------------------------------------------
// A-harmonic approximation experiment
// ---------------------------------------------------------------------------

struct HarmonicApproxReport {
    double gamma = 0;
    double delta_measured = 0;     // almost-harmonicity defect over the test bank
    double modular_distance = 0;   // sum of E-moduli of D^i(w - gamma h) / r^{k-i}
    double h_energy = 0;           // mean E(B h) over the half ball
    double k_bound = 0;            // configured cap on h_energy
    bool hypotheses_hold = false;  // gamma^2 <= 1 and energy smallness
};

/// Smooth compactly supported test bump: product of sin^4 waves inside the
/// box of half-width `half` around `center`, times a fiber direction.
inline PeriodicField bump_test_field(const GridSpec& grid, const Eigen::VectorXd& center,
                                     double half, const Eigen::VectorXd& dir) {
    return PeriodicField::from_function(
        grid, static_cast<int>(dir.size()), [&](const Eigen::VectorXd& x) {
            double b = 1.0;
            for (int i = 0; i < grid.dim_n; ++i) {
                double d = x[i] - center[i];
                d -= grid.period * std::round(d / grid.period);
                if (std::abs(d) >= half) {
                    b = 0.0;
                    break;
                }
                double s = std::sin(0.5 * std::numbers::pi * (d + half) / half);
                b *= s * s * s * s;
            }
            return (b * dir).eval();
        });
}

/// Fixed bank of smooth test potentials supported in the ball of radius
/// `radius` around `center`: three scales x `dirs_per_scale` directions.
inline std::vector<PeriodicField> test_field_bank(const GridSpec& grid, int fiber,
                                                  const Eigen::VectorXd& center, double radius,
                                                  int dirs_per_scale, uint64_t seed) {
    Rng rng(seed);
    std::vector<PeriodicField> bank;
    double base_half = radius / std::sqrt(double(grid.dim_n));
    for (double scale : {1.0, 0.5, 0.25})
        for (int d = 0; d < dirs_per_scale; ++d)
            bank.push_back(bump_test_field(grid, center, scale * base_half,
                                           rng.unit_vector(fiber)));
    return bank;
}

struct HarmonicApproxConfig {
    int cutoff = 3;           // spectral band of the candidate space
    int dirs_per_scale = 10;  // test bank width
    double k_bound = 100.0;
    uint64_t seed = 0x7e57;
    double cstar_tol = 1e-8;
};

/// Measure the almost-A-harmonicity defect of w on the ball, fit a discretely
/// A-harmonic h to w/gamma on the half ball (band-limited candidates, Galerkin
/// constraints over the half-ball bank, B-energy matching in the mask, free
/// constant matched to the half-ball average), and report the modular distance
/// between w and gamma h.
inline HarmonicApproxReport harmonic_approx_experiment(
    const PeriodicField& w, const BilinearFormA& form, const OperatorCalculus& opB,
    const DiffOperator& opC, const Eigen::VectorXd& center, double radius, double gamma,
    const HarmonicApproxConfig& cfg = {}, PeriodicField* h_out = nullptr) {
    const GridSpec& grid = w.grid();
    if (w.fiber_dim() != opB.op.dim_from) throw ShapeMismatch("w fiber vs potential source");

    // hypothesis: the supplied representative must be C^*-free
    if (!opC.coeffs.empty()) {
        PeriodicField cw = apply_adjoint(opC, w);
        double scale = 1.0;
        for (const auto& [alpha, mat] : opC.coeffs)
            for (const auto& row : mat)
                for (const auto& c : row) scale = std::max(scale, std::abs(to_double(c)));
        scale *= std::pow(2 * std::numbers::pi * grid.points_per_axis / 2.0, opC.order);
        if (cw.sup_norm() > cfg.cstar_tol * scale * std::max(1.0, w.sup_norm()))
            throw HypothesisViolated("C^* w residual above tolerance");
    }

    HarmonicApproxReport rep;
    rep.gamma = gamma;
    rep.k_bound = cfg.k_bound;

    BallMask ball = BallMask::make(grid, center, radius);
    BallMask half_ball = BallMask::make(grid, center, radius / 2);
    double ball_vol = ball.volume();
    double half_vol = half_ball.volume();

    PeriodicField bw = apply_operator(opB.op, w);
    double bw_energy = ball_integral(bw, ball, [](const Eigen::VectorXd& v) {
        return eval_E(v);
    }) / ball_vol;
    rep.hypotheses_hold = gamma * gamma <= 1.0 + 1e-12 && bw_energy <= gamma * gamma + 1e-12;

    // defect over the bank on the full ball
    auto bank = test_field_bank(grid, opB.op.dim_from, center, radius, cfg.dirs_per_scale,
                                cfg.seed);
    for (const auto& phi : bank) {
        PeriodicField bphi = apply_operator(opB.op, phi);
        double pairing = 0;
        for (int64_t s = 0; s < grid.total_points(); ++s) {
            double wgt = ball.weights[size_t(s)];
            if (wgt == 0) continue;
            pairing += wgt * bw.at_site(s).dot(form.matrix * bphi.at_site(s));
        }
        pairing *= grid.cell_volume() / ball_vol;
        double sup = bphi.sup_norm();
        if (sup > 0)
            rep.delta_measured = std::max(rep.delta_measured, std::abs(pairing) / (gamma * sup));
    }

    // candidate space: band-limited spectral fields with coefficients in
    // im B^*(xi), i.e. C^*-free by construction
    std::vector<std::vector<std::complex<double>>> basis;
    {
        PolySymbol bs = symbol_of(opB.op);
        const int fib = opB.op.dim_from;
        for (int64_t s = 1; s < grid.total_points(); ++s) {
            auto m = grid.site_freq(s);
            bool in_band = true;
            for (int i = 0; i < grid.dim_n; ++i)
                if (std::abs(m[size_t(i)]) > cfg.cutoff) in_band = false;
            if (!in_band || grid.freq_is_nyquist(m)) continue;
            // use each mode once: pair (m, -m) handled by real/imag parts
            bool canonical = false;
            for (int i = 0; i < grid.dim_n; ++i) {
                if (m[size_t(i)] > 0) {
                    canonical = true;
                    break;
                }
                if (m[size_t(i)] < 0) break;
            }
            if (!canonical) continue;
            int64_t s_conj = 0;
            auto coords = grid.site_coords(s);
            for (int i = 0; i < grid.dim_n; ++i)
                s_conj = s_conj * grid.points_per_axis +
                         (grid.points_per_axis - coords[size_t(i)]) % grid.points_per_axis;
            Eigen::MatrixXd b = bs.mat.eval(detail::freq_vector(m, grid.dim_n));
            // orthonormal basis of im B^T at this frequency
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(b.transpose() * b,
                                                  Eigen::ComputeFullU | Eigen::ComputeFullV);
            const auto& sv = svd.singularValues();
            double smax = sv.size() ? sv[0] : 0;
            for (int c = 0; c < sv.size(); ++c) {
                if (!(smax > 0) || sv[c] <= 1e-10 * smax) continue;
                Eigen::VectorXd dir = svd.matrixU().col(c);
                for (int part = 0; part < 2; ++part) {
                    std::vector<std::complex<double>> vec(
                        static_cast<size_t>(grid.total_points()) * size_t(fib));
                    std::complex<double> coef =
                        part == 0 ? std::complex<double>(0.5, 0) : std::complex<double>(0, 0.5);
                    for (int c2 = 0; c2 < fib; ++c2) {
                        vec[size_t(s * fib + c2)] = coef * dir[c2];
                        vec[size_t(s_conj * fib + c2)] = std::conj(coef * dir[c2]);
                    }
                    basis.push_back(std::move(vec));
                }
            }
        }
    }
    const int nb = static_cast<int>(basis.size());
    if (nb == 0) throw KernelBasisDeficient("empty a-harmonic candidate space");

    // sampled B-images of the basis fields
    std::vector<PeriodicField> b_basis;
    b_basis.reserve(static_cast<size_t>(nb));
    for (const auto& coef : basis) {
        PeriodicField e = PeriodicField::from_spectrum(grid, opB.op.dim_from, coef);
        b_basis.push_back(apply_operator(opB.op, e));
    }

    // Galerkin constraints from the half-ball bank
    auto half_bank = test_field_bank(grid, opB.op.dim_from, center, radius / 2,
                                     cfg.dirs_per_scale, cfg.seed ^ 0x5a5a);
    Eigen::MatrixXd constraints(static_cast<int>(half_bank.size()), nb);
    for (size_t t = 0; t < half_bank.size(); ++t) {
        PeriodicField bphi = apply_operator(opB.op, half_bank[t]);
        for (int j = 0; j < nb; ++j) {
            double acc = 0;
            for (int64_t s = 0; s < grid.total_points(); ++s) {
                double wgt = half_ball.weights[size_t(s)];
                if (wgt == 0) continue;
                acc += wgt * b_basis[size_t(j)].at_site(s).dot(form.matrix * bphi.at_site(s));
            }
            constraints(static_cast<int>(t), j) = acc * grid.cell_volume();
        }
    }

    // null space of the constraints = discretely A-harmonic candidates
    Eigen::JacobiSVD<Eigen::MatrixXd> csvd(constraints, Eigen::ComputeFullV);
    const auto& csv = csvd.singularValues();
    double cmax = csv.size() ? csv[0] : 0;
    int crank = 0;
    for (int i = 0; i < csv.size(); ++i)
        if (cmax > 0 && csv[i] > 1e-10 * cmax) ++crank;
    Eigen::MatrixXd null_basis = csvd.matrixV().rightCols(nb - crank);
    if (null_basis.cols() == 0)
        throw KernelBasisDeficient("constraints annihilate the candidate space");

    // least squares fit of B h to B(w)/gamma over the half ball, in the
    // constrained subspace
    PeriodicField target = bw * (1.0 / gamma);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(nb, nb);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nb);
    for (int64_t s = 0; s < grid.total_points(); ++s) {
        double wgt = half_ball.weights[size_t(s)];
        if (wgt == 0) continue;
        for (int i = 0; i < nb; ++i) {
            Eigen::VectorXd bi = b_basis[size_t(i)].at_site(s);
            rhs[i] += wgt * bi.dot(target.at_site(s));
            for (int j = i; j < nb; ++j)
                gram(i, j) += wgt * bi.dot(b_basis[size_t(j)].at_site(s));
        }
    }
    gram = gram.selfadjointView<Eigen::Upper>();
    Eigen::MatrixXd g_red = null_basis.transpose() * gram * null_basis;
    Eigen::VectorXd r_red = null_basis.transpose() * rhs;
    Eigen::VectorXd coef = null_basis * g_red.ldlt().solve(r_red);

    std::vector<std::complex<double>> h_spec(
        static_cast<size_t>(grid.total_points()) * size_t(opB.op.dim_from));
    for (int j = 0; j < nb; ++j)
        for (size_t idx = 0; idx < h_spec.size(); ++idx)
            h_spec[idx] += coef[j] * basis[size_t(j)][idx];
    PeriodicField h = PeriodicField::from_spectrum(grid, opB.op.dim_from, h_spec);

    // constants are B-free and C^*-free: pin the free constant to the data
    {
        Eigen::VectorXd shift =
            ball_average(w, half_ball) / gamma - ball_average(h, half_ball);
        h = h + PeriodicField::constant(grid, shift);
    }

    PeriodicField bh = apply_operator(opB.op, h);
    rep.h_energy = ball_integral(bh, half_ball, [](const Eigen::VectorXd& v) {
        return eval_E(v);
    }) / half_vol;

    // modular distance sum_i mean E(D^i(w - gamma h) / r^{k-i}) over the half ball
    PeriodicField diff = w - gamma * h;
    for (int i = 0; i < opB.op.order; ++i) {
        std::vector<double> acc(static_cast<size_t>(grid.total_points()), 0.0);
        for (const auto& beta : multiindices_of_order(grid.dim_n, i)) {
            PeriodicField db = i == 0 ? diff : derivative(diff, beta);
            double mult = static_cast<double>(factorial(i)) /
                          static_cast<double>(multiindex_factorial(beta));
            for (int64_t s = 0; s < grid.total_points(); ++s)
                acc[size_t(s)] += mult * db.at_site(s).squaredNorm();
        }
        double denom = std::pow(radius, opB.op.order - i);
        double contrib = 0, wsum = 0;
        for (int64_t s = 0; s < grid.total_points(); ++s) {
            double wgt = half_ball.weights[size_t(s)];
            if (wgt == 0) continue;
            wsum += wgt;
            contrib += wgt * eval_E(std::sqrt(acc[size_t(s)]) / denom);
        }
        rep.modular_distance += contrib / wsum;
    }
    if (h_out) *h_out = h;
    return rep;
}

}  // namespace constrank
