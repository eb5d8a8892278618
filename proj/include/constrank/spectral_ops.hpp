#pragma once

#include <complex>
#include <numbers>

#include "constrank/grid.hpp"
#include "constrank/symbol_calculus.hpp"

namespace constrank {

namespace detail {

/// (2 pi i / period)^k : the constant relating xi^alpha to d^alpha on the
/// torus with integer frequencies.
inline std::complex<double> fourier_power(int k, double period) {
    std::complex<double> unit(0.0, 2.0 * std::numbers::pi / period);
    std::complex<double> p(1.0, 0.0);
    for (int i = 0; i < std::abs(k); ++i) p *= unit;
    return k >= 0 ? p : 1.0 / p;
}

inline Eigen::VectorXd freq_vector(const std::array<int, kMaxDim>& m, int dim) {
    Eigen::VectorXd xi(dim);
    for (int i = 0; i < dim; ++i) xi[i] = m[size_t(i)];
    return xi;
}

}  // namespace detail

/// Precomputed real degree-0 multiplier (one fiber x fiber matrix per
/// frequency). Holds the orthogonal projectors onto ker A(xi) or im B(xi).
class SpectralProjector {
  public:
    enum class ZeroMode { identity, zero };

    static SpectralProjector kernel_of(const DiffOperator& op, int rank, const GridSpec& grid) {
        RationalSymbol dag = moore_penrose(op, rank);
        return SpectralProjector(kernel_projector(op, dag), grid, op.dim_from,
                                 ZeroMode::identity);
    }

    static SpectralProjector image_of(const DiffOperator& op, int rank, const GridSpec& grid) {
        RationalSymbol dag = moore_penrose(op, rank);
        return SpectralProjector(image_projector(op, dag), grid, op.dim_to, ZeroMode::zero);
    }

    SpectralProjector(const RationalSymbol& sym, const GridSpec& grid, int fiber, ZeroMode zm)
        : grid_(grid), fiber_(fiber) {
        if (sym.homogeneity_degree != 0) throw ShapeMismatch("projector symbol must be degree 0");
        const int64_t total = grid.total_points();
        mats_.resize(static_cast<size_t>(total) * fiber * fiber);
        for (int64_t s = 0; s < total; ++s) {
            Eigen::MatrixXd p;
            if (s == 0)
                p = zm == ZeroMode::identity ? Eigen::MatrixXd::Identity(fiber, fiber).eval()
                                             : Eigen::MatrixXd::Zero(fiber, fiber).eval();
            else
                p = sym.eval(detail::freq_vector(grid.site_freq(s), grid.dim_n));
            for (int i = 0; i < fiber; ++i)
                for (int j = 0; j < fiber; ++j)
                    mats_[mat_index(s, i, j)] = p(i, j);
        }
    }

    PeriodicField apply(const PeriodicField& f) const {
        if (f.fiber_dim() != fiber_ || !(f.grid() == grid_))
            throw ShapeMismatch("projector/field shape");
        const auto& spec = f.spectrum();
        std::vector<std::complex<double>> out(spec.size());
        const int64_t total = grid_.total_points();
        for (int64_t s = 0; s < total; ++s)
            for (int i = 0; i < fiber_; ++i) {
                std::complex<double> acc(0, 0);
                for (int j = 0; j < fiber_; ++j)
                    acc += mats_[mat_index(s, i, j)] * spec[size_t(s * fiber_ + j)];
                out[size_t(s * fiber_ + i)] = acc;
            }
        return PeriodicField::from_spectrum(grid_, fiber_, out);
    }

    const GridSpec& grid() const { return grid_; }
    int fiber_dim() const { return fiber_; }

    Eigen::MatrixXd matrix_at(int64_t site) const {
        Eigen::MatrixXd p(fiber_, fiber_);
        for (int i = 0; i < fiber_; ++i)
            for (int j = 0; j < fiber_; ++j) p(i, j) = mats_[mat_index(site, i, j)];
        return p;
    }

  private:
    size_t mat_index(int64_t s, int i, int j) const {
        return (static_cast<size_t>(s) * fiber_ + static_cast<size_t>(i)) * fiber_ +
               static_cast<size_t>(j);
    }

    GridSpec grid_;
    int fiber_ = 0;
    std::vector<double> mats_;
};

/// Apply the operator spectrally: multiplication by (2 pi i / period)^k
/// times the symbol at the integer frequency. The constant mode and the
/// self-conjugate Nyquist planes are annihilated (the former because the
/// operator is homogeneous, the latter to keep real fields real).
inline PeriodicField apply_operator(const DiffOperator& op, const PeriodicField& f) {
    if (f.fiber_dim() != op.dim_from) throw ShapeMismatch("apply_operator fiber mismatch");
    const GridSpec& grid = f.grid();
    if (op.dim_n != grid.dim_n) throw ShapeMismatch("apply_operator dimension mismatch");
    PolySymbol sym = symbol_of(op);
    const std::complex<double> ck = detail::fourier_power(op.order, grid.period);
    const auto& spec = f.spectrum();
    const int64_t total = grid.total_points();
    std::vector<std::complex<double>> out(static_cast<size_t>(total) * op.dim_to);
    for (int64_t s = 0; s < total; ++s) {
        auto m = grid.site_freq(s);
        if (s == 0 || grid.freq_is_nyquist(m)) continue;
        Eigen::MatrixXd a = sym.mat.eval(detail::freq_vector(m, grid.dim_n));
        for (int i = 0; i < op.dim_to; ++i) {
            std::complex<double> acc(0, 0);
            for (int j = 0; j < op.dim_from; ++j)
                acc += a(i, j) * spec[size_t(s * op.dim_from + j)];
            out[size_t(s * op.dim_to + i)] = ck * acc;
        }
    }
    return PeriodicField::from_spectrum(grid, op.dim_to, out);
}

/// Formal adjoint: multiplier is the Hermitian transpose of the
/// apply_operator multiplier.
inline PeriodicField apply_adjoint(const DiffOperator& op, const PeriodicField& f) {
    if (f.fiber_dim() != op.dim_to) throw ShapeMismatch("apply_adjoint fiber mismatch");
    const GridSpec& grid = f.grid();
    PolySymbol sym = symbol_of(op);
    const std::complex<double> ck = std::conj(detail::fourier_power(op.order, grid.period));
    const auto& spec = f.spectrum();
    const int64_t total = grid.total_points();
    std::vector<std::complex<double>> out(static_cast<size_t>(total) * op.dim_from);
    for (int64_t s = 0; s < total; ++s) {
        auto m = grid.site_freq(s);
        if (s == 0 || grid.freq_is_nyquist(m)) continue;
        Eigen::MatrixXd a = sym.mat.eval(detail::freq_vector(m, grid.dim_n));
        for (int j = 0; j < op.dim_from; ++j) {
            std::complex<double> acc(0, 0);
            for (int i = 0; i < op.dim_to; ++i)
                acc += a(i, j) * spec[size_t(s * op.dim_to + i)];
            out[size_t(s * op.dim_from + j)] = ck * acc;
        }
    }
    return PeriodicField::from_spectrum(grid, op.dim_from, out);
}

/// B^dagger applied spectrally, degree -k: u with B u = f whenever f lies
/// im-B-wise; the constant and Nyquist modes map to zero.
inline PeriodicField apply_dagger(const DiffOperator& op, const RationalSymbol& dagger,
                                  const PeriodicField& f) {
    if (f.fiber_dim() != op.dim_to) throw ShapeMismatch("apply_dagger fiber mismatch");
    const GridSpec& grid = f.grid();
    const std::complex<double> ck = detail::fourier_power(-op.order, grid.period);
    const auto& spec = f.spectrum();
    const int64_t total = grid.total_points();
    std::vector<std::complex<double>> out(static_cast<size_t>(total) * op.dim_from);
    for (int64_t s = 0; s < total; ++s) {
        auto m = grid.site_freq(s);
        if (s == 0 || grid.freq_is_nyquist(m)) continue;
        Eigen::MatrixXd d = dagger.eval(detail::freq_vector(m, grid.dim_n));
        for (int j = 0; j < op.dim_from; ++j) {
            std::complex<double> acc(0, 0);
            for (int i = 0; i < op.dim_to; ++i)
                acc += d(j, i) * spec[size_t(s * op.dim_to + i)];
            out[size_t(s * op.dim_from + j)] = ck * acc;
        }
    }
    return PeriodicField::from_spectrum(grid, op.dim_from, out);
}

/// Partial derivative d^beta as a scalar multiplier on every component.
inline PeriodicField derivative(const PeriodicField& f, const MultiIndex& beta) {
    const GridSpec& grid = f.grid();
    const int fiber = f.fiber_dim();
    const std::complex<double> ck = detail::fourier_power(beta.order(), grid.period);
    const auto& spec = f.spectrum();
    const int64_t total = grid.total_points();
    std::vector<std::complex<double>> out(spec.size());
    for (int64_t s = 0; s < total; ++s) {
        auto m = grid.site_freq(s);
        if (s == 0 || grid.freq_is_nyquist(m)) continue;
        double mono = 1.0;
        for (int i = 0; i < grid.dim_n; ++i)
            for (int e = 0; e < beta[i]; ++e) mono *= m[size_t(i)];
        std::complex<double> mult = ck * mono;
        for (int c = 0; c < fiber; ++c)
            out[size_t(s * fiber + c)] = mult * spec[size_t(s * fiber + c)];
    }
    return PeriodicField::from_spectrum(grid, fiber, out);
}

/// Riesz potential I_s: multiplication by |2 pi m / period|^{-s}; the
/// constant mode maps to zero.
inline PeriodicField riesz_potential(double s_exponent, const PeriodicField& f) {
    const GridSpec& grid = f.grid();
    const int fiber = f.fiber_dim();
    const auto& spec = f.spectrum();
    const int64_t total = grid.total_points();
    std::vector<std::complex<double>> out(spec.size());
    for (int64_t s = 0; s < total; ++s) {
        if (s == 0) continue;
        auto m = grid.site_freq(s);
        double norm = 0;
        for (int i = 0; i < grid.dim_n; ++i)
            norm += double(m[size_t(i)]) * double(m[size_t(i)]);
        norm = 2.0 * std::numbers::pi * std::sqrt(norm) / grid.period;
        double mult = std::pow(norm, -s_exponent);
        for (int c = 0; c < fiber; ++c)
            out[size_t(s * fiber + c)] = mult * spec[size_t(s * fiber + c)];
    }
    return PeriodicField::from_spectrum(grid, fiber, out);
}

/// Gaussian mollifier of width eps (standard deviation eps/3), spectrally
/// applied and mass-preserving: the zero mode passes through unchanged.
inline PeriodicField mollify(const PeriodicField& f, double eps) {
    const GridSpec& grid = f.grid();
    if (eps < grid.cell()) throw RadiusTooSmall("mollifier width below one grid cell");
    const double sigma = eps / 3.0;
    const int fiber = f.fiber_dim();
    const auto& spec = f.spectrum();
    const int64_t total = grid.total_points();
    std::vector<std::complex<double>> out(spec.size());
    const double c = 2.0 * std::numbers::pi * std::numbers::pi * sigma * sigma /
                     (grid.period * grid.period);
    for (int64_t s = 0; s < total; ++s) {
        auto m = grid.site_freq(s);
        double norm2 = 0;
        for (int i = 0; i < grid.dim_n; ++i)
            norm2 += double(m[size_t(i)]) * double(m[size_t(i)]);
        double mult = std::exp(-c * norm2);
        for (int ccomp = 0; ccomp < fiber; ++ccomp)
            out[size_t(s * fiber + ccomp)] = mult * spec[size_t(s * fiber + ccomp)];
    }
    return PeriodicField::from_spectrum(grid, fiber, out);
}

/// Pointwise squared norm of the j-th derivative tensor:
/// |D^j u|^2 = sum_{|beta|=j} (j!/beta!) |d^beta u|^2.
inline std::vector<double> derivative_sqnorm(const PeriodicField& u, int order_j) {
    const GridSpec& grid = u.grid();
    std::vector<double> acc(static_cast<size_t>(grid.total_points()), 0.0);
    for (const auto& beta : multiindices_of_order(grid.dim_n, order_j)) {
        PeriodicField db = order_j == 0 ? u : derivative(u, beta);
        double mult = static_cast<double>(factorial(order_j)) /
                      static_cast<double>(multiindex_factorial(beta));
        for (int64_t s = 0; s < grid.total_points(); ++s)
            acc[size_t(s)] += mult * db.at_site(s).squaredNorm();
    }
    return acc;
}

/// Band-limited random field with grid-independent coefficients: the same
/// seed synthesizes the same trigonometric polynomial on any grid that
/// resolves max_freq. Coefficients are normalized in L^2.
inline PeriodicField seeded_trig_field(const GridSpec& grid, int fiber, int max_freq,
                                       double amplitude, uint64_t seed) {
    if (max_freq >= grid.points_per_axis / 2)
        throw ConfigError("seeded field band exceeds the grid Nyquist range");
    Rng rng(seed);
    const int64_t total = grid.total_points();
    std::vector<std::complex<double>> spec(static_cast<size_t>(total) * size_t(fiber));
    // enumerate canonical modes in a grid-independent order
    double norm2 = 0;
    std::array<int, kMaxDim> m{0, 0, 0};
    std::function<void(int)> walk = [&](int axis) {
        if (axis == grid.dim_n) {
            bool canonical = false, zero = true;
            for (int i = 0; i < grid.dim_n; ++i) {
                if (m[size_t(i)] != 0) zero = false;
                if (m[size_t(i)] > 0) {
                    canonical = true;
                    break;
                }
                if (m[size_t(i)] < 0) break;
            }
            if (zero || !canonical) return;
            int64_t site = 0, conj_site = 0;
            for (int i = 0; i < grid.dim_n; ++i) {
                int idx = (m[size_t(i)] + grid.points_per_axis) % grid.points_per_axis;
                site = site * grid.points_per_axis + idx;
                conj_site = conj_site * grid.points_per_axis +
                            (grid.points_per_axis - idx) % grid.points_per_axis;
            }
            for (int c = 0; c < fiber; ++c) {
                std::complex<double> coef(rng.gaussian(), rng.gaussian());
                spec[size_t(site * fiber + c)] = coef;
                spec[size_t(conj_site * fiber + c)] = std::conj(coef);
                norm2 += 2.0 * std::norm(coef);
            }
            return;
        }
        for (int v = -max_freq; v <= max_freq; ++v) {
            m[size_t(axis)] = v;
            walk(axis + 1);
        }
        m[size_t(axis)] = 0;
    };
    walk(0);
    double scale = norm2 > 0 ? amplitude / std::sqrt(norm2) : 0.0;
    for (auto& c : spec) c *= scale;
    return PeriodicField::from_spectrum(grid, fiber, spec);
}

/// Zero every Fourier mode with any |m_j| exceeding max_freq. Truncating a
/// real field preserves conjugate symmetry, so the result stays real.
inline PeriodicField truncate_spectrum(const PeriodicField& f, int max_freq) {
    const GridSpec& grid = f.grid();
    const int fiber = f.fiber_dim();
    const auto& spec = f.spectrum();
    std::vector<std::complex<double>> out(spec.size());
    for (int64_t s = 0; s < grid.total_points(); ++s) {
        auto m = grid.site_freq(s);
        bool keep = true;
        for (int i = 0; i < grid.dim_n; ++i)
            if (std::abs(m[size_t(i)]) > max_freq) keep = false;
        if (!keep) continue;
        for (int c = 0; c < fiber; ++c) out[size_t(s * fiber + c)] = spec[size_t(s * fiber + c)];
    }
    return PeriodicField::from_spectrum(grid, fiber, out);
}

/// Smooth random field: white noise band-limited to |m|_inf <= max_freq,
/// mean zero, sup norm scaled to `amplitude`.
inline PeriodicField random_band_limited(const GridSpec& grid, int fiber, int max_freq,
                                         double amplitude, Rng& rng) {
    PeriodicField noise = PeriodicField::zero(grid, fiber);
    std::vector<double> vals(static_cast<size_t>(grid.total_points()) * size_t(fiber));
    for (auto& v : vals) v = rng.gaussian();
    noise = PeriodicField(grid, fiber, std::move(vals));
    PeriodicField smooth = truncate_spectrum(noise, std::min(max_freq, grid.points_per_axis / 2 - 1));
    smooth = smooth.shifted_mean(Eigen::VectorXd::Zero(fiber));
    double sup = smooth.sup_norm();
    return sup > 0 ? smooth * (amplitude / sup) : smooth;
}

// ---------------------------------------------------------------------------
// Operator bundle: rank certificate, dagger, projectors; built once and
// shared by the projection / decomposition / solver layers.
// ---------------------------------------------------------------------------

struct OperatorCalculus {
    DiffOperator op;
    int rank = 0;
    RationalSymbol dagger;
    RationalSymbol ker_proj;  // Id - dagger B   (on the source fiber)
    RationalSymbol im_proj;   // B dagger        (on the target fiber)

    static OperatorCalculus make(const DiffOperator& op) {
        RankReport rr = check_constant_rank(op);
        if (!rr.is_constant_rank)
            throw NotConstantRank("operator '" + op.name + "' fails the constant rank test");
        return make_with_rank(op, rr.rank);
    }

    static OperatorCalculus make_with_rank(const DiffOperator& op, int rank) {
        OperatorCalculus oc;
        oc.op = op;
        oc.rank = rank;
        oc.dagger = moore_penrose(op, rank);
        oc.ker_proj = kernel_projector(op, oc.dagger);
        oc.im_proj = image_projector(op, oc.dagger);
        return oc;
    }
};

/// Frequency-wise orthogonal projection onto A-free fields. Constants pass
/// through unchanged; the result g solves A g = 0 and g = f when A f = 0.
inline PeriodicField project_afree(const OperatorCalculus& opA, const PeriodicField& f) {
    SpectralProjector proj(opA.ker_proj, f.grid(), opA.op.dim_from,
                           SpectralProjector::ZeroMode::identity);
    return proj.apply(f);
}

inline PeriodicField project_afree(const DiffOperator& opA, const PeriodicField& f) {
    return project_afree(OperatorCalculus::make(opA), f);
}

struct Decomposition {
    PeriodicField u;  // potential with C^* u = 0 and zero mean
    PeriodicField s;  // f - B u; on the torus the mean plus a tiny residual
};

/// Verify exactness im B(xi) = ker A(xi): the composition must vanish as a
/// polynomial identity and the ranks must split the fiber dimension.
inline void require_potential_pair(const OperatorCalculus& opA, const OperatorCalculus& opB) {
    if (opB.op.dim_to != opA.op.dim_from)
        throw ShapeMismatch("potential target does not match constraint source");
    PolyMatrix comp = symbol_of(opA.op).mat * symbol_of(opB.op).mat;
    if (!comp.is_zero()) throw ConfigError("A B != 0: not a potential pair");
    if (opA.rank + opB.rank != opA.op.dim_from)
        throw ConfigError("rank A + rank B != dim V: exactness fails");
}

/// Split an A-free field into B u + S via the dagger symbol. u carries the
/// oscillation, S the mean (exactly, up to spectral rounding).
inline Decomposition decompose(const OperatorCalculus& opA, const OperatorCalculus& opB,
                               const PeriodicField& f, double tol = 1e-8) {
    require_potential_pair(opA, opB);
    PeriodicField af = apply_operator(opA.op, f);
    if (af.sup_norm() > tol * std::max(1.0, f.sup_norm()))
        throw NotAFree("A f residual above tolerance");
    PeriodicField u = apply_dagger(opB.op, opB.dagger, f);
    PeriodicField s = f - apply_operator(opB.op, u);
    return {u, s};
}

}  // namespace constrank
