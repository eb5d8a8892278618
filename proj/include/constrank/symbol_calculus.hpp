#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <optional>
#include <vector>

#include "constrank/diff_operator.hpp"
#include "constrank/directions.hpp"

namespace constrank {

// ---------------------------------------------------------------------------
// Rank analysis
// ---------------------------------------------------------------------------

struct RankSample {
    Eigen::VectorXd xi;
    int rank;
};

struct RankReport {
    bool is_constant_rank = false;
    int rank = 0;
    std::vector<RankSample> samples;
    std::optional<Eigen::VectorXd> witness;  // a direction where the rank differs
};

/// Basis of the null space of a rational matrix, by exact Gauss-Jordan
/// elimination. Columns index the unknowns.
inline std::vector<std::vector<Rational>> exact_null_space(RationalMatrix m) {
    const int rows = static_cast<int>(m.size());
    const int cols = rows ? static_cast<int>(m[0].size()) : 0;
    std::vector<int> pivot_col;
    int r = 0;
    for (int col = 0; col < cols && r < rows; ++col) {
        int pivot = -1;
        for (int i = r; i < rows; ++i)
            if (m[size_t(i)][size_t(col)] != 0) {
                pivot = i;
                break;
            }
        if (pivot < 0) continue;
        std::swap(m[size_t(pivot)], m[size_t(r)]);
        Rational lead = m[size_t(r)][size_t(col)];
        for (int c = col; c < cols; ++c) m[size_t(r)][size_t(c)] /= lead;
        for (int i = 0; i < rows; ++i) {
            if (i == r || m[size_t(i)][size_t(col)] == 0) continue;
            Rational factor = m[size_t(i)][size_t(col)];
            for (int c = col; c < cols; ++c)
                m[size_t(i)][size_t(c)] -= factor * m[size_t(r)][size_t(c)];
        }
        pivot_col.push_back(col);
        ++r;
    }
    std::vector<bool> is_pivot(static_cast<size_t>(cols), false);
    for (int c : pivot_col) is_pivot[size_t(c)] = true;
    std::vector<std::vector<Rational>> basis;
    for (int free = 0; free < cols; ++free) {
        if (is_pivot[size_t(free)]) continue;
        std::vector<Rational> v(static_cast<size_t>(cols), Rational(0));
        v[size_t(free)] = 1;
        for (int i = 0; i < r; ++i)
            v[size_t(pivot_col[size_t(i)])] = -m[size_t(i)][size_t(free)];
        basis.push_back(std::move(v));
    }
    return basis;
}

/// Exact rank of a rational matrix by Gaussian elimination.
inline int exact_rank(RationalMatrix m) {
    const int rows = static_cast<int>(m.size());
    const int cols = rows ? static_cast<int>(m[0].size()) : 0;
    int rank = 0;
    for (int col = 0; col < cols && rank < rows; ++col) {
        int pivot = -1;
        for (int r = rank; r < rows; ++r)
            if (m[size_t(r)][size_t(col)] != 0) {
                pivot = r;
                break;
            }
        if (pivot < 0) continue;
        std::swap(m[size_t(pivot)], m[size_t(rank)]);
        for (int r = rank + 1; r < rows; ++r) {
            if (m[size_t(r)][size_t(col)] == 0) continue;
            Rational factor = m[size_t(r)][size_t(col)] / m[size_t(rank)][size_t(col)];
            for (int c = col; c < cols; ++c)
                m[size_t(r)][size_t(c)] -= factor * m[size_t(rank)][size_t(c)];
        }
        ++rank;
    }
    return rank;
}

namespace detail {

constexpr double kRankCutoff = 1e-9;  // relative singular value threshold

/// Exact dyadic rational from a double; doubles are rationals, so the
/// floating sample point itself can be certified in exact arithmetic.
inline std::array<Rational, kMaxDim> dyadic_point(const Eigen::VectorXd& xi) {
    std::array<Rational, kMaxDim> p{Rational(0), Rational(0), Rational(0)};
    for (int i = 0; i < xi.size(); ++i) p[size_t(i)] = Rational(xi[i]);
    return p;
}

/// Numerical rank with the 1e-9 relative cutoff; falls back to exact
/// elimination at the same (dyadic rational) point when any singular value
/// sits in the ambiguous band around the cutoff.
inline int rank_at(const PolyMatrix& sym, const Eigen::VectorXd& xi, bool force_exact) {
    if (force_exact) return exact_rank(sym.eval_exact(dyadic_point(xi)));
    Eigen::MatrixXd m = sym.eval(xi);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    double smax = sv.size() ? sv[0] : 0.0;
    if (smax == 0.0) return 0;
    int rank = 0;
    bool ambiguous = false;
    for (int i = 0; i < sv.size(); ++i) {
        double rel = sv[i] / smax;
        if (rel > kRankCutoff) ++rank;
        if (rel > 1e-12 && rel < 1e-6) ambiguous = true;
    }
    if (ambiguous) return exact_rank(sym.eval_exact(dyadic_point(xi)));
    return rank;
}

}  // namespace detail

/// Sample ranks of the symbol over a deterministic low-discrepancy set of
/// 200*dim directions, all axes and +-1 diagonals (evaluated in exact
/// arithmetic), and n_samples random unit directions.
inline RankReport check_constant_rank(const DiffOperator& op, int n_samples = 200,
                                      uint64_t seed = 0x5eed) {
    op.validate();
    PolySymbol sym = symbol_of(op);
    if (sym.mat.is_zero()) throw DegenerateOperator("symbol is identically zero");

    RankReport report;
    auto push = [&](const Eigen::VectorXd& xi, bool exact) {
        report.samples.push_back({xi, detail::rank_at(sym.mat, xi, exact)});
    };
    for (const auto& xi : axis_and_diagonal_directions(op.dim_n)) push(xi, true);
    for (const auto& xi : low_discrepancy_directions(op.dim_n, 200 * op.dim_n)) push(xi, false);
    Rng rng(seed);
    for (const auto& xi : random_directions(op.dim_n, n_samples, rng)) push(xi, false);

    int max_rank = 0;
    for (const auto& s : report.samples) max_rank = std::max(max_rank, s.rank);
    report.rank = max_rank;
    report.is_constant_rank = true;
    for (const auto& s : report.samples) {
        if (s.rank != max_rank) {
            report.is_constant_rank = false;
            if (!report.witness) report.witness = s.xi;
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Moore-Penrose symbol via the characteristic polynomial of B B^*
// ---------------------------------------------------------------------------

/// num/den matrix of rational functions, homogeneous of homogeneity_degree.
/// The denominator is a scalar homogeneous polynomial nonvanishing away
/// from 0 whenever the operator has the certified constant rank.
struct RationalSymbol {
    PolyMatrix num;
    Polynomial den;
    int homogeneity_degree = 0;

    Eigen::MatrixXd eval(const Eigen::VectorXd& xi) const {
        double d = den.eval(xi);
        return num.eval(xi) / d;
    }
};

/// Characteristic polynomial coefficients of a square PolyMatrix P:
/// det(lambda I - P) = lambda^m + c[0] lambda^{m-1} + ... + c[m-1],
/// plus the auxiliary matrices M_j = P^{j-1} + c_1 P^{j-2} + ... + c_{j-1} I
/// of the Faddeev-LeVerrier recursion (M[j] is M_{j+1}).
struct CharPoly {
    std::vector<Polynomial> c;
    std::vector<PolyMatrix> M;
};

inline CharPoly char_poly(const PolyMatrix& p) {
    const int m = p.rows();
    if (p.cols() != m) throw ShapeMismatch("char_poly needs a square matrix");
    CharPoly out;
    PolyMatrix M = PolyMatrix::identity(m);
    for (int j = 1; j <= m; ++j) {
        out.M.push_back(M);
        PolyMatrix PM = p * M;
        Polynomial cj = PM.trace() * Rational(-1, j);
        out.c.push_back(cj);
        if (j < m) M = PM + PolyMatrix::identity(m, cj);
    }
    return out;
}

/// B^dagger(xi) = -c_r(xi)^{-1} B^*(xi) [ (BB^*)^{r-1} + c_1 (BB^*)^{r-2}
/// + ... + c_{r-1} Id ](xi), homogeneous of degree -order. Requires the
/// certified constant rank r: c_r must be nonzero and c_{r+1} must vanish
/// identically.
inline RationalSymbol moore_penrose(const DiffOperator& op, int rank) {
    PolySymbol sym = symbol_of(op);
    PolyMatrix bt = sym.mat.transpose();
    PolyMatrix p = sym.mat * bt;  // dim_to x dim_to, entries of degree 2k
    CharPoly cp = char_poly(p);
    const int m = p.rows();
    if (rank < 1 || rank > m) throw RankMismatch("rank out of range");
    if (cp.c[size_t(rank - 1)].is_zero())
        throw RankMismatch("c_r vanishes identically: rank below " + std::to_string(rank));
    if (rank < m && !cp.c[size_t(rank)].is_zero())
        throw RankMismatch("c_{r+1} does not vanish: rank above " + std::to_string(rank));

    RationalSymbol dag;
    dag.num = (bt * cp.M[size_t(rank - 1)]).scaled(Rational(-1));
    dag.den = cp.c[size_t(rank - 1)];
    dag.homogeneity_degree = -op.order;
    return dag;
}

/// Kernel-side projector Id - B^dagger B as an exact rational symbol of
/// degree 0 (shared denominator c_r).
inline RationalSymbol kernel_projector(const DiffOperator& op, const RationalSymbol& dagger) {
    PolySymbol sym = symbol_of(op);
    PolyMatrix q = dagger.num * sym.mat;  // degree 2kr, same as c_r
    RationalSymbol proj;
    proj.num = PolyMatrix::identity(op.dim_from, dagger.den) - q;
    proj.den = dagger.den;
    proj.homogeneity_degree = 0;
    return proj;
}

/// Image-side projector B B^dagger, degree 0.
inline RationalSymbol image_projector(const DiffOperator& op, const RationalSymbol& dagger) {
    PolySymbol sym = symbol_of(op);
    RationalSymbol proj;
    proj.num = sym.mat * dagger.num;
    proj.den = dagger.den;
    proj.homogeneity_degree = 0;
    return proj;
}

/// Projector B^dagger B onto im B^*(xi) = ker C^*(xi), degree 0.
inline RationalSymbol row_space_projector(const DiffOperator& op, const RationalSymbol& dagger) {
    PolySymbol sym = symbol_of(op);
    RationalSymbol proj;
    proj.num = dagger.num * sym.mat;
    proj.den = dagger.den;
    proj.homogeneity_degree = 0;
    return proj;
}

/// Potential operator construction: C(xi) = c_r(xi) (Id - B^dagger(xi)B(xi))
/// with the denominator cleared, so C is a homogeneous polynomial symbol
/// with im C(xi) = ker B(xi) for xi != 0. Elliptic operators yield C = 0.
inline std::pair<PolySymbol, DiffOperator> build_potential(const DiffOperator& op, int rank) {
    RationalSymbol dag = moore_penrose(op, rank);
    PolySymbol sym = symbol_of(op);
    PolyMatrix c = PolyMatrix::identity(op.dim_from, dag.den) - dag.num * sym.mat;
    PolySymbol cs{c, 2 * op.order * rank};
    if (c.is_zero()) {
        // elliptic: the zero symbol; hand back a trivially zero operator tag
        DiffOperator zero;
        zero.dim_n = op.dim_n;
        zero.dim_from = op.dim_from;
        zero.dim_to = op.dim_from;
        zero.order = cs.homogeneity_degree;
        zero.name = "zero_potential";
        return {cs, zero};
    }
    DiffOperator cop = operator_from_symbol(cs, op.dim_n, "potential_of_" + op.name);
    cop.validate();
    return {cs, cop};
}

inline std::pair<PolySymbol, DiffOperator> build_potential(const DiffOperator& op) {
    RankReport rr = check_constant_rank(op);
    if (!rr.is_constant_rank) throw NotConstantRank("operator fails the constant rank test");
    return build_potential(op, rr.rank);
}

// ---------------------------------------------------------------------------
// Wave cone sampling
// ---------------------------------------------------------------------------

struct WaveConeSample {
    Eigen::VectorXd xi;
    Eigen::MatrixXd kernel_basis;  // columns: orthonormal basis of ker A(xi)
};

struct WaveConeReport {
    std::vector<WaveConeSample> samples;
    bool spans_fiber = false;  // span of all kernel vectors equals the full fiber space
    int span_dim = 0;
};

/// Orthonormal kernel bases of the symbol at sampled unit directions; the
/// union of the returned vectors samples the wave cone, and spans_fiber
/// records the spanning cone check.
inline WaveConeReport wave_cone_sample(const DiffOperator& op, int n_dirs,
                                       uint64_t seed = 0x5eed) {
    PolySymbol sym = symbol_of(op);
    WaveConeReport report;
    std::vector<Eigen::VectorXd> dirs = low_discrepancy_directions(op.dim_n, n_dirs);
    Rng rng(seed);
    for (auto& d : random_directions(op.dim_n, std::max(0, n_dirs / 4), rng))
        dirs.push_back(d);

    std::vector<Eigen::VectorXd> all_vectors;
    for (const auto& xi : dirs) {
        Eigen::MatrixXd m = sym.mat.eval(xi);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        double smax = sv.size() ? sv[0] : 0.0;
        int rank = 0;
        for (int i = 0; i < sv.size(); ++i)
            if (smax > 0 && sv[i] / smax > detail::kRankCutoff) ++rank;
        int nullity = op.dim_from - rank;
        Eigen::MatrixXd basis = svd.matrixV().rightCols(nullity);
        for (int c = 0; c < basis.cols(); ++c) all_vectors.push_back(basis.col(c));
        report.samples.push_back({xi, basis});
    }

    if (!all_vectors.empty()) {
        Eigen::MatrixXd stacked(static_cast<int>(all_vectors.size()), op.dim_from);
        for (size_t i = 0; i < all_vectors.size(); ++i)
            stacked.row(static_cast<int>(i)) = all_vectors[i].transpose();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked);
        const auto& sv = svd.singularValues();
        double smax = sv.size() ? sv[0] : 0.0;
        for (int i = 0; i < sv.size(); ++i)
            if (smax > 0 && sv[i] / smax > detail::kRankCutoff) ++report.span_dim;
    }
    report.spans_fiber = (report.span_dim == op.dim_from);
    return report;
}

}  // namespace constrank
