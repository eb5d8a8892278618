#include <catch2/catch_amalgamated.hpp>
#include <numbers>

#include "constrank/ball.hpp"
#include "constrank/spectral_ops.hpp"
#include "support/oracles.hpp"

using namespace constrank;
using Catch::Approx;

namespace {
constexpr double kPi = std::numbers::pi;

GridSpec grid3(int n = 32) { return {3, n, 1.0}; }
GridSpec grid2(int n = 64) { return {2, n, 1.0}; }
}  // namespace

TEST_CASE("fft round trip is tight") {
    Rng rng(1);
    PeriodicField f = random_band_limited(grid2(), 2, 10, 1.0, rng);
    PeriodicField g = PeriodicField::from_spectrum(f.grid(), f.fiber_dim(), f.spectrum());
    CHECK((f - g).sup_norm() < 1e-12);
}

TEST_CASE("spectrum of a real field is conjugate symmetric") {
    Rng rng(2);
    PeriodicField f = random_band_limited(grid2(32), 1, 9, 1.0, rng);
    const auto& spec = f.spectrum();
    const GridSpec& g = f.grid();
    const int N = g.points_per_axis;
    for (int64_t s = 0; s < g.total_points(); ++s) {
        auto c = g.site_coords(s);
        int64_t conj_site = 0;
        for (int i = 0; i < g.dim_n; ++i)
            conj_site = conj_site * N + (N - c[size_t(i)]) % N;
        CHECK(std::abs(spec[size_t(s)] - std::conj(spec[size_t(conj_site)])) < 1e-13);
    }
}

TEST_CASE("gradient of a single sine mode is the analytic derivative") {
    GridSpec g = grid2();
    PeriodicField f = PeriodicField::from_function(g, 1, [](const Eigen::VectorXd& x) {
        Eigen::VectorXd v(1);
        v[0] = std::sin(2 * kPi * x[0]);
        return v;
    });
    PeriodicField df = apply_operator(make_gradient(2), f);
    REQUIRE(df.fiber_dim() == 2);
    double err = 0;
    for (int64_t s = 0; s < g.total_points(); ++s) {
        Eigen::VectorXd x = g.site_point(s);
        err = std::max(err, std::abs(df.value(s, 0) - 2 * kPi * std::cos(2 * kPi * x[0])));
        err = std::max(err, std::abs(df.value(s, 1)));
    }
    CHECK(err < 1e-10);
}

TEST_CASE("second-order application: the laplacian of a sine mode") {
    GridSpec g = grid2();
    PeriodicField f = PeriodicField::from_function(g, 1, [](const Eigen::VectorXd& x) {
        Eigen::VectorXd v(1);
        v[0] = std::sin(2 * kPi * x[0]) + 0.5 * std::cos(2 * kPi * 3 * x[1]);
        return v;
    });
    PeriodicField lap = apply_operator(make_laplacian(2), f);
    double err = 0;
    for (int64_t s = 0; s < g.total_points(); ++s) {
        Eigen::VectorXd x = g.site_point(s);
        double want = -4 * kPi * kPi * std::sin(2 * kPi * x[0]) -
                      0.5 * 36 * kPi * kPi * std::cos(2 * kPi * 3 * x[1]);
        err = std::max(err, std::abs(lap.value(s, 0) - want));
    }
    CHECK(err < 1e-8);
}

TEST_CASE("homogeneous operators annihilate constants") {
    GridSpec g = grid3(16);
    Eigen::VectorXd c(3);
    c << 1.0, -2.0, 0.5;
    PeriodicField f = PeriodicField::constant(g, c);
    CHECK(apply_operator(make_divergence(3), f).sup_norm() < 1e-13);
    CHECK(apply_operator(make_curl3d(), f).sup_norm() < 1e-13);
}

TEST_CASE("div of curl vanishes on the grid") {
    GridSpec g = grid3(32);
    Rng rng(3);
    PeriodicField phi = random_band_limited(g, 3, 7, 1.0, rng);
    PeriodicField curl = apply_operator(make_curl3d(), phi);
    PeriodicField divcurl = apply_operator(make_divergence(3), curl);
    CHECK(divcurl.sup_norm() < 1e-10 * std::max(1.0, curl.sup_norm()));
}

TEST_CASE("A-free projection kills the divergence") {
    GridSpec g = grid3(32);
    Rng rng(4);
    PeriodicField f = random_band_limited(g, 3, 9, 1.0, rng);
    auto opA = OperatorCalculus::make(make_divergence(3));
    PeriodicField p = project_afree(opA, f);
    CHECK(apply_operator(opA.op, p).sup_norm() < 1e-10);

    SECTION("idempotence and mean preservation") {
        PeriodicField pp = project_afree(opA, p);
        CHECK((pp - p).l2_norm() < 1e-12 * std::max(1.0, p.l2_norm()));
        CHECK((p.mean() - f.mean()).norm() < 1e-13);
    }

    SECTION("already A-free fields pass through") {
        PeriodicField again = project_afree(opA, p);
        CHECK((again - p).sup_norm() < 1e-12 * std::max(1.0, p.sup_norm()));
    }

    SECTION("orthogonal energy split") {
        PeriodicField q = f - p;
        double lhs = f.l2_norm() * f.l2_norm();
        double rhs = p.l2_norm() * p.l2_norm() + q.l2_norm() * q.l2_norm();
        CHECK(lhs == Approx(rhs).epsilon(1e-9));
    }

    SECTION("self-adjointness") {
        PeriodicField h = random_band_limited(g, 3, 9, 1.0, rng);
        CHECK(project_afree(opA, f).dot(h) == Approx(f.dot(project_afree(opA, h))).margin(1e-10));
    }
}

TEST_CASE("projection of a pure gradient keeps only the mean") {
    GridSpec g = grid3(32);
    Rng rng(5);
    PeriodicField h = random_band_limited(g, 1, 6, 1.0, rng);
    PeriodicField gradh = apply_operator(make_gradient(3), h);
    Eigen::VectorXd shift(3);
    shift << 0.3, -0.1, 0.2;
    PeriodicField f = gradh.shifted_mean(shift);
    auto opA = OperatorCalculus::make(make_divergence(3));
    PeriodicField p = project_afree(opA, f);
    PeriodicField mean_only = PeriodicField::constant(g, shift);
    CHECK((p - mean_only).sup_norm() < 1e-10);
}

TEST_CASE("projector agrees with a dense frequency-wise kernel projection") {
    GridSpec g = grid2(16);
    auto opA = OperatorCalculus::make(make_divergence(2));
    SpectralProjector proj(opA.ker_proj, g, 2, SpectralProjector::ZeroMode::identity);
    PolySymbol sym = symbol_of(opA.op);
    for (int64_t s = 1; s < g.total_points(); ++s) {
        auto m = g.site_freq(s);
        Eigen::VectorXd xi(2);
        xi << m[0], m[1];
        Eigen::MatrixXd a = sym.mat.eval(xi);
        Eigen::MatrixXd dense =
            Eigen::MatrixXd::Identity(2, 2) - oracle::pseudo_inverse(a) * a;
        CHECK((proj.matrix_at(s) - dense).norm() < 1e-10);
    }
}

TEST_CASE("decompose reconstructs a curl potential") {
    GridSpec g = grid3(32);
    Rng rng(6);
    auto opA = OperatorCalculus::make(make_divergence(3));
    auto opB = OperatorCalculus::make(make_curl3d());
    PeriodicField w = random_band_limited(g, 3, 7, 1.0, rng);
    PeriodicField f = apply_operator(opB.op, w);  // zero-mean curl field
    Decomposition d = decompose(opA, opB, f);
    CHECK(d.s.sup_norm() < 1e-10);
    CHECK((apply_operator(opB.op, d.u) - f).sup_norm() < 1e-9);
    CHECK(d.u.mean().norm() < 1e-13);

    SECTION("the representative is C^*-free, frequency by frequency") {
        auto [cs, cop] = build_potential(opB.op, opB.rank);
        const auto& uhat = d.u.spectrum();
        for (int64_t s = 1; s < g.total_points(); ++s) {
            auto m = g.site_freq(s);
            if (g.freq_is_nyquist(m)) continue;
            Eigen::VectorXd xi(3);
            xi << m[0], m[1], m[2];
            Eigen::MatrixXd ct = cs.mat.eval(xi).transpose();
            Eigen::VectorXcd um(3);
            for (int c = 0; c < 3; ++c) um[c] = uhat[size_t(s * 3 + c)];
            double resid = (ct * um).norm();
            CHECK(resid < 1e-10 * (1.0 + ct.norm() * um.norm()));
        }
    }
}

TEST_CASE("decompose of a constant field is pure mean") {
    GridSpec g = grid3(16);
    Eigen::VectorXd c(3);
    c << 0.4, 0.0, -0.7;
    PeriodicField f = PeriodicField::constant(g, c);
    auto opA = OperatorCalculus::make(make_divergence(3));
    auto opB = OperatorCalculus::make(make_curl3d());
    Decomposition d = decompose(opA, opB, f);
    CHECK(d.u.sup_norm() < 1e-13);
    CHECK((d.s - f).sup_norm() < 1e-13);
}

TEST_CASE("decompose rejects fields that are not A-free") {
    GridSpec g = grid3(16);
    Rng rng(7);
    PeriodicField f = random_band_limited(g, 3, 5, 1.0, rng);
    auto opA = OperatorCalculus::make(make_divergence(3));
    auto opB = OperatorCalculus::make(make_curl3d());
    // generic band-limited noise has nonzero divergence
    CHECK_THROWS_AS(decompose(opA, opB, f), NotAFree);
}

TEST_CASE("decompose round trip: f = B w + const") {
    GridSpec g = grid2(32);
    Rng rng(8);
    auto opA = OperatorCalculus::make(make_divergence(2));
    // potential operator for div in 2d: perp gradient
    DiffOperator perp;
    perp.dim_n = 2;
    perp.dim_from = 1;
    perp.dim_to = 2;
    perp.order = 1;
    perp.name = "perp_grad";
    auto m0 = zero_matrix(2, 1);
    m0[1][0] = -1;
    perp.coeffs[unit_index(0)] = m0;
    auto m1 = zero_matrix(2, 1);
    m1[0][0] = 1;
    perp.coeffs[unit_index(1)] = m1;
    auto opB = OperatorCalculus::make(perp);

    PeriodicField w = random_band_limited(g, 1, 9, 2.0, rng);
    Eigen::VectorXd c(2);
    c << -0.2, 0.5;
    PeriodicField f = apply_operator(perp, w) + PeriodicField::constant(g, c);
    Decomposition d = decompose(opA, opB, f);
    CHECK((apply_operator(perp, d.u) - apply_operator(perp, w)).sup_norm() < 1e-9);
    CHECK((d.s - PeriodicField::constant(g, c)).sup_norm() < 1e-9);
}

TEST_CASE("riesz potential on single modes and round trips") {
    GridSpec g = grid2(64);
    PeriodicField f = PeriodicField::from_function(g, 1, [](const Eigen::VectorXd& x) {
        Eigen::VectorXd v(1);
        v[0] = std::sin(2 * kPi * x[0]);
        return v;
    });
    SECTION("I_0 is the identity on zero-mean fields") {
        CHECK((riesz_potential(0.0, f) - f).sup_norm() < 1e-12);
    }
    SECTION("I_{-2} of a single mode scales by (2 pi)^2") {
        PeriodicField lap = riesz_potential(-2.0, f);
        CHECK((lap - f * (4 * kPi * kPi)).sup_norm() < 1e-9);
    }
    SECTION("I_1 then I_{-1} is the identity on zero-mean fields") {
        Rng rng(9);
        PeriodicField r = random_band_limited(g, 1, 12, 1.0, rng);
        PeriodicField back = riesz_potential(-1.0, riesz_potential(1.0, r));
        CHECK((back - r).sup_norm() < 1e-10);
    }
}

TEST_CASE("mollifier preserves constants and mass") {
    GridSpec g = grid2(32);
    Eigen::VectorXd c(1);
    c << 2.5;
    PeriodicField f = PeriodicField::constant(g, c);
    PeriodicField m = mollify(f, 0.1);
    CHECK((m - f).sup_norm() < 1e-13);
    CHECK_THROWS_AS(mollify(f, 0.5 * g.cell()), RadiusTooSmall);
    Rng rng(10);
    PeriodicField r = random_band_limited(g, 1, 10, 1.0, rng).shifted_mean(c);
    CHECK((mollify(r, 0.08).mean() - c).norm() < 1e-12);
}

TEST_CASE("ball quadrature converges to the ball volume") {
    for (int n : {64, 128}) {
        GridSpec g = grid2(n);
        Eigen::VectorXd c(2);
        c << 0.5, 0.5;
        BallMask mask = BallMask::make(g, c, 0.25);
        CHECK(std::abs(mask.volume() - mask.exact_ball_volume()) <
              0.02 * mask.exact_ball_volume());
    }
    GridSpec g3 = grid3(32);
    Eigen::VectorXd c3(3);
    c3 << 0.5, 0.5, 0.5;
    BallMask m3 = BallMask::make(g3, c3, 0.25);
    CHECK(std::abs(m3.volume() - m3.exact_ball_volume()) < 0.02 * m3.exact_ball_volume());
}

TEST_CASE("ball average of a locally linear field hits the center value") {
    GridSpec g = grid2(128);
    Eigen::VectorXd x0(2);
    x0 << 0.5, 0.5;
    Eigen::VectorXd grad(2);
    grad << 1.3, -0.4;
    PeriodicField f = PeriodicField::from_function(g, 1, [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd v(1);
        double acc = 2.0;
        for (int i = 0; i < 2; ++i) {
            double d = x[i] - x0[i];
            d -= std::round(d);  // wrapped displacement
            acc += grad[i] * d;
        }
        v[0] = acc;
        return v;
    });
    BallMask mask = BallMask::make(g, x0, 0.2);
    Eigen::VectorXd avg = ball_average(f, mask);
    CHECK(std::abs(avg[0] - 2.0) < 2 * g.cell());
}

TEST_CASE("ball mask rejects tiny radii") {
    GridSpec g = grid2(32);
    Eigen::VectorXd c(2);
    c << 0.5, 0.5;
    CHECK_THROWS_AS(BallMask::make(g, c, 2.0 * g.cell()), RadiusTooSmall);
}

TEST_CASE("grid validation rejects malformed specs") {
    CHECK_THROWS_AS((GridSpec{2, 48, 1.0}).validate(), ConfigError);  // not a power of two
    CHECK_THROWS_AS((GridSpec{2, 4, 1.0}).validate(), ConfigError);   // below 8
    CHECK_THROWS_AS((GridSpec{4, 16, 1.0}).validate(), ConfigError);  // dim above 3
    CHECK_THROWS_AS((GridSpec{3, 512, 1.0}).validate(), ConfigError); // beyond the budget
    CHECK_NOTHROW((GridSpec{3, 128, 1.0}).validate());
}

TEST_CASE("field dump round trip and csv slice") {
    GridSpec g = grid2(16);
    Rng rng(11);
    PeriodicField f = random_band_limited(g, 2, 5, 1.0, rng);
    save_field(f, "/tmp/constrank_field_test.bin");
    PeriodicField back = load_field("/tmp/constrank_field_test.bin");
    CHECK((f - back).sup_norm() == 0.0);
    export_csv_slice(f, "/tmp/constrank_slice_test.csv");
}
