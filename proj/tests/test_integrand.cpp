#include <catch2/catch_amalgamated.hpp>
#include <numbers>

#include "constrank/integrand.hpp"
#include "support/oracles.hpp"

using namespace constrank;
using Catch::Approx;

namespace {
Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}
const Eigen::VectorXd kX0 = Eigen::VectorXd::Zero(2);
}  // namespace

TEST_CASE("E at anchor points") {
    CHECK(eval_E(Eigen::VectorXd::Zero(3)) == 0.0);
    Eigen::VectorXd z(3);
    z << 1, 0, 0;
    CHECK(eval_E(z) == Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));
}

TEST_CASE("E is squeezed between min(|z|,|z|^2)/3 and min(|z|,|z|^2)") {
    // log-spaced magnitudes over twelve decades x random directions
    Rng rng(1);
    double worst_low = 1.0, worst_high = 0.0;
    for (int i = 0; i < 10000; ++i) {
        double t = std::pow(10.0, rng.uniform(-6.0, 6.0));
        Eigen::VectorXd z = t * rng.unit_vector(3);
        double ratio = eval_E(z) / std::min(t, t * t);
        worst_low = std::min(worst_low, ratio);
        worst_high = std::max(worst_high, ratio);
    }
    CHECK(worst_low >= 1.0 / 3.0);
    CHECK(worst_high <= 1.0);
    // the tight corner sits at |z| = 1: ratio 1/(1+sqrt(2))
    Eigen::VectorXd z1(3);
    z1 << 1, 0, 0;
    CHECK(eval_E(z1) == Approx(1.0 / (1.0 + std::sqrt(2.0))).epsilon(1e-12));
}

TEST_CASE("E subadditivity and scaling constants") {
    Rng rng(2);
    double worst_sum = 0.0, worst_scale = 0.0;
    for (int i = 0; i < 10000; ++i) {
        Eigen::VectorXd z = rng.gaussian_vector(3) * std::pow(10.0, rng.uniform(-3.0, 3.0));
        Eigen::VectorXd w = rng.gaussian_vector(3) * std::pow(10.0, rng.uniform(-3.0, 3.0));
        worst_sum = std::max(worst_sum, eval_E(z + w) / (eval_E(z) + eval_E(w)));
        double t = std::pow(10.0, rng.uniform(-2.0, 2.0));
        worst_scale =
            std::max(worst_scale, eval_E((t * z).eval()) / (std::max(t, t * t) * eval_E(z)));
    }
    CHECK(worst_sum <= 4.0);
    CHECK(worst_scale <= 2.0);
}

TEST_CASE("E derivatives agree with finite differences") {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        Eigen::VectorXd z = rng.gaussian_vector(3) * rng.uniform(0.1, 5.0);
        Eigen::VectorXd fg = oracle::fd_gradient(
            [](const Eigen::VectorXd& y) { return eval_E(y); }, z);
        CHECK((fg - grad_E(z)).norm() < 1e-6 * std::max(1.0, grad_E(z).norm()));
        Eigen::MatrixXd fh = oracle::fd_jacobian(
            [](const Eigen::VectorXd& y) { return grad_E(y).eval(); }, z);
        CHECK((fh - hess_E(z)).norm() < 1e-6 * std::max(1.0, hess_E(z).norm()));
    }
}

TEST_CASE("V_p anchors: V_2 is the identity") {
    Rng rng(4);
    for (int i = 0; i < 30; ++i) {
        Eigen::VectorXd z = rng.gaussian_vector(3);
        CHECK((eval_Vp(z, 2.0) - z).norm() < 1e-14);
        // |V_p(z)|^2 = (1+|z|^2)^{(p-2)/2} |z|^2
        double p = rng.uniform(1.1, 4.0);
        double want = std::pow(1 + z.squaredNorm(), (p - 2) / 2) * z.squaredNorm();
        CHECK(eval_Vp(z, p).squaredNorm() == Approx(want).epsilon(1e-12));
    }
    CHECK_THROWS_AS(eval_Vp(Eigen::VectorXd::Zero(2), 1.0), ConfigError);
}

TEST_CASE("family derivative consistency") {
    Rng rng(5);
    for (const auto& f :
         {make_ell_e(1.0, 3), make_perturbed(1.0, 0.3, 3), make_xdep(2.0, 0.4, 2),
          make_offset(make_ell_e(1.5, 2),
                      [](const Eigen::VectorXd& x) {
                          return vec2(0.3 * std::sin(2 * std::numbers::pi * x[0]), 0.1);
                      },
                      0.4)}) {
        DerivativeCheck dc = check_derivative_consistency(f, 100, rng);
        INFO(f.family);
        CHECK(dc.grad_error < 1e-6);
        CHECK(dc.hess_error < 1e-6);
    }
}

TEST_CASE("growth bound holds for the built-in families") {
    Rng rng(6);
    for (const auto& f : {make_ell_e(1.0, 3), make_perturbed(1.0, 0.5, 3), make_xdep(1.0, 0.3, 3)}) {
        for (int i = 0; i < 2000; ++i) {
            Eigen::VectorXd x = rng.gaussian_vector(3);
            Eigen::VectorXd z = rng.gaussian_vector(3) * std::pow(10.0, rng.uniform(-3.0, 4.0));
            INFO(f.family);
            CHECK(std::abs(f.eval(x, z)) <= f.growth_L * (1 + z.norm()) + 1e-12);
        }
    }
}

TEST_CASE("offset reduction keeps linear growth with the enlarged constant") {
    auto s = [](const Eigen::VectorXd& x) {
        return vec2(0.5 * std::cos(2 * std::numbers::pi * x[0]),
                    0.5 * std::sin(2 * std::numbers::pi * x[1]));
    };
    double s_sup = std::sqrt(0.5);
    Integrand base = make_ell_e(2.0, 2);
    Integrand g = make_offset(base, s, s_sup);
    CHECK(g.growth_L <= base.growth_L * (1 + s_sup) + 1e-12);
    Rng rng(7);
    double measured = 0;
    for (int i = 0; i < 5000; ++i) {
        Eigen::VectorXd x = rng.gaussian_vector(2);
        Eigen::VectorXd z = rng.gaussian_vector(2) * std::pow(10.0, rng.uniform(-2.0, 4.0));
        measured = std::max(measured, std::abs(g.eval(x, z)) / (1 + z.norm()));
    }
    CHECK(measured <= base.growth_L * (1 + s_sup) + 1e-12);
}

TEST_CASE("shifted integrand vanishes to second order") {
    Integrand f = make_perturbed(1.0, 0.2, 2);
    Eigen::VectorXd w = vec2(0.7, -0.3);
    ShiftedIntegrand fw = make_shifted(f, kX0, w);
    CHECK(fw.eval(Eigen::VectorXd::Zero(2)) == 0.0);
    CHECK(fw.grad(Eigen::VectorXd::Zero(2)).norm() == 0.0);
    CHECK(fw.measured_c1 > 0);
    CHECK(std::isfinite(fw.measured_c1));

    SECTION("Taylor ratio approaches half the Hessian quadratic form") {
        Eigen::VectorXd dir = vec2(1.0, 0.0);
        double want = 0.5 * dir.dot(f.hess_z(kX0, w) * dir);
        for (double t : {1e-3, 1e-4, 1e-5}) {
            double got = fw.eval((t * dir).eval()) / (t * t);
            CHECK(got == Approx(want).epsilon(1e-2));
        }
    }
}

TEST_CASE("shifted integrand of the quadratic is the quadratic") {
    // f(z) = |z|^2 / 2 has translation-invariant second derivative
    Integrand f;
    f.fiber_dim = 2;
    f.growth_L = 10;
    f.family = "quadratic";
    f.eval = [](const Eigen::VectorXd&, const Eigen::VectorXd& z) { return 0.5 * z.squaredNorm(); };
    f.grad_z = [](const Eigen::VectorXd&, const Eigen::VectorXd& z) { return z; };
    f.hess_z = [](const Eigen::VectorXd&, const Eigen::VectorXd& z) {
        return Eigen::MatrixXd::Identity(z.size(), z.size()).eval();
    };
    ShiftedIntegrand fw = make_shifted(f, kX0, vec2(3.0, -1.0));
    Rng rng(8);
    for (int i = 0; i < 50; ++i) {
        Eigen::VectorXd z = rng.gaussian_vector(2);
        CHECK(fw.eval(z) == Approx(0.5 * z.squaredNorm()).margin(1e-12));
    }
}

TEST_CASE("shifted E with zero shift is E") {
    Integrand f = make_ell_e(1.0, 3);
    ShiftedIntegrand fw = make_shifted(f, kX0, Eigen::VectorXd::Zero(3));
    Rng rng(9);
    for (int i = 0; i < 50; ++i) {
        Eigen::VectorXd z = rng.gaussian_vector(3);
        CHECK(fw.eval(z) == Approx(eval_E(z)).margin(1e-14));
    }
}

TEST_CASE("modular mean bound: zero, constant, and random fields") {
    GridSpec g{2, 64, 1.0};
    Eigen::VectorXd c(2);
    c << 0.5, 0.5;
    BallMask mask = BallMask::make(g, c, 0.3);

    MeanBound zb = modular_mean_bound(PeriodicField::zero(g, 2), mask);
    CHECK(zb.lhs == 0.0);
    CHECK(zb.rhs == 0.0);

    // E(c)^2 + 2 E(c) = |c|^2, so the bound is met with equality for constants
    PeriodicField cf = PeriodicField::constant(g, vec2(0.8, -0.6));
    MeanBound cb = modular_mean_bound(cf, mask);
    CHECK(cb.lhs == Approx(1.0).epsilon(1e-12));
    CHECK(cb.rhs == Approx(1.0).epsilon(1e-12));

    Rng rng(10);
    for (int i = 0; i < 100; ++i) {
        PeriodicField f = random_band_limited(g, 2, 8, rng.uniform(0.05, 3.0), rng);
        MeanBound mb = modular_mean_bound(f, mask);
        CHECK(mb.lhs <= mb.rhs + 1e-10);
        if (mb.e <= 1.0) CHECK(mb.lhs <= std::sqrt(3.0 * mb.e) + 1e-10);
    }
}

TEST_CASE("wave cone ellipticity of the reference integrand") {
    WaveConeReport cone = wave_cone_sample(make_divergence(3), 60);
    Integrand f = make_ell_e(1.0, 3);
    Eigen::VectorXd z(3);
    z << 0.5, 0.2, -0.1;
    double q = check_wave_cone_ellipticity(f, Eigen::VectorXd::Zero(3), z, cone);
    // the smallest eigenvalue of Hess E is (1+|z|^2)^{-3/2}, attained along z
    double floor = std::pow(1 + z.squaredNorm(), -1.5);
    CHECK(q >= floor - 1e-9);
    CHECK(q <= 1.0 / std::sqrt(1 + z.squaredNorm()) + 1e-9);

    SECTION("doubling ell doubles the quotient") {
        double q2 = check_wave_cone_ellipticity(make_ell_e(2.0, 3), Eigen::VectorXd::Zero(3), z,
                                                cone);
        CHECK(q2 == Approx(2 * q).epsilon(1e-12));
    }

    SECTION("a linear integrand is flagged degenerate") {
        Integrand lin;
        lin.fiber_dim = 3;
        lin.growth_L = 1;
        lin.family = "linear";
        Eigen::VectorXd zeta(3);
        zeta << 1, 2, 3;
        lin.eval = [zeta](const Eigen::VectorXd&, const Eigen::VectorXd& y) {
            return zeta.dot(y);
        };
        lin.grad_z = [zeta](const Eigen::VectorXd&, const Eigen::VectorXd&) { return zeta; };
        lin.hess_z = [](const Eigen::VectorXd&, const Eigen::VectorXd& y) {
            return Eigen::MatrixXd::Zero(y.size(), y.size()).eval();
        };
        CHECK(check_wave_cone_ellipticity(lin, Eigen::VectorXd::Zero(3), z, cone) ==
              Approx(0.0).margin(1e-15));
    }
}

TEST_CASE("quasiconvexity probe accepts E and rejects -E") {
    GridSpec g{2, 32, 1.0};
    DiffOperator opB = make_gradient(2);
    Eigen::VectorXd z = vec2(0.4, -0.2);
    double margin = quasiconvexity_probe(make_ell_e(1.0, 2), opB, z, 12, g);
    CHECK(margin >= -1e-9);

    // the trivial test field contributes exactly zero gap and is excluded
    // from the reported minimum over nontrivial fields
    Integrand f = make_ell_e(1.0, 2);
    PeriodicField zero_phi = PeriodicField::zero(g, 2);
    double trivial_gap = 0;
    for (int64_t s = 0; s < g.total_points(); ++s)
        trivial_gap += f.eval(Eigen::VectorXd::Zero(2), z + zero_phi.at_site(s));
    trivial_gap = trivial_gap / double(g.total_points()) - f.eval(Eigen::VectorXd::Zero(2), z);
    CHECK(trivial_gap == 0.0);

    Integrand neg = make_ell_e(-1.0, 2);  // concave: any oscillation lowers the mean
    neg.family = "negE";
    double neg_margin = quasiconvexity_probe(neg, opB, z, 12, g);
    CHECK(neg_margin < -1e-6);

    // single sinusoidal oracle: the violation is strict for -E
    PeriodicField phi = PeriodicField::from_function(g, 1, [](const Eigen::VectorXd& x) {
        Eigen::VectorXd v(1);
        v[0] = std::sin(2 * std::numbers::pi * x[0]);
        return v;
    });
    PeriodicField bphi = apply_operator(opB, phi);
    double acc = 0;
    for (int64_t s = 0; s < g.total_points(); ++s)
        acc += -eval_E(z + bphi.at_site(s));
    acc = acc / double(g.total_points()) + eval_E(z);
    CHECK(acc < -1e-6);
}

TEST_CASE("recession of E is the norm") {
    Integrand f = make_ell_e(1.0, 2);
    Eigen::VectorXd z = vec2(0.3, 0.4);
    RecessionResult r = recession(f, kX0, z, default_t_ladder());
    CHECK(r.value == Approx(0.5).epsilon(1e-6));
    CHECK_FALSE(r.non_cauchy);

    SECTION("one-homogeneity within 1e-6") {
        RecessionResult r2 = recession(f, kX0, (2 * z).eval(), default_t_ladder());
        CHECK(r2.value == Approx(2 * r.value).epsilon(1e-6));
    }
}

TEST_CASE("recession of a linear integrand is exact at every ladder point") {
    Integrand lin;
    lin.fiber_dim = 2;
    lin.growth_L = 5;
    lin.family = "linear";
    Eigen::VectorXd zeta = vec2(2.0, -1.0);
    lin.eval = [zeta](const Eigen::VectorXd&, const Eigen::VectorXd& y) { return zeta.dot(y); };
    lin.grad_z = [zeta](const Eigen::VectorXd&, const Eigen::VectorXd&) { return zeta; };
    lin.hess_z = [](const Eigen::VectorXd&, const Eigen::VectorXd& y) {
        return Eigen::MatrixXd::Zero(y.size(), y.size()).eval();
    };
    Eigen::VectorXd z = vec2(1.0, 1.0);
    RecessionResult r = recession(lin, kX0, z, default_t_ladder());
    CHECK(r.value == Approx(zeta.dot(z)).epsilon(1e-12));
    CHECK(r.max_gap < 1e-12);
}

TEST_CASE("growth constants bound recession values") {
    Integrand f = make_perturbed(1.0, 0.4, 2);
    Rng rng(11);
    for (int i = 0; i < 20; ++i) {
        Eigen::VectorXd z = rng.unit_vector(2) * rng.uniform(0.1, 2.0);
        RecessionResult r = recession(f, kX0, z, default_t_ladder());
        CHECK(std::abs(r.value) <= f.growth_L * (1 + z.norm()) + 1e-9);
    }
}
