#include "rfcdelay/lyapunov.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace rfcdelay;

namespace {

const PlanarMatrices kDefault{};

}  // namespace

TEST(Hurwitz, PlanarCriterion) {
    EXPECT_TRUE(is_hurwitz(kDefault.a1));
    EXPECT_TRUE(is_hurwitz(kDefault.a2));
    EXPECT_FALSE(is_hurwitz(Mat2::identity()));
    EXPECT_TRUE(is_hurwitz(-1.0 * Mat2::identity()));
    EXPECT_DOUBLE_EQ(kDefault.a1.trace(), -0.1);
    EXPECT_DOUBLE_EQ(kDefault.a1.det(), 1.0);
}

TEST(Hurwitz, DefaultsAreExact) {
    EXPECT_EQ(kDefault.a1, (Mat2{0.0, 2.0, -0.5, -0.1}));
    EXPECT_EQ(kDefault.a2, (Mat2{-0.1, 0.5, -2.0, 0.0}));
}

TEST(SolveLyapunov, NegativeIdentity) {
    const auto p = solve_lyapunov(-1.0 * Mat2::identity());
    EXPECT_DOUBLE_EQ(p.p11, 0.5);
    EXPECT_DOUBLE_EQ(p.p12, 0.0);
    EXPECT_DOUBLE_EQ(p.p22, 0.5);
    EXPECT_DOUBLE_EQ(p.c1, 0.5);
    EXPECT_DOUBLE_EQ(p.c2, 0.5);
}

TEST(SolveLyapunov, SecondModeMatchesReference) {
    // reference solution from an independent dense solver
    const auto p = solve_lyapunov(kDefault.a2);
    EXPECT_NEAR(p.p11, 25.0, 1e-12);
    EXPECT_NEAR(p.p12, -1.0, 1e-12);
    EXPECT_NEAR(p.p22, 6.3, 1e-12);
    EXPECT_NEAR(p.c1, 6.246676119584097, 1e-12);
    EXPECT_NEAR(p.c2, 25.053323880415903, 1e-12);
    EXPECT_LE(lyapunov_residual(kDefault.a2, p.matrix()), 1e-12);
}

TEST(SolveLyapunov, MidpointIsScaledIdentity) {
    const Mat2 a = kDefault.at(0.5);
    EXPECT_NEAR(a.a11, -0.05, 1e-15);
    EXPECT_NEAR(a.a12, 1.25, 1e-15);
    EXPECT_NEAR(a.a21, -1.25, 1e-15);
    EXPECT_NEAR(a.a22, -0.05, 1e-15);
    const auto p = solve_lyapunov(a);
    EXPECT_NEAR(p.p11, 10.0, 1e-11);
    EXPECT_NEAR(p.p12, 0.0, 1e-11);
    EXPECT_NEAR(p.p22, 10.0, 1e-11);
    EXPECT_GT(p.c1, 0.0);
}

TEST(SolveLyapunov, RejectsNonHurwitz) {
    EXPECT_THROW((void)solve_lyapunov(Mat2::identity()), NotHurwitz);
    EXPECT_THROW((void)solve_lyapunov(Mat2{0.0, 1.0, -1.0, 0.0}), NotHurwitz);
    EXPECT_THROW((void)solve_lyapunov(Mat2{NAN, 0.0, 0.0, -1.0}), NotHurwitz);
}

TEST(SolveLyapunov, GridResidualAndBounds) {
    for (int i = 0; i <= 100; ++i) {
        const double l = i / 100.0;
        const Mat2 a = kDefault.at(l);
        ASSERT_TRUE(is_hurwitz(a)) << l;
        const auto p = solve_lyapunov(a);
        EXPECT_LE(lyapunov_residual(a, p.matrix()), 1e-12) << l;
        EXPECT_LE(p.c1, p.c2);
        for (int j = 0; j < 100; ++j) {
            const double th = 2.0 * std::numbers::pi * j / 100.0;
            const Vec2 x{3.0 * std::cos(th), 3.0 * std::sin(th)};
            const double w = p.form(x);
            EXPECT_LE(p.c1 * x.norm2_sq(), w * (1 + 1e-13));
            EXPECT_GE(p.c2 * x.norm2_sq(), w * (1 - 1e-13));
        }
    }
}

TEST(SolveLyapunov, OrthogonalSimilarityKeepsEigenvalues) {
    for (double angle : {0.3, 1.1, 2.7}) {
        const Mat2 s{std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle)};
        for (double l : {0.0, 0.25, 0.8, 1.0}) {
            const Mat2 a = kDefault.at(l);
            const auto p = solve_lyapunov(a);
            const auto q = solve_lyapunov(s.transposed() * a * s);
            EXPECT_NEAR(p.c1, q.c1, 1e-10);
            EXPECT_NEAR(p.c2, q.c2, 1e-10);
        }
    }
}

TEST(SymEigen, ClosedForm) {
    const auto ev = sym_eigenvalues(2.0, 1.0, 2.0);
    EXPECT_DOUBLE_EQ(ev[0], 1.0);
    EXPECT_DOUBLE_EQ(ev[1], 3.0);
    const auto tiny = sym_eigenvalues(1.0, 0.0, 1e-20);
    EXPECT_DOUBLE_EQ(tiny[0], 1e-20);
}

TEST(CapitalLambda, ZeroIsFeasibleWithUnitMargin) {
    const auto p0 = solve_lyapunov(kDefault.at(0.0));
    EXPECT_NEAR(decay_margin(kDefault, p0, 0.0), 1.0, 1e-12);
}

TEST(CapitalLambda, BisectionBracketsBoundary) {
    const auto p0 = solve_lyapunov(kDefault.at(0.0));
    const double cap = find_capital_lambda(kDefault, p0);
    EXPECT_GT(cap, 0.0);
    EXPECT_LT(cap, 1.0);
    EXPECT_GE(decay_margin(kDefault, p0, cap - 1e-9), 0.5);
    EXPECT_LT(decay_margin(kDefault, p0, cap + 1e-6), 0.5);
    // independent fine-grid scan plus float bisection
    EXPECT_NEAR(cap, 0.010887501745916626, 1e-8);
}

TEST(CapitalLambda, CoarseGridAgrees) {
    const auto p0 = solve_lyapunov(kDefault.at(0.0));
    double last_ok = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        const double l = i / 1000.0;
        if (decay_margin(kDefault, p0, l) >= 0.5) last_ok = l;
        else break;
    }
    EXPECT_NEAR(find_capital_lambda(kDefault, p0), last_ok, 1e-3);
}

TEST(CapitalLambda, MarginIsConfigurable) {
    const auto p0 = solve_lyapunov(kDefault.at(0.0));
    const double strict = find_capital_lambda(kDefault, p0, LambdaSearch{0.9, 1000, 1e-9});
    const double loose = find_capital_lambda(kDefault, p0, LambdaSearch{0.1, 1000, 1e-9});
    EXPECT_LT(strict, loose);
    EXPECT_THROW((void)find_capital_lambda(kDefault, p0, LambdaSearch{1.5, 1000, 1e-9}), NoFeasibleLambda);
}

TEST(StabilityConstants, Formulas) {
    const auto a = envelope_constants(0.5, 0.5);
    EXPECT_DOUBLE_EQ(a.k, std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(a.p, 0.5);
    const auto b = envelope_constants(1.0, 4.0);
    EXPECT_DOUBLE_EQ(b.k, std::sqrt(8.0));
    EXPECT_DOUBLE_EQ(b.p, 1.0 / 16.0);
    EXPECT_THROW((void)envelope_constants(0.0, 1.0), SingularSystem);
}

TEST(StabilityConstants, DefaultSystem) {
    const auto c = stability_constants();
    EXPECT_NEAR(c.c1, 6.246676119584097, 1e-12);
    EXPECT_NEAR(c.c2, 25.053323880415903, 1e-12);
    EXPECT_NEAR(c.k, 2.832195182568878, 1e-12);
    EXPECT_NEAR(c.p, 0.009978715845980986, 1e-15);
    EXPECT_NEAR(c.capital_lambda, 0.010887501745916626, 1e-8);
}
