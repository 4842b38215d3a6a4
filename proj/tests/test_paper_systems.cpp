#include "rfcdelay/paper_systems.hpp"
#include "rfcdelay/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace rfcdelay;

namespace {

double max_dev(const Trajectory& a, const Trajectory& b, double t0, double t1, std::size_t comps_a_offset = 0) {
    double worst = 0.0;
    const int n = 400;
    for (int i = 0; i <= n; ++i) {
        const double t = t0 + (t1 - t0) * i / n;
        const auto x = a.eval(t);
        const auto y = b.eval(t);
        for (std::size_t c = 0; c < y.size(); ++c) worst = std::max(worst, std::abs(x[c + comps_a_offset] - y[c]));
    }
    return worst;
}

HistoryFn random_history(Rng& rng, double tau, std::size_t dim, double bound) {
    const int knots = rng.integer(2, 8);
    std::vector<double> ts{-tau};
    for (int i = 1; i + 1 < knots; ++i) ts.push_back(-tau + tau * i / (knots - 1) + 0.3 * tau / knots * (rng.uniform() - 0.5));
    ts.push_back(0.0);
    std::vector<std::vector<double>> vals;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        std::vector<double> v(dim);
        for (auto& c : v) c = rng.uniform(-bound, bound);
        vals.push_back(v);
    }
    return HistoryFn::linear(ts, vals);
}

// x' = f(x, x(t - 0.4), x(t - 1.0)), two states
DiscreteDelaySystem two_delay_system() {
    return DiscreteDelaySystem(2, 0, {0.4, 1.0}, [](auto x, auto d, auto, auto dx) {
        dx[0] = -x[0] + 0.5 * d[1] * d[2] + std::sin(d[0]);
        dx[1] = x[0] - 0.3 * x[1] + d[3] - d[1];
    });
}

}  // namespace

TEST(Phi, Saturation) {
    EXPECT_EQ(phi(-1.0), 0.0);
    EXPECT_EQ(phi(0.5), 0.5);
    EXPECT_EQ(phi(2.0), 1.0);
    EXPECT_EQ(phi(0.0), 0.0);
    EXPECT_EQ(phi(1.0), 1.0);
    for (double r = -3.0; r < 3.0; r += 0.01) {
        EXPECT_GE(phi(r), 0.0);
        EXPECT_LE(phi(r), 1.0);
        EXPECT_LE(phi(r), phi(r + 0.01));
    }
}

TEST(G, HandValues) {
    EXPECT_EQ(g({0.0, 0.0}, 0.3), (Vec2{0.0, 0.0}));
    const Vec2 lo = g({1.0, 0.0}, -5.0);
    EXPECT_DOUBLE_EQ(lo.x1, -0.2);
    EXPECT_DOUBLE_EQ(lo.x2, -4.0);
    const Vec2 hi = g({1.0, 0.0}, 5.0);
    EXPECT_DOUBLE_EQ(hi.x1, 0.0);
    EXPECT_DOUBLE_EQ(hi.x2, -1.0);
}

TEST(Cascade, ZeroHistoryStaysZero) {
    const auto out = integrate(cascade_system(1.0), HistoryFn::zero(1.0, 3), 5.0);
    ASSERT_TRUE(out.completed());
    EXPECT_EQ(out.trajectory->sup_norm(0.0, 5.0), 0.0);
}

TEST(Cascade, ZComponentIsExponential) {
    IntegratorOptions opts;
    Rng rng(3);
    const auto hist = random_history(rng, 1.2, 3, 0.5);
    const auto out = integrate(cascade_system(1.2), hist, 10.0, opts);
    ASSERT_TRUE(out.completed());
    const double z0 = hist.eval(0.0)[0];
    for (int i = 0; i < 100; ++i) {
        const double t = 10.0 * i / 99;
        EXPECT_NEAR(out.trajectory->eval(t)[0], z0 * std::exp(-t), 10 * opts.rel_tol);
    }
}

TEST(Cascade, MatchesPlanarDrivenByDelayedHistory) {
    const double tau = 1.3;
    IntegratorOptions opts;
    const auto hist = HistoryFn::linear({-tau, -0.5, 0.0}, {{0.0, 0.5, -0.2}, {1.4, 0.3, 0.1}, {0.2, 0.6, 0.4}});
    const auto cas = integrate(cascade_system(tau), hist, tau, opts);
    // v(t) = z0(t - tau)
    const auto zpart = InputSignal::piecewise_linear({-tau, -0.5, 0.0}, std::vector<double>{0.0, 1.4, 0.2});
    const auto pl = integrate(planar_system(), HistoryFn::constant(0.0, {0.6, 0.4}), InputSignal::time_shift(zpart, -tau),
                              tau, opts);
    ASSERT_TRUE(cas.completed() && pl.completed());
    // different state dimensions give different step sequences; both carry
    // global errors amplified by roughly exp(L * tau) with L ~ 4 here
    EXPECT_LE(max_dev(*cas.trajectory, *pl.trajectory, 0.0, tau, 1), 10 * opts.rel_tol * std::exp(4.0 * tau));
}

TEST(Embedding, ConstantHistory) {
    const auto hist = HistoryFn::constant(1.0, {0.3, -0.7});
    const auto emb = embed_history_as_inputs(hist, {0.4, 1.0});
    EXPECT_EQ(emb.xi0, (std::vector<double>{0.3, -0.7}));
    ASSERT_EQ(emb.v.size(), 2u);
    for (const auto& v : emb.v) {
        EXPECT_EQ(v.eval(0.0), (std::vector<double>{0.3, -0.7}));
        EXPECT_EQ(v.eval(0.39), (std::vector<double>{0.3, -0.7}));
        EXPECT_EQ(v.eval(0.4), (std::vector<double>{0.0, 0.0}));
        EXPECT_EQ(v.eval(5.0), (std::vector<double>{0.0, 0.0}));
    }
}

TEST(Embedding, NormsNeverIncrease) {
    Rng rng(17);
    for (int k = 0; k < 30; ++k) {
        const auto hist = random_history(rng, 1.0, 2, 3.0);
        const auto emb = embed_history_as_inputs(hist, {0.4, 1.0});
        for (const auto& v : emb.v) EXPECT_LE(v.sup_norm(0.0, 10.0), hist.norm());
        EXPECT_LE(max_norm(emb.xi0), hist.norm());
    }
}

TEST(Embedding, NondelayedRunMatchesDelayRunUpToFirstDelay) {
    const auto sys = two_delay_system();
    const auto assoc = associated_system(sys);
    IntegratorOptions opts;
    opts.abs_tol = opts.rel_tol;
    Rng rng(23);
    for (int k = 0; k < 10; ++k) {
        const auto hist = random_history(rng, 1.0, 2, 1.0);
        const auto emb = embed_history_as_inputs(hist, sys.delays());
        const auto a = integrate(sys, hist, 0.4, opts);
        const auto b = integrate(assoc, HistoryFn::constant(0.0, emb.xi0), emb.stacked(), 0.4, opts);
        ASSERT_TRUE(a.completed() && b.completed());
        EXPECT_LE(max_dev(*a.trajectory, *b.trajectory, 0.0, 0.4), 10 * opts.rel_tol);
    }
}

TEST(HistoryFromInputs, SingleDelayWindowThenLinearGap) {
    const auto v = InputSignal::piecewise_linear({0.0, 1.0}, std::vector<double>{1.0, 3.0});
    const auto h = history_from_inputs({0.0}, {v}, {2.0});
    EXPECT_EQ(h.tau(), 2.0);
    EXPECT_DOUBLE_EQ(h.eval(-2.0)[0], 1.0);
    EXPECT_DOUBLE_EQ(h.eval(-1.5)[0], 2.0);
    EXPECT_DOUBLE_EQ(h.eval(-1.0)[0], 3.0);
    EXPECT_DOUBLE_EQ(h.eval(-0.5)[0], 1.5);
    EXPECT_DOUBLE_EQ(h.eval(0.0)[0], 0.0);
}

TEST(HistoryFromInputs, ConstantInputsGiveConstantHistory) {
    const auto c = InputSignal::constant(std::vector<double>{0.25, -1.0});
    const auto h = history_from_inputs({0.25, -1.0}, {c, c}, {0.4, 1.0});
    for (double s = -1.0; s <= 0.0; s += 0.01) EXPECT_EQ(h.eval(s), (std::vector<double>{0.25, -1.0}));
    EXPECT_EQ(h.norm(), 1.0);
}

TEST(HistoryFromInputs, OverlapIsRejected) {
    const auto c = InputSignal::constant(1.0);
    EXPECT_THROW((void)history_from_inputs({1.0}, {c, c}, {0.4, 1.0}, 0.6), WindowOverlap);
    EXPECT_THROW((void)history_from_inputs({1.0}, {c}, {1.0}, 1.0), WindowOverlap);
    EXPECT_NO_THROW((void)history_from_inputs({1.0}, {c, c}, {0.4, 1.0}, 0.3));
}

TEST(HistoryFromInputs, DelayRunMatchesNondelayedRun) {
    const auto sys = two_delay_system();
    const auto assoc = associated_system(sys);
    IntegratorOptions opts;
    Rng rng(29);
    const double half = 0.2;  // tau* / 2 with tau* = 0.4
    for (int k = 0; k < 10; ++k) {
        std::vector<InputSignal> v;
        for (int i = 0; i < 2; ++i) {
            std::vector<double> ts{0.0, 0.07, 0.15, 0.3};
            std::vector<std::vector<double>> vals;
            for (std::size_t j = 0; j < ts.size(); ++j) vals.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
            v.push_back(InputSignal::piecewise_linear(ts, vals));
        }
        const std::vector<double> xi0{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const auto h = history_from_inputs(xi0, v, sys.delays());
        EXPECT_EQ(h.eval(0.0), xi0);
        const auto a = integrate(sys, h, half, opts);
        const auto b = integrate(assoc, HistoryFn::constant(0.0, xi0), InputSignal::stack(v), half, opts);
        ASSERT_TRUE(a.completed() && b.completed());
        EXPECT_LE(max_dev(*a.trajectory, *b.trajectory, 0.0, half), 10 * opts.rel_tol);
    }
}

TEST(HistoryFromInputs, JumpsLandOnTheSameMesh) {
    // piecewise-constant inputs make the history jump; the delay run must see
    // each jump on the same side as the input run does
    const double tau = 1.284858627;
    const auto sys = cascade_system(tau);
    const auto assoc = associated_cascade(tau);
    Rng rng(41);
    for (int k = 0; k < 20; ++k) {
        std::vector<double> bps;
        for (double t = rng.uniform(0.0, 0.1); t < tau; t += rng.uniform(0.01, 0.15)) bps.push_back(t);
        std::vector<std::vector<double>> vals;
        for (std::size_t j = 0; j <= bps.size(); ++j) vals.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        const auto v = InputSignal::piecewise_constant(bps, vals);
        const std::vector<double> xi0{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const auto h = history_from_inputs(xi0, {v}, {tau});
        const auto a = integrate(sys, h, 0.5 * tau);
        const auto b = integrate(assoc, HistoryFn::constant(0.0, xi0), v, 0.5 * tau);
        ASSERT_TRUE(a.completed() && b.completed());
        EXPECT_EQ(a.trajectory->step_count(), b.trajectory->step_count());
        EXPECT_EQ(a.rejected_steps, b.rejected_steps);
        EXPECT_LE(max_dev(*a.trajectory, *b.trajectory, 0.0, 0.5 * tau), 1e-12);
    }
}

TEST(Greedy, HandValues) {
    const auto p = greedy_worst_switch();
    EXPECT_EQ(p.rule({1.0, 1.0}), 1.0);
    EXPECT_EQ(p.rule({1.0, -1.0}), 0.0);
    EXPECT_EQ(p.rule({0.0, 0.0}), 1.0);
    const PlanarMatrices m;
    EXPECT_NEAR(quad_form(m.a1 + m.a1.transposed(), {1.0, 1.0}), 2.8, 1e-15);
    EXPECT_NEAR(quad_form(m.a2 + m.a2.transposed(), {1.0, 1.0}), -3.2, 1e-15);
}

TEST(Greedy, EscapesFromUnitCircleBeforeTwenty) {
    for (double angle : {0.0, 0.7, 2.0, 4.1}) {
        const Vec2 x0{std::cos(angle), std::sin(angle)};
        const auto run = simulate_switching({}, greedy_worst_switch(), x0, 20.0);
        EXPECT_TRUE(run.escaped) << angle;
        EXPECT_LT(run.t_escape, 20.0);
        EXPECT_GE(run.peak, 1e6);
        EXPECT_LE(run.schedule.sup_norm(0.0, 20.0), 1.0);
    }
}

TEST(Greedy, FixedDwellStallsButScaledDwellEscapes) {
    const auto fixed = simulate_switching({}, greedy_worst_switch({}, 1e-3, false), {1.0, 0.0}, 3.0);
    EXPECT_FALSE(fixed.escaped);
    const auto scaled = simulate_switching({}, greedy_worst_switch({}, 1e-3, true), {1.0, 0.0}, 3.0);
    EXPECT_TRUE(scaled.escaped);
}

TEST(ConstantInput, LyapunovFunctionNonincreasing) {
    const PlanarParams params;
    for (double c : {-1.0, 0.0, 0.2, 0.5, 0.9, 1.0, 3.0}) {
        const auto p = solve_lyapunov(params.mats.at(phi(c)));
        for (double angle : {0.0, 1.0, 2.5}) {
            const Vec2 x0{2.0 * std::cos(angle), 2.0 * std::sin(angle)};
            const auto out = integrate(planar_system(params), HistoryFn::constant(0.0, {x0.x1, x0.x2}),
                                       InputSignal::constant(c), 10.0);
            ASSERT_TRUE(out.completed());
            const double w0 = p.form(x0);
            double prev = w0;
            for (int i = 1; i <= 2000; ++i) {
                const auto x = out.trajectory->eval(10.0 * i / 2000);
                const double w = p.form({x[0], x[1]});
                EXPECT_LE(w - prev, 1e-6 * w0) << c << " " << i;
                prev = w;
            }
        }
    }
}

TEST(DefaultDelay, OneAndAHalfEscapeTimes) {
    const double t_esc = greedy_escape_time();
    EXPECT_GT(t_esc, 0.5);
    EXPECT_LT(t_esc, 1.0);
    EXPECT_DOUBLE_EQ(default_cascade_delay(), 1.5 * t_esc);
}
