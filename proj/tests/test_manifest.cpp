#include "rfcdelay/manifest.hpp"
#include "rfcdelay/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <string>

using namespace rfcdelay;

namespace {

std::string config_error(const Json& j) {
    try {
        (void)RunManifest::from_json(j);
    } catch (const ConfigInvalid& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Manifest, DefaultsCarryTheExactMatrices) {
    const RunManifest m;
    EXPECT_EQ(m.system.a1, (Mat2{0.0, 2.0, -0.5, -0.1}));
    EXPECT_EQ(m.system.a2, (Mat2{-0.1, 0.5, -2.0, 0.0}));
    EXPECT_EQ(m.system.dwell, 1e-3);
    EXPECT_EQ(m.system.tau, 0.0);
    EXPECT_EQ(m.rfc_sweep.deltas.size(), 7u);
    EXPECT_EQ(m.es_check.n_ics, 200);
    EXPECT_EQ(m.uga_table.samples, 50);
    EXPECT_EQ(m.equiv_check.pairs, 50);
    const auto cfg = m.probe_config();
    EXPECT_EQ(cfg.params.mats.a1, m.system.a1);
    EXPECT_EQ(cfg.lambda_search.margin, 0.5);
}

TEST(Manifest, DefaultRoundTrip) {
    const RunManifest m;
    const Json j = m.to_json();
    EXPECT_EQ(RunManifest::from_json(j).to_json(), j);
    EXPECT_TRUE(j["integrator"]["h_max"].is_null());
    EXPECT_TRUE(j["lyapunov"]["lambda"].is_null());
}

TEST(Manifest, EmptyObjectGivesDefaults) {
    EXPECT_EQ(RunManifest::from_json(Json::object()).to_json(), RunManifest{}.to_json());
}

TEST(Manifest, RandomizedRoundTripIsLossless) {
    for (std::uint64_t s = 0; s < 40; ++s) {
        Rng rng(s);
        RunManifest m;
        m.command = command_names()[static_cast<std::size_t>(rng.integer(0, 7))];
        m.seed = rng.bits();
        m.threads = static_cast<unsigned>(rng.integer(0, 8));
        m.system.a1 = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        m.system.tau = rng.uniform(0.1, 3.0);
        m.system.dwell = rng.uniform(1e-4, 1e-2);
        m.system.state_scaled = rng.integer(0, 1) == 1;
        m.integrator.rel_tol = std::pow(10.0, -rng.uniform(6, 12));
        m.integrator.h_max = rng.integer(0, 1) ? rng.uniform(0.01, 1.0) : std::numeric_limits<double>::infinity();
        m.integrator.max_steps = rng.bits() >> 20;
        if (m.integrator.max_steps == 0) m.integrator.max_steps = 1;
        if (rng.integer(0, 1)) m.lyapunov.lambda = rng.uniform();
        m.simulate.system = rng.integer(0, 1) ? "planar" : "associated";
        m.simulate.history = Json{{"kind", "constant"}, {"value", {rng.uniform(), rng.uniform()}}};
        m.simulate.x0 = {rng.uniform(), rng.uniform()};
        m.rfc_sweep.deltas = {0.3, 0.1 * rng.uniform(0.1, 1.0)};
        m.uga_table.r_list = {rng.uniform(0.5, 5.0)};
        m.estimate_r.budget = rng.integer(1, 500);
        const Json j = m.to_json();
        const auto back = RunManifest::from_json(j);
        EXPECT_EQ(back.to_json(), j) << "seed " << s;
        EXPECT_EQ(back.seed, m.seed);
        EXPECT_EQ(back.system.a1, m.system.a1);
        EXPECT_EQ(back.integrator.h_max, m.integrator.h_max);
        EXPECT_EQ(back.lyapunov.lambda, m.lyapunov.lambda);
        // text form as well
        EXPECT_EQ(RunManifest::from_json(Json::parse(j.dump())).to_json(), j) << "seed " << s;
    }
}

TEST(Manifest, ErrorsNameTheSchemaPath) {
    EXPECT_NE(config_error({{"bogus", 1}}).find("$.bogus: unknown key"), std::string::npos);
    EXPECT_NE(config_error({{"system", {{"tau", "x"}}}}).find("$.system.tau: expected a number"), std::string::npos);
    EXPECT_NE(config_error({{"rfc_sweep", {{"extra", true}}}}).find("$.rfc_sweep.extra"), std::string::npos);
    EXPECT_NE(config_error({{"command", "fly"}}).find("$.command"), std::string::npos);
    EXPECT_NE(config_error({{"system", {{"A1", {{1, 2}, {3}}}}}}).find("$.system.A1"), std::string::npos);
    EXPECT_NE(config_error({{"seed", -1}}).find("$.seed"), std::string::npos);
    EXPECT_NE(config_error({{"seed", 1.5}}).find("$.seed: expected an integer"), std::string::npos);
    EXPECT_NE(config_error({{"simulate", {{"audit", 1}}}}).find("$.simulate.audit: expected true or false"),
              std::string::npos);
    EXPECT_NE(config_error({{"output", {{"dir", 3}}}}).find("$.output.dir: expected a string"), std::string::npos);
}

TEST(Manifest, ValidationRejectsOutOfRangeValues) {
    EXPECT_NE(config_error({{"integrator", {{"rel_tol", 0.0}}}}).find("$.integrator.rel_tol"), std::string::npos);
    EXPECT_NE(config_error({{"system", {{"dwell", -1.0}}}}).find("$.system.dwell"), std::string::npos);
    EXPECT_NE(config_error({{"simulate", {{"system", "torus"}}}}).find("$.simulate.system"), std::string::npos);
    EXPECT_NE(config_error({{"simulate", {{"history", "ones"}}}}).find("$.simulate.history"), std::string::npos);
    EXPECT_NE(config_error({{"rfc_sweep", {{"deltas", {0.1, 0.2}}}}}).find("$.rfc_sweep.deltas[1]"),
              std::string::npos);
    EXPECT_NE(config_error({{"lyapunov", {{"lambda", 2.0}}}}).find("$.lyapunov.lambda"), std::string::npos);
    EXPECT_NE(config_error({{"escape", {{"x0", {1.0}}}}}).find("$.escape.x0"), std::string::npos);
    EXPECT_NE(config_error({{"uga_table", {{"samples", 0}}}}).find("$.uga_table.samples"), std::string::npos);
    EXPECT_NE(config_error({{"estimate_r", {{"budget", 0}}}}).find("$.estimate_r.budget"), std::string::npos);
}

TEST(Manifest, ProbeConfigFollowsSections) {
    RunManifest m;
    m.system.tau = 2.0;
    m.system.state_scaled = false;
    m.integrator.abs_tol = 1e-8;
    m.seed = 99;
    const auto cfg = m.probe_config();
    EXPECT_EQ(cfg.resolved_tau(), 2.0);
    EXPECT_FALSE(cfg.state_scaled);
    EXPECT_EQ(cfg.integrator.abs_tol, 1e-8);
    EXPECT_EQ(cfg.seed, 99u);
}

TEST(SignalJson, BuildsEachKind) {
    const auto c = signal_from_json({{"kind", "constant"}, {"value", {1.0, -2.0}}});
    EXPECT_EQ(c.eval(3.0), (std::vector<double>{1.0, -2.0}));

    const auto pc = signal_from_json({{"kind", "piecewise_constant"}, {"breakpoints", {1.0}}, {"values", {0.0, 1.0}}});
    EXPECT_EQ(pc.value(0.5), 0.0);
    EXPECT_EQ(pc.value(1.0, Side::left), 0.0);
    EXPECT_EQ(pc.value(1.0, Side::right), 1.0);

    const auto pl = signal_from_json({{"kind", "piecewise_linear"}, {"knots", {0.0, 2.0}}, {"values", {0.0, 4.0}}});
    EXPECT_DOUBLE_EQ(pl.value(0.5), 1.0);

    const auto et = signal_from_json({{"kind", "exponential_tail"}, {"initial", 2.0}, {"rate", 1.0}});
    EXPECT_NEAR(et.value(1.0), 2.0 * std::exp(-1.0), 1e-15);

    const auto ts = signal_from_json({{"kind", "time_shift"}, {"signal", Json::parse(R"({"kind":"piecewise_linear","knots":[0,2],"values":[0,4]})")}, {"offset", 1.0}});
    EXPECT_DOUBLE_EQ(ts.value(0.0), 2.0);

    const auto st = signal_from_json(Json::parse(
        R"({"kind":"stack","parts":[{"kind":"constant","value":1},{"kind":"constant","value":[2,3]}]})"));
    EXPECT_EQ(st.dim(), 3u);
    EXPECT_EQ(st.eval(0.0), (std::vector<double>{1.0, 2.0, 3.0}));

    const auto zo = signal_from_json(Json::parse(
        R"({"kind":"zero_outside","signal":{"kind":"constant","value":5},"start":0,"end":1})"));
    EXPECT_EQ(zo.value(0.5), 5.0);
    EXPECT_EQ(zo.value(2.0), 0.0);

    const auto cc = signal_from_json(Json::parse(
        R"({"kind":"concat","first":{"kind":"constant","value":1},"second":{"kind":"constant","value":2},"t_switch":1})"));
    EXPECT_EQ(cc.value(0.5), 1.0);
    EXPECT_EQ(cc.value(1.5), 2.0);

    const auto ma = signal_from_json(Json::parse(
        R"({"kind":"moving_average","schedule":{"kind":"piecewise_constant","breakpoints":[1],"values":[0,1]},"width":0.5})"));
    EXPECT_DOUBLE_EQ(ma.value(1.0), 0.5);

    const auto tz = signal_from_json(Json::parse(R"({"kind":"trapezoid","count":2})"));
    EXPECT_EQ(tz.dim(), 1u);
}

TEST(SignalJson, GreedyScheduleMatchesTheSwitchingRun) {
    const auto s = signal_from_json(Json::parse(R"({"kind":"greedy_schedule","T":0.5})"));
    const auto run = simulate_switching({}, greedy_worst_switch(), {1.0, 0.0}, 0.5);
    EXPECT_EQ(s.breakpoints(0.0, 0.5), run.schedule.breakpoints(0.0, 0.5));
}

TEST(SignalJson, ErrorsCarryNestedPaths) {
    auto err = [](const char* text) {
        try {
            (void)signal_from_json(Json::parse(text), "$.simulate.input");
        } catch (const ConfigInvalid& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(err(R"({"kind":"wave"})").find("$.simulate.input.kind"), std::string::npos);
    EXPECT_NE(err(R"({"kind":"constant","value":1,"x":2})").find("$.simulate.input.x: unknown key"),
              std::string::npos);
    EXPECT_NE(err(R"({"kind":"stack","parts":[{"kind":"constant","value":1},{"kind":"constant"}]})")
                  .find("$.simulate.input.parts[1].value: missing"),
              std::string::npos);
    EXPECT_NE(err(R"({"kind":"piecewise_constant","values":[[1,2],[3]]})").find("$.simulate.input.values[1]"),
              std::string::npos);
    EXPECT_NE(err(R"({"kind":"piecewise_constant","breakpoints":[2,1],"values":[0,1,2]})").find("$.simulate.input"),
              std::string::npos);
    EXPECT_NE(err(R"([1,2])").find("$.simulate.input"), std::string::npos);
}
