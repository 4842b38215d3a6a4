#pragma once

// The planar switched system x' = (1 + |x|^2) A(phi(u)) x, its delayed
// cascade z' = -z, x' = g(x, z(t - tau)), the embeddings between delay
// histories and inputs of the associated nondelayed system, and a greedy
// destabilizing switching law.

#include "rfcdelay/errors.hpp"
#include "rfcdelay/history.hpp"
#include "rfcdelay/integrate.hpp"
#include "rfcdelay/lyapunov.hpp"
#include "rfcdelay/signal.hpp"
#include "rfcdelay/system.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

namespace rfcdelay {

struct PlanarParams {
    PlanarMatrices mats{};
};

/// Saturation to [0, 1].
[[nodiscard]] constexpr double phi(double r) noexcept {
    if (r < 0.0) return 0.0;
    if (r > 1.0) return 1.0;
    return r;
}

[[nodiscard]] constexpr Vec2 g(const Vec2& x, double u, const PlanarParams& params = {}) noexcept {
    const Vec2 ax = params.mats.at(phi(u)) * x;
    const double s = 1.0 + x.norm2_sq();
    return {s * ax.x1, s * ax.x2};
}

/// Planar system: state (x1, x2), one input u.
[[nodiscard]] inline DiscreteDelaySystem planar_system(const PlanarParams& params = {}) {
    return DiscreteDelaySystem(
        2, 1, {},
        [params](std::span<const double> x, std::span<const double>, std::span<const double> u, std::span<double> dx) {
            const Vec2 r = g({x[0], x[1]}, u[0], params);
            dx[0] = r.x1;
            dx[1] = r.x2;
        },
        "planar")
        .with_level_kinks({{LevelKink::Source::input, 0, {0.0, 1.0}}});
}

/// Cascade: state (z, x1, x2), single delay tau acting through z only.
[[nodiscard]] inline DiscreteDelaySystem cascade_system(double tau, const PlanarParams& params = {}) {
    if (!(tau > 0.0)) throw InvalidSystem("cascade delay must be positive");
    return DiscreteDelaySystem(
        3, 0, {tau},
        [params](std::span<const double> x, std::span<const double> d, std::span<const double>, std::span<double> dx) {
            dx[0] = -x[0];
            const Vec2 r = g({x[1], x[2]}, d[0], params);
            dx[1] = r.x1;
            dx[2] = r.x2;
        },
        "cascade")
        .with_level_kinks({{LevelKink::Source::delayed, 0, {0.0, 1.0}}});
}

/// Nondelayed system of the cascade with the delayed state replaced by an input v in R^3.
[[nodiscard]] inline DiscreteDelaySystem associated_cascade(double tau, const PlanarParams& params = {}) {
    return associated_system(cascade_system(tau, params));
}

// ---- embeddings -----------------------------------------------------------

struct EmbeddedInputs {
    std::vector<double> xi0;
    std::vector<InputSignal> v;  // one per delay

    /// (v_1, ..., v_l, u) stacked as the input of the associated system.
    [[nodiscard]] InputSignal stacked(const std::optional<InputSignal>& u = std::nullopt) const {
        std::vector<InputSignal> parts(v.begin(), v.end());
        if (u) parts.push_back(*u);
        return InputSignal::stack(std::move(parts));
    }
};

/// xi0 = phi(0); v_i(t) = phi(t - tau_i) on [0, tau_1) and 0 elsewhere.
[[nodiscard]] inline EmbeddedInputs embed_history_as_inputs(const HistoryFn& history, const std::vector<double>& delays) {
    if (delays.empty()) throw InvalidSystem("embedding needs at least one delay");
    if (std::abs(history.tau() - delays.back()) > 1e-12 * std::max(1.0, delays.back())) {
        throw BadHistoryDomain("history length does not match the longest delay");
    }
    EmbeddedInputs out;
    out.xi0 = history.eval(0.0);
    const double tau1 = delays.front();
    for (double tau_i : delays) {
        out.v.push_back(InputSignal::zero_outside(InputSignal::time_shift(history.body(), -tau_i), 0.0, tau1));
    }
    return out;
}

/// Continuous history with phi(s) = v_i(s + tau_i) on [-tau_i, -tau_i + w], linear
/// on the gaps and phi(0) = xi0, where w defaults to tau* / 2.
[[nodiscard]] inline HistoryFn history_from_inputs(const std::vector<double>& xi0, const std::vector<InputSignal>& v,
                                                   const std::vector<double>& delays, double window = -1.0) {
    if (delays.empty() || v.size() != delays.size()) throw InvalidSystem("need one input per delay");
    for (const auto& vi : v) {
        if (vi.dim() != xi0.size()) throw InvalidSystem("input dimension does not match the state");
    }
    double tau_star = delays.front();
    for (std::size_t i = 1; i < delays.size(); ++i) tau_star = std::min(tau_star, delays[i] - delays[i - 1]);
    const double w = window < 0.0 ? 0.5 * tau_star : window;
    if (!(w > 0.0)) throw WindowOverlap("window length must be positive");
    // windows [-tau_i, -tau_i + w] ordered left to right (largest delay first)
    for (std::size_t i = delays.size(); i-- > 0;) {
        const double right = -delays[i] + w;
        const double next_left = i == 0 ? 0.0 : -delays[i - 1];
        if (!(right < next_left)) {
            throw WindowOverlap("window of delay " + std::to_string(delays[i]) + " reaches " + std::to_string(right) +
                                " which is not left of " + std::to_string(next_left));
        }
    }
    const double tau = delays.back();
    std::optional<InputSignal> body;
    auto append = [&](const InputSignal& piece, double start) {
        body = body ? InputSignal::concat(*body, piece, start) : piece;
    };
    for (std::size_t i = delays.size(); i-- > 0;) {
        const double left = -delays[i];
        const double right = left + w;
        append(InputSignal::time_shift(v[i], delays[i]), left);
        const double gap_end = i == 0 ? 0.0 : -delays[i - 1];
        const auto a = v[i].eval(w, Side::left);
        const auto b = i == 0 ? xi0 : v[i - 1].eval(0.0);
        append(InputSignal::piecewise_linear({right, gap_end}, std::vector<std::vector<double>>{a, b}), right);
    }
    // pin phi(0) = xi0 exactly
    append(InputSignal::constant(xi0), 0.0);
    return HistoryFn::from_signal(tau, *body);
}

// ---- destabilizing switching ---------------------------------------------

struct SwitchingPolicy {
    double dwell = 1e-3;
    /// When set, each piece lasts dwell / (1 + |x|^2): a constant dwell in the
    /// time scale of the linear part, which keeps up with the quadratic speed-up.
    bool state_scaled = true;
    std::function<double(const Vec2&)> rule;

    [[nodiscard]] double piece_length(const Vec2& x) const noexcept {
        return state_scaled ? dwell / (1.0 + x.norm2_sq()) : dwell;
    }
};

/// lambda maximizing x^T (A(lambda) + A(lambda)^T) x over {0, 1}; ties go to 1.
[[nodiscard]] inline SwitchingPolicy greedy_worst_switch(const PlanarParams& params = {}, double dwell = 1e-3,
                                                         bool state_scaled = true) {
    if (!(dwell > 0.0)) throw InvalidSignal("dwell must be positive");
    SwitchingPolicy p;
    p.dwell = dwell;
    p.state_scaled = state_scaled;
    p.rule = [mats = params.mats](const Vec2& x) {
        const double q1 = quad_form(mats.a1 + mats.a1.transposed(), x);
        const double q0 = quad_form(mats.a2 + mats.a2.transposed(), x);
        return q1 >= q0 ? 1.0 : 0.0;
    };
    return p;
}

struct SwitchingRun {
    bool escaped = false;
    EscapeReason reason = EscapeReason::none;
    double t_escape = std::numeric_limits<double>::quiet_NaN();
    double t_end = 0.0;
    double peak = 0.0;
    std::size_t pieces = 0;
    /// Realized open-loop input (values in {0, 1}), merged across equal pieces.
    InputSignal schedule = InputSignal::constant(0.0);
    std::vector<double> switch_times;
    Vec2 final_state{};
    /// End time and sup |x|_inf of every piece, in order.
    std::vector<double> piece_ends;
    std::vector<double> piece_peaks;

    /// sup |x|_inf over the pieces that end by T, and x0.
    [[nodiscard]] double peak_until(double T) const {
        double m = initial_norm;
        for (std::size_t i = 0; i < piece_ends.size() && piece_ends[i] <= T; ++i) m = std::max(m, piece_peaks[i]);
        return m;
    }
    double initial_norm = 0.0;
};

/// Closed-loop simulation of the planar system under a sampled switching policy.
[[nodiscard]] inline SwitchingRun simulate_switching(const PlanarParams& params, const SwitchingPolicy& policy,
                                                     const Vec2& x0, double T, IntegratorOptions opts = {}) {
    if (!policy.rule) throw InvalidSignal("switching policy has no rule");
    const auto sys = planar_system(params);
    SwitchingRun run;
    std::vector<double> values;
    Vec2 x = x0;
    double t = 0.0;
    run.peak = x.norm_inf();
    run.initial_norm = run.peak;
    opts.land_on_horizon = true;
    while (t < T) {
        const double lambda = policy.rule(x);
        const double h = std::min(policy.piece_length(x), T - t);
        if (!(t + h > t)) {
            run.escaped = true;
            run.reason = EscapeReason::time_resolution;
            run.t_escape = t;
            break;
        }
        if (values.empty() || values.back() != lambda) {
            if (!values.empty()) run.switch_times.push_back(t);
            values.push_back(lambda);
        }
        const auto out = integrate(sys, HistoryFn::constant(0.0, {x.x1, x.x2}), InputSignal::constant(lambda), h, opts);
        ++run.pieces;
        const auto xe = out.trajectory->final_state();
        const double piece_peak = out.escaped() ? out.final_norm : out.trajectory->sup_norm(0.0, h);
        run.peak = std::max(run.peak, piece_peak);
        run.piece_ends.push_back(out.escaped() ? t + out.t_escape : t + h);
        run.piece_peaks.push_back(piece_peak);
        if (out.escaped()) {
            run.escaped = true;
            run.reason = out.reason;
            run.t_escape = t + out.t_escape;
            t = run.t_escape;
            x = {xe[0], xe[1]};
            break;
        }
        x = {xe[0], xe[1]};
        t += h;
    }
    run.t_end = t;
    run.final_state = x;
    run.schedule = InputSignal::piecewise_constant(run.switch_times, values);
    return run;
}

/// Escape time of the greedy schedule from (1, 0) (NaN if it does not escape by T).
[[nodiscard]] inline double greedy_escape_time(const PlanarParams& params = {}, double dwell = 1e-3, double T = 20.0,
                                               bool state_scaled = true) {
    const auto run = simulate_switching(params, greedy_worst_switch(params, dwell, state_scaled), {1.0, 0.0}, T);
    return run.t_escape;
}

/// Default cascade delay: 1.5 times the greedy escape time.
[[nodiscard]] inline double default_cascade_delay(const PlanarParams& params = {}, double dwell = 1e-3,
                                                  bool state_scaled = true) {
    const double t = greedy_escape_time(params, dwell, 20.0, state_scaled);
    if (!std::isfinite(t)) throw UnexpectedEscape("greedy switching did not escape; no default delay");
    return 1.5 * t;
}

}  // namespace rfcdelay
