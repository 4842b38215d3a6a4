#pragma once

// Experiment drivers for the planar system and its delayed cascade:
// exponential envelope fits, reach-time tables, reachability lower bounds by
// sampling, the smoothing sweep that exhibits unbounded peaks from an
// equibounded family of histories, Lyapunov decay audits and the
// delay/nondelay equivalence check.

#include "rfcdelay/errors.hpp"
#include "rfcdelay/history.hpp"
#include "rfcdelay/integrate.hpp"
#include "rfcdelay/lyapunov.hpp"
#include "rfcdelay/parallel.hpp"
#include "rfcdelay/paper_systems.hpp"
#include "rfcdelay/random.hpp"
#include "rfcdelay/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rfcdelay {

/// One integration performed by a probe, with everything needed to audit or repeat it.
struct RunRecord {
    std::string probe;
    std::size_t index = 0;
    DiscreteDelaySystem system;
    HistoryFn history;
    std::optional<InputSignal> input;
    double horizon = 0.0;
    SimOutcome outcome;
};

/// Settings shared by every probe.
struct ProbeConfig {
    PlanarParams params{};
    /// Cascade delay; 0 selects default_cascade_delay.
    double tau = 0.0;
    /// Dwell of the greedy switching law.
    double dwell = 1e-3;
    bool state_scaled = true;
    IntegratorOptions integrator{};
    LambdaSearch lambda_search{};
    std::uint64_t seed = 0;
    /// Worker count, 0 for hardware concurrency.
    unsigned threads = 0;
    /// Observer for every integration; may be called from several workers at once.
    std::function<void(const RunRecord&)> on_run;

    [[nodiscard]] double resolved_tau() const { return tau > 0.0 ? tau : default_cascade_delay(params, dwell, state_scaled); }
    [[nodiscard]] SwitchingPolicy greedy() const { return greedy_worst_switch(params, dwell, state_scaled); }
    [[nodiscard]] StabilityConstants constants() const { return stability_constants(params.mats, lambda_search); }
    [[nodiscard]] SymPosDef2 p0() const { return solve_lyapunov(params.mats.at(0.0)); }

    void record(const char* probe, std::size_t index, const DiscreteDelaySystem& sys, const HistoryFn& history,
                const std::optional<InputSignal>& input, double horizon, const SimOutcome& out) const {
        if (on_run) on_run(RunRecord{probe, index, sys, history, input, horizon, out});
    }
};

// ---- random draws ----------------------------------------------------------

/// Continuous piecewise-linear history on [-tau, 0] with 2..max_knots knots,
/// values uniform in [-norm, norm]; one component of phi(0) is set to +-norm,
/// so the sup norm is exactly `norm`.
[[nodiscard]] inline HistoryFn random_history(Rng& rng, double tau, std::size_t dim, double norm, int max_knots = 20) {
    const int count = rng.integer(2, std::max(2, max_knots));
    std::vector<double> knots{-tau};
    std::vector<double> inner;
    for (int i = 0; i < count - 2; ++i) inner.push_back(rng.uniform(-tau, 0.0));
    std::sort(inner.begin(), inner.end());
    for (double s : inner) {
        if (s > knots.back() && s < 0.0) knots.push_back(s);
    }
    knots.push_back(0.0);
    std::vector<std::vector<double>> values(knots.size(), std::vector<double>(dim));
    for (auto& row : values) {
        for (auto& v : row) v = norm * rng.uniform(-1.0, 1.0);
    }
    const auto pinned = static_cast<std::size_t>(rng.integer(0, static_cast<int>(dim) - 1));
    values.back()[pinned] = rng.uniform() < 0.5 ? -norm : norm;
    return HistoryFn::linear(std::move(knots), std::move(values));
}

/// Piecewise-constant input with 1..max_pieces pieces, breakpoints uniform on
/// (0, span) and values uniform in [-bound, bound]; one value is set to +-bound.
[[nodiscard]] inline InputSignal random_input(Rng& rng, std::size_t dim, double bound, double span = 20.0,
                                              int max_pieces = 20) {
    const int pieces = rng.integer(1, std::max(1, max_pieces));
    std::vector<double> raw;
    for (int i = 0; i < pieces - 1; ++i) raw.push_back(rng.uniform(0.0, span));
    std::sort(raw.begin(), raw.end());
    std::vector<double> bps;
    for (double b : raw) {
        if (b > 0.0 && (bps.empty() || b > bps.back())) bps.push_back(b);
    }
    std::vector<std::vector<double>> values(bps.size() + 1, std::vector<double>(dim));
    for (auto& row : values) {
        for (auto& v : row) v = bound * rng.uniform(-1.0, 1.0);
    }
    const auto piece = static_cast<std::size_t>(rng.integer(0, static_cast<int>(values.size()) - 1));
    const auto comp = static_cast<std::size_t>(rng.integer(0, static_cast<int>(dim) - 1));
    values[piece][comp] = rng.uniform() < 0.5 ? -bound : bound;
    return InputSignal::piecewise_constant(std::move(bps), std::move(values));
}

// ---- shared helpers --------------------------------------------------------

/// Reach-time bound t1 + tau + 2 c2^2 / (c1 eps^2), t1 = max(0, ln(r / min(Lambda, eps))).
[[nodiscard]] inline double uga_time_bound(double r, double eps, const StabilityConstants& c, double tau) {
    if (!(r > 0.0) || !(eps > 0.0)) throw InvalidSignal("r and eps must be positive");
    const double t1 = std::max(0.0, std::log(r / std::min(c.capital_lambda, eps)));
    return t1 + tau + 2.0 * c.c2 * c.c2 / (c.c1 * eps * eps);
}

/// Time for |z| to fall from r to eps under z' = -z.
[[nodiscard]] inline double z_reach_time(double r, double eps) { return r > eps ? std::log(r / eps) : 0.0; }

/// Cascade state (z, x1, x2) at time t >= tau certifies that the state stays in
/// the eps-ball from then on: |z(t - tau)| <= Lambda (recovered from z(t) by
/// the exact z dynamics), |z| <= eps and x^T P0 x <= c1 eps^2.
struct SettleCertificate {
    SymPosDef2 p0;
    double capital_lambda = 0.0;
    double tau = 0.0;
    double eps = 0.0;

    [[nodiscard]] bool operator()(double t, std::span<const double> s) const {
        if (t < tau) return false;
        const double z = std::abs(s[0]);
        if (z * std::exp(tau) * (1.0 + 1e-9) > capital_lambda || z > eps) return false;
        return p0.form({s[1], s[2]}) <= p0.c1 * eps * eps;
    }
};

namespace detail {

/// Last time in [0, t_end] at which |x(t)|_inf exceeds eps (0 if never),
/// components [c0, c0 + count). Conservative within a step: if the step sup
/// exceeds eps but no sample does, the step end is returned.
inline double last_exit_time(const Trajectory& traj, double eps, std::size_t c0 = 0,
                             std::size_t count = static_cast<std::size_t>(-1)) {
    const std::size_t n = traj.dim();
    const std::size_t c1 = std::min(n, c0 + std::min(count, n));
    std::vector<double> v(n);
    auto norm_at = [&](double t) {
        traj.eval_into(t, v);
        double m = 0.0;
        for (std::size_t c = c0; c < c1; ++c) m = std::max(m, std::abs(v[c]));
        return m;
    };
    if (traj.step_count() == 0) return norm_at(traj.t_start()) > eps ? traj.t_start() : 0.0;
    for (std::size_t i = traj.step_count(); i-- > 0;) {
        const double a = traj.step_start(i), b = traj.step_end(i);
        if (traj.sup_norm(a, b, c0, count) <= eps) continue;
        constexpr int kSamples = 64;
        for (int j = kSamples; j >= 0; --j) {
            const double t = a + (b - a) * j / kSamples;
            if (norm_at(t) > eps) {
                if (j == kSamples) return b;
                double lo = t, hi = a + (b - a) * (j + 1) / kSamples;
                for (int it = 0; it < 60 && hi - lo > 0.0; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (mid <= lo || mid >= hi) break;
                    (norm_at(mid) > eps ? lo : hi) = mid;
                }
                return hi;
            }
        }
        return b;
    }
    return 0.0;
}

inline std::uint64_t cell_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    return derive_seed(derive_seed(master, a), b);
}

}  // namespace detail

// ---- exponential envelope --------------------------------------------------

struct EsCheckOptions {
    int n_ics = 200;
    double T = 30.0;
    double fit_tol = 0.05;
    /// Dense points checked inside each step in addition to the step ends.
    int points_per_step = 4;
};

struct EsSample {
    std::size_t index = 0;
    double history_norm = 0.0;
    double k_emp = 0.0;
    double p_emp = std::numeric_limits<double>::infinity();
    double max_ratio = 0.0;
    std::size_t violations = 0;
    std::size_t points = 0;
};

struct EnvelopeFit {
    double k = 0.0;
    double p = 0.0;
    double capital_lambda = 0.0;
    double tau = 0.0;
    double fit_tol = 0.0;
    /// max over samples of sup_t |state(t)| e^{pt} / |phi|
    double k_emp = 0.0;
    /// largest rate q with |state(t)| <= k |phi| e^{-qt} at every checked point
    double p_emp = std::numeric_limits<double>::infinity();
    std::size_t violations = 0;
    std::size_t samples = 0;
    std::size_t worst_index = 0;
    std::vector<EsSample> rows;
};

/// History of sample `index`: norm Lambda * u with u uniform in (0, 1].
[[nodiscard]] inline HistoryFn es_history(const ProbeConfig& cfg, std::size_t index, double capital_lambda,
                                          double tau) {
    Rng rng(derive_seed(cfg.seed, index));
    const double scale = 1.0 - rng.uniform();
    return random_history(rng, tau, 3, capital_lambda * scale);
}

[[nodiscard]] inline EnvelopeFit es_check(const ProbeConfig& cfg, const EsCheckOptions& opts = {}) {
    if (opts.n_ics < 0 || !(opts.T > 0.0)) throw InvalidSystem("es_check needs n_ics >= 0 and T > 0");
    const auto c = cfg.constants();
    const double tau = cfg.resolved_tau();
    const auto sys = cascade_system(tau, cfg.params);
    EnvelopeFit fit;
    fit.k = c.k;
    fit.p = c.p;
    fit.capital_lambda = c.capital_lambda;
    fit.tau = tau;
    fit.fit_tol = opts.fit_tol;
    fit.samples = static_cast<std::size_t>(opts.n_ics);
    fit.rows.resize(fit.samples);
    parallel_for(fit.samples, cfg.threads, [&](std::size_t i) {
        const auto history = es_history(cfg, i, c.capital_lambda, tau);
        const auto out = integrate(sys, history, opts.T, cfg.integrator);
        cfg.record("es-check", i, sys, history, std::nullopt, opts.T, out);
        if (out.escaped()) throw UnexpectedEscape("envelope sample " + std::to_string(i) + " escaped");
        EsSample row;
        row.index = i;
        row.history_norm = history.norm();
        const auto& traj = *out.trajectory;
        std::vector<double> v(traj.dim());
        auto check = [&](double t) {
            traj.eval_into(t, v);
            const double m = max_norm(v);
            const double env = c.k * row.history_norm * std::exp(-c.p * t);
            ++row.points;
            if (row.history_norm == 0.0) {
                if (m > 0.0) ++row.violations;
                return;
            }
            const double ratio = m / env;
            row.max_ratio = std::max(row.max_ratio, ratio);
            if (ratio > 1.0 + opts.fit_tol) ++row.violations;
            row.k_emp = std::max(row.k_emp, m * std::exp(c.p * t) / row.history_norm);
            if (t > 0.0 && m > 0.0) row.p_emp = std::min(row.p_emp, std::log(c.k * row.history_norm / m) / t);
        };
        check(0.0);
        for (std::size_t s = 0; s < traj.step_count(); ++s) {
            const double a = traj.step_start(s), b = traj.step_end(s);
            for (int j = 1; j <= opts.points_per_step; ++j) check(a + (b - a) * j / (opts.points_per_step + 1));
            check(b);
        }
        fit.rows[i] = row;
    });
    double worst = -1.0;
    for (const auto& row : fit.rows) {
        fit.violations += row.violations;
        fit.k_emp = std::max(fit.k_emp, row.k_emp);
        fit.p_emp = std::min(fit.p_emp, row.p_emp);
        if (row.max_ratio > worst) {
            worst = row.max_ratio;
            fit.worst_index = row.index;
        }
    }
    return fit;
}

// ---- reach-time table ------------------------------------------------------

struct UgaOptions {
    std::vector<double> r_list{1.0, 10.0, 100.0};
    std::vector<double> eps_list{0.1, 1.0};
    int samples = 50;
    /// Extra time past the bound of the smallest eps before declaring failure.
    double margin_T = 10.0;
};

struct UgaCell {
    double r = 0.0;
    double eps = 0.0;
    double t_bound = 0.0;
    /// max over samples of the last time |state| exceeds eps
    double t_reach_max = 0.0;
    double t_reach_mean = 0.0;
    /// closed-form reach time of the z component from |z(0)| = r
    double z_reach = 0.0;
    std::size_t samples = 0;
    std::size_t violations = 0;
};

struct UgaTable {
    double tau = 0.0;
    StabilityConstants constants{};
    std::vector<UgaCell> cells;  // r-major, eps-minor
    [[nodiscard]] std::size_t violations() const {
        std::size_t v = 0;
        for (const auto& c : cells) v += c.violations;
        return v;
    }
};

/// Runs one cascade trajectory from `history` until the settle certificate of
/// `eps` holds; throws HorizonTooShort if it does not by `horizon`.
[[nodiscard]] inline SimOutcome run_until_settled(const DiscreteDelaySystem& sys, const HistoryFn& history,
                                                  const SettleCertificate& cert, double horizon,
                                                  IntegratorOptions opts) {
    opts.stop_when = [cert](double t, std::span<const double> s) { return cert(t, s); };
    auto out = integrate(sys, history, horizon, opts);
    if (out.escaped()) {
        throw UnexpectedEscape("cascade run escaped at t = " + std::to_string(out.t_escape) + " (" +
                               std::string(to_string(out.reason)) + ")");
    }
    if (!out.stopped_early) {
        throw HorizonTooShort("state not certified inside the " + std::to_string(cert.eps) + "-ball by t = " +
                              std::to_string(horizon));
    }
    return out;
}

[[nodiscard]] inline UgaTable uga_table(const ProbeConfig& cfg, const UgaOptions& opts = {}) {
    if (opts.r_list.empty() || opts.eps_list.empty() || opts.samples < 1) {
        throw InvalidSystem("uga_table needs nonempty r and eps lists and at least one sample");
    }
    for (double v : opts.r_list) {
        if (!(v > 0.0)) throw InvalidSystem("r values must be positive");
    }
    for (double v : opts.eps_list) {
        if (!(v > 0.0)) throw InvalidSystem("eps values must be positive");
    }
    UgaTable table;
    table.constants = cfg.constants();
    table.tau = cfg.resolved_tau();
    const auto& c = table.constants;
    const double tau = table.tau;
    const auto sys = cascade_system(tau, cfg.params);
    const double eps_min = *std::min_element(opts.eps_list.begin(), opts.eps_list.end());
    const SettleCertificate cert{cfg.p0(), c.capital_lambda, tau, eps_min};
    const std::size_t nr = opts.r_list.size(), ne = opts.eps_list.size();
    const auto ns = static_cast<std::size_t>(opts.samples);
    // reach[(ri * ns + s) * ne + ei]
    std::vector<double> reach(nr * ns * ne, 0.0);
    parallel_for(nr * ns, cfg.threads, [&](std::size_t job) {
        const std::size_t ri = job / ns, s = job % ns;
        const double r = opts.r_list[ri];
        Rng rng(detail::cell_seed(cfg.seed, ri, s));
        const auto history = random_history(rng, tau, 3, r);
        const double horizon = uga_time_bound(r, eps_min, c, tau) + opts.margin_T;
        const auto out = run_until_settled(sys, history, cert, horizon, cfg.integrator);
        cfg.record("uga-table", job, sys, history, std::nullopt, horizon, out);
        for (std::size_t ei = 0; ei < ne; ++ei) {
            reach[job * ne + ei] = detail::last_exit_time(*out.trajectory, opts.eps_list[ei]);
        }
    });
    for (std::size_t ri = 0; ri < nr; ++ri) {
        for (std::size_t ei = 0; ei < ne; ++ei) {
            UgaCell cell;
            cell.r = opts.r_list[ri];
            cell.eps = opts.eps_list[ei];
            cell.t_bound = uga_time_bound(cell.r, cell.eps, c, tau);
            cell.z_reach = z_reach_time(cell.r, cell.eps);
            cell.samples = ns;
            double sum = 0.0;
            for (std::size_t s = 0; s < ns; ++s) {
                const double t = reach[(ri * ns + s) * ne + ei];
                sum += t;
                cell.t_reach_max = std::max(cell.t_reach_max, t);
                if (t > cell.t_bound) ++cell.violations;
            }
            cell.t_reach_mean = sum / static_cast<double>(ns);
            table.cells.push_back(cell);
        }
    }
    return table;
}

// ---- smoothing sweep -------------------------------------------------------

[[nodiscard]] inline std::vector<double> default_delta_list() {
    std::vector<double> d;
    for (int k = 0; k <= 6; ++k) d.push_back(0.2 * std::pow(4.0, -k));
    return d;
}

struct RfcOptions {
    std::vector<double> deltas = default_delta_list();
    Vec2 x0{1.0, 0.0};
    double eps = 0.1;
    double margin_T = 10.0;
    /// Continue every run until it is certified inside the eps-ball.
    bool check_settle = true;
    double min_growth = 10.0;
};

struct RfcRow {
    double delta = 0.0;
    double history_norm = 0.0;
    double peak = 0.0;
    double t_peak = 0.0;
    double t_bound = 0.0;
    double t_reach = std::numeric_limits<double>::quiet_NaN();
    bool settled = false;
};

struct RfcResult {
    double tau = 0.0;
    double t_escape = 0.0;
    std::size_t switches = 0;
    std::vector<RfcRow> rows;
    bool strictly_increasing = false;
    double growth = 0.0;
    bool all_settled = false;
    bool falsified = false;
};

/// Cascade history whose z part replays the greedy schedule smoothed by a
/// moving average of width delta, so that z(t - tau) drives x on [0, tau].
[[nodiscard]] inline HistoryFn smoothed_replay_history(const InputSignal& schedule, double delta, double tau,
                                                       const Vec2& x0) {
    const auto z = InputSignal::time_shift(moving_average(schedule, delta), tau);
    return HistoryFn::from_signal(tau, InputSignal::stack({z, InputSignal::constant(std::vector<double>{x0.x1, x0.x2})}));
}

[[nodiscard]] inline RfcResult rfc_sweep(const ProbeConfig& cfg, const RfcOptions& opts = {}) {
    if (opts.deltas.empty()) throw InvalidSignal("delta list is empty");
    for (std::size_t i = 0; i < opts.deltas.size(); ++i) {
        if (!(opts.deltas[i] > 0.0)) throw InvalidSignal("delta values must be positive");
        if (i > 0 && !(opts.deltas[i] < opts.deltas[i - 1])) throw InvalidSignal("delta list must be strictly decreasing");
    }
    RfcResult res;
    const auto greedy = simulate_switching(cfg.params, cfg.greedy(), {1.0, 0.0}, 20.0, cfg.integrator);
    if (!greedy.escaped) throw UnexpectedEscape("greedy switching did not escape; nothing to replay");
    res.t_escape = greedy.t_escape;
    res.switches = greedy.switch_times.size();
    res.tau = cfg.tau > 0.0 ? cfg.tau : 1.5 * greedy.t_escape;
    if (res.tau < greedy.t_escape) throw InvalidSystem("delay shorter than the greedy escape time");
    const auto c = cfg.constants();
    const auto sys = cascade_system(res.tau, cfg.params);
    res.rows.resize(opts.deltas.size());
    parallel_for(opts.deltas.size(), cfg.threads, [&](std::size_t i) {
        RfcRow row;
        row.delta = opts.deltas[i];
        const auto history = smoothed_replay_history(greedy.schedule, row.delta, res.tau, opts.x0);
        row.history_norm = history.norm();
        std::shared_ptr<const Trajectory> traj;
        if (opts.check_settle) {
            row.t_bound = uga_time_bound(std::max(row.history_norm, 1e-300), opts.eps, c, res.tau);
            const SettleCertificate cert{cfg.p0(), c.capital_lambda, res.tau, opts.eps};
            const auto out = run_until_settled(sys, history, cert, row.t_bound + opts.margin_T, cfg.integrator);
            cfg.record("rfc-sweep", i, sys, history, std::nullopt, row.t_bound + opts.margin_T, out);
            traj = out.trajectory;
            row.t_reach = detail::last_exit_time(*traj, opts.eps);
            row.settled = row.t_reach <= row.t_bound;
        } else {
            const auto out = integrate(sys, history, res.tau, cfg.integrator);
            cfg.record("rfc-sweep", i, sys, history, std::nullopt, res.tau, out);
            if (out.escaped()) {
                throw UnexpectedEscape("run with delta = " + std::to_string(row.delta) + " escaped at t = " +
                                       std::to_string(out.t_escape));
            }
            traj = out.trajectory;
        }
        row.peak = traj->sup_norm(0.0, res.tau, 1, 2);
        // locate the peak on the mesh for reporting
        std::vector<double> v(3);
        double best = -1.0;
        for (std::size_t s = 0; s < traj->step_count() && traj->step_start(s) <= res.tau; ++s) {
            const double a = traj->step_start(s), b = std::min(traj->step_end(s), res.tau);
            for (int j = 0; j <= 8; ++j) {
                const double t = a + (b - a) * j / 8;
                traj->eval_into(t, v);
                const double m = std::max(std::abs(v[1]), std::abs(v[2]));
                if (m > best) {
                    best = m;
                    row.t_peak = t;
                }
            }
        }
        res.rows[i] = row;
    });
    res.strictly_increasing = true;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    res.all_settled = true;
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        if (i > 0 && !(res.rows[i].peak > res.rows[i - 1].peak)) res.strictly_increasing = false;
        lo = std::min(lo, res.rows[i].peak);
        hi = std::max(hi, res.rows[i].peak);
        if (opts.check_settle && !res.rows[i].settled) res.all_settled = false;
    }
    res.growth = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    res.falsified = res.strictly_increasing && res.growth >= opts.min_growth;
    return res;
}

// ---- reachability lower bounds -------------------------------------------

enum class SystemKind { planar, cascade, associated };

[[nodiscard]] constexpr std::string_view to_string(SystemKind k) noexcept {
    switch (k) {
        case SystemKind::planar: return "planar";
        case SystemKind::cascade: return "cascade";
        case SystemKind::associated: return "associated";
    }
    return "?";
}

struct ReachOptions {
    SystemKind kind = SystemKind::planar;
    double r = 1.0;
    double T = 20.0;
    int budget = 100;
    /// Inputs are drawn with breakpoints on (0, input_span) whatever T is.
    double input_span = 20.0;
    /// Draw 0 follows the greedy switching law when r >= 1.
    bool adversarial = true;
    /// Smoothing width of the adversarial cascade history.
    double adversarial_delta = 0.2 * std::pow(4.0, -6);
};

struct ReachEstimate {
    SystemKind kind = SystemKind::planar;
    double r = 0.0;
    double T = 0.0;
    double lower_bound = 0.0;
    int sample_budget = 0;
    bool escape_seen = false;
    double escape_threshold = 0.0;
    std::size_t escapes = 0;
    /// draws that ended on a step-size collapse or overflow before T
    std::size_t collapses = 0;
    std::vector<double> per_draw;
};

namespace detail {

struct DrawResult {
    double sup = 0.0;
    bool escaped = false;
    bool collapsed = false;
};

/// sup of |state| over [0, T] restricted to steps that end by T, plus escape flags.
inline DrawResult summarize_draw(const SimOutcome& out, double T, double threshold) {
    DrawResult d;
    const auto& traj = *out.trajectory;
    d.sup = max_norm(traj.initial_state());
    double t_last = traj.t_start();
    for (std::size_t i = 0; i < traj.step_count() && traj.step_end(i) <= T; ++i) t_last = traj.step_end(i);
    if (t_last > traj.t_start()) d.sup = std::max(d.sup, traj.sup_norm(traj.t_start(), t_last));
    if (out.escaped() && out.t_escape <= T) {
        if (out.reason == EscapeReason::threshold) {
            d.escaped = true;
            d.sup = std::max({d.sup, out.final_norm, threshold});
        } else {
            d.collapsed = true;
            if (std::isfinite(out.final_norm)) d.sup = std::max(d.sup, out.final_norm);
        }
    }
    return d;
}

}  // namespace detail

[[nodiscard]] inline ReachEstimate estimate_R(const ProbeConfig& cfg, const ReachOptions& opts) {
    if (opts.budget < 1) throw InvalidSystem("budget must be at least 1");
    if (!(opts.r >= 0.0) || !(opts.T >= 0.0)) throw InvalidSystem("r and T must be nonnegative");
    ReachEstimate est;
    est.kind = opts.kind;
    est.r = opts.r;
    est.T = opts.T;
    est.sample_budget = opts.budget;
    est.escape_threshold = cfg.integrator.escape_threshold;
    const double tau = opts.kind == SystemKind::planar ? 0.0 : cfg.resolved_tau();
    const auto sys = opts.kind == SystemKind::planar  ? planar_system(cfg.params)
                     : opts.kind == SystemKind::cascade ? cascade_system(tau, cfg.params)
                                                        : associated_cascade(tau, cfg.params);
    IntegratorOptions iopt = cfg.integrator;
    iopt.land_on_horizon = false;
    const double thr = iopt.escape_threshold;
    // at T = 0 only the initial states count
    auto run = [&](const HistoryFn& history, const std::optional<InputSignal>& u) {
        if (opts.T == 0.0) return detail::DrawResult{max_norm(history.eval(0.0)), false, false};
        const auto out = u ? integrate(sys, history, *u, opts.T, iopt) : integrate(sys, history, opts.T, iopt);
        return detail::summarize_draw(out, opts.T, thr);
    };
    std::vector<detail::DrawResult> draws(static_cast<std::size_t>(opts.budget));
    parallel_for(draws.size(), cfg.threads, [&](std::size_t i) {
        const double r = opts.r;
        if (i == 0 && opts.adversarial && r >= 1.0) {
            const auto greedy = simulate_switching(cfg.params, cfg.greedy(), {r, 0.0}, std::max(opts.T, 20.0), cfg.integrator);
            if (opts.kind != SystemKind::cascade) {
                // the closed-loop run is the solution under its own realized
                // schedule u (planar) or v = (u, 0, 0) with xi0 = (0, r, 0)
                // (associated, where z stays 0); replaying the schedule open
                // loop would need steps shorter than any piece near escape
                detail::DrawResult d;
                d.sup = greedy.peak_until(opts.T);
                if (greedy.escaped && greedy.t_escape <= opts.T) {
                    if (greedy.reason == EscapeReason::threshold) {
                        d.escaped = true;
                        d.sup = std::max(d.sup, thr);
                    } else {
                        d.collapsed = true;
                    }
                }
                draws[i] = d;
                return;
            }
            const auto history = smoothed_replay_history(greedy.schedule, opts.adversarial_delta, tau, {r, 0.0});
            draws[i] = run(history, std::nullopt);
            return;
        }
        Rng rng(derive_seed(cfg.seed, i));
        switch (opts.kind) {
            case SystemKind::planar: {
                const auto x = random_history(rng, 1.0, 2, r, 2).eval(0.0);
                const auto u = random_input(rng, 1, r, opts.input_span);
                draws[i] = run(HistoryFn::constant(0.0, x), u);
                break;
            }
            case SystemKind::associated: {
                const auto x = random_history(rng, 1.0, 3, r, 2).eval(0.0);
                const auto v = random_input(rng, 3, r, opts.input_span);
                draws[i] = run(HistoryFn::constant(0.0, x), v);
                break;
            }
            case SystemKind::cascade: {
                const auto history = random_history(rng, tau, 3, r);
                draws[i] = run(history, std::nullopt);
                break;
            }
        }
    });
    for (const auto& d : draws) {
        est.per_draw.push_back(d.sup);
        est.lower_bound = std::max(est.lower_bound, d.sup);
        if (d.escaped) ++est.escapes;
        if (d.collapsed) ++est.collapses;
    }
    est.escape_seen = est.escapes > 0;
    return est;
}

// ---- decay audit -----------------------------------------------------------

struct DecayAuditOptions {
    double fd_step = 1e-4;
    int samples = 2000;
    /// audit_tol = rel_tol * omega(window start)
    double rel_tol = 1e-4;
};

struct DecayAudit {
    double window_start = 0.0;
    double window_end = 0.0;
    double omega_start = 0.0;
    double audit_tol = 0.0;
    /// max over samples of slope - bound (<= audit_tol passes)
    double worst_margin = -std::numeric_limits<double>::infinity();
    std::size_t violations = 0;
    std::size_t gronwall_violations = 0;
    std::size_t samples = 0;
};

/// Audits omega = x^T P0 x along a cascade trajectory on the window where
/// |z(t - tau)| <= Lambda holds from then on.
[[nodiscard]] inline DecayAudit decay_audit(const Trajectory& traj, const HistoryFn& history, const SymPosDef2& p0,
                                            double c2, double capital_lambda, double tau,
                                            const DecayAuditOptions& opts = {}) {
    if (traj.dim() != 3 || history.dim() != 3) throw InvalidSystem("decay audit expects a cascade trajectory");
    const double t_end = traj.t_end();
    const double h = opts.fd_step;
    auto delayed_z = [&](double t) {
        const double s = t - tau;
        return s <= 0.0 ? history.eval(s)[0] : traj.eval(s)[0];
    };
    // scan backwards for the last violation of the precondition
    const int grid = std::max(opts.samples, 100);
    double start = 0.0;
    for (int i = grid; i >= 0; --i) {
        const double t = t_end * i / grid;
        if (std::abs(delayed_z(t)) > capital_lambda) {
            start = i == grid ? t_end : t_end * (i + 1) / grid;
            break;
        }
    }
    // the window interior must leave room for the central difference
    if (!(t_end - start > 2.0 * h)) throw WindowInvalid("no time window with |z(t - tau)| <= Lambda");
    DecayAudit res;
    res.window_start = start;
    res.window_end = t_end;
    auto omega = [&](double t) {
        const auto x = traj.eval(t);
        return p0.form({x[1], x[2]});
    };
    res.omega_start = omega(start);
    res.audit_tol = opts.rel_tol * res.omega_start;
    const double a = start + h, b = t_end - h;
    const int n = std::max(1, opts.samples);
    for (int i = 0; i <= n; ++i) {
        const double t = a + (b - a) * i / n;
        const double w = omega(t);
        const double slope = (omega(t + h) - omega(t - h)) / (2.0 * h);
        const double bound = -w / (2.0 * c2) - w * w / (2.0 * c2 * c2);
        const double margin = slope - bound;
        res.worst_margin = std::max(res.worst_margin, margin);
        if (margin > res.audit_tol) ++res.violations;
        const double gron = res.omega_start * std::exp(-(t - start) / (2.0 * c2));
        if (w > gron * (1.0 + 1e-9) + 1e-300) ++res.gronwall_violations;
        ++res.samples;
    }
    return res;
}

// ---- delay / nondelay equivalence -----------------------------------------

struct EquivOptions {
    int pairs = 50;
    double r = 1.0;
    double input_span = 0.0;  // 0: the delay
    int grid = 200;
};

struct EquivRow {
    std::size_t index = 0;
    double embed_dev = 0.0;
    double inputs_dev = 0.0;
};

struct EquivResult {
    double tau = 0.0;
    double tolerance = 0.0;
    double max_embed_dev = 0.0;
    double max_inputs_dev = 0.0;
    double reach_at_zero = 0.0;
    double r = 0.0;
    std::vector<EquivRow> rows;
    [[nodiscard]] bool pass() const {
        return max_embed_dev <= tolerance && max_inputs_dev <= tolerance && reach_at_zero == r;
    }
};

namespace detail {

inline double max_deviation(const Trajectory& a, const Trajectory& b, double t_end, int grid) {
    std::vector<double> pts;
    for (const auto* tr : {&a, &b}) {
        for (std::size_t i = 0; i < tr->step_count(); ++i) {
            if (tr->step_end(i) <= t_end) pts.push_back(tr->step_end(i));
        }
    }
    for (int i = 0; i <= grid; ++i) pts.push_back(t_end * i / grid);
    std::vector<double> va(a.dim()), vb(b.dim());
    double dev = 0.0;
    for (double t : pts) {
        a.eval_into(t, va);
        b.eval_into(t, vb);
        for (std::size_t c = 0; c < va.size(); ++c) dev = std::max(dev, std::abs(va[c] - vb[c]));
    }
    return dev;
}

}  // namespace detail

[[nodiscard]] inline EquivResult equiv_check(const ProbeConfig& cfg, const EquivOptions& opts = {}) {
    if (opts.pairs < 0) throw InvalidSystem("pairs must be nonnegative");
    EquivResult res;
    res.tau = cfg.resolved_tau();
    res.r = opts.r;
    res.tolerance = 10.0 * std::max(cfg.integrator.rel_tol, cfg.integrator.abs_tol);
    const double tau = res.tau;
    const std::vector<double> delays{tau};
    const auto delay_sys = cascade_system(tau, cfg.params);
    const auto assoc = associated_cascade(tau, cfg.params);
    const double span = opts.input_span > 0.0 ? opts.input_span : tau;
    res.rows.resize(static_cast<std::size_t>(opts.pairs));
    parallel_for(res.rows.size(), cfg.threads, [&](std::size_t i) {
        Rng rng(derive_seed(cfg.seed, i));
        EquivRow row;
        row.index = i;
        // history -> inputs, compared on [0, tau]
        const auto history = random_history(rng, tau, 3, opts.r * (1.0 - rng.uniform()));
        const auto emb = embed_history_as_inputs(history, delays);
        const auto a = integrate(delay_sys, history, tau, cfg.integrator);
        const auto b_hist = HistoryFn::constant(0.0, emb.xi0);
        const auto b = integrate(assoc, b_hist, emb.stacked(), tau, cfg.integrator);
        cfg.record("equiv-check", 4 * i, delay_sys, history, std::nullopt, tau, a);
        cfg.record("equiv-check", 4 * i + 1, assoc, b_hist, emb.stacked(), tau, b);
        if (a.escaped() || b.escaped()) throw UnexpectedEscape("equivalence run escaped");
        row.embed_dev = detail::max_deviation(*a.trajectory, *b.trajectory, tau, opts.grid);
        // inputs -> history, compared on [0, tau / 2]
        const auto xi0 = random_history(rng, 1.0, 3, opts.r * (1.0 - rng.uniform()), 2).eval(0.0);
        const auto v = random_input(rng, 3, opts.r * (1.0 - rng.uniform()), span);
        const auto hist2 = history_from_inputs(xi0, {v}, delays);
        const double w = 0.5 * tau;
        const auto c_hist = HistoryFn::constant(0.0, xi0);
        const auto c = integrate(assoc, c_hist, v, w, cfg.integrator);
        const auto d = integrate(delay_sys, hist2, w, cfg.integrator);
        cfg.record("equiv-check", 4 * i + 2, assoc, c_hist, v, w, c);
        cfg.record("equiv-check", 4 * i + 3, delay_sys, hist2, std::nullopt, w, d);
        if (c.escaped() || d.escaped()) throw UnexpectedEscape("equivalence run escaped");
        row.inputs_dev = detail::max_deviation(*c.trajectory, *d.trajectory, w, opts.grid);
        res.rows[i] = row;
    });
    for (const auto& row : res.rows) {
        res.max_embed_dev = std::max(res.max_embed_dev, row.embed_dev);
        res.max_inputs_dev = std::max(res.max_inputs_dev, row.inputs_dev);
    }
    ReachOptions ro;
    ro.kind = SystemKind::associated;
    ro.r = opts.r;
    ro.T = 0.0;
    ro.budget = 1;
    res.reach_at_zero = estimate_R(cfg, ro).lower_bound;
    return res;
}

}  // namespace rfcdelay
