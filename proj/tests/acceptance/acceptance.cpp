// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "rfcdelay/rfcdelay.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

using namespace rfcdelay;

namespace {

struct Line {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const char* name, const Line& l, double seconds) {
    std::printf("%s %d %s: %s (%.1f s)\n", l.pass ? "PASS" : "FAIL", id, name, l.detail.c_str(), seconds);
    std::fflush(stdout);
    if (!l.pass) ++failures;
}

template <class Fn>
void criterion(int id, const char* name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Line l;
    try {
        l = fn();
    } catch (const std::exception& e) {
        l = {false, std::string("error: ") + e.what()};
    }
    report(id, name, l, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

/// Completed runs of the other criteria, audited by the last one.
class RunLog {
public:
    void add(const RunRecord& r) {
        if (!r.outcome.completed()) return;
        std::lock_guard lock(mutex_);
        runs_.push_back(r);
    }
    void add(std::string probe, const DiscreteDelaySystem& sys, const HistoryFn& h, std::optional<InputSignal> u,
             double horizon, const SimOutcome& out) {
        add(RunRecord{std::move(probe), runs_.size(), sys, h, std::move(u), horizon, out});
    }
    [[nodiscard]] const std::vector<RunRecord>& runs() const { return runs_; }

private:
    std::mutex mutex_;
    std::vector<RunRecord> runs_;
};

ProbeConfig probe_config(RunLog& log) {
    ProbeConfig cfg;
    cfg.on_run = [&log](const RunRecord& r) { log.add(r); };
    return cfg;
}

DiscreteDelaySystem scalar_ode(std::function<double(double)> f, const char* name) {
    return DiscreteDelaySystem(1, 0, {}, [f = std::move(f)](auto x, auto, auto, auto dx) { dx[0] = f(x[0]); }, name);
}

}  // namespace

int main() {
    RunLog log;
    const IntegratorOptions defaults;

    criterion(1, "Lyapunov certification", [] {
        const PlanarMatrices mats;
        int hurwitz = 0;
        double worst = 0.0;
        for (int i = 0; i <= 100; ++i) {
            const Mat2 a = mats.at(i / 100.0);
            if (is_hurwitz(a)) ++hurwitz;
            worst = std::max(worst, lyapunov_residual(a, solve_lyapunov(a).matrix()));
        }
        return Line{hurwitz == 101 && worst <= 1e-12,
                    std::to_string(hurwitz) + "/101 Hurwitz, max residual " + num(worst) + " (<= 1e-12)"};
    });

    criterion(2, "Integrator oracles", [&] {
        const double tol = defaults.rel_tol;
        const auto decay = scalar_ode([](double x) { return -x; }, "decay");
        const auto h1 = HistoryFn::constant(0.0, {1.0});
        const auto a = integrate(decay, h1, 1.0, defaults);
        log.add("decay", decay, h1, std::nullopt, 1.0, a);
        const double err_decay = std::abs(a.trajectory->final_state()[0] - std::exp(-1.0));

        const auto blow = scalar_ode([](double x) { return 1.0 + x * x; }, "tangent");
        const auto b = integrate(blow, HistoryFn::constant(0.0, {0.0}), 3.0, defaults);
        const double err_escape = b.escaped() ? std::abs(b.t_escape - std::numbers::pi / 2) : INFINITY;

        const double tau = default_cascade_delay();
        const auto sys = cascade_system(tau);
        Rng rng(2024);
        const auto hist = random_history(rng, tau, 3, 1.0);
        const double z0 = hist.eval(0.0)[0];
        const auto c = integrate(sys, hist, 10.0, defaults);
        log.add("cascade-z", sys, hist, std::nullopt, 10.0, c);
        double err_z = c.completed() ? 0.0 : INFINITY;
        for (int j = 1; c.completed() && j <= 100; ++j) {
            const double t = 10.0 * j / 100;
            err_z = std::max(err_z, std::abs(c.trajectory->eval(t)[0] - z0 * std::exp(-t)));
        }
        const bool ok = err_decay <= 10 * tol && err_escape <= 1e-3 && err_z <= 10 * tol;
        return Line{ok, "|x(1) - 1/e| = " + num(err_decay) + ", |t_esc - pi/2| = " + num(err_escape) +
                            ", max |z - z0 e^-t| = " + num(err_z) + " (tol " + num(tol) + ")"};
    });

    criterion(3, "Planar system not forward complete", [&] {
        const PlanarParams params;
        const auto run = simulate_switching(params, greedy_worst_switch(params), {1.0, 0.0}, 20.0, defaults);
        const bool escaped = run.escaped && run.t_escape < 20.0 && run.peak >= defaults.escape_threshold;
        double worst_slope = -INFINITY;
        std::size_t runs = 0;
        bool all_completed = true;
        const auto sys = planar_system(params);
        for (int i = -10; i <= 110; ++i) {
            const double u = i / 100.0;
            const auto p = solve_lyapunov(params.mats.at(phi(u)));
            for (int a = 0; a < 8; ++a) {
                const double angle = a * std::numbers::pi / 4;
                const Vec2 x0{std::cos(angle), std::sin(angle)};
                const auto h = HistoryFn::constant(0.0, {x0.x1, x0.x2});
                const auto in = InputSignal::constant(u);
                const auto out = integrate(sys, h, in, 10.0, defaults);
                ++runs;
                if (!out.completed()) {
                    all_completed = false;
                    continue;
                }
                if (a == 0) log.add("constant-input", sys, h, in, 10.0, out);
                const double w0 = p.form(x0);
                double prev = w0;
                const int n = 2000;
                const double dt = 10.0 / n;
                for (int k = 1; k <= n; ++k) {
                    const auto x = out.trajectory->eval(dt * k);
                    const double w = p.form({x[0], x[1]});
                    worst_slope = std::max(worst_slope, (w - prev) / dt / w0);
                    prev = w;
                }
            }
        }
        const bool ok = escaped && all_completed && worst_slope <= 1e-6;
        return Line{ok, "greedy switching reaches " + num(defaults.escape_threshold) + " at t = " +
                            num(run.t_escape) + "; max dW/dt / W(x0) = " + num(worst_slope) + " over " +
                            std::to_string(runs) + " constant-input runs (<= 1e-6)"};
    });

    criterion(4, "Exponential stability envelope", [&] {
        const auto cfg = probe_config(log);
        const auto fit = es_check(cfg);
        const bool ok = fit.samples == 200 && fit.violations == 0;
        return Line{ok, std::to_string(fit.violations) + " violations over " + std::to_string(fit.samples) +
                            " histories with |phi| <= " + num(fit.capital_lambda) + "; k = " + num(fit.k) +
                            ", p = " + num(fit.p) + ", fitted k " + num(fit.k_emp) + ", p " + num(fit.p_emp)};
    });

    criterion(5, "Uniform global attractivity", [&] {
        const auto cfg = probe_config(log);
        const auto table = uga_table(cfg);
        std::size_t runs = 0;
        double worst_ratio = 0.0;
        for (const auto& c : table.cells) {
            runs += c.samples;
            worst_ratio = std::max(worst_ratio, c.t_reach_max / c.t_bound);
        }
        const bool ok = table.cells.size() == 6 && runs == 300 && table.violations() == 0;
        return Line{ok, std::to_string(table.violations()) + " violations in " + std::to_string(runs) +
                            " (r, eps, history) cases; max reach / bound = " + num(worst_ratio)};
    });

    criterion(6, "Robust forward completeness fails", [&] {
        const auto cfg = probe_config(log);
        const auto res = rfc_sweep(cfg);
        const bool ok = res.rows.size() == 7 && res.falsified && res.all_settled;
        std::string peaks;
        for (const auto& r : res.rows) peaks += (peaks.empty() ? "" : " ") + num(r.peak);
        return Line{ok, "peaks " + peaks + "; growth " + num(res.growth) + "x (>= 10), strictly increasing " +
                            (res.strictly_increasing ? "yes" : "no") + ", reach within bound " +
                            (res.all_settled ? "yes" : "no")};
    });

    criterion(7, "Delay/nondelayed embeddings", [&] {
        const auto cfg = probe_config(log);
        const auto res = equiv_check(cfg);
        const bool ok = res.rows.size() == 50 && res.pass() && res.reach_at_zero == res.r;
        return Line{ok, "max deviation " + num(res.max_embed_dev) + " (embed), " + num(res.max_inputs_dev) +
                            " (inputs) vs " + num(res.tolerance) + "; R*(" + num(res.r) + ", 0) = " +
                            num(res.reach_at_zero)};
    });

    criterion(8, "Integral-form audit", [&] {
        const auto& runs = log.runs();
        const double bound = 100.0 * defaults.abs_tol;
        IntegratorOptions tight = defaults;
        tight.rel_tol /= 10;
        tight.abs_tol /= 10;
        std::vector<double> loose_res(runs.size()), tight_res(runs.size());
        parallel_for(runs.size(), 0, [&](std::size_t i) {
            const auto& r = runs[i];
            const auto& traj = *r.outcome.trajectory;
            loose_res[i] = residual_audit(traj, r.system, r.history, r.input, 200, i);
            const double T = traj.t_end();
            const auto again = r.input ? integrate(r.system, r.history, *r.input, T, tight)
                                       : integrate(r.system, r.history, T, tight);
            tight_res[i] = again.completed() ? residual_audit(*again.trajectory, r.system, r.history, r.input, 200, i)
                                             : INFINITY;
        });
        double worst = 0.0, worst_tight = 0.0;
        std::size_t over = 0;
        std::string worst_probe, worst_tight_probe;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            if (loose_res[i] > bound) ++over;
            if (loose_res[i] > worst) {
                worst = loose_res[i];
                worst_probe = runs[i].probe;
            }
            if (tight_res[i] > worst_tight) {
                worst_tight = tight_res[i];
                worst_tight_probe = runs[i].probe;
            }
        }
        const double shrink = worst / worst_tight;
        const bool ok = !runs.empty() && over == 0 && shrink >= 4.0;
        return Line{ok, std::to_string(runs.size()) + " completed runs, " + std::to_string(over) + " above " +
                            num(bound) + "; max residual " + num(worst) + " (" + worst_probe + "), " +
                            num(worst_tight) + " (" + worst_tight_probe + ") at 10x tighter tolerances (shrink " + num(shrink) + "x, >= 4)"};
    });

    std::printf("%s: %d of 8 criteria failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
    return failures == 0 ? 0 : 1;
}
