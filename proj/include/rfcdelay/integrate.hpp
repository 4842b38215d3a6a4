#pragma once

// Method-of-steps integration of discrete-delay systems with the
// Dormand-Prince 5(4) pair. Delayed states are served from the initial
// history on [-tau, 0] and from the dense output of already accepted steps
// afterwards; the step size never exceeds the smallest delay, so lookups
// never reach into the step being computed.

#include "rfcdelay/errors.hpp"
#include "rfcdelay/history.hpp"
#include "rfcdelay/signal.hpp"
#include "rfcdelay/system.hpp"
#include "rfcdelay/trajectory.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rfcdelay {

struct IntegratorOptions {
    double rel_tol = 1e-11;
    double abs_tol = 1e-10;
    double h_min = 1e-12;
    double h_max = std::numeric_limits<double>::infinity();
    double initial_step = 0.0;  // 0 selects automatically
    double escape_threshold = 1e6;
    std::size_t max_steps = 20'000'000;
    /// When false the last step is not shortened to end on T, so the step
    /// sequence does not depend on T; integration stops at the first step end >= T.
    bool land_on_horizon = true;
    /// Optional early stop, checked after every accepted step.
    std::function<bool(double t, std::span<const double> x)> stop_when;
};

enum class Outcome { completed, escaped };

enum class EscapeReason { none, threshold, step_collapse, overflow, time_resolution };

[[nodiscard]] constexpr std::string_view to_string(EscapeReason r) noexcept {
    switch (r) {
        case EscapeReason::none: return "none";
        case EscapeReason::threshold: return "threshold";
        case EscapeReason::step_collapse: return "step_collapse";
        case EscapeReason::overflow: return "overflow";
        case EscapeReason::time_resolution: return "time_resolution";
    }
    return "unknown";
}

struct SimOutcome {
    Outcome kind = Outcome::completed;
    EscapeReason reason = EscapeReason::none;
    /// Detection time (escaped runs only): first time |x| reached the threshold,
    /// or the time at which the step controller could no longer advance.
    double t_escape = std::numeric_limits<double>::quiet_NaN();
    double final_norm = 0.0;
    bool stopped_early = false;
    /// Full solution for completed runs; for escaped runs the prefix up to and
    /// including the step in which escape was detected.
    std::shared_ptr<const Trajectory> trajectory;
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;

    [[nodiscard]] bool completed() const noexcept { return kind == Outcome::completed; }
    [[nodiscard]] bool escaped() const noexcept { return kind == Outcome::escaped; }
    [[nodiscard]] bool overflow() const noexcept { return reason == EscapeReason::overflow; }
};

namespace detail {

struct DormandPrince {
    static constexpr std::array<double, 7> c{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                            a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    // continuous extension (Hairer, Norsett & Wanner)
    static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

/// s + tau, moved by a few ulps if needed so that subtracting tau gives back s
/// exactly; otherwise a step ending there could look up the delayed value on
/// the wrong side of a jump at s.
inline double shifted_landing(double s, double tau) {
    const double t = s + tau;
    if (t - tau == s) return t;
    double up = t, down = t;
    for (int i = 0; i < 8; ++i) {
        up = std::nextafter(up, std::numeric_limits<double>::infinity());
        if (up - tau == s) return up;
        down = std::nextafter(down, -std::numeric_limits<double>::infinity());
        if (down - tau == s) return down;
    }
    return t;
}

/// Times in (0, T) at which the solution may lose smoothness. Near-coincident
/// times are merged; input breakpoints win a merge because the input is
/// evaluated exactly there, while delay kinks only need to be close.
inline std::vector<double> forced_breakpoints(const DiscreteDelaySystem& sys, const HistoryFn& history,
                                              const std::optional<InputSignal>& u, double T) {
    std::vector<std::pair<double, int>> bps;  // (time, 0 for input, 1 for delay-induced)
    if (u) {
        for (double t : u->breakpoints(0.0, T)) bps.emplace_back(t, 0);
    }
    const auto& d = sys.delays();
    if (!d.empty()) {
        const double tau1 = d.front();
        for (std::size_t k = 1; static_cast<double>(k) * tau1 < T; ++k) bps.emplace_back(static_cast<double>(k) * tau1, 1);
        // every kink source propagates through each delay; a kink gains one
        // order of smoothness per pass, so a few generations suffice
        std::vector<double> frontier{0.0};
        for (const auto& b : bps) {
            if (b.second == 0) frontier.push_back(b.first);
        }
        for (double s : history.breakpoints()) frontier.push_back(s);
        constexpr int kGenerations = 5;
        constexpr std::size_t kCap = 200000;
        for (int g = 0; g < kGenerations && !frontier.empty() && bps.size() < kCap; ++g) {
            std::vector<double> next;
            for (double s : frontier) {
                for (double tau_i : d) {
                    const double t = shifted_landing(s, tau_i);
                    if (t < T) next.push_back(t);
                }
            }
            std::sort(next.begin(), next.end());
            next.erase(std::unique(next.begin(), next.end()), next.end());
            for (double t : next) bps.emplace_back(t, 1);
            frontier = std::move(next);
        }
    }
    std::sort(bps.begin(), bps.end());
    std::vector<double> out;
    int out_kind = 1;
    for (const auto& [t, kind] : bps) {
        if (!(t > 0.0) || !(t < T)) continue;
        const double tol = 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
        if (!out.empty() && t - out.back() <= tol) {
            if (kind == 0 && out_kind != 0) {
                out.back() = t;
                out_kind = 0;
            }
            continue;
        }
        out.push_back(t);
        out_kind = kind;
    }
    return out;
}

class StepIntegrator {
public:
    StepIntegrator(const DiscreteDelaySystem& sys, const HistoryFn& history, std::optional<InputSignal> u, double T,
                   const IntegratorOptions& opts)
        : sys_(sys), history_(history), u_(std::move(u)), T_(T), opts_(opts), n_(sys.state_dim()),
          l_(sys.delay_count()) {
        if (history_.dim() != n_) throw BadHistoryDomain("history dimension does not match the state dimension");
        const double tau = sys_.tau();
        if (std::abs(history_.tau() - tau) > 1e-12 * std::max(1.0, tau)) {
            throw BadHistoryDomain("history is defined on [-" + std::to_string(history_.tau()) +
                                   ", 0] but the system needs [-" + std::to_string(tau) + ", 0]");
        }
        const std::size_t m = sys_.input_dim();
        if (m > 0 && !u_) throw InvalidSystem("system expects an input signal");
        if (u_ && u_->dim() != m) throw InvalidSystem("input dimension does not match the system");
        if (!(T > 0.0) || !std::isfinite(T)) throw InvalidSystem("horizon T must be finite and positive");
        h_max_ = opts_.h_max;
        if (l_ > 0) h_max_ = std::min(h_max_, sys_.delays().front());
        delayed_.assign(l_ * n_, 0.0);
        scan_.assign(n_, 0.0);
        ubuf_.assign(std::max<std::size_t>(m, 1), 0.0);
    }

    SimOutcome run() {
        std::vector<double> y(n_), y_new(n_), ytmp(n_);
        std::array<std::vector<double>, 7> k;
        for (auto& v : k) v.assign(n_, 0.0);
        std::vector<double> err_vec(n_), rows(Trajectory::kRows * n_);

        history_.eval_into(0.0, y);
        traj_ = std::make_shared<Trajectory>(n_, 0.0, y);
        auto bps = forced_breakpoints(sys_, history_, u_, T_);
        if (opts_.land_on_horizon) bps.push_back(T_);
        traj_->set_forced_breakpoints(bps);

        SimOutcome out;
        double t = 0.0;
        const double thr = opts_.escape_threshold;
        if (max_norm(y) >= thr) return finish_escape(out, EscapeReason::threshold, 0.0, max_norm(y));

        eval_rhs(t, y, Side::right, k[0]);
        if (!all_finite(k[0])) return finish_escape(out, EscapeReason::overflow, t, max_norm(y));

        double h = opts_.initial_step > 0.0 ? opts_.initial_step : initial_step(t, y, k[0]);
        h = std::min(h, h_max_);
        std::size_t next_bp = 0;
        double prev_norm = max_norm(y);
        bool last_rejected = false;

        using DP = DormandPrince;
        while (true) {
            while (next_bp < bps.size() && bps[next_bp] <= t) ++next_bp;
            const bool has_bp = next_bp < bps.size();
            double h_eff = h;
            bool hit_bp = false;
            double t_new = t + h_eff;
            if (has_bp && t + h_eff >= bps[next_bp]) {
                h_eff = bps[next_bp] - t;
                t_new = bps[next_bp];
                hit_bp = true;
            }
            if (const auto tk = next_level_crossing(t, t_new); tk && *tk < t_new) {
                t_new = *tk;
                hit_bp = true;
            }
            // the step actually spans the representable interval [t, t_new]
            h_eff = t_new - t;
            if (!(t + h_eff > t)) {
                return finish_escape(out, EscapeReason::time_resolution, t, max_norm(y));
            }
            if (out.accepted_steps + out.rejected_steps >= opts_.max_steps) {
                throw TooManySteps("exceeded " + std::to_string(opts_.max_steps) + " steps at t = " + std::to_string(t));
            }

            // stages
            auto stage = [&](int s, auto&& combine) {
                for (std::size_t i = 0; i < n_; ++i) ytmp[i] = y[i] + h_eff * combine(i);
                const double ts = s == 6 || s == 5 ? t_new : t + DP::c[static_cast<std::size_t>(s)] * h_eff;
                eval_rhs(ts, ytmp, s >= 5 ? Side::left : Side::right, k[static_cast<std::size_t>(s)]);
            };
            stage(1, [&](std::size_t i) { return DP::a21 * k[0][i]; });
            stage(2, [&](std::size_t i) { return DP::a31 * k[0][i] + DP::a32 * k[1][i]; });
            stage(3, [&](std::size_t i) { return DP::a41 * k[0][i] + DP::a42 * k[1][i] + DP::a43 * k[2][i]; });
            stage(4, [&](std::size_t i) {
                return DP::a51 * k[0][i] + DP::a52 * k[1][i] + DP::a53 * k[2][i] + DP::a54 * k[3][i];
            });
            stage(5, [&](std::size_t i) {
                return DP::a61 * k[0][i] + DP::a62 * k[1][i] + DP::a63 * k[2][i] + DP::a64 * k[3][i] +
                       DP::a65 * k[4][i];
            });
            for (std::size_t i = 0; i < n_; ++i) {
                y_new[i] = y[i] + h_eff * (DP::a71 * k[0][i] + DP::a73 * k[2][i] + DP::a74 * k[3][i] +
                                           DP::a75 * k[4][i] + DP::a76 * k[5][i]);
            }
            eval_rhs(t_new, y_new, Side::left, k[6]);

            bool finite = all_finite(y_new);
            for (const auto& kk : k) finite = finite && all_finite(kk);

            double err = std::numeric_limits<double>::infinity();
            if (finite) {
                double acc = 0.0;
                for (std::size_t i = 0; i < n_; ++i) {
                    const double e = h_eff * (DP::e1 * k[0][i] + DP::e3 * k[2][i] + DP::e4 * k[3][i] +
                                              DP::e5 * k[4][i] + DP::e6 * k[5][i] + DP::e7 * k[6][i]);
                    const double sc = opts_.abs_tol + opts_.rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
                    acc += (e / sc) * (e / sc);
                }
                err = std::sqrt(acc / static_cast<double>(n_));
                if (!std::isfinite(err)) finite = false;
            }

            if (finite && err <= 1.0) {
                for (std::size_t i = 0; i < n_; ++i) {
                    const double ydiff = y_new[i] - y[i];
                    const double bspl = h_eff * k[0][i] - ydiff;
                    rows[i] = y[i];
                    rows[n_ + i] = ydiff;
                    rows[2 * n_ + i] = bspl;
                    rows[3 * n_ + i] = ydiff - h_eff * k[6][i] - bspl;
                    rows[4 * n_ + i] = h_eff * (DP::d1 * k[0][i] + DP::d3 * k[2][i] + DP::d4 * k[3][i] +
                                                DP::d5 * k[4][i] + DP::d6 * k[5][i] + DP::d7 * k[6][i]);
                }
                traj_->push_step(t, t_new, rows, y_new, err);
                ++out.accepted_steps;
                const double t_old = t;
                t = t_new;
                std::swap(y, y_new);
                const double norm = max_norm(y);
                if (norm >= thr) {
                    return finish_escape(out, EscapeReason::threshold, locate_crossing(t_old, t, thr), norm);
                }
                prev_norm = norm;
                if (opts_.stop_when && opts_.stop_when(t, y)) {
                    out.stopped_early = true;
                    return finish_complete(out, norm);
                }
                if (t >= T_) return finish_complete(out, norm);

                if (hit_bp) {
                    eval_rhs(t, y, Side::right, k[0]);
                    if (!all_finite(k[0])) return finish_escape(out, EscapeReason::overflow, t, norm);
                } else {
                    std::swap(k[0], k[6]);
                }
                double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
                fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 5.0);
                const double proposal = h_eff * fac;
                // a step clipped by a breakpoint says little about the natural step size
                h = hit_bp ? std::max(proposal, std::min(h, proposal * 5.0)) : proposal;
                h = std::min(h, h_max_);
                last_rejected = false;
            } else {
                ++out.rejected_steps;
                double fac = finite ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.1;
                h = h_eff * fac;
                last_rejected = true;
                if (h < opts_.h_min) {
                    const double norm = max_norm(y);
                    const bool growing = norm > prev_norm || !finite;
                    if (growing || norm > 0.0) {
                        return finish_escape(out, finite ? EscapeReason::step_collapse : EscapeReason::overflow, t,
                                             norm);
                    }
                    throw StepUnderflow("step size fell below h_min at t = " + std::to_string(t));
                }
            }
        }
    }

private:
    static bool all_finite(std::span<const double> v) noexcept {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    }

    void lookup(double s, Side side, std::span<double> out) const {
        if (s <= 0.0) {
            history_.eval_into(std::max(s, -history_.tau()), out, side);
        } else {
            traj_->eval_into(std::min(s, traj_->t_end()), out);
        }
    }

    /// First time in (t0, t1) where a declared level is crossed, located on the
    /// already known past (delayed values) or on the input.
    std::optional<double> next_level_crossing(double t0, double t1) {
        const auto& kinks = sys_.level_kinks();
        if (kinks.empty()) return std::nullopt;
        constexpr int kSamples = 16;
        const double guard = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t0));
        double best = t1;
        bool found = false;
        for (const auto& k : kinks) {
            const bool delayed = k.source == LevelKink::Source::delayed;
            const double tau = delayed ? sys_.delays()[k.index / n_] : 0.0;
            const std::size_t c = delayed ? k.index % n_ : k.index;
            auto value = [&](double s, Side side) {
                if (delayed) {
                    lookup(s, side, std::span<double>(scan_).first(n_));
                    return scan_[c];
                }
                u_->eval_into(s, ubuf_, side);
                return ubuf_[c];
            };
            const double s0 = t0 - tau, s1 = best - tau;
            if (!(s1 > s0)) continue;
            for (double level : k.levels) {
                double prev_s = s0;
                double prev = value(s0, Side::right) - level;
                for (int j = 1; j <= kSamples; ++j) {
                    const double sj = j == kSamples ? s1 : s0 + (s1 - s0) * j / kSamples;
                    const double vj = value(sj, j == kSamples ? Side::left : Side::right) - level;
                    if (prev == 0.0) {
                        prev = vj;
                        prev_s = sj;
                        continue;
                    }
                    if (vj != 0.0 && (vj > 0.0) != (prev > 0.0)) {
                        double lo = prev_s, hi = sj;
                        while (true) {
                            const double mid = 0.5 * (lo + hi);
                            if (!(mid > lo && mid < hi)) break;
                            const double vm = value(mid, Side::right) - level;
                            if (vm != 0.0 && (vm > 0.0) == (prev > 0.0)) {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        const double tk = delayed ? shifted_landing(hi, tau) : hi;
                        if (tk > t0 + guard && tk < best) {
                            best = tk;
                            found = true;
                        }
                        break;
                    }
                    if (vj != 0.0) {
                        prev = vj;
                        prev_s = sj;
                    }
                }
            }
        }
        return found ? std::optional<double>(best) : std::nullopt;
    }

    void eval_rhs(double t, std::span<const double> y, Side side, std::span<double> dy) {
        const auto& d = sys_.delays();
        for (std::size_t i = 0; i < l_; ++i) {
            lookup(t - d[i], side, std::span<double>(delayed_).subspan(i * n_, n_));
        }
        std::span<const double> u;
        if (u_) {
            u_->eval_into(t, ubuf_, side);
            u = std::span<const double>(ubuf_).first(u_->dim());
        }
        sys_.rhs(y, delayed_, u, dy);
    }

    double initial_step(double t, std::span<const double> y, std::span<const double> f0) {
        auto scaled_norm = [&](std::span<const double> v) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n_; ++i) {
                const double sc = opts_.abs_tol + opts_.rel_tol * std::abs(y[i]);
                acc += (v[i] / sc) * (v[i] / sc);
            }
            return std::sqrt(acc / static_cast<double>(n_));
        };
        const double d0 = scaled_norm(y);
        const double d1 = scaled_norm(f0);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        // without a landing point the mesh must not depend on T
        h0 = std::min(h0, h_max_);
        if (opts_.land_on_horizon) h0 = std::min(h0, T_);
        std::vector<double> y1(n_), f1(n_), diff(n_);
        for (std::size_t i = 0; i < n_; ++i) y1[i] = y[i] + h0 * f0[i];
        eval_rhs(t + h0, y1, Side::left, f1);
        for (std::size_t i = 0; i < n_; ++i) diff[i] = f1[i] - f0[i];
        const double d2 = all_finite(f1) ? scaled_norm(diff) / h0 : std::numeric_limits<double>::infinity();
        const double dmax = std::max(d1, d2);
        const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
        double h = std::min(100.0 * h0, h1);
        if (!(h > 0.0) || !std::isfinite(h)) h = h0;
        return h;
    }

    double locate_crossing(double t0, double t1, double thr) const {
        std::vector<double> v(n_);
        double lo = t0, hi = t1;
        for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            traj_->eval_into(mid, v);
            (max_norm(v) >= thr ? hi : lo) = mid;
        }
        return hi;
    }

    SimOutcome& finish_complete(SimOutcome& out, double norm) {
        out.kind = Outcome::completed;
        out.final_norm = norm;
        out.trajectory = traj_;
        return out;
    }

    SimOutcome& finish_escape(SimOutcome& out, EscapeReason reason, double t_escape, double norm) {
        out.kind = Outcome::escaped;
        out.reason = reason;
        out.t_escape = t_escape;
        out.final_norm = norm;
        out.trajectory = traj_;
        return out;
    }

    const DiscreteDelaySystem& sys_;
    const HistoryFn& history_;
    std::optional<InputSignal> u_;
    double T_;
    const IntegratorOptions& opts_;
    std::size_t n_;
    std::size_t l_;
    double h_max_ = std::numeric_limits<double>::infinity();
    std::vector<double> delayed_;
    std::vector<double> scan_;
    std::vector<double> ubuf_;
    std::shared_ptr<Trajectory> traj_;
};

}  // namespace detail

/// Integrates sys from history on [0, T] under input u.
[[nodiscard]] inline SimOutcome integrate(const DiscreteDelaySystem& sys, const HistoryFn& history,
                                          const InputSignal& u, double T, const IntegratorOptions& opts = {}) {
    return detail::StepIntegrator(sys, history, u, T, opts).run();
}

/// Input-free overload.
[[nodiscard]] inline SimOutcome integrate(const DiscreteDelaySystem& sys, const HistoryFn& history, double T,
                                          const IntegratorOptions& opts = {}) {
    return detail::StepIntegrator(sys, history, std::nullopt, T, opts).run();
}

}  // namespace rfcdelay
