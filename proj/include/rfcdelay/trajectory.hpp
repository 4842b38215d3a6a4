#pragma once

#include "rfcdelay/errors.hpp"
#include "rfcdelay/signal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rfcdelay {

/// Dense-output solution assembled from accepted Dormand-Prince steps.
///
/// Each step stores the five coefficient rows of the quartic continuous
/// extension; evaluating at a step boundary returns the stored state exactly.
class Trajectory {
public:
    static constexpr std::size_t kRows = 5;

    Trajectory(std::size_t dim, double t_start, std::span<const double> x_start)
        : dim_(dim), t_start_(t_start), t_end_(t_start), x_end_(x_start.begin(), x_start.end()),
          x_start_(x_start.begin(), x_start.end()) {}

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] double t_start() const noexcept { return t_start_; }
    [[nodiscard]] double t_end() const noexcept { return t_end_; }
    [[nodiscard]] std::size_t step_count() const noexcept { return t0_.size(); }
    [[nodiscard]] std::span<const double> initial_state() const noexcept { return x_start_; }
    [[nodiscard]] std::span<const double> final_state() const noexcept { return x_end_; }
    [[nodiscard]] const std::vector<double>& error_estimates() const noexcept { return err_; }
    /// Times the step controller was forced to land on (input and delay breakpoints).
    [[nodiscard]] const std::vector<double>& forced_breakpoints() const noexcept { return forced_; }

    [[nodiscard]] double step_start(std::size_t i) const { return t0_.at(i); }
    [[nodiscard]] double step_end(std::size_t i) const { return i + 1 < t0_.size() ? t0_[i + 1] : t_end_; }

    /// Accepted step endpoints including t_start.
    [[nodiscard]] std::vector<double> mesh() const {
        std::vector<double> m(t0_);
        m.push_back(t_end_);
        return m;
    }

    /// Appends a step [t0, t1]; `rows` holds kRows * dim coefficients, `x1` the state at t1.
    void push_step(double t0, double t1, std::span<const double> rows, std::span<const double> x1, double err) {
        t0_.push_back(t0);
        h_.push_back(t1 - t0);
        coef_.insert(coef_.end(), rows.begin(), rows.end());
        err_.push_back(err);
        t_end_ = t1;
        std::copy(x1.begin(), x1.end(), x_end_.begin());
    }

    void set_forced_breakpoints(std::vector<double> bps) { forced_ = std::move(bps); }

    /// Drops every step starting at or after t (used to trim escape prefixes).
    void truncate_after_step(std::size_t keep) {
        if (keep >= t0_.size()) return;
        std::vector<double> x(dim_);
        if (keep == 0) {
            x = x_start_;
        } else {
            eval_step(keep - 1, 1.0, x);
        }
        t_end_ = keep == 0 ? t_start_ : t0_[keep];
        t0_.resize(keep);
        h_.resize(keep);
        coef_.resize(keep * kRows * dim_);
        err_.resize(keep);
        x_end_ = x;
    }

    [[nodiscard]] bool contains(double t) const noexcept { return t >= t_start_ && t <= t_end_; }

    void eval_into(double t, std::span<double> out) const {
        if (!contains(t)) {
            throw OutOfDomain("trajectory evaluated at t = " + std::to_string(t) + " outside [" +
                              std::to_string(t_start_) + ", " + std::to_string(t_end_) + "]");
        }
        if (t == t_end_ || t0_.empty()) {
            std::copy(x_end_.begin(), x_end_.end(), out.begin());
            return;
        }
        const auto it = std::upper_bound(t0_.begin(), t0_.end(), t);
        const auto i = static_cast<std::size_t>(it - t0_.begin()) - 1;
        eval_step(i, (t - t0_[i]) / h_[i], out);
    }

    [[nodiscard]] std::vector<double> eval(double t) const {
        std::vector<double> out(dim_);
        eval_into(t, out);
        return out;
    }

    /// Quartic interpolant of step i at theta in [0, 1].
    void eval_step(std::size_t i, double theta, std::span<double> out) const {
        const double* r = coef_.data() + i * kRows * dim_;
        const double th1 = 1.0 - theta;
        for (std::size_t c = 0; c < dim_; ++c) {
            const double r1 = r[c], r2 = r[dim_ + c], r3 = r[2 * dim_ + c], r4 = r[3 * dim_ + c],
                         r5 = r[4 * dim_ + c];
            out[c] = r1 + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5)));
        }
    }

    /// Maximum of |x(t)|_inf over [a, b] (clamped to the span), using the
    /// interior critical points of each step's quartic. Components
    /// [first_comp, first_comp + count) only, all by default.
    [[nodiscard]] double sup_norm(double a, double b, std::size_t first_comp = 0,
                                  std::size_t count = static_cast<std::size_t>(-1)) const {
        const std::size_t c0 = std::min(first_comp, dim_);
        const std::size_t c1 = std::min(dim_, c0 + std::min(count, dim_));
        a = std::max(a, t_start_);
        b = std::min(b, t_end_);
        std::vector<double> v(dim_);
        auto part = [&] { return max_norm(std::span<const double>(v).subspan(c0, c1 - c0)); };
        eval_into(a, v);
        double m = part();
        if (b <= a) return m;
        eval_into(b, v);
        m = std::max(m, part());
        if (t0_.empty()) return m;
        auto first = static_cast<std::size_t>(std::upper_bound(t0_.begin(), t0_.end(), a) - t0_.begin());
        if (first > 0) --first;
        for (std::size_t i = first; i < t0_.size() && t0_[i] < b; ++i) {
            const double lo = std::max(0.0, (a - t0_[i]) / h_[i]);
            const double hi = std::min(1.0, (b - t0_[i]) / h_[i]);
            m = std::max(m, step_sup(i, lo, hi, c0, c1));
        }
        return m;
    }

private:
    // Power-basis coefficients of component c of step i: y = sum_k p[k] theta^k.
    [[nodiscard]] std::array<double, 5> power_coeffs(std::size_t i, std::size_t c) const {
        const double* r = coef_.data() + i * kRows * dim_;
        const double r1 = r[c], r2 = r[dim_ + c], r3 = r[2 * dim_ + c], r4 = r[3 * dim_ + c], r5 = r[4 * dim_ + c];
        return {r1, r2 + r3, r4 + r5 - r3, -(r4 + 2.0 * r5), r5};
    }

    [[nodiscard]] double step_sup(std::size_t i, double lo, double hi, std::size_t c0, std::size_t c1) const {
        double m = 0.0;
        constexpr int kSub = 16;
        for (std::size_t c = c0; c < c1; ++c) {
            const auto p = power_coeffs(i, c);
            auto value = [&](double s) { return p[0] + s * (p[1] + s * (p[2] + s * (p[3] + s * p[4]))); };
            auto slope = [&](double s) { return p[1] + s * (2.0 * p[2] + s * (3.0 * p[3] + s * 4.0 * p[4])); };
            m = std::max({m, std::abs(value(lo)), std::abs(value(hi))});
            double s0 = lo;
            double d0 = slope(s0);
            for (int k = 1; k <= kSub; ++k) {
                const double s1 = lo + (hi - lo) * k / kSub;
                const double d1 = slope(s1);
                if ((d0 < 0.0) != (d1 < 0.0)) {
                    double a = s0, b = s1, da = d0;
                    for (int it = 0; it < 60; ++it) {
                        const double mid = 0.5 * (a + b);
                        const double dm = slope(mid);
                        if ((dm < 0.0) == (da < 0.0)) {
                            a = mid;
                            da = dm;
                        } else {
                            b = mid;
                        }
                    }
                    m = std::max(m, std::abs(value(0.5 * (a + b))));
                }
                s0 = s1;
                d0 = d1;
            }
        }
        return m;
    }

    std::size_t dim_;
    double t_start_;
    double t_end_;
    std::vector<double> x_end_;
    std::vector<double> x_start_;
    std::vector<double> t0_;
    std::vector<double> h_;
    std::vector<double> coef_;
    std::vector<double> err_;
    std::vector<double> forced_;
};

/// Exposes a window of a finished trajectory as a signal (for history extraction).
class TrajectorySource final : public SignalSource {
public:
    explicit TrajectorySource(std::shared_ptr<const Trajectory> traj) : traj_(std::move(traj)) {}

    [[nodiscard]] std::size_t dim() const override { return traj_->dim(); }
    void eval(double t, Side, std::span<double> out) const override {
        const double slack = 1e-12 * std::max(1.0, std::abs(t));
        if (t < traj_->t_start() && t >= traj_->t_start() - slack) t = traj_->t_start();
        if (t > traj_->t_end() && t <= traj_->t_end() + slack) t = traj_->t_end();
        traj_->eval_into(t, out);
    }
    [[nodiscard]] double sup_norm(double a, double b) const override {
        if (a < traj_->t_start() || b > traj_->t_end()) {
            throw OutOfDomain("sup over an interval outside the trajectory span");
        }
        return traj_->sup_norm(a, b);
    }
    [[nodiscard]] std::vector<double> breakpoints(double a, double b) const override {
        std::vector<double> out;
        for (double t : traj_->forced_breakpoints()) {
            if (t > a && t < b) out.push_back(t);
        }
        return out;
    }
    [[nodiscard]] const std::shared_ptr<const Trajectory>& trajectory() const noexcept { return traj_; }

private:
    std::shared_ptr<const Trajectory> traj_;
};

}  // namespace rfcdelay
