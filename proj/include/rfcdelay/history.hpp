#pragma once

#include "rfcdelay/errors.hpp"
#include "rfcdelay/signal.hpp"
#include "rfcdelay/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rfcdelay {

enum class Interpolation { linear, cubic, general };

namespace detail {

// Cubic Hermite interpolation with three-point finite-difference slopes.
class CubicHermiteSource final : public SignalSource {
public:
    CubicHermiteSource(std::vector<double> knots, std::vector<std::vector<double>> values)
        : knots_(std::move(knots)), dim_(values.front().size()) {
        const std::size_t k = knots_.size();
        vals_.reserve(k * dim_);
        for (const auto& v : values) vals_.insert(vals_.end(), v.begin(), v.end());
        slopes_.assign(k * dim_, 0.0);
        if (k < 2) return;
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t c = 0; c < dim_; ++c) {
                if (i == 0) {
                    slopes_[c] = (vals_[dim_ + c] - vals_[c]) / (knots_[1] - knots_[0]);
                } else if (i == k - 1) {
                    slopes_[i * dim_ + c] =
                        (vals_[i * dim_ + c] - vals_[(i - 1) * dim_ + c]) / (knots_[i] - knots_[i - 1]);
                } else {
                    const double hl = knots_[i] - knots_[i - 1];
                    const double hr = knots_[i + 1] - knots_[i];
                    const double dl = (vals_[i * dim_ + c] - vals_[(i - 1) * dim_ + c]) / hl;
                    const double dr = (vals_[(i + 1) * dim_ + c] - vals_[i * dim_ + c]) / hr;
                    slopes_[i * dim_ + c] = (hr * dl + hl * dr) / (hl + hr);
                }
            }
        }
    }

    [[nodiscard]] std::size_t dim() const override { return dim_; }

    void eval(double t, Side, std::span<double> out) const override {
        if (knots_.size() == 1 || t <= knots_.front()) {
            std::copy_n(vals_.begin(), dim_, out.begin());
            return;
        }
        if (t >= knots_.back()) {
            std::copy_n(vals_.end() - static_cast<std::ptrdiff_t>(dim_), dim_, out.begin());
            return;
        }
        const auto i = static_cast<std::size_t>(std::upper_bound(knots_.begin(), knots_.end(), t) - knots_.begin()) - 1;
        const double h = knots_[i + 1] - knots_[i];
        const double s = (t - knots_[i]) / h;
        for (std::size_t c = 0; c < dim_; ++c) out[c] = piece_value(i, c, s);
    }

    [[nodiscard]] double sup_norm(double a, double b) const override {
        std::vector<double> v(dim_);
        eval(a, Side::right, v);
        double m = max_norm(v);
        eval(b, Side::right, v);
        m = std::max(m, max_norm(v));
        for (std::size_t i = 0; i + 1 < knots_.size(); ++i) {
            if (knots_[i + 1] <= a || knots_[i] >= b) continue;
            const double h = knots_[i + 1] - knots_[i];
            const double lo = std::max(0.0, (a - knots_[i]) / h);
            const double hi = std::min(1.0, (b - knots_[i]) / h);
            for (std::size_t c = 0; c < dim_; ++c) {
                // derivative of the Hermite cubic in s is a quadratic; check its roots
                const double y0 = vals_[i * dim_ + c], y1 = vals_[(i + 1) * dim_ + c];
                const double m0 = slopes_[i * dim_ + c] * h, m1 = slopes_[(i + 1) * dim_ + c] * h;
                const double qa = 3.0 * (2.0 * y0 + m0 - 2.0 * y1 + m1);
                const double qb = 2.0 * (-3.0 * y0 - 2.0 * m0 + 3.0 * y1 - m1);
                const double qc = m0;
                for (double s : quadratic_roots(qa, qb, qc)) {
                    if (s > lo && s < hi) m = std::max(m, std::abs(piece_value(i, c, s)));
                }
            }
        }
        return m;
    }

    [[nodiscard]] std::vector<double> breakpoints(double a, double b) const override {
        std::vector<double> out;
        for (double t : knots_) {
            if (t > a && t < b) out.push_back(t);
        }
        return out;
    }

private:
    [[nodiscard]] double piece_value(std::size_t i, std::size_t c, double s) const {
        const double h = knots_[i + 1] - knots_[i];
        const double s2 = s * s, s3 = s2 * s;
        const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
        return h00 * vals_[i * dim_ + c] + h10 * h * slopes_[i * dim_ + c] + h01 * vals_[(i + 1) * dim_ + c] +
               h11 * h * slopes_[(i + 1) * dim_ + c];
    }

    static std::vector<double> quadratic_roots(double a, double b, double c) {
        if (a == 0.0) {
            if (b == 0.0) return {};
            return {-c / b};
        }
        const double disc = b * b - 4 * a * c;
        if (disc < 0.0) return {};
        const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
        std::vector<double> r;
        if (q != 0.0) r.push_back(c / q);
        r.push_back(q / a);
        return r;
    }

    std::vector<double> knots_;
    std::size_t dim_;
    std::vector<double> vals_;
    std::vector<double> slopes_;
};

}  // namespace detail

/// Initial history phi on [-tau, 0]. The body is a signal evaluated on that
/// window, so its sup norm and kinks come from the same closed-form pieces.
class HistoryFn {
public:
    static HistoryFn from_signal(double tau, InputSignal body, Interpolation interp = Interpolation::general) {
        if (!(tau >= 0.0) || !std::isfinite(tau)) throw BadHistoryDomain("history length must be finite and >= 0");
        return HistoryFn(tau, std::move(body), interp);
    }

    static HistoryFn constant(double tau, std::vector<double> value) {
        return from_signal(tau, InputSignal::constant(std::move(value)), Interpolation::linear);
    }

    static HistoryFn zero(double tau, std::size_t dim) { return constant(tau, std::vector<double>(dim, 0.0)); }

    /// Knots must run from -tau to 0.
    static HistoryFn linear(std::vector<double> knots, std::vector<std::vector<double>> values) {
        check_knots(knots);
        const double tau = -knots.front();
        return from_signal(tau, InputSignal::piecewise_linear(std::move(knots), std::move(values)), Interpolation::linear);
    }

    static HistoryFn cubic(std::vector<double> knots, std::vector<std::vector<double>> values) {
        check_knots(knots);
        if (values.size() != knots.size() || values.empty() || values.front().empty()) {
            throw BadHistoryDomain("cubic history needs one non-empty value per knot");
        }
        for (const auto& v : values) {
            if (v.size() != values.front().size()) throw BadHistoryDomain("inconsistent history dimensions");
        }
        const double tau = -knots.front();
        auto src = std::make_shared<const detail::CubicHermiteSource>(std::move(knots), std::move(values));
        return from_signal(tau, InputSignal::external(std::move(src)), Interpolation::cubic);
    }

    [[nodiscard]] double tau() const noexcept { return tau_; }
    [[nodiscard]] std::size_t dim() const noexcept { return body_.dim(); }
    [[nodiscard]] Interpolation interpolation() const noexcept { return interp_; }
    [[nodiscard]] const InputSignal& body() const noexcept { return body_; }

    void eval_into(double s, std::span<double> out, Side side = Side::right) const {
        const double slack = 1e-12 * std::max(1.0, tau_);
        if (!(s >= -tau_ - slack && s <= slack)) {
            throw BadHistoryDomain("history evaluated at s = " + std::to_string(s) + " outside [-" +
                                   std::to_string(tau_) + ", 0]");
        }
        body_.eval_into(std::clamp(s, -tau_, 0.0), out, side);
    }

    [[nodiscard]] std::vector<double> eval(double s) const {
        std::vector<double> out(dim());
        eval_into(s, out);
        return out;
    }

    /// max over [-tau, 0] of |phi(s)|_inf
    [[nodiscard]] double norm() const { return body_.sup_norm(-tau_, 0.0); }

    /// Kinks of phi strictly inside (-tau, 0).
    [[nodiscard]] std::vector<double> breakpoints() const { return body_.breakpoints(-tau_, 0.0); }

private:
    HistoryFn(double tau, InputSignal body, Interpolation interp)
        : tau_(tau), body_(std::move(body)), interp_(interp) {}

    static void check_knots(const std::vector<double>& knots) {
        if (knots.empty()) throw BadHistoryDomain("history needs at least one knot");
        if (knots.back() != 0.0) throw BadHistoryDomain("history knots must end at 0");
        if (knots.front() > 0.0) throw BadHistoryDomain("history knots must start at -tau <= 0");
    }

    double tau_;
    InputSignal body_;
    Interpolation interp_;
};

/// The segment x_t on [-tau, 0], i.e. s -> traj(t + s). Requires [t - tau, t] inside the span.
[[nodiscard]] inline HistoryFn extract_history(const std::shared_ptr<const Trajectory>& traj, double t, double tau) {
    if (!traj) throw SpanTooShort("null trajectory");
    if (!(tau >= 0.0)) throw SpanTooShort("negative window length");
    if (t - tau < traj->t_start() || t > traj->t_end()) {
        throw SpanTooShort("window [" + std::to_string(t - tau) + ", " + std::to_string(t) +
                           "] not inside trajectory span [" + std::to_string(traj->t_start()) + ", " +
                           std::to_string(traj->t_end()) + "]");
    }
    auto body = InputSignal::time_shift(InputSignal::external(std::make_shared<const TrajectorySource>(traj)), t);
    return HistoryFn::from_signal(tau, std::move(body));
}

}  // namespace rfcdelay
