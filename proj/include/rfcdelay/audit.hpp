#pragma once

#include "rfcdelay/history.hpp"
#include "rfcdelay/random.hpp"
#include "rfcdelay/signal.hpp"
#include "rfcdelay/system.hpp"
#include "rfcdelay/trajectory.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace rfcdelay {

namespace detail {

// 8-point Gauss-Legendre on [-1, 1]
inline constexpr std::array<double, 8> kGaussNodes{
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kGaussWeights{
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

class RhsAlongTrajectory {
public:
    RhsAlongTrajectory(const Trajectory& traj, const DiscreteDelaySystem& sys, const HistoryFn& history,
                       const std::optional<InputSignal>& u)
        : traj_(traj), sys_(sys), history_(history), u_(u), x_(sys.state_dim()),
          delayed_(sys.delay_count() * sys.state_dim()), ubuf_(std::max<std::size_t>(sys.input_dim(), 1)) {}

    void operator()(double t, std::span<double> dx) {
        const std::size_t n = sys_.state_dim();
        traj_.eval_into(t, x_);
        const auto& d = sys_.delays();
        for (std::size_t i = 0; i < d.size(); ++i) {
            auto slot = std::span<double>(delayed_).subspan(i * n, n);
            const double s = t - d[i];
            if (s <= 0.0) {
                history_.eval_into(std::max(s, -history_.tau()), slot);
            } else {
                traj_.eval_into(s, slot);
            }
        }
        std::span<const double> uv;
        if (u_) {
            u_->eval_into(t, ubuf_);
            uv = std::span<const double>(ubuf_).first(u_->dim());
        }
        sys_.rhs(x_, delayed_, uv, dx);
    }

private:
    const Trajectory& traj_;
    const DiscreteDelaySystem& sys_;
    const HistoryFn& history_;
    const std::optional<InputSignal>& u_;
    std::vector<double> x_;
    std::vector<double> delayed_;
    std::vector<double> ubuf_;
};

}  // namespace detail

/// max over `sample_count` seeded random times t of |x(t) - x(0) - int_0^t f ds|_inf.
/// The integral is accumulated step by step with Gauss-Legendre quadrature on
/// the dense output; nodes are interior to steps, so they avoid input breakpoints.
[[nodiscard]] inline double residual_audit(const Trajectory& traj, const DiscreteDelaySystem& sys,
                                           const HistoryFn& history, const std::optional<InputSignal>& u,
                                           int sample_count = 200, std::uint64_t seed = 0) {
    const std::size_t n = sys.state_dim();
    const std::size_t steps = traj.step_count();
    if (steps == 0 || sample_count <= 0) return 0.0;
    detail::RhsAlongTrajectory f(traj, sys, history, u);
    std::vector<double> dx(n);

    auto quad = [&](double a, double b, std::span<double> acc) {
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (std::size_t q = 0; q < detail::kGaussNodes.size(); ++q) {
            f(mid + half * detail::kGaussNodes[q], dx);
            for (std::size_t i = 0; i < n; ++i) acc[i] += half * detail::kGaussWeights[q] * dx[i];
        }
    };

    // prefix integrals at step starts
    std::vector<double> prefix((steps + 1) * n, 0.0);
    for (std::size_t s = 0; s < steps; ++s) {
        auto cur = std::span<double>(prefix).subspan((s + 1) * n, n);
        std::copy_n(prefix.begin() + static_cast<std::ptrdiff_t>(s * n), n, cur.begin());
        quad(traj.step_start(s), traj.step_end(s), cur);
    }

    Rng rng(seed);
    const auto x0 = traj.initial_state();
    std::vector<double> acc(n), x(n);
    double worst = 0.0;
    for (int k = 0; k < sample_count; ++k) {
        const double t = traj.t_start() + (traj.t_end() - traj.t_start()) * rng.uniform();
        std::size_t s = 0, hi = steps;
        while (hi - s > 1) {
            const std::size_t mid = (s + hi) / 2;
            (traj.step_start(mid) <= t ? s : hi) = mid;
        }
        std::copy_n(prefix.begin() + static_cast<std::ptrdiff_t>(s * n), n, acc.begin());
        if (t > traj.step_start(s)) quad(traj.step_start(s), t, acc);
        traj.eval_into(t, x);
        for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(x[i] - x0[i] - acc[i]));
    }
    return worst;
}

}  // namespace rfcdelay
