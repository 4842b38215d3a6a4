#pragma once

#include "rfcdelay/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rfcdelay {

/// Right-hand side f(x(t), [x(t - tau_1), ..., x(t - tau_l)], u(t)) -> dx.
/// `delayed` holds l * n values, one block of n per delay in delay order.
using DelayRhs = std::function<void(std::span<const double> x, std::span<const double> delayed,
                                    std::span<const double> u, std::span<double> dx)>;

/// f loses smoothness where one delayed or input component crosses a level,
/// e.g. the corners of a saturation. The integrator ends steps on such crossings.
struct LevelKink {
    enum class Source { delayed, input };
    Source source = Source::delayed;
    /// delay * n + component for delayed values; the component for inputs
    std::size_t index = 0;
    std::vector<double> levels;
};

/// x'(t) = f(x(t), x(t - tau_1), ..., x(t - tau_l), u(t)) with 0 < tau_1 < ... < tau_l.
/// An empty delay list gives an ordinary differential equation.
class DiscreteDelaySystem {
public:
    DiscreteDelaySystem(std::size_t state_dim, std::size_t input_dim, std::vector<double> delays, DelayRhs rhs,
                        std::string name = {})
        : n_(state_dim), m_(input_dim), delays_(std::move(delays)), rhs_(std::move(rhs)), name_(std::move(name)) {
        if (n_ == 0) throw InvalidSystem("state dimension must be positive");
        if (!rhs_) throw InvalidSystem("right-hand side is empty");
        for (std::size_t i = 0; i < delays_.size(); ++i) {
            if (!(delays_[i] > 0.0) || !std::isfinite(delays_[i])) {
                throw InvalidSystem("delays must be finite and positive");
            }
            if (i > 0 && !(delays_[i] > delays_[i - 1])) throw InvalidSystem("delays must be strictly increasing");
        }
    }

    [[nodiscard]] std::size_t state_dim() const noexcept { return n_; }
    [[nodiscard]] std::size_t input_dim() const noexcept { return m_; }
    [[nodiscard]] std::size_t delay_count() const noexcept { return delays_.size(); }
    [[nodiscard]] const std::vector<double>& delays() const noexcept { return delays_; }
    [[nodiscard]] const std::string& name() const noexcept { return name_; }

    /// Longest delay (history length); 0 without delays.
    [[nodiscard]] double tau() const noexcept { return delays_.empty() ? 0.0 : delays_.back(); }

    /// min_i (tau_i - tau_{i-1}) with tau_0 = 0; 0 without delays.
    [[nodiscard]] double tau_star() const noexcept {
        double best = 0.0;
        double prev = 0.0;
        for (std::size_t i = 0; i < delays_.size(); ++i) {
            const double gap = delays_[i] - prev;
            best = i == 0 ? gap : std::min(best, gap);
            prev = delays_[i];
        }
        return best;
    }

    void rhs(std::span<const double> x, std::span<const double> delayed, std::span<const double> u,
             std::span<double> dx) const {
        rhs_(x, delayed, u, dx);
    }

    [[nodiscard]] const DelayRhs& rhs_function() const noexcept { return rhs_; }

    [[nodiscard]] const std::vector<LevelKink>& level_kinks() const noexcept { return kinks_; }

    DiscreteDelaySystem& with_level_kinks(std::vector<LevelKink> kinks) {
        for (const auto& k : kinks) {
            const std::size_t bound = k.source == LevelKink::Source::delayed ? delays_.size() * n_ : m_;
            if (k.index >= bound) throw InvalidSystem("level kink refers to a missing component");
        }
        kinks_ = std::move(kinks);
        return *this;
    }

private:
    std::size_t n_;
    std::size_t m_;
    std::vector<double> delays_;
    DelayRhs rhs_;
    std::string name_;
    std::vector<LevelKink> kinks_;
};

/// The nondelayed system z' = f(z, v, u) whose inputs (v_1, ..., v_l, u)
/// replace the delayed states: l * n + m inputs, no delays.
[[nodiscard]] inline DiscreteDelaySystem associated_system(const DiscreteDelaySystem& sys) {
    const std::size_t n = sys.state_dim();
    const std::size_t vdim = sys.delay_count() * n;
    DelayRhs f = [rhs = sys.rhs_function(), vdim](std::span<const double> x, std::span<const double>,
                                                  std::span<const double> input, std::span<double> dx) {
        rhs(x, input.first(vdim), input.subspan(vdim), dx);
    };
    DiscreteDelaySystem out(n, vdim + sys.input_dim(), {}, std::move(f),
                            sys.name().empty() ? "associated" : sys.name() + "-associated");
    std::vector<LevelKink> kinks;
    for (auto k : sys.level_kinks()) {
        if (k.source == LevelKink::Source::input) k.index += vdim;
        k.source = LevelKink::Source::input;
        kinks.push_back(std::move(k));
    }
    out.with_level_kinks(std::move(kinks));
    return out;
}

}  // namespace rfcdelay
