#pragma once

// Closed-form input signals. Every discontinuity or kink is an explicit
// breakpoint, so an integrator can restart there instead of stepping over it,
// and essential suprema over bounded intervals are computed from the piece
// parameters rather than by sampling.

#include "rfcdelay/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace rfcdelay {

/// Which one-sided value to return at a breakpoint. Right is the default
/// (right-continuous representative); Left is used by integrator stages that
/// sit on the closing end of a step.
enum class Side { right, left };

enum class SignalKind {
    constant,
    piecewise_constant,
    trapezoid_train,  // continuous piecewise-linear
    exponential_tail,
    concatenation,
    time_shift,
    zero_outside_interval,
    stack,
    external,
};

[[nodiscard]] constexpr std::string_view to_string(SignalKind k) noexcept {
    switch (k) {
        case SignalKind::constant: return "constant";
        case SignalKind::piecewise_constant: return "piecewise_constant";
        case SignalKind::trapezoid_train: return "trapezoid_train";
        case SignalKind::exponential_tail: return "exponential_tail";
        case SignalKind::concatenation: return "concatenation";
        case SignalKind::time_shift: return "time_shift";
        case SignalKind::zero_outside_interval: return "zero_outside_interval";
        case SignalKind::stack: return "stack";
        case SignalKind::external: return "external";
    }
    return "unknown";
}

/// max_i |v_i|
[[nodiscard]] inline double max_norm(std::span<const double> v) noexcept {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

/// Vector-valued signal supplied from outside the closed-form families
/// (dense trajectory windows, cubic histories). Implementations must be
/// immutable and thread-safe.
class SignalSource {
public:
    virtual ~SignalSource() = default;
    [[nodiscard]] virtual std::size_t dim() const = 0;
    virtual void eval(double t, Side side, std::span<double> out) const = 0;
    [[nodiscard]] virtual double sup_norm(double a, double b) const = 0;
    [[nodiscard]] virtual std::vector<double> breakpoints(double a, double b) const = 0;
    [[nodiscard]] virtual bool continuous() const { return true; }
};

/// Parametric description of a periodic trapezoid pulse train.
struct TrapezoidParams {
    double low = 0.0;
    double high = 1.0;
    double plateau = 1.0;  // time spent at `high`
    double ramp = 0.25;    // duration of each linear ramp
    double gap = -1.0;     // time spent at `low` between pulses; negative means "same as plateau"
    double start = 0.0;    // time at which the first up-ramp begins
    int count = 1;
};

class InputSignal {
public:
    struct Constant {
        std::vector<double> value;
    };
    struct PiecewiseConstant {
        std::vector<double> breakpoints;  // strictly increasing
        std::vector<double> values;       // (breakpoints.size() + 1) * dim, row-major per piece
    };
    struct PiecewiseLinear {
        std::vector<double> knots;   // strictly increasing, at least one
        std::vector<double> values;  // knots.size() * dim
    };
    struct ExponentialTail {
        std::vector<double> initial;  // value at t0
        double rate = 1.0;
        double t0 = 0.0;
    };
    struct Concatenation {
        std::shared_ptr<const InputSignal> first;
        std::shared_ptr<const InputSignal> second;
        double t_switch = 0.0;
    };
    struct TimeShift {
        std::shared_ptr<const InputSignal> inner;
        double offset = 0.0;  // result(t) = inner(t + offset)
    };
    struct ZeroOutside {
        std::shared_ptr<const InputSignal> inner;
        double start = 0.0;  // kept on [start, end)
        double end = 0.0;
    };
    struct Stack {
        std::vector<InputSignal> parts;
    };
    struct External {
        std::shared_ptr<const SignalSource> source;
    };

    using Node = std::variant<Constant, PiecewiseConstant, PiecewiseLinear, ExponentialTail, Concatenation,
                              TimeShift, ZeroOutside, Stack, External>;

    // ---- construction -------------------------------------------------

    static InputSignal constant(std::vector<double> value) {
        if (value.empty()) throw InvalidSignal("constant signal needs at least one component");
        return InputSignal(Constant{std::move(value)}, 0);
    }
    static InputSignal constant(double value) { return constant(std::vector<double>{value}); }
    static InputSignal zero(std::size_t dim) { return constant(std::vector<double>(dim, 0.0)); }

    /// values[i] holds on [b_{i-1}, b_i) with b_{-1} = -inf and b_k = +inf.
    static InputSignal piecewise_constant(std::vector<double> breakpoints, std::vector<std::vector<double>> values) {
        if (values.size() != breakpoints.size() + 1) {
            throw InvalidSignal("piecewise_constant needs exactly one more value than breakpoints");
        }
        check_increasing(breakpoints, "piecewise_constant breakpoints");
        return InputSignal(PiecewiseConstant{std::move(breakpoints), flatten(values)}, 0);
    }
    static InputSignal piecewise_constant(std::vector<double> breakpoints, const std::vector<double>& scalar_values) {
        std::vector<std::vector<double>> rows;
        rows.reserve(scalar_values.size());
        for (double v : scalar_values) rows.push_back({v});
        return piecewise_constant(std::move(breakpoints), std::move(rows));
    }

    /// Continuous piecewise-linear signal through (knots, values), flat outside the knot range.
    static InputSignal piecewise_linear(std::vector<double> knots, std::vector<std::vector<double>> values) {
        if (knots.empty() || values.size() != knots.size()) {
            throw InvalidSignal("piecewise_linear needs one value per knot");
        }
        check_increasing(knots, "piecewise_linear knots");
        return InputSignal(PiecewiseLinear{std::move(knots), flatten(values)}, 0);
    }
    static InputSignal piecewise_linear(std::vector<double> knots, const std::vector<double>& scalar_values) {
        std::vector<std::vector<double>> rows;
        rows.reserve(scalar_values.size());
        for (double v : scalar_values) rows.push_back({v});
        return piecewise_linear(std::move(knots), std::move(rows));
    }

    static InputSignal trapezoid_train(const TrapezoidParams& p) {
        const double gap = p.gap < 0.0 ? p.plateau : p.gap;
        if (!(p.ramp > 0.0) || p.plateau < 0.0 || gap < 0.0 || p.count < 1) {
            throw InvalidSignal("trapezoid_train needs ramp > 0, plateau >= 0, gap >= 0, count >= 1");
        }
        std::vector<double> knots;
        std::vector<double> vals;
        double t = p.start;
        auto push = [&](double time, double v) {
            if (!knots.empty() && time <= knots.back()) return;  // zero-length plateau or gap
            knots.push_back(time);
            vals.push_back(v);
        };
        for (int i = 0; i < p.count; ++i) {
            push(t, p.low);
            push(t + p.ramp, p.high);
            push(t + p.ramp + p.plateau, p.high);
            push(t + 2.0 * p.ramp + p.plateau, p.low);
            t += 2.0 * p.ramp + p.plateau + gap;
        }
        return piecewise_linear(std::move(knots), vals);
    }

    /// initial * exp(-rate (t - t0))
    static InputSignal exponential_tail(std::vector<double> initial, double rate, double t0 = 0.0) {
        if (initial.empty()) throw InvalidSignal("exponential_tail needs at least one component");
        if (!std::isfinite(rate) || !std::isfinite(t0)) throw InvalidSignal("exponential_tail parameters must be finite");
        return InputSignal(ExponentialTail{std::move(initial), rate, t0}, 0);
    }

    /// v on t < t_switch, w on t >= t_switch.
    static InputSignal concat(const InputSignal& v, const InputSignal& w, double t_switch) {
        if (v.dim() != w.dim()) throw InvalidSignal("concatenation of signals with different dimensions");
        return InputSignal(Concatenation{std::make_shared<const InputSignal>(v), std::make_shared<const InputSignal>(w),
                                         t_switch},
                           0);
    }

    /// t -> s(t + offset)
    static InputSignal time_shift(const InputSignal& s, double offset) {
        if (offset == 0.0) return s;
        return InputSignal(TimeShift{std::make_shared<const InputSignal>(s), offset}, 0);
    }

    /// s restricted to [start, end), zero elsewhere.
    static InputSignal zero_outside(const InputSignal& s, double start, double end) {
        if (!(start < end)) throw InvalidSignal("zero_outside_interval needs start < end");
        return InputSignal(ZeroOutside{std::make_shared<const InputSignal>(s), start, end}, 0);
    }

    /// Component-wise concatenation (parts[0] components first).
    static InputSignal stack(std::vector<InputSignal> parts) {
        if (parts.empty()) throw InvalidSignal("stack of zero signals");
        if (parts.size() == 1) return parts.front();
        return InputSignal(Stack{std::move(parts)}, 0);
    }

    static InputSignal external(std::shared_ptr<const SignalSource> source) {
        if (!source) throw InvalidSignal("null signal source");
        return InputSignal(External{std::move(source)}, 0);
    }

    // ---- queries ------------------------------------------------------

    [[nodiscard]] SignalKind kind() const noexcept { return static_cast<SignalKind>(node_->index()); }
    [[nodiscard]] const Node& node() const noexcept { return *node_; }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }

    void eval_into(double t, std::span<double> out, Side side = Side::right) const {
        if (!std::isfinite(t)) throw OutOfDomain("signal evaluated at non-finite time");
        eval_impl(t, side, out);
    }

    [[nodiscard]] std::vector<double> eval(double t, Side side = Side::right) const {
        std::vector<double> out(dim_);
        eval_into(t, out, side);
        return out;
    }

    /// Scalar convenience for one-dimensional signals.
    [[nodiscard]] double value(double t, Side side = Side::right) const {
        double out[16];
        if (dim_ > 16) return eval(t, side).front();
        eval_into(t, std::span<double>(out, dim_), side);
        return out[0];
    }

    /// ess sup over [a, b] of the max-norm; for a == b the value at a.
    [[nodiscard]] double sup_norm(double a, double b) const {
        if (a > b) std::swap(a, b);
        if (a == b) {
            std::vector<double> v(dim_);
            eval_into(a, v);
            return max_norm(v);
        }
        return sup_impl(a, b);
    }

    /// Points in the open interval (a, b) where the signal jumps or loses smoothness, sorted, unique.
    [[nodiscard]] std::vector<double> breakpoints(double a, double b) const {
        std::vector<double> out;
        collect_breakpoints(a, b, out);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    [[nodiscard]] bool is_continuous() const;

private:
    InputSignal(Node node, int) : node_(std::make_shared<const Node>(std::move(node))) { dim_ = compute_dim(*node_); }

    static void check_increasing(const std::vector<double>& t, const char* what) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (!std::isfinite(t[i])) throw InvalidSignal(std::string(what) + " must be finite");
            if (i > 0 && !(t[i] > t[i - 1])) throw InvalidSignal(std::string(what) + " must be strictly increasing");
        }
    }

    static std::vector<double> flatten(const std::vector<std::vector<double>>& rows) {
        if (rows.empty() || rows.front().empty()) throw InvalidSignal("signal values must be non-empty");
        const std::size_t d = rows.front().size();
        std::vector<double> flat;
        flat.reserve(rows.size() * d);
        for (const auto& r : rows) {
            if (r.size() != d) throw InvalidSignal("all signal values must have the same dimension");
            flat.insert(flat.end(), r.begin(), r.end());
        }
        return flat;
    }

    static std::size_t compute_dim(const Node& n);

    void eval_impl(double t, Side side, std::span<double> out) const;
    [[nodiscard]] double sup_impl(double a, double b) const;
    void collect_breakpoints(double a, double b, std::vector<double>& out) const;

    std::shared_ptr<const Node> node_;
    std::size_t dim_ = 0;
};

// ---- implementation ---------------------------------------------------

inline std::size_t InputSignal::compute_dim(const Node& n) {
    return std::visit(
        [](const auto& x) -> std::size_t {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return x.value.size();
            } else if constexpr (std::is_same_v<T, PiecewiseConstant>) {
                return x.values.size() / (x.breakpoints.size() + 1);
            } else if constexpr (std::is_same_v<T, PiecewiseLinear>) {
                return x.values.size() / x.knots.size();
            } else if constexpr (std::is_same_v<T, ExponentialTail>) {
                return x.initial.size();
            } else if constexpr (std::is_same_v<T, Concatenation>) {
                return x.first->dim();
            } else if constexpr (std::is_same_v<T, TimeShift> || std::is_same_v<T, ZeroOutside>) {
                return x.inner->dim();
            } else if constexpr (std::is_same_v<T, Stack>) {
                std::size_t d = 0;
                for (const auto& p : x.parts) d += p.dim();
                return d;
            } else {
                return x.source->dim();
            }
        },
        n);
}

inline void InputSignal::eval_impl(double t, Side side, std::span<double> out) const {
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Constant>) {
                std::copy(x.value.begin(), x.value.end(), out.begin());
            } else if constexpr (std::is_same_v<T, PiecewiseConstant>) {
                const auto it = side == Side::right
                                    ? std::upper_bound(x.breakpoints.begin(), x.breakpoints.end(), t)
                                    : std::lower_bound(x.breakpoints.begin(), x.breakpoints.end(), t);
                const auto piece = static_cast<std::size_t>(it - x.breakpoints.begin());
                const auto first = x.values.begin() + static_cast<std::ptrdiff_t>(piece * dim_);
                std::copy(first, first + static_cast<std::ptrdiff_t>(dim_), out.begin());
            } else if constexpr (std::is_same_v<T, PiecewiseLinear>) {
                const auto& k = x.knots;
                if (t <= k.front() || k.size() == 1) {
                    std::copy_n(x.values.begin(), dim_, out.begin());
                } else if (t >= k.back()) {
                    std::copy_n(x.values.end() - static_cast<std::ptrdiff_t>(dim_), dim_, out.begin());
                } else {
                    const auto hi = static_cast<std::size_t>(std::upper_bound(k.begin(), k.end(), t) - k.begin());
                    const std::size_t lo = hi - 1;
                    const double w = (t - k[lo]) / (k[hi] - k[lo]);
                    for (std::size_t i = 0; i < dim_; ++i) {
                        const double a = x.values[lo * dim_ + i];
                        const double b = x.values[hi * dim_ + i];
                        out[i] = a + w * (b - a);
                    }
                }
            } else if constexpr (std::is_same_v<T, ExponentialTail>) {
                const double f = std::exp(-x.rate * (t - x.t0));
                for (std::size_t i = 0; i < dim_; ++i) out[i] = x.initial[i] * f;
            } else if constexpr (std::is_same_v<T, Concatenation>) {
                const bool use_first = t < x.t_switch || (t == x.t_switch && side == Side::left);
                (use_first ? x.first : x.second)->eval_impl(t, side, out);
            } else if constexpr (std::is_same_v<T, TimeShift>) {
                // t + offset can round across an inner breakpoint b; the jump must
                // sit at the advertised shifted time b - offset instead
                const double ts = t + x.offset;
                const double tol = 8.0 * std::numeric_limits<double>::epsilon() *
                                   std::max({1.0, std::abs(t), std::abs(x.offset)});
                std::vector<double> near;
                x.inner->collect_breakpoints(ts - tol, ts + tol, near);
                if (near.empty()) {
                    x.inner->eval_impl(ts, side, out);
                } else {
                    const double b = *std::min_element(near.begin(), near.end(), [ts](double p, double q) {
                        return std::abs(p - ts) < std::abs(q - ts);
                    });
                    const double shifted = b - x.offset;
                    x.inner->eval_impl(b, t < shifted ? Side::left : t > shifted ? Side::right : side, out);
                }
            } else if constexpr (std::is_same_v<T, ZeroOutside>) {
                const bool inside = side == Side::right ? (t >= x.start && t < x.end) : (t > x.start && t <= x.end);
                if (inside) {
                    x.inner->eval_impl(t, side, out);
                } else {
                    std::fill_n(out.begin(), dim_, 0.0);
                }
            } else if constexpr (std::is_same_v<T, Stack>) {
                std::size_t off = 0;
                for (const auto& p : x.parts) {
                    p.eval_impl(t, side, out.subspan(off, p.dim()));
                    off += p.dim();
                }
            } else {
                x.source->eval(t, side, out.first(dim_));
            }
        },
        *node_);
}

inline double InputSignal::sup_impl(double a, double b) const {
    return std::visit(
        [&](const auto& x) -> double {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return max_norm(x.value);
            } else if constexpr (std::is_same_v<T, PiecewiseConstant>) {
                // pieces meeting (a, b) in a set of positive length
                const auto& bp = x.breakpoints;
                const auto first = static_cast<std::size_t>(std::upper_bound(bp.begin(), bp.end(), a) - bp.begin());
                const auto last = static_cast<std::size_t>(std::lower_bound(bp.begin(), bp.end(), b) - bp.begin());
                double m = 0.0;
                for (std::size_t p = first; p <= last; ++p) {
                    m = std::max(m, max_norm(std::span<const double>(x.values).subspan(p * dim_, dim_)));
                }
                return m;
            } else if constexpr (std::is_same_v<T, PiecewiseLinear>) {
                std::vector<double> v(dim_);
                eval_impl(a, Side::right, v);
                double m = max_norm(v);
                eval_impl(b, Side::right, v);
                m = std::max(m, max_norm(v));
                const auto& k = x.knots;
                auto it = std::upper_bound(k.begin(), k.end(), a);
                for (; it != k.end() && *it < b; ++it) {
                    const auto idx = static_cast<std::size_t>(it - k.begin());
                    m = std::max(m, max_norm(std::span<const double>(x.values).subspan(idx * dim_, dim_)));
                }
                return m;
            } else if constexpr (std::is_same_v<T, ExponentialTail>) {
                std::vector<double> v(dim_);
                eval_impl(a, Side::right, v);
                double m = max_norm(v);
                eval_impl(b, Side::right, v);
                return std::max(m, max_norm(v));
            } else if constexpr (std::is_same_v<T, Concatenation>) {
                double m = 0.0;
                if (a < x.t_switch) m = std::max(m, x.first->sup_norm(a, std::min(b, x.t_switch)));
                if (b > x.t_switch) m = std::max(m, x.second->sup_norm(std::max(a, x.t_switch), b));
                return m;
            } else if constexpr (std::is_same_v<T, TimeShift>) {
                return x.inner->sup_norm(a + x.offset, b + x.offset);
            } else if constexpr (std::is_same_v<T, ZeroOutside>) {
                const double lo = std::max(a, x.start);
                const double hi = std::min(b, x.end);
                double m = 0.0;
                if (lo < hi) m = x.inner->sup_norm(lo, hi);
                return m;  // the zero part contributes 0
            } else if constexpr (std::is_same_v<T, Stack>) {
                double m = 0.0;
                for (const auto& p : x.parts) m = std::max(m, p.sup_norm(a, b));
                return m;
            } else {
                return x.source->sup_norm(a, b);
            }
        },
        *node_);
}

inline void InputSignal::collect_breakpoints(double a, double b, std::vector<double>& out) const {
    auto add_range = [&](const std::vector<double>& pts) {
        for (auto it = std::upper_bound(pts.begin(), pts.end(), a); it != pts.end() && *it < b; ++it) {
            out.push_back(*it);
        }
    };
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, PiecewiseConstant>) {
                add_range(x.breakpoints);
            } else if constexpr (std::is_same_v<T, PiecewiseLinear>) {
                add_range(x.knots);
            } else if constexpr (std::is_same_v<T, Concatenation>) {
                if (a < x.t_switch && x.t_switch < b) out.push_back(x.t_switch);
                if (a < x.t_switch) x.first->collect_breakpoints(a, std::min(b, x.t_switch), out);
                if (b > x.t_switch) x.second->collect_breakpoints(std::max(a, x.t_switch), b, out);
            } else if constexpr (std::is_same_v<T, TimeShift>) {
                std::vector<double> inner;
                x.inner->collect_breakpoints(a + x.offset, b + x.offset, inner);
                for (double t : inner) out.push_back(t - x.offset);
            } else if constexpr (std::is_same_v<T, ZeroOutside>) {
                if (a < x.start && x.start < b) out.push_back(x.start);
                if (a < x.end && x.end < b) out.push_back(x.end);
                const double lo = std::max(a, x.start);
                const double hi = std::min(b, x.end);
                if (lo < hi) x.inner->collect_breakpoints(lo, hi, out);
            } else if constexpr (std::is_same_v<T, Stack>) {
                for (const auto& p : x.parts) p.collect_breakpoints(a, b, out);
            } else if constexpr (std::is_same_v<T, External>) {
                const auto pts = x.source->breakpoints(a, b);
                out.insert(out.end(), pts.begin(), pts.end());
            }
        },
        *node_);
}

inline bool InputSignal::is_continuous() const {
    return std::visit(
        [&](const auto& x) -> bool {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, PiecewiseConstant>) {
                return x.breakpoints.empty();
            } else if constexpr (std::is_same_v<T, Concatenation>) {
                if (!x.first->is_continuous() || !x.second->is_continuous()) return false;
                return x.first->eval(x.t_switch, Side::left) == x.second->eval(x.t_switch, Side::right);
            } else if constexpr (std::is_same_v<T, TimeShift>) {
                return x.inner->is_continuous();
            } else if constexpr (std::is_same_v<T, ZeroOutside>) {
                if (!x.inner->is_continuous()) return false;
                return max_norm(x.inner->eval(x.start)) == 0.0 && max_norm(x.inner->eval(x.end, Side::left)) == 0.0;
            } else if constexpr (std::is_same_v<T, Stack>) {
                return std::all_of(x.parts.begin(), x.parts.end(), [](const auto& p) { return p.is_continuous(); });
            } else if constexpr (std::is_same_v<T, External>) {
                return x.source->continuous();
            } else {
                return true;
            }
        },
        *node_);
}

// ---- smoothing ----------------------------------------------------------

namespace detail {

// Integral of a piecewise-constant schedule over [a, b], per component.
inline void integrate_piecewise_constant(const InputSignal::PiecewiseConstant& pc, std::size_t dim, double a, double b,
                                         std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    const auto& bp = pc.breakpoints;
    auto piece = static_cast<std::size_t>(std::upper_bound(bp.begin(), bp.end(), a) - bp.begin());
    double left = a;
    while (left < b) {
        const double right = piece < bp.size() ? std::min(bp[piece], b) : b;
        const double len = right - left;
        for (std::size_t i = 0; i < dim; ++i) out[i] += len * pc.values[piece * dim + i];
        left = right;
        ++piece;
    }
}

}  // namespace detail

/// Moving average of a piecewise-constant schedule over a centred window of
/// width `width`. The result is continuous and piecewise linear with knots at
/// b +- width/2; around an isolated breakpoint it is a linear ramp of total
/// width `width`, and it equals the schedule wherever no breakpoint lies
/// within width/2.
[[nodiscard]] inline InputSignal moving_average(const InputSignal& schedule, double width) {
    const auto* pc = std::get_if<InputSignal::PiecewiseConstant>(&schedule.node());
    if (pc == nullptr) throw InvalidSignal("moving_average expects a piecewise_constant schedule");
    if (!(width > 0.0) || !std::isfinite(width)) throw InvalidSignal("moving_average width must be positive");
    if (pc->breakpoints.empty()) return schedule;
    const std::size_t dim = schedule.dim();
    const double half = 0.5 * width;
    std::vector<double> knots;
    knots.reserve(2 * pc->breakpoints.size());
    for (double b : pc->breakpoints) {
        knots.push_back(b - half);
        knots.push_back(b + half);
    }
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end(), [](double x, double y) { return !(y > x); }), knots.end());
    std::vector<std::vector<double>> values(knots.size(), std::vector<double>(dim));
    const auto& bp = pc->breakpoints;
    for (std::size_t k = 0; k < knots.size(); ++k) {
        const double a = knots[k] - half;
        const double b = knots[k] + half;
        // a window that only touches breakpoints at its ends (up to rounding) sees one piece
        const double eps = 16.0 * std::numeric_limits<double>::epsilon() * std::max({1.0, std::abs(a), std::abs(b)});
        const auto first = std::upper_bound(bp.begin(), bp.end(), a + eps);
        const auto last = std::lower_bound(bp.begin(), bp.end(), b - eps);
        if (first >= last) {
            const auto piece = static_cast<std::size_t>(std::upper_bound(bp.begin(), bp.end(), knots[k]) - bp.begin());
            std::copy_n(pc->values.begin() + static_cast<std::ptrdiff_t>(piece * dim), dim, values[k].begin());
            continue;
        }
        detail::integrate_piecewise_constant(*pc, dim, a, b, values[k]);
        for (double& v : values[k]) v /= width;
    }
    return InputSignal::piecewise_linear(std::move(knots), std::move(values));
}

/// Shortest interior piece of a piecewise-constant schedule (infinity with fewer than two breakpoints).
[[nodiscard]] inline double min_dwell(const InputSignal& schedule) {
    const auto* pc = std::get_if<InputSignal::PiecewiseConstant>(&schedule.node());
    if (pc == nullptr) throw InvalidSignal("min_dwell expects a piecewise_constant schedule");
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < pc->breakpoints.size(); ++i) {
        m = std::min(m, pc->breakpoints[i] - pc->breakpoints[i - 1]);
    }
    return m;
}

/// Trapezoid smoothing of a square schedule: each jump is replaced by a
/// linear ramp of width delta centred on the breakpoint. Requires
/// delta < min_dwell / 2 so that ramps never touch.
[[nodiscard]] inline InputSignal smooth_square(const InputSignal& schedule, double delta) {
    if (!(delta > 0.0)) throw InvalidSignal("smooth_square needs delta > 0");
    const double dwell = min_dwell(schedule);
    if (!(delta < 0.5 * dwell)) {
        throw DwellTooSmall("delta = " + std::to_string(delta) + " is not below half the minimum dwell " +
                            std::to_string(dwell));
    }
    return moving_average(schedule, delta);
}

}  // namespace rfcdelay
