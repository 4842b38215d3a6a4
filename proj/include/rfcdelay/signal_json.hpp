#pragma once

// JSON description of input signals and histories.
//
//   {"kind": "constant", "value": 0.5}                       (or a vector)
//   {"kind": "piecewise_constant", "breakpoints": [...], "values": [...]}
//   {"kind": "piecewise_linear", "knots": [...], "values": [...]}
//   {"kind": "trapezoid", "low", "high", "plateau", "ramp", "gap", "start", "count"}
//   {"kind": "exponential_tail", "initial": [...], "rate": 1, "t0": 0}
//   {"kind": "concat", "first": {...}, "second": {...}, "t_switch": t}
//   {"kind": "time_shift", "signal": {...}, "offset": o}      s(t + o)
//   {"kind": "zero_outside", "signal": {...}, "start": a, "end": b}
//   {"kind": "stack", "parts": [{...}, ...]}
//   {"kind": "smooth_square", "schedule": {...}, "delta": d}
//   {"kind": "moving_average", "schedule": {...}, "width": w}
//   {"kind": "greedy_schedule", "x0": [1, 0], "dwell": 0.001, "T": 20}
//
// "values" holds scalars or equal-length vectors. Unknown keys are rejected.

#include "rfcdelay/errors.hpp"
#include "rfcdelay/paper_systems.hpp"
#include "rfcdelay/signal.hpp"

#include <json.hpp>

#include <set>
#include <string>
#include <vector>

namespace rfcdelay {

using Json = nlohmann::json;

namespace detail {

inline void check_keys(const Json& j, const std::string& path, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigInvalid(path + ": expected an object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) throw ConfigInvalid(path + "." + key + ": unknown key");
    }
}

inline double get_number(const Json& j, const std::string& key, const std::string& path, double fallback,
                         bool required = false) {
    if (!j.contains(key)) {
        if (required) throw ConfigInvalid(path + "." + key + ": missing");
        return fallback;
    }
    const auto& v = j.at(key);
    if (!v.is_number()) throw ConfigInvalid(path + "." + key + ": expected a number");
    return v.get<double>();
}

inline std::vector<double> number_list(const Json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigInvalid(path + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigInvalid(path + "[" + std::to_string(i) + "]: expected a number");
        out.push_back(j[i].get<double>());
    }
    return out;
}

inline std::vector<std::vector<double>> value_rows(const Json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ConfigInvalid(path + ": expected a nonempty array");
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        if (j[i].is_number()) {
            rows.push_back({j[i].get<double>()});
        } else {
            rows.push_back(number_list(j[i], p));
        }
        if (rows.back().size() != rows.front().size()) throw ConfigInvalid(p + ": dimension mismatch");
    }
    return rows;
}

inline std::vector<double> scalar_or_vector(const Json& j, const std::string& path) {
    if (j.is_number()) return {j.get<double>()};
    return number_list(j, path);
}

}  // namespace detail

[[nodiscard]] inline InputSignal signal_from_json(const Json& j, const std::string& path = "signal",
                                                  const PlanarParams& params = {}) {
    using namespace detail;
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
        throw ConfigInvalid(path + ": expected an object with a string \"kind\"");
    }
    const auto kind = j.at("kind").get<std::string>();
    try {
        if (kind == "constant") {
            check_keys(j, path, {"kind", "value"});
            if (!j.contains("value")) throw ConfigInvalid(path + ".value: missing");
            return InputSignal::constant(scalar_or_vector(j.at("value"), path + ".value"));
        }
        if (kind == "piecewise_constant") {
            check_keys(j, path, {"kind", "breakpoints", "values"});
            if (!j.contains("values")) throw ConfigInvalid(path + ".values: missing");
            const auto bps = j.contains("breakpoints") ? number_list(j.at("breakpoints"), path + ".breakpoints")
                                                       : std::vector<double>{};
            return InputSignal::piecewise_constant(bps, value_rows(j.at("values"), path + ".values"));
        }
        if (kind == "piecewise_linear") {
            check_keys(j, path, {"kind", "knots", "values"});
            if (!j.contains("knots") || !j.contains("values")) throw ConfigInvalid(path + ": needs knots and values");
            return InputSignal::piecewise_linear(number_list(j.at("knots"), path + ".knots"),
                                                 value_rows(j.at("values"), path + ".values"));
        }
        if (kind == "trapezoid") {
            check_keys(j, path, {"kind", "low", "high", "plateau", "ramp", "gap", "start", "count"});
            TrapezoidParams p;
            p.low = get_number(j, "low", path, p.low);
            p.high = get_number(j, "high", path, p.high);
            p.plateau = get_number(j, "plateau", path, p.plateau);
            p.ramp = get_number(j, "ramp", path, p.ramp);
            p.gap = get_number(j, "gap", path, p.gap);
            p.start = get_number(j, "start", path, p.start);
            p.count = static_cast<int>(get_number(j, "count", path, p.count));
            return InputSignal::trapezoid_train(p);
        }
        if (kind == "exponential_tail") {
            check_keys(j, path, {"kind", "initial", "rate", "t0"});
            if (!j.contains("initial")) throw ConfigInvalid(path + ".initial: missing");
            return InputSignal::exponential_tail(scalar_or_vector(j.at("initial"), path + ".initial"),
                                                 get_number(j, "rate", path, 1.0), get_number(j, "t0", path, 0.0));
        }
        if (kind == "concat") {
            check_keys(j, path, {"kind", "first", "second", "t_switch"});
            if (!j.contains("first") || !j.contains("second")) throw ConfigInvalid(path + ": needs first and second");
            return InputSignal::concat(signal_from_json(j.at("first"), path + ".first", params),
                                       signal_from_json(j.at("second"), path + ".second", params),
                                       get_number(j, "t_switch", path, 0.0, true));
        }
        if (kind == "time_shift") {
            check_keys(j, path, {"kind", "signal", "offset"});
            if (!j.contains("signal")) throw ConfigInvalid(path + ".signal: missing");
            return InputSignal::time_shift(signal_from_json(j.at("signal"), path + ".signal", params),
                                           get_number(j, "offset", path, 0.0, true));
        }
        if (kind == "zero_outside") {
            check_keys(j, path, {"kind", "signal", "start", "end"});
            if (!j.contains("signal")) throw ConfigInvalid(path + ".signal: missing");
            return InputSignal::zero_outside(signal_from_json(j.at("signal"), path + ".signal", params),
                                             get_number(j, "start", path, 0.0, true),
                                             get_number(j, "end", path, 0.0, true));
        }
        if (kind == "stack") {
            check_keys(j, path, {"kind", "parts"});
            if (!j.contains("parts") || !j.at("parts").is_array() || j.at("parts").empty()) {
                throw ConfigInvalid(path + ".parts: expected a nonempty array");
            }
            std::vector<InputSignal> parts;
            for (std::size_t i = 0; i < j.at("parts").size(); ++i) {
                parts.push_back(signal_from_json(j.at("parts")[i], path + ".parts[" + std::to_string(i) + "]", params));
            }
            return InputSignal::stack(std::move(parts));
        }
        if (kind == "smooth_square" || kind == "moving_average") {
            const std::string width_key = kind == "smooth_square" ? "delta" : "width";
            check_keys(j, path, {"kind", "schedule", width_key});
            if (!j.contains("schedule")) throw ConfigInvalid(path + ".schedule: missing");
            const auto sched = signal_from_json(j.at("schedule"), path + ".schedule", params);
            const double w = get_number(j, width_key, path, 0.0, true);
            return kind == "smooth_square" ? smooth_square(sched, w) : moving_average(sched, w);
        }
        if (kind == "greedy_schedule") {
            check_keys(j, path, {"kind", "x0", "dwell", "T"});
            std::vector<double> x0{1.0, 0.0};
            if (j.contains("x0")) x0 = number_list(j.at("x0"), path + ".x0");
            if (x0.size() != 2) throw ConfigInvalid(path + ".x0: expected two numbers");
            const double dwell = get_number(j, "dwell", path, 1e-3);
            const double T = get_number(j, "T", path, 20.0);
            return simulate_switching(params, greedy_worst_switch(params, dwell), {x0[0], x0[1]}, T).schedule;
        }
    } catch (const ConfigInvalid&) {
        throw;
    } catch (const Error& e) {
        throw ConfigInvalid(path + ": " + e.what());
    }
    throw ConfigInvalid(path + ".kind: unknown signal kind \"" + kind + "\"");
}

}  // namespace rfcdelay
