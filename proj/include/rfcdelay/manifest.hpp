#pragma once

// Everything one CLI run depends on, with a strict JSON form. Every field is
// written out, so a saved manifest reproduces the run exactly.

#include "rfcdelay/errors.hpp"
#include "rfcdelay/integrate.hpp"
#include "rfcdelay/lyapunov.hpp"
#include "rfcdelay/probes.hpp"
#include "rfcdelay/signal_json.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rfcdelay {

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"lyapunov", "simulate",  "escape",    "estimate-r",
                                                "rfc-sweep", "es-check", "uga-table", "equiv-check"};
    return names;
}

struct SystemSection {
    Mat2 a1 = PlanarMatrices{}.a1;
    Mat2 a2 = PlanarMatrices{}.a2;
    double tau = 0.0;  // 0: 1.5 x greedy escape time
    double dwell = 1e-3;
    bool state_scaled = true;
    double lambda_margin = 0.5;
};

struct IntegratorSection {
    double rel_tol = 1e-11;
    double abs_tol = 1e-10;
    double h_min = 1e-12;
    double h_max = std::numeric_limits<double>::infinity();  // null in JSON
    double initial_step = 0.0;
    double escape_threshold = 1e6;
    std::uint64_t max_steps = 20'000'000;

    [[nodiscard]] IntegratorOptions options() const {
        IntegratorOptions o;
        o.rel_tol = rel_tol;
        o.abs_tol = abs_tol;
        o.h_min = h_min;
        o.h_max = h_max;
        o.initial_step = initial_step;
        o.escape_threshold = escape_threshold;
        o.max_steps = static_cast<decltype(o.max_steps)>(max_steps);
        return o;
    }
};

struct OutputSection {
    std::string dir = ".";
    std::string svg;  // empty: no plot
};

struct LyapunovSection {
    std::optional<double> lambda;
    bool constants = false;
    int grid = 101;
};

struct SimulateSection {
    std::string system = "cascade";  // planar | cascade | associated
    double T = 5.0;
    /// "zero", "random" or a signal object (evaluated on [-tau, 0])
    Json history = "zero";
    double history_norm = 1.0;
    /// "zero" or a signal object
    Json input = "zero";
    /// initial state for planar / associated runs; empty: the history value at s = 0
    std::vector<double> x0;
    /// 0: one row per step end, otherwise this many uniform rows
    int grid = 0;
    bool audit = false;
};

struct EscapeSection {
    std::vector<double> x0{1.0, 0.0};
    double T = 20.0;
};

struct EstimateSection {
    std::string system = "planar";
    double r = 1.0;
    double T = 20.0;
    int budget = 100;
    double input_span = 20.0;
    bool adversarial = true;
};

struct RfcSection {
    std::vector<double> deltas = default_delta_list();
    std::vector<double> x0{1.0, 0.0};
    double eps = 0.1;
    double margin_T = 10.0;
    bool check_settle = true;
    double min_growth = 10.0;
};

struct EsSection {
    int n_ics = 200;
    double T = 30.0;
    double fit_tol = 0.05;
    int points_per_step = 4;
};

struct UgaSection {
    std::vector<double> r_list{1.0, 10.0, 100.0};
    std::vector<double> eps_list{0.1, 1.0};
    int samples = 50;
    double margin_T = 10.0;
};

struct EquivSection {
    int pairs = 50;
    double r = 1.0;
};

struct RunManifest {
    std::string command;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    SystemSection system;
    IntegratorSection integrator;
    OutputSection output;
    LyapunovSection lyapunov;
    SimulateSection simulate;
    EscapeSection escape;
    EstimateSection estimate_r;
    RfcSection rfc_sweep;
    EsSection es_check;
    UgaSection uga_table;
    EquivSection equiv_check;

    [[nodiscard]] PlanarParams params() const { return PlanarParams{PlanarMatrices{system.a1, system.a2}}; }

    [[nodiscard]] ProbeConfig probe_config() const {
        ProbeConfig cfg;
        cfg.params = params();
        cfg.tau = system.tau;
        cfg.dwell = system.dwell;
        cfg.state_scaled = system.state_scaled;
        cfg.integrator = integrator.options();
        cfg.lambda_search.margin = system.lambda_margin;
        cfg.seed = seed;
        cfg.threads = threads;
        return cfg;
    }

    /// Range checks that do not need to run anything; throws ConfigInvalid.
    void validate() const;

    [[nodiscard]] Json to_json() const;
    [[nodiscard]] static RunManifest from_json(const Json& j);
};

namespace detail {

inline Json mat_to_json(const Mat2& m) { return Json::array({Json::array({m.a11, m.a12}), Json::array({m.a21, m.a22})}); }

inline Mat2 mat_from_json(const Json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) throw ConfigInvalid(path + ": expected a 2x2 array");
    const auto r0 = number_list(j[0], path + "[0]");
    const auto r1 = number_list(j[1], path + "[1]");
    if (r0.size() != 2 || r1.size() != 2) throw ConfigInvalid(path + ": expected a 2x2 array");
    return Mat2{r0[0], r0[1], r1[0], r1[1]};
}

inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

/// Reads j[key] into `out` when present, with type checks reported at `path.key`.
class FieldReader {
public:
    FieldReader(const Json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path)) {
        check_keys(j_, path_, allowed);
    }

    void number(const char* key, double& out) const {
        if (has(key)) out = get_number(j_, key, path_, out);
    }
    void number_or_inf(const char* key, double& out) const {
        if (!has(key)) return;
        if (j_.at(key).is_null()) {
            out = std::numeric_limits<double>::infinity();
        } else {
            out = get_number(j_, key, path_, out);
        }
    }
    void optional_number(const char* key, std::optional<double>& out) const {
        if (!has(key)) return;
        if (j_.at(key).is_null()) {
            out.reset();
        } else {
            out = get_number(j_, key, path_, 0.0);
        }
    }
    template <class Int>
    void integer(const char* key, Int& out, long long lo = 0) const {
        if (!has(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_number_integer()) throw ConfigInvalid(at(key) + ": expected an integer");
        if (v.is_number_unsigned()) {
            out = static_cast<Int>(v.get<std::uint64_t>());
        } else {
            const auto s = v.get<long long>();
            if (s < lo) throw ConfigInvalid(at(key) + ": must be at least " + std::to_string(lo));
            out = static_cast<Int>(s);
        }
    }
    void boolean(const char* key, bool& out) const {
        if (!has(key)) return;
        if (!j_.at(key).is_boolean()) throw ConfigInvalid(at(key) + ": expected true or false");
        out = j_.at(key).get<bool>();
    }
    void string(const char* key, std::string& out) const {
        if (!has(key)) return;
        if (!j_.at(key).is_string()) throw ConfigInvalid(at(key) + ": expected a string");
        out = j_.at(key).get<std::string>();
    }
    void list(const char* key, std::vector<double>& out) const {
        if (has(key)) out = number_list(j_.at(key), at(key));
    }
    void matrix(const char* key, Mat2& out) const {
        if (has(key)) out = mat_from_json(j_.at(key), at(key));
    }
    void raw(const char* key, Json& out) const {
        if (has(key)) out = j_.at(key);
    }
    [[nodiscard]] const Json* section(const char* key) const { return has(key) ? &j_.at(key) : nullptr; }
    [[nodiscard]] std::string at(const char* key) const { return path_ + "." + key; }

private:
    [[nodiscard]] bool has(const char* key) const { return j_.contains(key); }
    const Json& j_;
    std::string path_;
};

inline void require_choice(const std::string& value, const std::set<std::string>& choices, const std::string& path) {
    if (!choices.count(value)) {
        std::string list;
        for (const auto& c : choices) list += (list.empty() ? "" : ", ") + c;
        throw ConfigInvalid(path + ": \"" + value + "\" is not one of " + list);
    }
}

}  // namespace detail

inline void RunManifest::validate() const {
    auto positive = [](double v, const char* path) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigInvalid(std::string(path) + ": must be positive and finite");
    };
    auto nonneg = [](double v, const char* path) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigInvalid(std::string(path) + ": must be nonnegative and finite");
    };
    if (!command.empty()) detail::require_choice(command, {command_names().begin(), command_names().end()}, "$.command");
    nonneg(system.tau, "$.system.tau");
    positive(system.dwell, "$.system.dwell");
    positive(system.lambda_margin, "$.system.lambda_margin");
    positive(integrator.rel_tol, "$.integrator.rel_tol");
    positive(integrator.abs_tol, "$.integrator.abs_tol");
    positive(integrator.h_min, "$.integrator.h_min");
    if (!(integrator.h_max > 0.0)) throw ConfigInvalid("$.integrator.h_max: must be positive or null");
    nonneg(integrator.initial_step, "$.integrator.initial_step");
    positive(integrator.escape_threshold, "$.integrator.escape_threshold");
    if (integrator.max_steps == 0) throw ConfigInvalid("$.integrator.max_steps: must be positive");
    if (lyapunov.lambda && !(*lyapunov.lambda >= 0.0 && *lyapunov.lambda <= 1.0)) {
        throw ConfigInvalid("$.lyapunov.lambda: must lie in [0, 1]");
    }
    if (lyapunov.grid < 2) throw ConfigInvalid("$.lyapunov.grid: must be at least 2");
    detail::require_choice(simulate.system, {"planar", "cascade", "associated"}, "$.simulate.system");
    positive(simulate.T, "$.simulate.T");
    if (!(simulate.history.is_object() || simulate.history == "zero" || simulate.history == "random")) {
        throw ConfigInvalid("$.simulate.history: expected \"zero\", \"random\" or a signal object");
    }
    if (!(simulate.input.is_object() || simulate.input == "zero")) {
        throw ConfigInvalid("$.simulate.input: expected \"zero\" or a signal object");
    }
    nonneg(simulate.history_norm, "$.simulate.history_norm");
    if (simulate.grid < 0) throw ConfigInvalid("$.simulate.grid: must be nonnegative");
    if (escape.x0.size() != 2) throw ConfigInvalid("$.escape.x0: expected two numbers");
    positive(escape.T, "$.escape.T");
    detail::require_choice(estimate_r.system, {"planar", "cascade", "associated"}, "$.estimate_r.system");
    nonneg(estimate_r.r, "$.estimate_r.r");
    nonneg(estimate_r.T, "$.estimate_r.T");
    if (estimate_r.budget < 1) throw ConfigInvalid("$.estimate_r.budget: must be at least 1");
    positive(estimate_r.input_span, "$.estimate_r.input_span");
    if (rfc_sweep.deltas.empty()) throw ConfigInvalid("$.rfc_sweep.deltas: must not be empty");
    for (std::size_t i = 0; i < rfc_sweep.deltas.size(); ++i) {
        if (!(rfc_sweep.deltas[i] > 0.0) || (i > 0 && !(rfc_sweep.deltas[i] < rfc_sweep.deltas[i - 1]))) {
            throw ConfigInvalid("$.rfc_sweep.deltas[" + std::to_string(i) + "]: must be positive and strictly decreasing");
        }
    }
    if (rfc_sweep.x0.size() != 2) throw ConfigInvalid("$.rfc_sweep.x0: expected two numbers");
    positive(rfc_sweep.eps, "$.rfc_sweep.eps");
    nonneg(rfc_sweep.margin_T, "$.rfc_sweep.margin_T");
    if (es_check.n_ics < 0) throw ConfigInvalid("$.es_check.n_ics: must be nonnegative");
    positive(es_check.T, "$.es_check.T");
    nonneg(es_check.fit_tol, "$.es_check.fit_tol");
    if (es_check.points_per_step < 0) throw ConfigInvalid("$.es_check.points_per_step: must be nonnegative");
    if (uga_table.r_list.empty() || uga_table.eps_list.empty()) throw ConfigInvalid("$.uga_table: r_list and eps_list must not be empty");
    for (double v : uga_table.r_list) positive(v, "$.uga_table.r_list");
    for (double v : uga_table.eps_list) positive(v, "$.uga_table.eps_list");
    if (uga_table.samples < 1) throw ConfigInvalid("$.uga_table.samples: must be at least 1");
    nonneg(uga_table.margin_T, "$.uga_table.margin_T");
    if (equiv_check.pairs < 0) throw ConfigInvalid("$.equiv_check.pairs: must be nonnegative");
    positive(equiv_check.r, "$.equiv_check.r");
}

inline Json RunManifest::to_json() const {
    using detail::number_or_null;
    Json j;
    j["command"] = command;
    j["seed"] = seed;
    j["threads"] = threads;
    j["system"] = {{"A1", detail::mat_to_json(system.a1)},
                   {"A2", detail::mat_to_json(system.a2)},
                   {"tau", system.tau},
                   {"dwell", system.dwell},
                   {"state_scaled", system.state_scaled},
                   {"lambda_margin", system.lambda_margin}};
    j["integrator"] = {{"rel_tol", integrator.rel_tol},
                       {"abs_tol", integrator.abs_tol},
                       {"h_min", integrator.h_min},
                       {"h_max", number_or_null(integrator.h_max)},
                       {"initial_step", integrator.initial_step},
                       {"escape_threshold", integrator.escape_threshold},
                       {"max_steps", integrator.max_steps}};
    j["output"] = {{"dir", output.dir}, {"svg", output.svg}};
    j["lyapunov"] = {{"lambda", lyapunov.lambda ? Json(*lyapunov.lambda) : Json(nullptr)},
                     {"constants", lyapunov.constants},
                     {"grid", lyapunov.grid}};
    j["simulate"] = {{"system", simulate.system},   {"T", simulate.T},
                     {"history", simulate.history}, {"history_norm", simulate.history_norm},
                     {"input", simulate.input},     {"x0", simulate.x0},
                     {"grid", simulate.grid},       {"audit", simulate.audit}};
    j["escape"] = {{"x0", escape.x0}, {"T", escape.T}};
    j["estimate_r"] = {{"system", estimate_r.system},         {"r", estimate_r.r},
                       {"T", estimate_r.T},                   {"budget", estimate_r.budget},
                       {"input_span", estimate_r.input_span}, {"adversarial", estimate_r.adversarial}};
    j["rfc_sweep"] = {{"deltas", rfc_sweep.deltas},       {"x0", rfc_sweep.x0},
                      {"eps", rfc_sweep.eps},             {"margin_T", rfc_sweep.margin_T},
                      {"check_settle", rfc_sweep.check_settle}, {"min_growth", rfc_sweep.min_growth}};
    j["es_check"] = {{"n_ics", es_check.n_ics},
                     {"T", es_check.T},
                     {"fit_tol", es_check.fit_tol},
                     {"points_per_step", es_check.points_per_step}};
    j["uga_table"] = {{"r_list", uga_table.r_list},
                      {"eps_list", uga_table.eps_list},
                      {"samples", uga_table.samples},
                      {"margin_T", uga_table.margin_T}};
    j["equiv_check"] = {{"pairs", equiv_check.pairs}, {"r", equiv_check.r}};
    return j;
}

inline RunManifest RunManifest::from_json(const Json& j) {
    using detail::FieldReader;
    RunManifest m;
    const FieldReader top(j, "$",
                          {"command", "seed", "threads", "system", "integrator", "output", "lyapunov", "simulate",
                           "escape", "estimate_r", "rfc_sweep", "es_check", "uga_table", "equiv_check"});
    top.string("command", m.command);
    if (!m.command.empty()) {
        detail::require_choice(m.command, {command_names().begin(), command_names().end()}, "$.command");
    }
    top.integer("seed", m.seed);
    top.integer("threads", m.threads);
    if (const auto* s = top.section("system")) {
        const FieldReader r(*s, "$.system", {"A1", "A2", "tau", "dwell", "state_scaled", "lambda_margin"});
        r.matrix("A1", m.system.a1);
        r.matrix("A2", m.system.a2);
        r.number("tau", m.system.tau);
        r.number("dwell", m.system.dwell);
        r.boolean("state_scaled", m.system.state_scaled);
        r.number("lambda_margin", m.system.lambda_margin);
    }
    if (const auto* s = top.section("integrator")) {
        const FieldReader r(*s, "$.integrator",
                            {"rel_tol", "abs_tol", "h_min", "h_max", "initial_step", "escape_threshold", "max_steps"});
        r.number("rel_tol", m.integrator.rel_tol);
        r.number("abs_tol", m.integrator.abs_tol);
        r.number("h_min", m.integrator.h_min);
        r.number_or_inf("h_max", m.integrator.h_max);
        r.number("initial_step", m.integrator.initial_step);
        r.number("escape_threshold", m.integrator.escape_threshold);
        r.integer("max_steps", m.integrator.max_steps, 1);
    }
    if (const auto* s = top.section("output")) {
        const FieldReader r(*s, "$.output", {"dir", "svg"});
        r.string("dir", m.output.dir);
        r.string("svg", m.output.svg);
    }
    if (const auto* s = top.section("lyapunov")) {
        const FieldReader r(*s, "$.lyapunov", {"lambda", "constants", "grid"});
        r.optional_number("lambda", m.lyapunov.lambda);
        r.boolean("constants", m.lyapunov.constants);
        r.integer("grid", m.lyapunov.grid, 2);
    }
    if (const auto* s = top.section("simulate")) {
        const FieldReader r(*s, "$.simulate", {"system", "T", "history", "history_norm", "input", "x0", "grid", "audit"});
        r.string("system", m.simulate.system);
        r.number("T", m.simulate.T);
        r.raw("history", m.simulate.history);
        r.number("history_norm", m.simulate.history_norm);
        r.raw("input", m.simulate.input);
        r.list("x0", m.simulate.x0);
        r.integer("grid", m.simulate.grid);
        r.boolean("audit", m.simulate.audit);
    }
    if (const auto* s = top.section("escape")) {
        const FieldReader r(*s, "$.escape", {"x0", "T"});
        r.list("x0", m.escape.x0);
        r.number("T", m.escape.T);
    }
    if (const auto* s = top.section("estimate_r")) {
        const FieldReader r(*s, "$.estimate_r", {"system", "r", "T", "budget", "input_span", "adversarial"});
        r.string("system", m.estimate_r.system);
        r.number("r", m.estimate_r.r);
        r.number("T", m.estimate_r.T);
        r.integer("budget", m.estimate_r.budget, 1);
        r.number("input_span", m.estimate_r.input_span);
        r.boolean("adversarial", m.estimate_r.adversarial);
    }
    if (const auto* s = top.section("rfc_sweep")) {
        const FieldReader r(*s, "$.rfc_sweep", {"deltas", "x0", "eps", "margin_T", "check_settle", "min_growth"});
        r.list("deltas", m.rfc_sweep.deltas);
        r.list("x0", m.rfc_sweep.x0);
        r.number("eps", m.rfc_sweep.eps);
        r.number("margin_T", m.rfc_sweep.margin_T);
        r.boolean("check_settle", m.rfc_sweep.check_settle);
        r.number("min_growth", m.rfc_sweep.min_growth);
    }
    if (const auto* s = top.section("es_check")) {
        const FieldReader r(*s, "$.es_check", {"n_ics", "T", "fit_tol", "points_per_step"});
        r.integer("n_ics", m.es_check.n_ics);
        r.number("T", m.es_check.T);
        r.number("fit_tol", m.es_check.fit_tol);
        r.integer("points_per_step", m.es_check.points_per_step);
    }
    if (const auto* s = top.section("uga_table")) {
        const FieldReader r(*s, "$.uga_table", {"r_list", "eps_list", "samples", "margin_T"});
        r.list("r_list", m.uga_table.r_list);
        r.list("eps_list", m.uga_table.eps_list);
        r.integer("samples", m.uga_table.samples, 1);
        r.number("margin_T", m.uga_table.margin_T);
    }
    if (const auto* s = top.section("equiv_check")) {
        const FieldReader r(*s, "$.equiv_check", {"pairs", "r"});
        r.integer("pairs", m.equiv_check.pairs);
        r.number("r", m.equiv_check.r);
    }
    m.validate();
    return m;
}

}  // namespace rfcdelay
