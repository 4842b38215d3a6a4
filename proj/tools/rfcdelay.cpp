// rfcdelay: command-line driver for the delay-system experiments.
//
// Every run is described by a RunManifest (defaults < --config file < env
// vars < flags). Artifacts go to <out>/<command>.csv, <command>.json and
// <command>.manifest.json; the manifest file replays the run via --config.

#include "rfcdelay/rfcdelay.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace rfcdelay;
namespace fs = std::filesystem;

std::string fmt(double v, int digits = 4) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json read_json_file(const std::string& path, const std::string& what) {
    std::ifstream f(path);
    if (!f) throw ConfigInvalid(what + ": cannot read " + path);
    try {
        return Json::parse(f);
    } catch (const Json::parse_error& e) {
        throw ConfigInvalid(what + ": " + path + " is not valid JSON (" + e.what() + ")");
    }
}

/// "zero", "random", inline JSON starting with '{', or a path to a JSON file.
Json signal_arg(const std::string& text, const std::string& what) {
    if (text == "zero" || text == "random") return text;
    if (!text.empty() && text.front() == '{') {
        try {
            return Json::parse(text);
        } catch (const Json::parse_error& e) {
            throw ConfigInvalid(what + ": invalid inline JSON (" + e.what() + ")");
        }
    }
    return read_json_file(text, what);
}

// ---- flags ------------------------------------------------------------------

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> svg;
    std::optional<unsigned> threads;
    std::optional<double> tol;
    std::optional<int> budget;
    std::optional<double> tau;
    std::optional<double> dwell;

    std::optional<double> lambda;
    bool constants = false;
    std::optional<int> lyap_grid;

    std::optional<std::string> system;
    std::optional<double> T;
    std::optional<std::string> history;
    std::optional<double> history_norm;
    std::optional<std::string> input;
    std::vector<double> x0;
    std::optional<int> grid;
    bool audit = false;

    std::optional<double> r;
    std::optional<double> input_span;
    bool no_adversarial = false;

    std::vector<double> deltas;
    std::optional<double> eps;
    std::optional<double> min_growth;
    bool no_settle = false;

    std::optional<double> fit_tol;
    std::vector<double> r_list;
    std::vector<double> eps_list;
};

void add_global_options(CLI::App& app, Flags& f) {
    app.add_option("--config", f.config, "JSON run manifest; flags override its fields")->envname("RFCDELAY_CONFIG");
    app.add_option("--seed", f.seed, "master seed for every random draw")->envname("RFCDELAY_SEED");
    app.add_option("--out", f.out, "directory for CSV/JSON artifacts")->envname("RFCDELAY_OUT");
    app.add_option("--svg", f.svg, "also write a line plot to this path")->envname("RFCDELAY_SVG");
    app.add_option("--threads", f.threads, "worker threads for sampling probes (0: all cores)")
        ->envname("RFCDELAY_THREADS");
    app.add_option("--tol", f.tol, "integrator rel_tol and abs_tol")->envname("RFCDELAY_TOL");
    app.add_option("--budget", f.budget,
                   "sample count: draws (estimate-r), histories (es-check), samples per cell (uga-table), "
                   "pairs (equiv-check)")
        ->envname("RFCDELAY_BUDGET");
    app.add_option("--tau", f.tau, "cascade delay (0: 1.5 x greedy escape time)")->envname("RFCDELAY_TAU");
    app.add_option("--dwell", f.dwell, "greedy switching dwell")->envname("RFCDELAY_DWELL");
}

const char* kGlobalFooter =
    "Global options (--config, --seed, --out, --svg, --threads, --tol, --budget, --tau, --dwell) "
    "may follow the subcommand; see rfcdelay --help.";

struct Subcommands {
    CLI::App* lyapunov;
    CLI::App* simulate;
    CLI::App* escape;
    CLI::App* estimate;
    CLI::App* rfc;
    CLI::App* es;
    CLI::App* uga;
    CLI::App* equiv;
};

Subcommands add_subcommands(CLI::App& app, Flags& f) {
    Subcommands s{};
    s.lyapunov = app.add_subcommand("lyapunov", "Lyapunov matrices for A(lambda); grid certification by default");
    s.lyapunov->add_option("--lambda", f.lambda, "print P, c1, c2 and the residual for this lambda as JSON");
    s.lyapunov->add_flag("--constants", f.constants, "print Lambda, k and p as JSON");
    s.lyapunov->add_option("--grid", f.lyap_grid, "grid points on [0, 1] for the certification table");

    s.simulate = app.add_subcommand("simulate", "integrate one system and write its trajectory");
    s.simulate->add_option("--system", f.system, "planar | cascade | associated")
        ->check(CLI::IsMember({"planar", "cascade", "associated"}));
    s.simulate->add_option("--T", f.T, "horizon");
    s.simulate->add_option("--history", f.history, "zero | random | signal JSON (inline or file)");
    s.simulate->add_option("--history-norm", f.history_norm, "sup norm of the random history");
    s.simulate->add_option("--input", f.input, "zero | signal JSON (inline or file)");
    s.simulate->add_option("--x0", f.x0, "initial state (planar, associated)");
    s.simulate->add_option("--grid", f.grid, "uniform output rows (0: one per step)");
    s.simulate->add_flag("--audit", f.audit, "report the integral-form residual");

    s.escape = app.add_subcommand("escape", "greedy switching of the planar system until escape");
    s.escape->add_option("--x0", f.x0, "initial state")->expected(2);
    s.escape->add_option("--T", f.T, "horizon");

    s.estimate = app.add_subcommand("estimate-r", "sampled lower bound on the reachable-set radius R(r, T)");
    s.estimate->add_option("--system", f.system, "planar | cascade | associated")
        ->check(CLI::IsMember({"planar", "cascade", "associated"}));
    s.estimate->add_option("--r", f.r, "bound on initial data and inputs");
    s.estimate->add_option("--T", f.T, "horizon");
    s.estimate->add_option("--input-span", f.input_span, "time span covered by random inputs");
    s.estimate->add_flag("--no-adversarial", f.no_adversarial, "skip the greedy draw");

    s.rfc = app.add_subcommand("rfc-sweep", "peaks of the cascade from smoothed greedy histories");
    s.rfc->add_option("--deltas", f.deltas, "smoothing widths, strictly decreasing");
    s.rfc->add_option("--x0", f.x0, "planar start of the greedy run")->expected(2);
    s.rfc->add_option("--eps", f.eps, "settle radius for the reach-time check");
    s.rfc->add_option("--min-growth", f.min_growth, "required max peak / min peak");
    s.rfc->add_flag("--no-settle", f.no_settle, "integrate on [0, tau] only");

    s.es = app.add_subcommand("es-check", "exponential envelope on random small histories");
    s.es->add_option("--T", f.T, "horizon");
    s.es->add_option("--fit-tol", f.fit_tol, "relative slack on the envelope");

    s.uga = app.add_subcommand("uga-table", "reach times into the eps-ball against the bound T(r, eps)");
    s.uga->add_option("--r-list", f.r_list, "history norms");
    s.uga->add_option("--eps-list", f.eps_list, "ball radii");

    s.equiv = app.add_subcommand("equiv-check", "delay system vs associated system on random pairs");
    s.equiv->add_option("--r", f.r, "bound on histories and inputs");

    for (auto* sub : {s.lyapunov, s.simulate, s.escape, s.estimate, s.rfc, s.es, s.uga, s.equiv}) {
        sub->footer(kGlobalFooter);
    }
    return s;
}

RunManifest build_manifest(const Flags& f, const std::string& command) {
    RunManifest m;
    if (!f.config.empty()) m = RunManifest::from_json(read_json_file(f.config, "--config"));
    if (!command.empty()) m.command = command;
    if (f.seed) m.seed = *f.seed;
    if (f.out) m.output.dir = *f.out;
    if (f.svg) m.output.svg = *f.svg;
    if (f.threads) m.threads = *f.threads;
    if (f.tol) m.integrator.rel_tol = m.integrator.abs_tol = *f.tol;
    if (f.tau) m.system.tau = *f.tau;
    if (f.dwell) m.system.dwell = *f.dwell;
    if (f.budget) {
        m.estimate_r.budget = *f.budget;
        m.es_check.n_ics = *f.budget;
        m.uga_table.samples = *f.budget;
        m.equiv_check.pairs = *f.budget;
    }

    const std::string& c = m.command;
    if (c == "lyapunov") {
        if (f.lambda) m.lyapunov.lambda = *f.lambda;
        if (f.constants) m.lyapunov.constants = true;
        if (f.lyap_grid) m.lyapunov.grid = *f.lyap_grid;
    } else if (c == "simulate") {
        if (f.system) m.simulate.system = *f.system;
        if (f.T) m.simulate.T = *f.T;
        if (f.history) m.simulate.history = signal_arg(*f.history, "--history");
        if (f.history_norm) m.simulate.history_norm = *f.history_norm;
        if (f.input) m.simulate.input = signal_arg(*f.input, "--input");
        if (!f.x0.empty()) m.simulate.x0 = f.x0;
        if (f.grid) m.simulate.grid = *f.grid;
        if (f.audit) m.simulate.audit = true;
    } else if (c == "escape") {
        if (!f.x0.empty()) m.escape.x0 = f.x0;
        if (f.T) m.escape.T = *f.T;
    } else if (c == "estimate-r") {
        if (f.system) m.estimate_r.system = *f.system;
        if (f.r) m.estimate_r.r = *f.r;
        if (f.T) m.estimate_r.T = *f.T;
        if (f.input_span) m.estimate_r.input_span = *f.input_span;
        if (f.no_adversarial) m.estimate_r.adversarial = false;
    } else if (c == "rfc-sweep") {
        if (!f.deltas.empty()) m.rfc_sweep.deltas = f.deltas;
        if (!f.x0.empty()) m.rfc_sweep.x0 = f.x0;
        if (f.eps) m.rfc_sweep.eps = *f.eps;
        if (f.min_growth) m.rfc_sweep.min_growth = *f.min_growth;
        if (f.no_settle) m.rfc_sweep.check_settle = false;
    } else if (c == "es-check") {
        if (f.T) m.es_check.T = *f.T;
        if (f.fit_tol) m.es_check.fit_tol = *f.fit_tol;
    } else if (c == "uga-table") {
        if (!f.r_list.empty()) m.uga_table.r_list = f.r_list;
        if (!f.eps_list.empty()) m.uga_table.eps_list = f.eps_list;
    } else if (c == "equiv-check") {
        if (f.r) m.equiv_check.r = *f.r;
    }
    m.validate();
    return m;
}

// ---- artifacts --------------------------------------------------------------

class Artifacts {
public:
    explicit Artifacts(const RunManifest& m) : m_(m), dir_(m.output.dir.empty() ? "." : m.output.dir) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw ConfigInvalid("$.output.dir: cannot create " + dir_.string() + " (" + ec.message() + ")");
    }

    void csv(const CsvTable& t) const { t.write(path(".csv")); }

    void summary(Json j) const {
        CsvTable::write_text(path(".json"), j.dump(2) + "\n");
        CsvTable::write_text(path(".manifest.json"), m_.to_json().dump(2) + "\n");
    }

    void svg(const SvgPlot& plot, const std::vector<double>& x, const std::vector<double>& y) const {
        if (!m_.output.svg.empty()) write_svg(m_.output.svg, plot, x, y);
    }

private:
    [[nodiscard]] std::string path(const char* ext) const { return (dir_ / (m_.command + ext)).string(); }
    const RunManifest& m_;
    fs::path dir_;
};

struct Verdicts {
    std::vector<std::string> lines;
    bool pass = true;
    void add(bool ok, std::string line) {
        pass = pass && ok;
        lines.push_back(std::move(line));
    }
};

// ---- commands -----------------------------------------------------------------

Json lyapunov_at(const PlanarMatrices& mats, double lambda) {
    const Mat2 a = mats.at(lambda);
    Json j;
    j["lambda"] = lambda;
    j["hurwitz"] = is_hurwitz(a);
    const auto p = solve_lyapunov(a);
    j["P"] = Json::array({Json::array({p.p11, p.p12}), Json::array({p.p12, p.p22})});
    j["c1"] = p.c1;
    j["c2"] = p.c2;
    j["residual"] = lyapunov_residual(a, p.matrix());
    return j;
}

Json cmd_lyapunov(const RunManifest& m, const Artifacts& art, Verdicts& v) {
    const auto mats = m.params().mats;
    CsvTable csv({"lambda", "hurwitz", "p11", "p12", "p22", "c1", "c2", "residual"});
    auto add_row = [&](const Json& j) {
        csv.add({j["lambda"].get<double>(), j["hurwitz"].get<bool>(), j["P"][0][0].get<double>(),
                 j["P"][0][1].get<double>(), j["P"][1][1].get<double>(), j["c1"].get<double>(),
                 j["c2"].get<double>(), j["residual"].get<double>()});
    };
    Json out;
    if (m.lyapunov.lambda || m.lyapunov.constants) {
        if (m.lyapunov.lambda) {
            out = lyapunov_at(mats, *m.lyapunov.lambda);
            add_row(out);
        }
        if (m.lyapunov.constants) {
            const auto c = m.probe_config().constants();
            Json cj{{"Lambda", c.capital_lambda}, {"k", c.k},   {"p", c.p},
                    {"c1", c.c1},                 {"c2", c.c2}, {"margin", m.system.lambda_margin}};
            if (m.lyapunov.lambda) {
                out["constants"] = cj;
            } else {
                out = cj;
            }
        }
        std::cout << out.dump() << "\n";
        art.csv(csv);
        art.summary(out);
        return out;
    }

    const int n = m.lyapunov.grid;
    int hurwitz = 0;
    double worst = 0.0;
    std::vector<double> xs, ys;
    for (int i = 0; i < n; ++i) {
        const double lambda = static_cast<double>(i) / (n - 1);
        const auto j = lyapunov_at(mats, lambda);
        add_row(j);
        hurwitz += j["hurwitz"].get<bool>() ? 1 : 0;
        worst = std::max(worst, j["residual"].get<double>());
        xs.push_back(lambda);
        ys.push_back(j["c2"].get<double>());
    }
    const bool ok = hurwitz == n && worst <= 1e-12;
    v.add(ok, std::string(ok ? "Lyapunov certified: " : "Lyapunov certification failed: ") + std::to_string(hurwitz) +
                  "/" + std::to_string(n) + " grid values Hurwitz, max residual " + fmt(worst, 3) +
                  (worst <= 1e-12 ? " <= " : " > ") + "1e-12");
    out = {{"grid", n}, {"hurwitz", hurwitz}, {"max_residual", worst}, {"pass", ok}};
    art.csv(csv);
    art.svg({"largest eigenvalue of P(lambda)", "lambda", "c2", false, false}, xs, ys);
    return out;
}

struct SimSetup {
    DiscreteDelaySystem sys;
    HistoryFn history;
    std::optional<InputSignal> input;
    double tau = 0.0;
};

InputSignal signal_with_dim(const Json& j, const std::string& path, std::size_t dim, const PlanarParams& params) {
    auto s = signal_from_json(j, path, params);
    if (s.dim() != dim) {
        throw ConfigInvalid(path + ": signal has dimension " + std::to_string(s.dim()) + ", expected " +
                            std::to_string(dim));
    }
    return s;
}

SimSetup simulate_setup(const RunManifest& m) {
    const auto& sm = m.simulate;
    const auto params = m.params();
    const auto cfg = m.probe_config();
    const std::string& kind = sm.system;
    const double tau = kind == "planar" ? 0.0 : cfg.resolved_tau();
    auto sys = kind == "planar"    ? planar_system(params)
               : kind == "cascade" ? cascade_system(tau, params)
                                   : associated_cascade(tau, params);
    const std::size_t n = sys.state_dim(), nu = sys.input_dim();
    const double hist_len = kind == "cascade" ? tau : 0.0;

    auto history_from_spec = [&](double len) {
        if (sm.history == "zero") return HistoryFn::zero(len, n);
        if (sm.history == "random") {
            Rng rng(derive_seed(m.seed, 0));
            return random_history(rng, len > 0.0 ? len : 1.0, n, sm.history_norm);
        }
        return HistoryFn::from_signal(len, signal_with_dim(sm.history, "$.simulate.history", n, params));
    };

    std::optional<HistoryFn> history;
    if (kind == "cascade") {
        if (!sm.x0.empty()) throw ConfigInvalid("$.simulate.x0: the cascade starts from its history; set history");
        history = history_from_spec(hist_len);
    } else if (!sm.x0.empty()) {
        if (sm.x0.size() != n) {
            throw ConfigInvalid("$.simulate.x0: expected " + std::to_string(n) + " numbers for the " + kind +
                                " system");
        }
        history = HistoryFn::constant(0.0, sm.x0);
    } else {
        history = HistoryFn::constant(0.0, history_from_spec(0.0).eval(0.0));
    }

    std::optional<InputSignal> input;
    if (nu == 0) {
        if (sm.input != "zero") throw ConfigInvalid("$.simulate.input: the cascade takes no input");
    } else if (sm.input == "zero") {
        input = InputSignal::zero(nu);
    } else {
        input = signal_with_dim(sm.input, "$.simulate.input", nu, params);
    }
    return {std::move(sys), std::move(*history), std::move(input), tau};
}

Json cmd_simulate(const RunManifest& m, const Artifacts& art, Verdicts& v) {
    const auto setup = simulate_setup(m);
    const auto opts = m.integrator.options();
    const auto out = setup.input ? integrate(setup.sys, setup.history, *setup.input, m.simulate.T, opts)
                                 : integrate(setup.sys, setup.history, m.simulate.T, opts);
    const auto& traj = *out.trajectory;
    const std::size_t n = traj.dim();

    std::vector<std::string> header{"t"};
    for (std::size_t i = 0; i < n; ++i) header.push_back("x" + std::to_string(i + 1));
    CsvTable csv(header);
    std::vector<double> ts;
    if (m.simulate.grid > 0) {
        for (int i = 0; i <= m.simulate.grid; ++i) {
            ts.push_back(i == m.simulate.grid ? traj.t_end() : traj.t_end() * i / m.simulate.grid);
        }
    } else {
        ts = traj.mesh();
    }
    std::vector<double> norms;
    for (double t : ts) {
        const auto x = traj.eval(t);
        std::vector<CsvTable::Cell> row{t};
        double nm = 0.0;
        for (double c : x) {
            row.emplace_back(c);
            nm = std::max(nm, std::abs(c));
        }
        csv.add(std::move(row));
        norms.push_back(nm);
    }

    Json j{{"system", m.simulate.system},
           {"tau", setup.tau},
           {"T", m.simulate.T},
           {"outcome", out.completed() ? "completed" : "escaped"},
           {"reason", std::string(to_string(out.reason))},
           {"t_escape", num(out.t_escape)},
           {"final_norm", out.final_norm},
           {"accepted_steps", out.accepted_steps},
           {"rejected_steps", out.rejected_steps},
           {"history_norm", setup.history.norm()}};
    std::string line = out.completed()
                           ? "Completed on [0, " + fmt(m.simulate.T) + "] in " + std::to_string(out.accepted_steps) +
                                 " steps, final |x| = " + fmt(out.final_norm)
                           : "Escaped at t = " + fmt(out.t_escape, 10) + " (" + std::string(to_string(out.reason)) + ")";
    v.add(true, line);
    if (m.simulate.audit) {
        const double bound = 100.0 * m.integrator.abs_tol;
        if (out.completed()) {
            const double res = residual_audit(traj, setup.sys, setup.history, setup.input, 200, m.seed);
            j["residual_audit"] = res;
            j["residual_bound"] = bound;
            v.add(res <= bound, std::string(res <= bound ? "Integral-form audit passed: " : "Integral-form audit failed: ") +
                                    "residual " + fmt(res, 3) + (res <= bound ? " <= " : " > ") + fmt(bound, 3));
        } else {
            j["residual_audit"] = nullptr;
        }
    }
    art.csv(csv);
    art.svg({"trajectory", "t", "|x|", false, false}, ts, norms);
    return j;
}

Json cmd_escape(const RunManifest& m, const Artifacts& art, Verdicts& v) {
    const auto cfg = m.probe_config();
    const auto run = simulate_switching(cfg.params, cfg.greedy(), {m.escape.x0[0], m.escape.x0[1]}, m.escape.T,
                                        cfg.integrator);
    CsvTable csv({"t", "peak"});
    for (std::size_t i = 0; i < run.piece_ends.size(); ++i) csv.add({run.piece_ends[i], run.piece_peaks[i]});
    const double thr = cfg.integrator.escape_threshold;
    if (run.escaped) {
        v.add(true, "Not forward complete: |x| reached " + fmt(thr) + " at t = " + fmt(run.t_escape, 10) +
                        " under greedy switching (" + std::to_string(run.switch_times.size()) + " switches)");
    } else {
        v.add(false, "No escape by T = " + fmt(m.escape.T) + " (peak " + fmt(run.peak) + ")");
    }
    Json j{{"escaped", run.escaped},
           {"reason", std::string(to_string(run.reason))},
           {"t_escape", num(run.t_escape)},
           {"threshold", thr},
           {"pieces", run.pieces},
           {"switches", run.switch_times.size()},
           {"switch_times", run.switch_times},
           {"peak", run.peak},
           {"final_state", {run.final_state.x1, run.final_state.x2}}};
    art.csv(csv);
    art.svg({"greedy switching", "t", "piece peak |x|", false, true}, run.piece_ends, run.piece_peaks);
    return j;
}

SystemKind kind_from(const std::string& s) {
    if (s == "planar") return SystemKind::planar;
    if (s == "cascade") return SystemKind::cascade;
    return SystemKind::associated;
}

Json cmd_estimate(const RunManifest& m, const Artifacts& art, Verdicts& v) {
    const auto cfg = m.probe_config();
    ReachOptions ro;
    ro.kind = kind_from(m.estimate_r.system);
    ro.r = m.estimate_r.r;
    ro.T = m.estimate_r.T;
    ro.budget = m.estimate_r.budget;
    ro.input_span = m.estimate_r.input_span;
    ro.adversarial = m.estimate_r.adversarial;
    const auto est = estimate_R(cfg, ro);
    CsvTable csv({"draw", "sup"});
    std::vector<double> idx;
    for (std::size_t i = 0; i < est.per_draw.size(); ++i) {
        csv.add({i, est.per_draw[i]});
        idx.push_back(static_cast<double>(i));
    }
    const std::string head = "R(" + fmt(ro.r) + ", " + fmt(ro.T) + ") >= " + fmt(est.lower_bound) + " for the " +
                             m.estimate_r.system + " system";
    v.add(true, head + (est.escape_seen ? " (escape seen in " + std::to_string(est.escapes) + " of " +
                                              std::to_string(est.sample_budget) + " draws)"
                                        : " (no escape in " + std::to_string(est.sample_budget) + " draws)"));
    Json j{{"system", m.estimate_r.system},
           {"r", est.r},
           {"T", ro.T},
           {"lower_bound", est.lower_bound},
           {"sample_budget", est.sample_budget},
           {"escape_seen", est.escape_seen},
           {"escape_threshold", est.escape_threshold},
           {"escapes", est.escapes},
           {"collapses", est.collapses}};
    art.csv(csv);
    art.svg({"reach per draw", "draw", "sup |x|", false, true}, idx, est.per_draw);
    return j;
}

Json cmd_rfc(const RunManifest& m, const Artifacts& art, Verdicts& v) {
    const auto cfg = m.probe_config();
    RfcOptions ro;
    ro.deltas = m.rfc_sweep.deltas;
    ro.x0 = {m.rfc_sweep.x0[0], m.rfc_sweep.x0[1]};
    ro.eps = m.rfc_sweep.eps;
    ro.margin_T = m.rfc_sweep.margin_T;
    ro.check_settle = m.rfc_sweep.check_settle;
    ro.min_growth = m.rfc_sweep.min_growth;
    const auto res = rfc_sweep(cfg, ro);

    CsvTable csv({"delta", "history_norm", "peak", "t_peak", "t_bound", "t_reach", "settled"});
    std::vector<double> ds, ps;
    Json rows = Json::array();
    for (const auto& r : res.rows) {
        csv.add({r.delta, r.history_norm, r.peak, r.t_peak, r.t_bound, r.t_reach, r.settled});
        ds.push_back(r.delta);
        ps.push_back(r.peak);
    }
    const std::string g = fmt(ro.min_growth);
    if (res.falsified) {
        v.add(true, "RFC falsified: growth ≥ " + g + "× (observed " + fmt(res.growth) +
                        "×, peaks strictly increasing, " + std::to_string(res.rows.size()) + " runs completed)");
    } else {
        std::string why = res.strictly_increasing ? "" : "peaks not strictly increasing; ";
        v.add(false, "RFC not falsified: " + why + "growth " + fmt(res.growth) + "× vs required " + g + "×");
    }
    if (ro.check_settle) {
        v.add(res.all_settled, std::string(res.all_settled ? "Reach times within bound on every run"
                                                            : "Reach-time bound violated on some run") +
                                   " (eps = " + fmt(ro.eps) + ")");
    }
    Json j{{"tau", res.tau},
           {"t_escape", res.t_escape},
           {"switches", res.switches},
           {"growth", res.growth},
           {"min_growth", ro.min_growth},
           {"strictly_increasing", res.strictly_increasing},
           {"all_settled", res.all_settled},
           {"falsified", res.falsified}};
    art.csv(csv);
    art.svg({"peak vs smoothing width", "delta", "peak |x| on [0, tau]", true, true}, ds, ps);
    return j;
}

Json cmd_es(const RunManifest& m, const Artifacts& art, Verdicts& v) {
    const auto cfg = m.probe_config();
    EsCheckOptions eo;
    eo.n_ics = m.es_check.n_ics;
    eo.T = m.es_check.T;
    eo.fit_tol = m.es_check.fit_tol;
    eo.points_per_step = m.es_check.points_per_step;
    const auto fit = es_check(cfg, eo);
    CsvTable csv({"index", "history_norm", "k_emp", "p_emp", "max_ratio", "violations", "points"});
    for (const auto& r : fit.rows) csv.add({r.index, r.history_norm, r.k_emp, r.p_emp, r.max_ratio, r.violations, r.points});
    const bool ok = fit.violations == 0;
    v.add(ok, std::string(ok ? "ES envelope holds: " : "ES envelope violated: ") + std::to_string(fit.violations) +
                  " violations over " + std::to_string(fit.samples) + " histories (k_emp " + fmt(fit.k_emp) +
                  " vs k " + fmt(fit.k) + ", p_emp " + fmt(fit.p_emp) + " vs p " + fmt(fit.p) + ")");
    Json j{{"k", fit.k},
           {"p", fit.p},
           {"Lambda", fit.capital_lambda},
           {"tau", fit.tau},
           {"fit_tol", fit.fit_tol},
           {"k_emp", fit.k_emp},
           {"p_emp", num(fit.p_emp)},
           {"violations", fit.violations},
           {"samples", fit.samples},
           {"worst_index", fit.worst_index}};
    art.csv(csv);
    if (!m.output.svg.empty() && fit.samples > 0) {
        const auto history = es_history(cfg, fit.worst_index, fit.capital_lambda, fit.tau);
        const auto out = integrate(cascade_system(fit.tau, cfg.params), history, eo.T, cfg.integrator);
        const double phi = history.norm();
        std::vector<double> ts, ratio;
        for (int i = 0; i <= 600; ++i) {
            const double t = out.trajectory->t_end() * i / 600;
            const auto x = out.trajectory->eval(t);
            double nm = 0.0;
            for (double c : x) nm = std::max(nm, std::abs(c));
            ts.push_back(t);
            ratio.push_back(nm / (fit.k * phi * std::exp(-fit.p * t)));
        }
        art.svg({"worst history: |state| / envelope", "t", "ratio", false, false}, ts, ratio);
    }
    return j;
}

Json cmd_uga(const RunManifest& m, const Artifacts& art, Verdicts& v) {
    const auto cfg = m.probe_config();
    UgaOptions uo;
    uo.r_list = m.uga_table.r_list;
    uo.eps_list = m.uga_table.eps_list;
    uo.samples = m.uga_table.samples;
    uo.margin_T = m.uga_table.margin_T;
    const auto table = uga_table(cfg, uo);
    CsvTable csv({"r", "eps", "t_bound", "t_reach_max", "t_reach_mean", "z_reach", "samples", "violations"});
    std::vector<double> rs, reach;
    std::size_t runs = 0;
    for (const auto& c : table.cells) {
        csv.add({c.r, c.eps, c.t_bound, c.t_reach_max, c.t_reach_mean, c.z_reach, c.samples, c.violations});
        if (c.eps == uo.eps_list.front()) {
            rs.push_back(c.r);
            reach.push_back(c.t_reach_max);
        }
    }
    runs = table.cells.empty() ? 0 : uo.r_list.size() * static_cast<std::size_t>(uo.samples);
    const bool ok = table.violations() == 0;
    v.add(ok, std::string(ok ? "UGA reach bound holds: " : "UGA reach bound violated: ") +
                  std::to_string(table.violations()) + " violations over " + std::to_string(runs) + " histories (" +
                  std::to_string(uo.r_list.size()) + " radii, " + std::to_string(uo.eps_list.size()) + " eps levels)");
    Json j{{"tau", table.tau}, {"violations", table.violations()}, {"histories", runs}};
    art.csv(csv);
    art.svg({"max reach time, eps = " + fmt(uo.eps_list.front()), "r", "t_reach_max", true, false}, rs, reach);
    return j;
}

Json cmd_equiv(const RunManifest& m, const Artifacts& art, Verdicts& v) {
    const auto cfg = m.probe_config();
    EquivOptions eo;
    eo.pairs = m.equiv_check.pairs;
    eo.r = m.equiv_check.r;
    const auto res = equiv_check(cfg, eo);
    CsvTable csv({"index", "embed_dev", "inputs_dev"});
    std::vector<double> idx, dev;
    for (const auto& r : res.rows) {
        csv.add({r.index, r.embed_dev, r.inputs_dev});
        idx.push_back(static_cast<double>(r.index));
        dev.push_back(std::max(r.embed_dev, r.inputs_dev));
    }
    const bool ok = res.pass();
    const double worst = std::max(res.max_embed_dev, res.max_inputs_dev);
    v.add(ok, std::string(ok ? "Embeddings agree: " : "Embeddings disagree: ") + "max deviation " + fmt(worst, 3) +
                  (worst <= res.tolerance ? " <= " : " > ") + fmt(res.tolerance, 3) + " over " +
                  std::to_string(res.rows.size()) + " pairs; R*(" + fmt(res.r) + ", 0) = " + fmt(res.reach_at_zero, 17));
    Json j{{"tau", res.tau},
           {"tolerance", res.tolerance},
           {"max_embed_dev", res.max_embed_dev},
           {"max_inputs_dev", res.max_inputs_dev},
           {"r", res.r},
           {"reach_at_zero", res.reach_at_zero}};
    art.csv(csv);
    art.svg({"embedding deviation per pair", "pair", "max deviation", false, true}, idx, dev);
    return j;
}

int run(const RunManifest& m) {
    const Artifacts art(m);
    Verdicts v;
    Json j;
    const auto& c = m.command;
    if (c == "lyapunov") {
        j = cmd_lyapunov(m, art, v);
        if (m.lyapunov.lambda || m.lyapunov.constants) return 0;
    } else if (c == "simulate") {
        j = cmd_simulate(m, art, v);
    } else if (c == "escape") {
        j = cmd_escape(m, art, v);
    } else if (c == "estimate-r") {
        j = cmd_estimate(m, art, v);
    } else if (c == "rfc-sweep") {
        j = cmd_rfc(m, art, v);
    } else if (c == "es-check") {
        j = cmd_es(m, art, v);
    } else if (c == "uga-table") {
        j = cmd_uga(m, art, v);
    } else {
        j = cmd_equiv(m, art, v);
    }
    j["command"] = c;
    j["pass"] = v.pass;
    j["verdicts"] = v.lines;
    art.summary(j);
    for (const auto& line : v.lines) std::cout << line << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Experiments on delay cascades built from a switched planar system", "rfcdelay"};
    app.fallthrough();
    app.require_subcommand(0, 1);
    app.footer("Without a subcommand the manifest's \"command\" field selects the experiment.\n"
               "Exit status: 0 on completion (escape included), 2 for invalid configuration, 1 for other errors.");
    Flags flags;
    add_global_options(app, flags);
    add_subcommands(app, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        std::string command;
        if (!app.get_subcommands().empty()) command = app.get_subcommands().front()->get_name();
        auto manifest = build_manifest(flags, command);
        if (manifest.command.empty()) throw ConfigInvalid("$.command: no subcommand given and the manifest names none");
        return run(manifest);
    } catch (const ConfigInvalid& e) {
        std::cerr << "rfcdelay: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "rfcdelay: " << e.what() << "\n";
        return 1;
    }
}
