#pragma once

// Flat `key = value` experiment configuration with dotted keys.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "hilbert.hpp"
#include "metrics.hpp"
#include "models.hpp"
#include "spectral.hpp"

namespace qubus {

enum class ExperimentKind { spectrum, steady, entangle, fidelity_grid, damping_grid, risetime_scan, bell };

inline const std::vector<std::pair<ExperimentKind, std::string>>& experiment_kinds() {
    static const std::vector<std::pair<ExperimentKind, std::string>> k{
        {ExperimentKind::spectrum, "spectrum"},           {ExperimentKind::steady, "steady"},
        {ExperimentKind::entangle, "entangle"},           {ExperimentKind::fidelity_grid, "fidelity-grid"},
        {ExperimentKind::damping_grid, "damping-grid"},   {ExperimentKind::risetime_scan, "risetime-scan"},
        {ExperimentKind::bell, "bell"}};
    return k;
}

inline std::string to_string(ExperimentKind k) {
    for (const auto& [kind, name] : experiment_kinds())
        if (kind == k) return name;
    return "?";
}

inline std::optional<ExperimentKind> parse_kind(std::string_view s) {
    for (const auto& [kind, name] : experiment_kinds())
        if (name == s) return kind;
    return std::nullopt;
}

// Shortest round-trip text for a double; stable across runs.
inline std::string format_number(double v) {
    if (v == 0) return "0";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

struct Axis {
    std::string name;
    std::vector<double> values;
    std::string spec;  // as written, for the resolved echo
    int line = 0;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::spectrum;
    std::map<std::string, double> params;  // explicit assignments, names without the prefix
    std::vector<Axis> grid;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    int truncation = 0;  // 0 is automatic
    std::string convergence = "first";  // first | all | off

    std::vector<ModelKind> models{ModelKind::dressed};
    std::vector<QubitInit> inits{QubitInit::ground, QubitInit::excited};
    std::optional<double> t_cut;
    std::optional<double> half_width;
    int pad = 4;

    ModelKind steady_model = ModelKind::dressed;

    int points = 801;
    std::optional<double> t_end;
    int input_q1 = 1, input_q2 = 0;

    PhaseMode phase_mode = PhaseMode::fixed;
    std::string ensemble = "axis";
    int ensemble_size = 128;

    bool split_parity = true;

    std::map<std::string, int> lines;  // key -> source line
    int line_of(const std::string& key) const {
        const auto it = lines.find(key);
        return it == lines.end() ? 0 : it->second;
    }
};

namespace detail {

inline const std::vector<std::string>& param_order() {
    // application order: Delta_R needs omega_h, T overrides the occupations
    static const std::vector<std::string> o{"omega_h", "omega_q",  "Omega_R",  "Delta_R",    "Delta",
                                            "g",       "gamma_q",  "gamma_h",  "n_th_h",     "n_th_q",
                                            "T",       "q1.Omega_R", "q1.Delta", "q1.g",     "q2.Omega_R",
                                            "q2.Delta", "q2.g"};
    return o;
}

inline bool is_param(const std::string& n) {
    const auto& o = param_order();
    return std::find(o.begin(), o.end(), n) != o.end();
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& s, int line, const std::string& key) {
    const std::string t = trim(s);
    double v = 0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size() || !std::isfinite(v))
        throw ConfigError(line, key + ": expected a number, got '" + t + "'");
    return v;
}

inline long parse_int(const std::string& s, int line, const std::string& key) {
    const std::string t = trim(s);
    long v = 0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
        throw ConfigError(line, key + ": expected an integer, got '" + t + "'");
    return v;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) out.push_back(trim(item));
    return out;
}

inline bool parse_bool(const std::string& s, int line, const std::string& key) {
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    throw ConfigError(line, key + ": expected true or false");
}

// "a, b, c" | "linspace(a, b, n)" | "logspace(a, b, n)"
inline Axis parse_axis(const std::string& name, const std::string& value, int line) {
    Axis ax{name, {}, value, line};
    const std::string key = "grid." + name;
    for (const char* fn : {"linspace", "logspace"}) {
        const std::string f(fn);
        if (value.rfind(f + "(", 0) != 0) continue;
        if (value.back() != ')') throw ConfigError(line, key + ": unterminated " + f);
        const auto args = split_list(value.substr(f.size() + 1, value.size() - f.size() - 2));
        if (args.size() != 3) throw ConfigError(line, key + ": " + f + " takes (start, stop, points)");
        const double a = parse_double(args[0], line, key), b = parse_double(args[1], line, key);
        const long n = parse_int(args[2], line, key);
        if (n < 2) throw ConfigError(line, key + ": a swept axis needs at least 2 points");
        if (f == "logspace" && !(a > 0 && b > 0)) throw ConfigError(line, key + ": logspace needs positive bounds");
        for (long k = 0; k < n; ++k) {
            const double u = static_cast<double>(k) / static_cast<double>(n - 1);
            ax.values.push_back(f == "linspace" ? a + (b - a) * u : a * std::pow(b / a, u));
        }
        ax.values.back() = b;
        return ax;
    }
    if (value.empty()) throw ConfigError(line, key + ": empty grid axis");
    for (const auto& item : split_list(value)) ax.values.push_back(parse_double(item, line, key));
    return ax;
}

}  // namespace detail

inline const std::vector<std::string>& grid_axis_names() {
    static const std::vector<std::string> n = [] {
        auto v = detail::param_order();
        v.push_back("t0");
        return v;
    }();
    return n;
}

// Parses the text; semantic checks that need the whole file live in validate_config.
inline ExperimentConfig parse_config(std::istream& in, std::optional<ExperimentKind> kind = std::nullopt) {
    ExperimentConfig c;
    std::optional<ExperimentKind> file_kind;
    int line_no = 0;
    for (std::string raw; std::getline(in, raw);) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(line_no, "expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(line_no, "missing key");
        if (c.lines.count(key)) throw ConfigError(line_no, "duplicate key '" + key + "'");
        c.lines[key] = line_no;
        auto number = [&] { return detail::parse_double(value, line_no, key); };
        auto integer = [&] { return detail::parse_int(value, line_no, key); };

        if (key.rfind("params.", 0) == 0) {
            const std::string name = key.substr(7);
            if (!detail::is_param(name)) throw ConfigError(line_no, "unknown parameter '" + name + "'");
            c.params[name] = number();
        } else if (key.rfind("grid.", 0) == 0) {
            const std::string name = key.substr(5);
            const auto& names = grid_axis_names();
            if (std::find(names.begin(), names.end(), name) == names.end())
                throw ConfigError(line_no, "unknown grid axis '" + name + "'");
            c.grid.push_back(detail::parse_axis(name, value, line_no));
        } else if (key == "kind") {
            file_kind = parse_kind(value);
            if (!file_kind) throw ConfigError(line_no, "unknown experiment kind '" + value + "'");
        } else if (key == "output_dir") {
            if (value.empty()) throw ConfigError(line_no, "output_dir is empty");
            c.output_dir = value;
        } else if (key == "seed") {
            const long s = integer();
            if (s < 0) throw ConfigError(line_no, "seed must be non-negative");
            c.seed = static_cast<std::uint64_t>(s);
        } else if (key == "truncation") {
            if (value != "auto") {
                const long n = integer();
                if (n < 2) throw ConfigError(line_no, "truncation must be at least 2");
                c.truncation = static_cast<int>(n);
            }
        } else if (key == "convergence") {
            if (value != "first" && value != "all" && value != "off")
                throw ConfigError(line_no, "convergence must be first, all or off");
            c.convergence = value;
        } else if (key == "spectrum.models") {
            c.models.clear();
            for (const auto& m : detail::split_list(value)) {
                if (m == "dressed") c.models.push_back(ModelKind::dressed);
                else if (m == "bare") c.models.push_back(ModelKind::bare);
                else throw ConfigError(line_no, "unknown model '" + m + "'");
            }
        } else if (key == "spectrum.inits") {
            c.inits.clear();
            for (const auto& m : detail::split_list(value)) {
                if (m == "ground") c.inits.push_back(QubitInit::ground);
                else if (m == "excited") c.inits.push_back(QubitInit::excited);
                else throw ConfigError(line_no, "unknown initial state '" + m + "'");
            }
        } else if (key == "spectrum.t_cut") {
            if (value != "auto") c.t_cut = number();
        } else if (key == "spectrum.half_width") {
            if (value != "auto") c.half_width = number();
        } else if (key == "spectrum.pad") {
            c.pad = static_cast<int>(integer());
        } else if (key == "steady.model") {
            if (value == "dressed") c.steady_model = ModelKind::dressed;
            else if (value == "bare") c.steady_model = ModelKind::bare;
            else throw ConfigError(line_no, "unknown model '" + value + "'");
        } else if (key == "entangle.points") {
            c.points = static_cast<int>(integer());
        } else if (key == "entangle.t_end") {
            if (value != "auto") c.t_end = number();
        } else if (key == "entangle.input") {
            if (value.size() != 2 || (value[0] != '0' && value[0] != '1') || (value[1] != '0' && value[1] != '1'))
                throw ConfigError(line_no, "entangle.input must be two logical digits, e.g. 10");
            c.input_q1 = value[0] - '0';
            c.input_q2 = value[1] - '0';
        } else if (key == "fidelity.mode") {
            if (value == "fixed") c.phase_mode = PhaseMode::fixed;
            else if (value == "local_z") c.phase_mode = PhaseMode::local_z;
            else throw ConfigError(line_no, "fidelity.mode must be fixed or local_z");
        } else if (key == "fidelity.ensemble") {
            if (value != "axis" && value != "haar") throw ConfigError(line_no, "fidelity.ensemble must be axis or haar");
            c.ensemble = value;
        } else if (key == "fidelity.ensemble_size") {
            c.ensemble_size = static_cast<int>(integer());
        } else if (key == "bell.split_parity") {
            c.split_parity = detail::parse_bool(value, line_no, key);
        } else {
            throw ConfigError(line_no, "unknown key '" + key + "'");
        }
    }
    if (kind && file_kind && *kind != *file_kind)
        throw ConfigError(c.line_of("kind"), "config is for '" + to_string(*file_kind) + "', not '" + to_string(*kind) + "'");
    if (!kind && !file_kind) throw ConfigError(0, "no experiment kind given");
    c.kind = kind ? *kind : *file_kind;
    return c;
}

inline ExperimentConfig load_config(const std::string& path, std::optional<ExperimentKind> kind = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, "cannot read config '" + path + "'");
    return parse_config(in, kind);
}

// Base parameters per experiment family before explicit assignments.
inline SystemParams base_params(ExperimentKind k) {
    return k == ExperimentKind::spectrum || k == ExperimentKind::steady ? presets::readout_dressed() : presets::gate();
}

// Resolves one grid cell.  Without an explicit n_th_q or T, the qubit bath shares the
// oscillator bath temperature (only the bare model reads it).
inline SystemParams cell_params(const ExperimentConfig& c, const std::map<std::string, double>& cell = {}) {
    std::map<std::string, double> v = c.params;
    for (const auto& [k, x] : cell)
        if (detail::is_param(k)) v[k] = x;
    SystemParams p = base_params(c.kind);
    for (const auto& name : detail::param_order()) {
        const auto it = v.find(name);
        if (it == v.end()) continue;
        const double x = it->second;
        if (name == "omega_h") p.omega_h = x;
        else if (name == "omega_q") p.omega_q = x;
        else if (name == "Omega_R") p.Omega_R = x;
        else if (name == "Delta_R") p.set_Delta_R(x);
        else if (name == "Delta") p.Delta = x;
        else if (name == "g") p.g = x;
        else if (name == "gamma_q") p.gamma_q = x;
        else if (name == "gamma_h") p.gamma_h = x;
        else if (name == "n_th_h") p.n_th_h = x;
        else if (name == "n_th_q") p.n_th_q = x;
        else if (name == "T") p = at_temperature(p, x);
        else {
            const int j = name[1] - '1';
            const std::string f = name.substr(3);
            if (f == "Omega_R") p.qubit[j].Omega_R = x;
            else if (f == "Delta") p.qubit[j].Delta = x;
            else p.qubit[j].g = x;
        }
    }
    if (!v.count("n_th_q") && !v.count("T") && v.count("n_th_h")) {
        const double T = p.n_th_h > 0 ? p.omega_h / std::log1p(1 / p.n_th_h) : 0.0;
        p.n_th_q = p.omega_q > 0 ? bose_einstein(p.omega_q, T) : 0.0;
    }
    return p;
}

// Cartesian product of the grid axes, first axis slowest.
inline std::vector<std::map<std::string, double>> grid_cells(const ExperimentConfig& c) {
    std::vector<std::map<std::string, double>> cells{{}};
    for (const auto& ax : c.grid) {
        std::vector<std::map<std::string, double>> next;
        for (const auto& cell : cells)
            for (double v : ax.values) {
                auto m = cell;
                m[ax.name] = v;
                next.push_back(std::move(m));
            }
        cells = std::move(next);
    }
    return cells;
}

inline std::vector<std::string> axis_names(const ExperimentConfig& c) {
    std::vector<std::string> n;
    for (const auto& a : c.grid) n.push_back(a.name);
    return n;
}

inline int cell_truncation(const ExperimentConfig& c, const SystemParams& p) {
    return c.truncation > 0 ? c.truncation : choose_truncation(p.n_th_h);
}

// Quantities reported by `validate` and echoed into the summary.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Static checks over every cell; returns the derived quantities of the first.
inline KeyValues validate_config(ExperimentConfig& c) {
    const ExperimentKind k = c.kind;
    auto line_for = [&](std::initializer_list<const char*> keys) {
        for (const char* key : keys)
            if (int l = c.line_of(key)) return l;
        return 0;
    };
    for (const auto& ax : c.grid) {
        if (ax.values.empty()) throw ConfigError(ax.line, "grid." + ax.name + ": empty grid axis");
        if (ax.name == "t0" && k != ExperimentKind::risetime_scan)
            throw ConfigError(ax.line, "grid.t0 applies only to risetime-scan");
        for (const auto& other : c.grid)
            if (&other != &ax && other.name == ax.name) throw ConfigError(ax.line, "repeated grid axis");
    }
    if (c.params.count("Omega_R") && c.params.count("Delta_R"))
        throw ConfigError(c.line_of("params.Delta_R"), "give Omega_R or Delta_R, not both");
    if (c.pad < 1) throw ConfigError(c.line_of("spectrum.pad"), "spectrum.pad must be at least 1");
    if (c.points < 2) throw ConfigError(c.line_of("entangle.points"), "entangle.points must be at least 2");
    if (c.ensemble_size < 1) throw ConfigError(c.line_of("fidelity.ensemble_size"), "ensemble size must be positive");
    if (c.models.empty()) throw ConfigError(c.line_of("spectrum.models"), "no models listed");
    if (c.inits.empty()) throw ConfigError(c.line_of("spectrum.inits"), "no initial states listed");
    if (c.t_cut && !(*c.t_cut > 0)) throw ConfigError(c.line_of("spectrum.t_cut"), "t_cut must be positive");
    if (c.t_end && !(*c.t_end > 0)) throw ConfigError(c.line_of("entangle.t_end"), "t_end must be positive");

    // grid-shape requirements and defaults
    const bool two_axis = k == ExperimentKind::fidelity_grid || k == ExperimentKind::damping_grid;
    if (two_axis && c.grid.empty()) {
        if (k == ExperimentKind::fidelity_grid) {
            c.grid.push_back(detail::parse_axis("Delta", "linspace(0, 0.02, 5)", 0));
            c.grid.push_back(detail::parse_axis("Delta_R", "linspace(-0.1, -0.01, 10)", 0));
        } else {
            c.grid.push_back(detail::parse_axis("gamma_q", "logspace(1e-7, 1e-4, 4)", 0));
            c.grid.push_back(detail::parse_axis("gamma_h", "logspace(1e-6, 1e-3, 4)", 0));
        }
    }
    if (two_axis && c.grid.size() != 2)
        throw ConfigError(c.grid.empty() ? 0 : c.grid.front().line, to_string(k) + " needs exactly two grid axes");
    if (k == ExperimentKind::risetime_scan) {
        if (c.grid.size() > 1 || (c.grid.size() == 1 && c.grid[0].name != "t0"))
            throw ConfigError(c.grid.front().line, "risetime-scan sweeps only grid.t0");
    }

    if (k == ExperimentKind::risetime_scan && c.grid.empty()) {
        const SystemParams p = cell_params(c);
        if (p.g == 0) throw ConfigError(c.line_of("params.g"), "two-qubit experiments need g > 0");
        c.grid.push_back(Axis{"t0", linspace(0, 0.2 * interaction_time(p), 41), "linspace(0, 0.2 t_int, 41)", 0});
    }

    KeyValues out;
    const auto cells = grid_cells(c);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        SystemParams p;
        try {
            p = cell_params(c, cells[i]);
            validate(p);
        } catch (const Error& e) {
            throw ConfigError(line_for({"params.gamma_q", "params.gamma_h", "params.n_th_h"}), e.what());
        }
        const int N = cell_truncation(c, p);
        const bool first = i == 0;
        if (first) {
            out.emplace_back("kind", to_string(k));
            out.emplace_back("cells", std::to_string(cells.size()));
            out.emplace_back("truncation", std::to_string(N));
        }
        if (k == ExperimentKind::spectrum) {
            for (ModelKind m : c.models) {
                const std::string tag = m == ModelKind::dressed ? "dressed" : "bare";
                const int line = m == ModelKind::dressed ? line_for({"params.Delta_R", "params.Omega_R"})
                                                         : line_for({"params.omega_q", "params.omega_h"});
                double shift = 0;
                try {
                    shift = dispersive_shift(p, m);
                } catch (const SingularDetuningError&) {
                    throw ConfigError(line, "spectrum needs a nonzero " + std::string(m == ModelKind::dressed
                                                                                         ? "Delta_R"
                                                                                         : "qubit-oscillator detuning") +
                                                " (singular dispersive shift)");
                }
                if (p.g == 0 && !c.t_cut)
                    throw ConfigError(c.line_of("params.g"), "g = 0 needs an explicit spectrum.t_cut");
                if (first) {
                    const double t_cut = c.t_cut ? *c.t_cut : cutoff_time(p, m);
                    out.emplace_back("t_cut." + tag, format_number(t_cut));
                    out.emplace_back("bin." + tag, format_number(2 * std::numbers::pi / t_cut));
                    out.emplace_back("predicted_shift." + tag, format_number(shift));
                }
            }
        } else if (k == ExperimentKind::steady) {
            if (first && c.steady_model == ModelKind::dressed && p.Delta_R() != 0 && p.g != 0)
                out.emplace_back("predicted_shift", format_number(dispersive_shift(p)));
        } else {
            if (!p.symmetric())
                throw ConfigError(line_for({"params.q1.Omega_R", "params.q1.Delta", "params.q1.g", "params.q2.Omega_R",
                                            "params.q2.Delta", "params.q2.g"}),
                                  "two-qubit experiments need identical qubit parameters");
            if (p.g == 0) throw ConfigError(c.line_of("params.g"), "two-qubit experiments need g > 0");
            if (p.Delta_R() == 0)
                throw ConfigError(line_for({"params.Delta_R", "params.Omega_R"}), "two-qubit experiments need Delta_R != 0");
            if (first) {
                const double t_int = interaction_time(p);
                const double cycles = phase_condition_cycles(p);
                out.emplace_back("t_int", format_number(t_int));
                out.emplace_back("predicted_shift", format_number(dispersive_shift(p)));
                out.emplace_back("sideband_frequency", format_number(sideband_frequency(p)));
                out.emplace_back("phase_condition_cycles", format_number(cycles));
                out.emplace_back("phase_condition_met",
                                 std::abs(cycles - std::round(cycles)) < 1e-9 ? "true" : "false");
            }
        }
    }
    if (k == ExperimentKind::risetime_scan)
        for (double t0 : c.grid[0].values)
            if (t0 < 0) throw ConfigError(c.grid[0].line, "rise time must be non-negative");
    return out;
}

// Every setting after defaults, in a fixed order.
inline std::string resolved_config(const ExperimentConfig& c) {
    std::ostringstream os;
    const SystemParams p = cell_params(c);
    auto kv = [&](const std::string& k, const std::string& v) { os << k << " = " << v << '\n'; };
    kv("kind", to_string(c.kind));
    kv("output_dir", c.output_dir);
    kv("seed", std::to_string(c.seed));
    kv("truncation", c.truncation > 0 ? std::to_string(c.truncation) : "auto");
    kv("convergence", c.convergence);
    kv("params.omega_q", format_number(p.omega_q));
    kv("params.omega_h", format_number(p.omega_h));
    os << "# Omega_R = " << format_number(p.Omega_R) << '\n';
    kv("params.Delta_R", format_number(p.Delta_R()));
    kv("params.Delta", format_number(p.Delta));
    kv("params.g", format_number(p.g));
    kv("params.gamma_q", format_number(p.gamma_q));
    kv("params.gamma_h", format_number(p.gamma_h));
    kv("params.n_th_q", format_number(p.n_th_q));
    kv("params.n_th_h", format_number(p.n_th_h));
    for (int j = 0; j < 2; ++j) {
        const std::string q = "params.q" + std::to_string(j + 1) + ".";
        if (p.qubit[j].Omega_R) kv(q + "Omega_R", format_number(*p.qubit[j].Omega_R));
        if (p.qubit[j].Delta) kv(q + "Delta", format_number(*p.qubit[j].Delta));
        if (p.qubit[j].g) kv(q + "g", format_number(*p.qubit[j].g));
    }
    for (const auto& ax : c.grid) {
        std::string v;
        for (double x : ax.values) v += (v.empty() ? "" : ", ") + format_number(x);
        kv("grid." + ax.name, v);
    }
    switch (c.kind) {
        case ExperimentKind::spectrum: {
            std::string m, i;
            for (auto x : c.models) m += (m.empty() ? "" : ", ") + std::string(x == ModelKind::dressed ? "dressed" : "bare");
            for (auto x : c.inits) i += (i.empty() ? "" : ", ") + to_string(x);
            kv("spectrum.models", m);
            kv("spectrum.inits", i);
            kv("spectrum.t_cut", c.t_cut ? format_number(*c.t_cut) : "auto");
            kv("spectrum.half_width", c.half_width ? format_number(*c.half_width) : "auto");
            kv("spectrum.pad", std::to_string(c.pad));
            break;
        }
        case ExperimentKind::steady:
            kv("steady.model", c.steady_model == ModelKind::dressed ? "dressed" : "bare");
            break;
        case ExperimentKind::entangle:
            kv("entangle.points", std::to_string(c.points));
            kv("entangle.t_end", c.t_end ? format_number(*c.t_end) : "auto");
            kv("entangle.input", std::to_string(c.input_q1) + std::to_string(c.input_q2));
            break;
        case ExperimentKind::bell:
            kv("bell.split_parity", c.split_parity ? "true" : "false");
            break;
        default:
            kv("fidelity.mode", c.phase_mode == PhaseMode::fixed ? "fixed" : "local_z");
            kv("fidelity.ensemble", c.ensemble);
            if (c.ensemble == "haar") kv("fidelity.ensemble_size", std::to_string(c.ensemble_size));
    }
    return os.str();
}

}  // namespace qubus
