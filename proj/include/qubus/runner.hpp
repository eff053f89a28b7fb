#pragma once

// Config-driven experiment runs: CSV datasets, summary.kv and the resolved config echo.

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "config.hpp"
#include "dynamics.hpp"
#include "metrics.hpp"
#include "spectral.hpp"

namespace qubus {

// Runs work(i) for i < n on `threads` workers; collect(i, result) sees indices in order
// on the calling thread.  A failed item rethrows from its collect slot.
template <class R>
void parallel_ordered(std::size_t n, int threads, const std::function<R(std::size_t)>& work,
                      const std::function<void(std::size_t, R&)>& collect) {
    std::vector<std::optional<R>> results(n);
    std::vector<std::exception_ptr> errors(n);
    std::vector<char> done(n, 0);
    std::mutex mu;
    std::condition_variable cv;
    std::size_t next = 0;
    bool stop = false;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lk(mu);
                if (stop || next >= n) return;
                i = next++;
            }
            std::optional<R> r;
            std::exception_ptr e;
            try {
                r.emplace(work(i));
            } catch (...) {
                e = std::current_exception();
            }
            {
                std::lock_guard lk(mu);
                results[i] = std::move(r);
                errors[i] = e;
                done[i] = 1;
            }
            cv.notify_all();
        }
    };
    const int k = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    std::vector<std::thread> pool;
    for (int t = 0; t < k; ++t) pool.emplace_back(worker);
    auto join = [&] {
        {
            std::lock_guard lk(mu);
            stop = true;
        }
        for (auto& t : pool) t.join();
    };
    try {
        for (std::size_t i = 0; i < n; ++i) {
            std::unique_lock lk(mu);
            cv.wait(lk, [&] { return done[i] != 0; });
            if (errors[i]) std::rethrow_exception(errors[i]);
            R r = std::move(*results[i]);
            results[i].reset();
            lk.unlock();
            collect(i, r);
        }
    } catch (...) {
        join();
        throw;
    }
    join();
}

struct RunOptions {
    int threads = 1;
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> truncation;
};

struct RunOutcome {
    int exit_code = 0;  // 0 success, 2 configuration error, 3 numerical failure
    std::string error;
    KeyValues summary;
    std::filesystem::path output_dir;
};

namespace detail {

class Summary {
public:
    void add(const std::string& k, const std::string& v) { kv_.emplace_back(k, v); }
    void add(const std::string& k, double v) { add(k, format_number(v)); }
    void add(const std::string& k, int v) { add(k, std::to_string(v)); }
    void add(const KeyValues& kv) { kv_.insert(kv_.end(), kv.begin(), kv.end()); }
    KeyValues& items() { return kv_; }

    // running aggregates
    void truncation(int n) { n_max_ = std::max(n_max_, n); }
    void drift(double d) { drift_ = std::max(drift_.value_or(0.0), d); }
    void state_checks(double trace, double herm, double min_eig) {
        trace_ = std::max(trace_, trace);
        herm_ = std::max(herm_, herm);
        min_eig_ = std::min(min_eig_, min_eig);
    }
    void finish() {
        // the truncation actually used replaces the one predicted at validation
        std::erase_if(kv_, [](const auto& e) { return e.first == "truncation"; });
        add("truncation", n_max_);
        add("convergence_drift", drift_ ? format_number(*drift_) : std::string("skipped"));
        if (min_eig_ < 1) {
            add("max_trace_drift", trace_);
            add("max_hermiticity_error", herm_);
            add("min_eigenvalue", min_eig_);
        }
    }

private:
    KeyValues kv_;
    int n_max_ = 0;
    std::optional<double> drift_;
    double trace_ = 0, herm_ = 0, min_eig_ = 1;
};

inline std::string cell_prefix(const std::map<std::string, double>& cell, const std::vector<std::string>& axes,
                               std::size_t index) {
    std::string s = std::to_string(index);
    for (const auto& a : axes) s += ',' + format_number(cell.at(a));
    return s;
}

inline std::string header_prefix(const std::vector<std::string>& axes) {
    std::string s = "cell";
    for (const auto& a : axes) s += ',' + a;
    return s;
}

inline std::ofstream open_csv(const std::filesystem::path& p) {
    std::ofstream os(p);
    if (!os) throw NumericalError("cannot write " + p.string());
    return os;
}

inline bool check_cell(const ExperimentConfig& c, std::size_t i) {
    return c.convergence == "all" || (c.convergence == "first" && i == 0);
}

inline Operator qubit_pauli(const Matrix& s, const SubsystemLayout& L, ModelKind kind) {
    return to_frame(embed(s, 0, L), 1, kind, Frame::logical);
}

// ---- spectrum ----------------------------------------------------------------------------

inline void run_spectrum(const ExperimentConfig& c, const std::filesystem::path& dir, int threads, Summary& sum) {
    const auto cells = grid_cells(c);
    const auto axes = axis_names(c);
    struct Item {
        std::size_t cell;
        ModelKind model;
    };
    std::vector<Item> items;
    for (std::size_t i = 0; i < cells.size(); ++i)
        for (ModelKind m : c.models) items.push_back({i, m});

    auto peaks = open_csv(dir / "peaks.csv");
    peaks << header_prefix(axes)
          << ",model,init,peak_omega,shift,shift_bins,predicted_shift,fwhm,height,truncation,space_size,rcond,"
             "validation_error,convergence_drift\n";
    std::function<std::vector<ReadoutResult>(std::size_t)> work = [&](std::size_t k) {
        const SystemParams p = cell_params(c, cells[items[k].cell]);
        ReadoutOptions o;
        o.truncation = c.truncation;
        o.t_cut = c.t_cut;
        o.pad = c.pad;
        o.convergence_check = check_cell(c, items[k].cell);
        return readout_experiments(p, c.inits, items[k].model, o);
    };
    std::function<void(std::size_t, std::vector<ReadoutResult>&)> collect = [&](std::size_t k,
                                                                                 std::vector<ReadoutResult>& rs) {
        const auto [ci, model] = items[k];
        const SystemParams p = cell_params(c, cells[ci]);
        const std::string tag = model == ModelKind::dressed ? "dressed" : "bare";
        const std::string base = std::to_string(ci) + "." + tag;
        const double chi = std::abs(dispersive_shift(p, model));
        for (const auto& r : rs) {
            const double hw = c.half_width ? *c.half_width : std::max(4 * chi, 80 * r.bin);
            auto os = open_csv(dir / ("spectrum_" + std::to_string(ci) + "_" + tag + "_" + to_string(r.init) + ".csv"));
            r.spectrum.window(p.omega_h - hw, p.omega_h + hw).write_csv(os);
            const double shift = r.peak.omega - p.omega_h;
            peaks << cell_prefix(cells[ci], axes, ci) << ',' << tag << ',' << to_string(r.init) << ','
                  << format_number(r.peak.omega) << ',' << format_number(shift) << ','
                  << format_number(shift / r.bin) << ',' << format_number(r.predicted_shift) << ','
                  << format_number(r.peak.fwhm) << ',' << format_number(r.peak.height) << ',' << r.truncation << ','
                  << r.space_size << ',' << format_number(r.rcond) << ',' << format_number(r.validation_error) << ','
                  << (r.convergence_drift ? format_number(*r.convergence_drift) : "") << '\n';
            const std::string key = base + "." + to_string(r.init);
            sum.add("peak." + key, r.peak.omega);
            sum.add("shift_bins." + key, shift / r.bin);
            sum.truncation(r.truncation);
            if (r.convergence_drift) sum.drift(*r.convergence_drift);
        }
        if (rs.size() == 2) sum.add("separation_bins." + base, std::abs(rs[0].peak.omega - rs[1].peak.omega) / rs[0].bin);
        sum.add("bin." + base, rs.front().bin);
    };
    parallel_ordered(items.size(), threads, work, collect);
}

// ---- steady ------------------------------------------------------------------------------

struct SteadyRow {
    std::vector<double> values;  // sx, sy, sz, n
    int N = 0;
    std::optional<double> drift;
};

inline std::vector<double> steady_observables(const SystemParams& p, int N, ModelKind kind) {
    const Model m = readout_model(p, N, kind);
    const auto L = m.layout();
    const DensityMatrix rho = steady_state(m, choose_space(m, CoherenceBand{2, CoherenceBand::Parity::even}));
    return {expectation(qubit_pauli(ops::sigma_x(), L, kind), rho.op()),
            expectation(qubit_pauli(ops::sigma_y(), L, kind), rho.op()),
            expectation(qubit_pauli(ops::sigma_z(), L, kind), rho.op()),
            expectation(embed(ops::number(N), 1, L), rho.op())};
}

inline void run_steady(const ExperimentConfig& c, const std::filesystem::path& dir, int threads, Summary& sum) {
    const auto cells = grid_cells(c);
    const auto axes = axis_names(c);
    auto os = open_csv(dir / "steady.csv");
    os << header_prefix(axes) << ",sx,sy,sz,n,sx_closed_form,truncation\n";
    std::function<SteadyRow(std::size_t)> work = [&](std::size_t i) {
        const SystemParams p = cell_params(c, cells[i]);
        SteadyRow r;
        r.N = cell_truncation(c, p);
        r.values = steady_observables(p, r.N, c.steady_model);
        if (check_cell(c, i)) {
            const auto big = steady_observables(p, convergence_truncation(r.N), c.steady_model);
            double d = 0;
            for (std::size_t k = 0; k < big.size(); ++k) d = std::max(d, std::abs(big[k] - r.values[k]));
            r.drift = d;
        }
        return r;
    };
    std::function<void(std::size_t, SteadyRow&)> collect = [&](std::size_t i, SteadyRow& r) {
        const SystemParams p = cell_params(c, cells[i]);
        std::string closed;
        if (c.steady_model == ModelKind::dressed && p.Delta_R() != 0 && p.gamma_q > 0 && p.gamma_h > 0) {
            const double v = steady_state_closed_form(p).sigma_z;
            closed = format_number(v);
            sum.add("sx_closed_form." + std::to_string(i), v);
        }
        os << cell_prefix(cells[i], axes, i);
        for (double v : r.values) os << ',' << format_number(v);
        os << ',' << closed << ',' << r.N << '\n';
        sum.add("sx." + std::to_string(i), r.values[0]);
        sum.truncation(r.N);
        if (r.drift) sum.drift(*r.drift);
    };
    parallel_ordered(cells.size(), threads, work, collect);
}

// ---- entangle ----------------------------------------------------------------------------

struct EntangleRow {
    Trajectory tr;
    int N = 0;
    std::optional<double> drift;
};

inline void run_entangle(const ExperimentConfig& c, const std::filesystem::path& dir, int threads, Summary& sum) {
    const auto cells = grid_cells(c);
    const Matrix rho_q = logical_product(c.input_q1, c.input_q2);
    auto options = [&](const SystemParams& p, int N) {
        EntanglementOptions o;
        o.truncation = N;
        o.points = c.points;
        o.t_end = c.t_end ? *c.t_end : 2 * interaction_time(p);
        return o;
    };
    std::function<EntangleRow(std::size_t)> work = [&](std::size_t i) {
        const SystemParams p = cell_params(c, cells[i]);
        EntangleRow r;
        r.N = cell_truncation(c, p);
        r.tr = entanglement_experiment(p, rho_q, options(p, r.N));
        if (check_cell(c, i)) {
            const Trajectory big = entanglement_experiment(p, rho_q, options(p, convergence_truncation(r.N)));
            double d = 0;
            for (const auto& name : {"sx1", "sx2", "sx1sx2", "EN_h_q1q2", "EN_h_q1", "EN_h_q2", "EN_q1_q2"}) {
                const auto& a = r.tr[name];
                const auto& b = big[name];
                for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
            }
            r.drift = d;
        }
        return r;
    };
    std::function<void(std::size_t, EntangleRow&)> collect = [&](std::size_t i, EntangleRow& r) {
        const SystemParams p = cell_params(c, cells[i]);
        auto os = open_csv(dir / ("entangle_" + std::to_string(i) + ".csv"));
        r.tr.write_csv(os);
        const std::string s = std::to_string(i);
        const double t_int = interaction_time(p);
        const auto& t = r.tr.times;
        const std::size_t k =
            std::min_element(t.begin(), t.end(), [&](double a, double b) { return std::abs(a - t_int) < std::abs(b - t_int); }) -
            t.begin();
        sum.add("t_int." + s, t_int);
        sum.add("t_nearest_t_int." + s, t[k]);
        for (const auto& [name, bp] : entanglement_partitions()) {
            const auto& col = r.tr[name];
            sum.add(name + ".t_int." + s, col[k]);
            sum.add(name + ".max." + s, *std::max_element(col.begin(), col.end()));
        }
        const double f = std::abs(sideband_frequency(p));
        try {
            sum.add("sideband_measured." + s, dominant_frequency(r.tr["sx1sx2"], t[1] - t[0], 0.5 * f, 2 * f));
        } catch (const NoPeakError&) {
            sum.add("sideband_measured." + s, "none");
        }
        sum.add("sideband_predicted." + s, sideband_frequency(p));
        sum.truncation(r.N);
        if (r.drift) sum.drift(*r.drift);
        sum.state_checks(r.tr.max_trace_drift(), r.tr.max_hermiticity_error(), r.tr.min_eigenvalue());
    };
    parallel_ordered(cells.size(), threads, work, collect);
}

// ---- gate scans --------------------------------------------------------------------------

struct GateRow {
    GateRunResult run;
    std::optional<double> drift;
};

inline FidelityEnsemble ensemble_for(const ExperimentConfig& c) {
    return c.ensemble == "haar" ? FidelityEnsemble::haar_products(c.ensemble_size, c.seed)
                                : FidelityEnsemble::axis_products();
}

inline std::optional<Pulse> pulse_for(const ExperimentConfig& c, const std::map<std::string, double>& cell,
                                      const SystemParams& p) {
    if (c.kind != ExperimentKind::risetime_scan) return std::nullopt;
    return Pulse{p.Omega_R, cell.at("t0"), interaction_time(p)};
}

inline void run_gate_scan(const ExperimentConfig& c, const std::filesystem::path& dir, int threads, Summary& sum) {
    const auto cells = grid_cells(c);
    const auto axes = axis_names(c);
    const FidelityEnsemble ens = ensemble_for(c);
    const bool rise = c.kind == ExperimentKind::risetime_scan;
    auto os = open_csv(dir / (rise ? "risetime.csv" : "fidelity.csv"));
    os << (rise ? "t0,F\n" : "param1,param2,F\n");
    if (!rise) {
        sum.add("param1", axes[0]);
        sum.add("param2", axes[1]);
    }
    std::function<GateRow(std::size_t)> work = [&](std::size_t i) {
        const SystemParams p = cell_params(c, cells[i]);
        GateRunOptions o;
        o.truncation = cell_truncation(c, p);
        o.mode = c.phase_mode;
        GateRow r{run_gate(p, pulse_for(c, cells[i], p), ens, o), std::nullopt};
        if (check_cell(c, i)) {
            o.truncation = convergence_truncation(o.truncation);
            r.drift = std::abs(run_gate(p, pulse_for(c, cells[i], p), ens, o).fidelity.fidelity - r.run.fidelity.fidelity);
        }
        return r;
    };
    double f_min = 2, f_max = -1;
    std::size_t arg_max = 0;
    double min_state = 1;
    std::function<void(std::size_t, GateRow&)> collect = [&](std::size_t i, GateRow& r) {
        const auto& f = r.run.fidelity;
        for (const auto& a : axes) os << format_number(cells[i].at(a)) << ',';
        os << format_number(f.fidelity) << '\n';
        if (f.fidelity > f_max) {
            f_max = f.fidelity;
            arg_max = i;
        }
        f_min = std::min(f_min, f.fidelity);
        min_state = std::min(min_state, f.min_state_fidelity);
        sum.truncation(r.run.truncation);
        if (r.drift) sum.drift(*r.drift);
        sum.state_checks(f.max_trace_drift, f.max_hermiticity_error, f.min_eigenvalue);
    };
    parallel_ordered(cells.size(), threads, work, collect);
    sum.add("F_min", f_min);
    sum.add("F_max", f_max);
    sum.add("F_argmax_cell", static_cast<int>(arg_max));
    for (const auto& a : axes) sum.add("F_argmax." + a, cells[arg_max].at(a));
    sum.add("min_state_fidelity", min_state);
    if (rise) {
        const auto& t0 = c.grid[0].values;
        sum.add("t0_min", *std::min_element(t0.begin(), t0.end()));
        sum.add("t0_max", *std::max_element(t0.begin(), t0.end()));
        sum.add("t0_points", static_cast<int>(t0.size()));
    }
    sum.add("fidelity_mode", c.phase_mode == PhaseMode::fixed ? "fixed" : "local_z");
}

// ---- bell --------------------------------------------------------------------------------

struct BellRow {
    BellResult r;
    std::optional<double> drift;
};

inline void run_bell(const ExperimentConfig& c, const std::filesystem::path& dir, int threads, Summary& sum) {
    const auto cells = grid_cells(c);
    const auto axes = axis_names(c);
    auto os = open_csv(dir / "bell.csv");
    os << header_prefix(axes) << ",E_N,trace,truncation\n";
    std::function<BellRow(std::size_t)> work = [&](std::size_t i) {
        const SystemParams p = cell_params(c, cells[i]);
        BellOptions o;
        o.split_parity = c.split_parity;
        o.truncation = cell_truncation(c, p);
        BellRow row{bell_circuit(p, o), std::nullopt};
        if (check_cell(c, i)) {
            o.truncation = convergence_truncation(o.truncation);
            row.drift = std::abs(bell_circuit(p, o).log_negativity - row.r.log_negativity);
        }
        return row;
    };
    std::function<void(std::size_t, BellRow&)> collect = [&](std::size_t i, BellRow& row) {
        const auto& r = row.r;
        os << cell_prefix(cells[i], axes, i) << ',' << format_number(r.log_negativity) << ','
           << format_number(r.rho.trace().real()) << ',' << r.truncation << '\n';
        auto rho = open_csv(dir / ("bell_rho_" + std::to_string(i) + ".csv"));
        rho << "row,col,re,im\n";
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                rho << a << ',' << b << ',' << format_number(r.rho(a, b).real()) << ','
                    << format_number(r.rho(a, b).imag()) << '\n';
        sum.add("E_N." + std::to_string(i), r.log_negativity);
        sum.truncation(r.truncation);
        if (row.drift) sum.drift(*row.drift);
        const Matrix h = 0.5 * (r.rho + r.rho.adjoint());
        sum.state_checks(std::abs(r.rho.trace() - 1.0), (r.rho - r.rho.adjoint()).cwiseAbs().maxCoeff(), min_eigenvalue(h));
    };
    parallel_ordered(cells.size(), threads, work, collect);
}

inline void write_kv(const std::filesystem::path& p, const KeyValues& kv) {
    std::ofstream os(p);
    for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
}

}  // namespace detail

// Validates, writes config.resolved, runs, and writes summary.kv (also on failure, with status).
inline RunOutcome run_experiment(ExperimentConfig c, const RunOptions& ro = {}) {
    RunOutcome out;
    if (ro.output_dir) c.output_dir = *ro.output_dir;
    if (ro.seed) c.seed = *ro.seed;
    if (ro.truncation) c.truncation = *ro.truncation;
    KeyValues derived;
    try {
        derived = validate_config(c);
    } catch (const ConfigError& e) {
        out.exit_code = 2;
        out.error = e.what();
        return out;
    } catch (const Error& e) {
        out.exit_code = 2;
        out.error = e.what();
        return out;
    }
    out.output_dir = c.output_dir;
    std::error_code ec;
    std::filesystem::create_directories(out.output_dir, ec);
    if (ec) {
        out.exit_code = 2;
        out.error = "cannot create output directory '" + c.output_dir + "': " + ec.message();
        return out;
    }
    {
        std::ofstream os(out.output_dir / "config.resolved");
        os << resolved_config(c);
    }
    detail::Summary sum;
    sum.add(derived);
    const auto start = std::chrono::steady_clock::now();
    try {
        switch (c.kind) {
            case ExperimentKind::spectrum: detail::run_spectrum(c, out.output_dir, ro.threads, sum); break;
            case ExperimentKind::steady: detail::run_steady(c, out.output_dir, ro.threads, sum); break;
            case ExperimentKind::entangle: detail::run_entangle(c, out.output_dir, ro.threads, sum); break;
            case ExperimentKind::bell: detail::run_bell(c, out.output_dir, ro.threads, sum); break;
            default: detail::run_gate_scan(c, out.output_dir, ro.threads, sum);
        }
        sum.finish();
        sum.add("status", "ok");
    } catch (const std::exception& e) {
        out.exit_code = 3;
        out.error = e.what();
        sum.finish();
        sum.add("status", "failed (outputs may be partial)");
        sum.add("error", e.what());
    }
    sum.add("wall_time_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    out.summary = sum.items();
    detail::write_kv(out.output_dir / "summary.kv", out.summary);
    return out;
}

}  // namespace qubus
