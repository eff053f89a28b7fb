// qubus: config-driven runner for the readout, steady-state and two-qubit gate experiments.
//
//   qubus <subcommand> --config <file> [--out <dir>] [--threads k] [--seed s] [--truncation N]
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <qubus/runner.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <string>

namespace {

struct Flags {
    std::string config;
    std::string out;
    int threads = 1;
    long long seed = -1;
    int truncation = 0;
};

void add_common(CLI::App* sub, Flags& f, bool run_flags) {
    sub->add_option("-c,--config", f.config, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--truncation", f.truncation, "Fock truncation override")->check(CLI::Range(2, 100000));
    if (!run_flags) return;
    sub->add_option("-o,--out", f.out, "output directory (overrides output_dir)");
    sub->add_option("-j,--threads", f.threads, "worker threads")->check(CLI::Range(1, 1024));
    sub->add_option("--seed", f.seed, "ensemble seed (overrides seed)")->check(CLI::NonNegativeNumber);
}

int validate_only(const Flags& f) {
    try {
        auto c = qubus::load_config(f.config);
        if (f.truncation > 0) c.truncation = f.truncation;
        const auto kv = qubus::validate_config(c);
        for (const auto& [k, v] : kv) std::cout << k << " = " << v << '\n';
        return 0;
    } catch (const qubus::ConfigError& e) {
        std::cerr << f.config << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << f.config << ": " << e.what() << '\n';
        return 2;
    }
}

int run(qubus::ExperimentKind kind, const Flags& f) {
    qubus::ExperimentConfig c;
    try {
        c = qubus::load_config(f.config, kind);
    } catch (const qubus::ConfigError& e) {
        std::cerr << f.config << ": " << e.what() << '\n';
        return 2;
    }
    qubus::RunOptions ro;
    ro.threads = f.threads;
    if (!f.out.empty()) ro.output_dir = f.out;
    if (f.seed >= 0) ro.seed = static_cast<std::uint64_t>(f.seed);
    if (f.truncation > 0) ro.truncation = f.truncation;
    qubus::set_warning_handler([](const std::string& m) { std::cerr << "warning: " << m << '\n'; });
    const qubus::RunOutcome r = qubus::run_experiment(c, ro);
    if (r.exit_code == 2) {
        std::cerr << f.config << ": " << r.error << '\n';
        return 2;
    }
    for (const auto& [k, v] : r.summary) std::cout << k << " = " << v << '\n';
    if (r.exit_code != 0) std::cerr << "error: " << r.error << '\n';
    return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qubus: dressed-qubit readout and gate experiments"};
    app.require_subcommand(1);
    Flags f;
    CLI::App* validate = app.add_subcommand("validate", "check a config and print derived quantities");
    add_common(validate, f, false);
    std::vector<std::pair<CLI::App*, qubus::ExperimentKind>> subs;
    for (const auto& [kind, name] : qubus::experiment_kinds()) {
        CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
        add_common(sub, f, true);
        subs.emplace_back(sub, kind);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (validate->parsed()) return validate_only(f);
    for (const auto& [sub, kind] : subs)
        if (sub->parsed()) return run(kind, f);
    return 2;
}
