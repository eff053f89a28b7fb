#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "dynamics.hpp"
#include "errors.hpp"
#include "hilbert.hpp"
#include "liouville.hpp"
#include "models.hpp"

namespace qubus {

struct Peak {
    double omega = 0;
    double height = 0;
    double fwhm = std::numeric_limits<double>::quiet_NaN();  // NaN when a half-height crossing is missing
};

// One-sided noise spectrum on a uniform grid omega_j = j * step, j = 0..size-1.
struct Spectrum {
    std::vector<double> omegas;
    std::vector<double> values;
    double t_cut = 0;
    double dt = 0;           // correlator sampling step
    std::optional<Peak> peak;

    double step() const { return omegas.size() > 1 ? omegas[1] - omegas[0] : 0.0; }
    // Physical resolution of the finite measurement window.
    double resolution() const { return 2 * std::numbers::pi / t_cut; }

    // Grid points inside [lo, hi].
    Spectrum window(double lo, double hi) const {
        Spectrum s{{}, {}, t_cut, dt, peak};
        for (std::size_t j = 0; j < omegas.size(); ++j)
            if (omegas[j] >= lo && omegas[j] <= hi) {
                s.omegas.push_back(omegas[j]);
                s.values.push_back(values[j]);
            }
        return s;
    }

    void write_csv(std::ostream& os) const {
        os << "omega,S_x\n" << std::setprecision(17);
        for (std::size_t j = 0; j < omegas.size(); ++j) os << omegas[j] << ',' << values[j] << '\n';
    }
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// Smallest 2^a 3^b 5^c 7^d not below n.
inline std::size_t fft_size(std::size_t n) {
    std::size_t best = 1;
    while (best < n) best <<= 1;
    for (std::size_t p3 = 1; p3 < best; p3 *= 3)
        for (std::size_t p5 = p3; p5 < best; p5 *= 5)
            for (std::size_t p7 = p5; p7 < best; p7 *= 7) {
                std::size_t v = p7;
                while (v < n) v <<= 1;
                best = std::min(best, v);
            }
    return best;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

}  // namespace detail

// S(omega) = 2 Re int_0^t_cut exp(i omega t) C(t) dt from samples C(k dt), k = 0..M with M dt = t_cut.
// Trapezoid weights, rectangular window, zero padding by at least `pad`.
inline Spectrum spectral_density(std::span<const double> c, double t_cut, int pad = 4) {
    if (c.size() < 2) throw ArgumentError("spectral density needs at least two samples");
    if (!(t_cut > 0)) throw ArgumentError("cutoff time must be positive");
    if (pad < 1) throw ArgumentError("padding factor must be at least 1");
    const std::size_t M = c.size() - 1;
    const double dt = t_cut / static_cast<double>(M);
    const std::size_t L = detail::fft_size(static_cast<std::size_t>(pad) * c.size());

    std::unique_ptr<double, detail::FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * L)));
    std::unique_ptr<fftw_complex, detail::FftwFree> out(
        static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (L / 2 + 1))));
    if (!in || !out) throw NumericalError("FFT buffer allocation failed");
    fftw_plan plan;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(L), in.get(), out.get(), FFTW_ESTIMATE);
    }
    if (!plan) throw NumericalError("FFT plan creation failed");
    double* x = in.get();
    std::fill(x, x + L, 0.0);
    for (std::size_t k = 0; k <= M; ++k) x[k] = c[k] * ((k == 0 || k == M) ? 0.5 : 1.0);
    fftw_execute(plan);
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }

    Spectrum s;
    s.t_cut = t_cut;
    s.dt = dt;
    const std::size_t n = L / 2 + 1;
    s.omegas.resize(n);
    s.values.resize(n);
    const double dw = 2 * std::numbers::pi / (static_cast<double>(L) * dt);
    // the real part is the same for exp(+i w t) and FFTW's exp(-i w t) on real input
    for (std::size_t j = 0; j < n; ++j) {
        s.omegas[j] = dw * static_cast<double>(j);
        s.values[j] = 2 * dt * out.get()[j][0];
    }
    return s;
}

// int S(omega) domega / 2 pi over the full (two-sided, even) FFT band.
inline double integrated_power(const Spectrum& s) {
    const std::size_t n = s.values.size();
    if (n < 2) return 0;
    double sum = s.values[0];
    for (std::size_t j = 1; j < n; ++j) sum += 2 * s.values[j];
    // the last bin is the Nyquist bin when the FFT length was even
    const bool even = std::abs(s.omegas.back() * s.dt - std::numbers::pi) < 1e-9;
    if (even) sum -= s.values[n - 1];
    return sum * s.step() / (2 * std::numbers::pi);
}

// Largest maximum within [lo, hi], refined by a three-point parabola.
inline Peak find_peak(const Spectrum& s, double lo, double hi) {
    if (s.omegas.empty() || lo > hi) throw ArgumentError("empty peak search window");
    if (lo < s.omegas.front() - 1e-12 || hi > s.omegas.back() + 1e-12)
        throw ArgumentError("peak search window outside the frequency grid");
    std::size_t first = s.omegas.size(), last = 0;
    for (std::size_t j = 0; j < s.omegas.size(); ++j)
        if (s.omegas[j] >= lo && s.omegas[j] <= hi) {
            first = std::min(first, j);
            last = j;
        }
    if (first > last) throw NoPeakError("no grid point inside the peak window");
    std::size_t k = first;
    double lo_val = s.values[first];
    for (std::size_t j = first; j <= last; ++j) {
        if (s.values[j] > s.values[k]) k = j;
        lo_val = std::min(lo_val, s.values[j]);
    }
    const double y0 = s.values[k];
    if (!(y0 > 0) || !(y0 > lo_val)) throw NoPeakError("flat spectrum in the peak window");

    Peak p{s.omegas[k], y0};
    if (k > 0 && k + 1 < s.values.size()) {
        const double ym = s.values[k - 1], yp = s.values[k + 1];
        const double den = ym - 2 * y0 + yp;
        if (den < 0) {
            const double d = std::clamp(0.5 * (ym - yp) / den, -0.5, 0.5);
            p.omega = s.omegas[k] + d * s.step();
            p.height = y0 - 0.25 * (ym - yp) * d;
        }
    }
    const double half = 0.5 * p.height;
    std::optional<double> left, right;
    for (std::size_t j = k; j > 0; --j)
        if (s.values[j - 1] < half) {
            const double f = (half - s.values[j - 1]) / (s.values[j] - s.values[j - 1]);
            left = s.omegas[j - 1] + f * s.step();
            break;
        }
    for (std::size_t j = k; j + 1 < s.values.size(); ++j)
        if (s.values[j + 1] < half) {
            const double f = (s.values[j] - half) / (s.values[j] - s.values[j + 1]);
            right = s.omegas[j] + f * s.step();
            break;
        }
    if (left && right) p.fwhm = *right - *left;
    return p;
}

enum class QubitInit { ground, excited };

inline std::string to_string(QubitInit q) { return q == QubitInit::excited ? "excited" : "ground"; }

struct ReadoutOptions {
    int truncation = 0;                                    // 0 picks the thermal rule
    CoherenceBand band{3, CoherenceBand::Parity::odd};     // sector carrying {x, rho0}
    std::optional<double> t_cut;                           // defaults to the cutoff time
    double half_window = 0;                                // peak search half width; 0 is automatic
    bool convergence_check = false;                        // rerun at the enlarged cutoff
    int pad = 4;
    double validation_horizon = 400;  // rk4 cross-check span for ill-conditioned eigenbases
    double validation_tol = 1e-6;     // relative to C(0)
};

struct ReadoutResult {
    QubitInit init = QubitInit::excited;
    Spectrum spectrum;
    Peak peak;
    double predicted_shift = 0;  // +- g^2 / detuning, signed for the initial state
    double expected_peak = 0;
    double bin = 0;              // 2 pi / t_cut
    int truncation = 0;
    int space_size = 0;
    double rcond = 1;            // eigenvector conditioning of the decomposition used
    double validation_error = 0;  // |C_modes - C_rk4| / C(0) when the cross-check ran
    std::optional<double> convergence_drift;  // |peak(N') - peak(N)| when checked
};

// Qubit logical state tensored with the thermal oscillator.
inline DensityMatrix readout_initial_state(const SystemParams& p, QubitInit init, int N) {
    const Vector q = ops::basis(2, init == QubitInit::excited ? 1 : 0);
    const Matrix rq = q * q.adjoint();
    return DensityMatrix(Operator(qubit_oscillator_layout(1, N),
                                  ops::kron(rq, thermal_state_from_occupation(p.n_th_h, N, p.omega_h).matrix())));
}

// Correlator spectra of one readout model.  The Liouvillian is decomposed once and reused
// for every initial qubit state.
class ReadoutSolver {
public:
    ReadoutSolver(const SystemParams& p, ModelKind kind, int N, const ReadoutOptions& opts)
        : p_(p), N_(N), opts_(opts), model_(readout_model(p, N, kind, Frame::logical)),
          prop_(model_, choose_space(model_, opts.band), PropagatorOptions{Method::expm_eig}) {}

    int truncation() const { return N_; }
    int space_size() const { return prop_.space().size(); }
    double rcond() const { return prop_.eigen()->rcond(); }

    struct Run {
        Spectrum spectrum;
        double validation_error = 0;
    };

    Run spectrum(QubitInit init, double t_cut) const {
        const DensityMatrix rho0 = readout_initial_state(p_, init, N_);
        const Operator x = quadrature(model_.layout());
        const CorrelatorModes modes = correlator_modes(prop_, x, rho0.op()).pruned(1e-14);
        Run r;
        if (rcond() < PropagatorOptions{}.min_rcond) r.validation_error = validate(modes, x, rho0, t_cut);
        const double w = std::max(modes.max_frequency(1e-6), p_.omega_h);
        const std::size_t M = static_cast<std::size_t>(std::ceil(t_cut * 16 * w / (2 * std::numbers::pi)));
        const std::vector<double> c = modes.sample(t_cut / static_cast<double>(M), M + 1);
        r.spectrum = spectral_density(c, t_cut, opts_.pad);
        return r;
    }

private:
    // Mode expansion against direct integration over a short span.
    double validate(const CorrelatorModes& modes, const Operator& x, const DensityMatrix& rho0, double t_cut) const {
        const Propagator rk(model_, prop_.space(), PropagatorOptions{Method::rk4});
        const auto grid = linspace(0, std::min(t_cut, opts_.validation_horizon), 9);
        const Eigen::RowVectorXcd f = 0.5 * prop_.space().functional(x.matrix());
        const double c0 = std::max(1.0, std::abs(modes.value(0)));
        double err = 0;
        rk.run(prop_.space().pack(regression_source(x, rho0.op()).matrix()), grid, [&](std::size_t i, const Matrix& v) {
            err = std::max(err, std::abs((f * v.col(0))(0).real() - modes.value(grid[i])) / c0);
        });
        if (!(err <= opts_.validation_tol))
            throw NumericalError("ill-conditioned Liouvillian eigenbasis: correlator modes deviate by " +
                                 std::to_string(err) + " from direct integration");
        return err;
    }

    SystemParams p_;
    int N_;
    ReadoutOptions opts_;
    Model model_;
    Propagator prop_;
};

// Spectra for each requested initial state, sharing one decomposition (and one for the convergence rerun).
inline std::vector<ReadoutResult> readout_experiments(const SystemParams& p, std::span<const QubitInit> inits,
                                                      ModelKind kind, const ReadoutOptions& opts = {}) {
    validate(p);
    const double detuning = readout_detuning(p, kind);
    if (p.g != 0 && detuning == 0) throw SingularDetuningError("readout needs a nonzero qubit-oscillator detuning");
    const double chi = p.g == 0 ? 0.0 : dispersive_shift(p, kind);
    if (opts.t_cut) {
        if (!(*opts.t_cut > 0)) throw ArgumentError("cutoff time must be positive");
    } else if (p.g == 0) {
        throw ArgumentError("cutoff time undefined for g = 0; set it explicitly");
    }
    const double t_cut = opts.t_cut ? *opts.t_cut : cutoff_time(p, kind);
    const int N = opts.truncation > 0 ? opts.truncation : choose_truncation(p.n_th_h);
    const double bin = 2 * std::numbers::pi / t_cut;
    const double hw = opts.half_window > 0 ? opts.half_window : std::max(5 * std::abs(chi), 20 * bin);
    const double lo = p.omega_h - hw, hi = p.omega_h + hw;

    std::vector<ReadoutResult> out;
    {
        const ReadoutSolver solver(p, kind, N, opts);
        for (QubitInit init : inits) {
            ReadoutResult r;
            r.init = init;
            r.truncation = N;
            r.bin = bin;
            r.predicted_shift = init == QubitInit::excited ? chi : -chi;
            r.expected_peak = p.omega_h + r.predicted_shift;
            r.space_size = solver.space_size();
            r.rcond = solver.rcond();
            auto run = solver.spectrum(init, t_cut);
            r.spectrum = std::move(run.spectrum);
            r.validation_error = run.validation_error;
            r.peak = find_peak(r.spectrum, lo, hi);
            r.spectrum.peak = r.peak;
            out.push_back(std::move(r));
        }
    }
    if (opts.convergence_check) {
        const ReadoutSolver big(p, kind, convergence_truncation(N), opts);
        for (auto& r : out)
            r.convergence_drift = std::abs(find_peak(big.spectrum(r.init, t_cut).spectrum, lo, hi).omega - r.peak.omega);
    }
    return out;
}

// Oscillator quadrature spectrum with the qubit prepared in `init` and the oscillator thermal.
inline ReadoutResult readout_experiment(const SystemParams& p, QubitInit init, ModelKind kind,
                                        const ReadoutOptions& opts = {}) {
    const QubitInit one[1] = {init};
    return readout_experiments(p, one, kind, opts).front();
}

// Qubit Bloch components (pauli frame) and photon number while the readout runs.
inline Trajectory readout_polarization(const SystemParams& p, QubitInit init, ModelKind kind,
                                       std::span<const double> grid, int truncation = 0) {
    const int N = truncation > 0 ? truncation : choose_truncation(p.n_th_h);
    const Model m = readout_model(p, N, kind, Frame::logical);
    const auto L = m.layout();
    EvolveOptions o;
    o.band = CoherenceBand{2, CoherenceBand::Parity::even};
    for (auto [name, op] : {std::pair{"sx", ops::sigma_x()}, {"sy", ops::sigma_y()}, {"sz", ops::sigma_z()}})
        o.observables.push_back({name, to_frame(embed(op, 0, L), 1, kind, Frame::logical)});
    o.observables.push_back({"n", embed(ops::number(N), 1, L)});
    return evolve(readout_initial_state(p, init, N), m, grid, o);
}

}  // namespace qubus
