#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "diagnostics.hpp"
#include "errors.hpp"
#include "hilbert.hpp"

namespace qubus {

// All frequencies and rates in units of the oscillator frequency.
struct QubitOverride {
    std::optional<double> Omega_R;
    std::optional<double> Delta;
    std::optional<double> g;
};

struct SystemParams {
    double omega_q = 1.0;
    double omega_h = 1.0;
    double Omega_R = 1.0;
    double Delta = 0.0;  // omega_d - omega_q
    double g = 0.0;
    double gamma_q = 0.0;
    double gamma_h = 0.0;
    double n_th_q = 0.0;
    double n_th_h = 0.0;
    std::array<QubitOverride, 2> qubit{};

    double omega_d() const { return omega_q + Delta; }
    double Delta_R() const { return Omega_R - omega_h; }

    double Omega_R_of(int j) const { return qubit.at(j).Omega_R.value_or(Omega_R); }
    double Delta_of(int j) const { return qubit.at(j).Delta.value_or(Delta); }
    double g_of(int j) const { return qubit.at(j).g.value_or(g); }
    double Delta_R_of(int j) const { return Omega_R_of(j) - omega_h; }

    bool symmetric() const {
        return Omega_R_of(0) == Omega_R_of(1) && Delta_of(0) == Delta_of(1) && g_of(0) == g_of(1);
    }

    SystemParams& set_Delta_R(double d) {
        Omega_R = omega_h + d;
        return *this;
    }
};

inline void validate(const SystemParams& p) {
    auto nonneg = [](double v, const char* name) {
        if (!(v >= 0)) throw ArgumentError(std::string(name) + " must be non-negative");
    };
    nonneg(p.gamma_q, "gamma_q");
    nonneg(p.gamma_h, "gamma_h");
    nonneg(p.n_th_q, "n_th_q");
    nonneg(p.n_th_h, "n_th_h");
    if (!(p.omega_h > 0)) throw ArgumentError("omega_h must be positive");
    for (int j = 0; j < 2; ++j) nonneg(p.g_of(j), "g");
}

enum class ModelKind { bare, dressed };

// pauli: index 0 is sigma_z = +1.  logical: index equals the logical qubit value,
// so basis states carry a definite excitation number.
enum class Frame { pauli, logical };

inline double bose_einstein(double omega, double T) {
    if (!(omega > 0)) throw ArgumentError("bose_einstein needs a positive frequency");
    if (T < 0) throw ArgumentError("temperature must be non-negative");
    if (T == 0) return 0.0;
    return 1.0 / std::expm1(omega / T);
}

inline SystemParams at_temperature(SystemParams p, double T) {
    p.n_th_h = bose_einstein(p.omega_h, T);
    p.n_th_q = bose_einstein(p.omega_q, T);
    return p;
}

namespace presets {

// dressed readout: omega_q is metadata only once Delta = 0
inline SystemParams readout_dressed() {
    SystemParams p;
    p.omega_q = 50.0;
    p.set_Delta_R(0.05);
    p.g = 5e-3;
    p.gamma_q = p.gamma_h = 1e-4;
    return p;
}

inline SystemParams readout_bare() {
    SystemParams p = readout_dressed();
    p.omega_q = 1.05;
    p.Omega_R = 0.0;
    return p;
}

inline SystemParams gate() {
    SystemParams p;
    p.omega_q = 50.0;
    p.set_Delta_R(0.05);
    p.g = 5e-3;
    p.gamma_q = p.gamma_h = 1e-6;
    return p;
}

}  // namespace presets

// Columns are the logical states |0>, |1> written in the pauli basis.
inline Matrix logical_basis(ModelKind kind) {
    Matrix b(2, 2);
    if (kind == ModelKind::bare) {
        b << 0, 1, 1, 0;  // |0> = sigma_z -1, |1> = sigma_z +1
    } else {
        const double s = std::numbers::sqrt2 / 2;
        b << s, s, -s, s;  // |0> = -x, |1> = +x
    }
    return b;
}

// Unitary taking logical-frame coordinates to pauli-frame coordinates.
inline Matrix frame_unitary(const SubsystemLayout& layout, int n_qubits, ModelKind kind) {
    Matrix u = ops::identity(1);
    for (int j = 0; j < layout.size(); ++j)
        u = ops::kron(u, j < n_qubits ? logical_basis(kind) : ops::identity(layout.dim(j)));
    return u;
}

inline Operator to_frame(const Operator& op, int n_qubits, ModelKind kind, Frame frame) {
    if (frame == Frame::pauli) return op;
    const Matrix u = frame_unitary(op.layout(), n_qubits, kind);
    return Operator(op.layout(), u.adjoint() * op.matrix() * u);
}
inline Vector to_frame(const Vector& psi, const SubsystemLayout& layout, int n_qubits, ModelKind kind,
                       Frame frame) {
    if (frame == Frame::pauli) return psi;
    return frame_unitary(layout, n_qubits, kind).adjoint() * psi;
}

// Excitation number of each logical-frame basis state: qubit values plus photons.
inline std::vector<int> excitation_labels(const SubsystemLayout& layout) {
    std::vector<int> e(layout.total_dim(), 0);
    for (int i = 0; i < layout.total_dim(); ++i)
        for (int s = 0; s < layout.size(); ++s) e[i] += layout.digit(i, s);
    return e;
}

// Keeps only matrix elements between equal excitation numbers.
inline Operator excitation_conserving_part(const Operator& op, const std::vector<int>& labels) {
    Matrix m = op.matrix();
    for (int c = 0; c < m.cols(); ++c)
        for (int r = 0; r < m.rows(); ++r)
            if (labels[r] != labels[c]) m(r, c) = 0;
    return Operator(op.layout(), std::move(m));
}

inline SubsystemLayout qubit_oscillator_layout(int n_qubits, int N) {
    if (n_qubits < 1 || n_qubits > 2) throw ArgumentError("one or two qubits supported");
    if (N < 1) throw ArgumentError("oscillator truncation must be positive");
    std::vector<int> d(n_qubits, 2);
    d.push_back(N);
    return SubsystemLayout(d);
}

namespace detail {
inline void require_N(int N) {
    if (N < 2) throw ArgumentError("Hamiltonian constructors need N >= 2, got " + std::to_string(N));
}
}  // namespace detail

inline Operator bare_hamiltonian(const SystemParams& p, int N, Frame frame = Frame::pauli) {
    detail::require_N(N);
    const auto L = qubit_oscillator_layout(1, N);
    Operator h = 0.5 * p.omega_q * embed(ops::sigma_z(), 0, L) + p.omega_h * embed(ops::number(N), 1, L) +
                 p.g * embed(ops::sigma_x(), 0, L) * embed(ops::position(N), 1, L);
    return to_frame(h, 1, ModelKind::bare, frame);
}

inline Operator dressed_hamiltonian(const SystemParams& p, int N, double Omega_R_now, Frame frame = Frame::pauli) {
    detail::require_N(N);
    const auto L = qubit_oscillator_layout(1, N);
    const Operator sz = embed(ops::sigma_z(), 0, L);
    Operator h = -0.5 * p.Delta * sz + 0.5 * Omega_R_now * embed(ops::sigma_x(), 0, L) +
                 p.omega_h * embed(ops::number(N), 1, L) - p.g * sz * embed(ops::position(N), 1, L);
    return to_frame(h, 1, ModelKind::dressed, frame);
}
inline Operator dressed_hamiltonian(const SystemParams& p, int N, Frame frame = Frame::pauli) {
    return dressed_hamiltonian(p, N, p.Omega_R, frame);
}

// Static part of the two-qubit Hamiltonian (everything but the drive amplitudes).
inline Operator two_qubit_static(const SystemParams& p, int N, Frame frame = Frame::pauli) {
    detail::require_N(N);
    const auto L = qubit_oscillator_layout(2, N);
    const Operator x = embed(ops::position(N), 2, L);
    Operator h = p.omega_h * embed(ops::number(N), 2, L);
    for (int j = 0; j < 2; ++j) {
        const Operator sz = embed(ops::sigma_z(), j, L);
        h += -0.5 * p.Delta_of(j) * sz - p.g_of(j) * sz * x;
    }
    return to_frame(h, 2, ModelKind::dressed, frame);
}

// sigma_x^j / 2, the operator multiplying qubit j's drive amplitude.
inline Operator two_qubit_drive(int j, int N, Frame frame = Frame::pauli) {
    const auto L = qubit_oscillator_layout(2, N);
    return to_frame(0.5 * embed(ops::sigma_x(), j, L), 2, ModelKind::dressed, frame);
}

inline Operator two_qubit_hamiltonian(const SystemParams& p, int N, std::array<double, 2> amplitudes,
                                      Frame frame = Frame::pauli) {
    Operator h = two_qubit_static(p, N, frame);
    for (int j = 0; j < 2; ++j) h += amplitudes[j] * two_qubit_drive(j, N, frame);
    return h;
}
inline Operator two_qubit_hamiltonian(const SystemParams& p, int N, Frame frame = Frame::pauli) {
    return two_qubit_hamiltonian(p, N, {p.Omega_R_of(0), p.Omega_R_of(1)}, frame);
}

// Rotating-wave model in the dressed eigenbasis; always returned in the logical frame.
inline Operator rwa_hamiltonian(const SystemParams& p, int N) {
    detail::require_N(N);
    const auto L = qubit_oscillator_layout(1, N);
    const Matrix sz = logical_basis(ModelKind::bare).adjoint() * ops::sigma_z() * logical_basis(ModelKind::bare);
    Matrix sm = Matrix::Zero(2, 2);
    sm(0, 1) = 1;  // |0><1|
    const Operator a = embed(ops::destroy(N), 1, L);
    const Operator s_minus = embed(sm, 0, L);
    return 0.5 * p.Omega_R * embed(sz, 0, L) + p.omega_h * embed(ops::number(N), 1, L) +
           p.g * (s_minus * a.adjoint() + s_minus.adjoint() * a);
}

// Dispersive two-qubit (or one-qubit) Hamiltonian in the logical frame.
inline Operator effective_hamiltonian(const SystemParams& p, int N, int n_qubits = 2) {
    detail::require_N(N);
    const auto L = qubit_oscillator_layout(n_qubits, N);
    for (int j = 0; j < n_qubits; ++j) {
        if (p.Delta_R_of(j) == 0) throw SingularDetuningError("effective Hamiltonian needs Delta_R != 0");
        if (std::abs(p.Delta_R_of(j)) < 10 * p.g_of(j))
            warn("effective Hamiltonian outside the dispersive regime (|Delta_R| < 10 g)");
    }
    Matrix szl(2, 2), sml = Matrix::Zero(2, 2);
    szl << -1, 0, 0, 1;
    sml(0, 1) = 1;
    const Operator n = embed(ops::number(N), n_qubits, L);
    Operator h = p.omega_h * n;
    for (int j = 0; j < n_qubits; ++j) {
        const double chi = p.g_of(j) * p.g_of(j) / p.Delta_R_of(j);
        const Operator sz = embed(szl, j, L);
        h += (0.5 * p.Omega_R_of(j) + 0.5 * chi) * sz + chi * sz * n;
    }
    if (n_qubits == 2) {
        for (int j = 0; j < 2; ++j) {
            const double c = p.g_of(j) * p.g_of(1 - j) / (2 * p.Delta_R_of(j));
            const Operator sp = embed(Matrix(sml.adjoint()), j, L), sm = embed(sml, 1 - j, L);
            h += c * (sp * sm + sm.adjoint() * sp.adjoint());
        }
    }
    return h;
}

struct JumpOperator {
    std::string name;
    Operator op;  // rate already absorbed
    double rate = 0.0;
};

struct LindbladSet {
    std::vector<JumpOperator> ops;
    bool empty() const { return ops.empty(); }
    std::size_t size() const { return ops.size(); }
};

// Thermal damping of each qubit (in its pauli basis) and of the oscillator.
// Dressed qubits see a zero-occupation bath.
inline LindbladSet lindblad_set(const SystemParams& p, int N, int n_qubits, ModelKind kind,
                                Frame frame = Frame::pauli) {
    validate(p);
    const auto L = qubit_oscillator_layout(n_qubits, N);
    const double nq = kind == ModelKind::dressed ? 0.0 : p.n_th_q;
    LindbladSet ls;
    auto add = [&](std::string name, const Operator& op, double rate) {
        if (rate > 0) ls.ops.push_back({std::move(name), to_frame(std::sqrt(rate) * op, n_qubits, kind, frame), rate});
    };
    for (int j = 0; j < n_qubits; ++j) {
        const std::string q = n_qubits == 1 ? "q" : "q" + std::to_string(j + 1);
        add(q + "-", embed(ops::sigma_minus(), j, L), (nq + 1) * p.gamma_q);
        add(q + "+", embed(ops::sigma_plus(), j, L), nq * p.gamma_q);
    }
    add("h-", embed(ops::destroy(N), n_qubits, L), (p.n_th_h + 1) * p.gamma_h);
    add("h+", embed(ops::create(N), n_qubits, L), p.n_th_h * p.gamma_h);
    return ls;
}

struct Pulse {
    double Omega_R0 = 1.0;
    double t0 = 0.0;  // rise time; 0 is the rectangular pulse
    double t_int = 1.0;
};

inline void validate(const Pulse& pulse) {
    if (!(pulse.t0 >= 0)) throw ArgumentError("pulse rise time must be non-negative");
    if (!(pulse.t_int > 0)) throw ArgumentError("pulse interaction time must be positive");
}

inline double pulse_amplitude(const Pulse& pulse, double t) {
    if (pulse.t0 == 0) {
        if (t < 0 || t > pulse.t_int) return 0.0;
        if (t == 0 || t == pulse.t_int) return 0.5 * pulse.Omega_R0;
        return pulse.Omega_R0;
    }
    return 0.25 * pulse.Omega_R0 * (1 + std::tanh(2 * t / pulse.t0)) * (1 - std::tanh(2 * (t - pulse.t_int) / pulse.t0));
}

namespace detail {
inline double log_cosh(double x) {
    const double a = std::abs(x);
    return a + std::log1p(std::exp(-2 * a)) - std::numbers::ln2;
}
}  // namespace detail

// An antiderivative of pulse_amplitude.  Uses
// (1 + tanh a)(1 - tanh b) = (1 + coth(a - b))(tanh a - tanh b).
inline double pulse_antiderivative(const Pulse& pulse, double t) {
    if (pulse.t0 == 0) return pulse.Omega_R0 * std::clamp(t, 0.0, pulse.t_int);
    const double c = 2 * pulse.t_int / pulse.t0;
    const double k = 0.25 * pulse.Omega_R0 * (1 + 1 / std::tanh(c)) * 0.5 * pulse.t0;
    return k * (detail::log_cosh(2 * t / pulse.t0) - detail::log_cosh(2 * (t - pulse.t_int) / pulse.t0));
}

// Simulation window: the plateau for a rectangular pulse, five rise times of margin otherwise.
inline std::pair<double, double> pulse_window(const Pulse& pulse) {
    if (pulse.t0 == 0) return {0.0, pulse.t_int};
    return {-5 * pulse.t0, pulse.t_int + 5 * pulse.t0};
}

// Qubit-oscillator detuning that sets the dispersive physics of each model.
inline double readout_detuning(const SystemParams& p, ModelKind kind) {
    return kind == ModelKind::dressed ? p.Delta_R() : p.omega_q - p.omega_h;
}

inline double dispersive_shift(const SystemParams& p, ModelKind kind = ModelKind::dressed) {
    const double d = readout_detuning(p, kind);
    if (d == 0) throw SingularDetuningError("dispersive shift undefined at zero detuning");
    return p.g * p.g / d;
}

inline double interaction_time(const SystemParams& p) {
    if (p.g == 0) throw ArgumentError("interaction time undefined for g = 0");
    return std::numbers::pi * std::abs(p.Delta_R()) / (4 * p.g * p.g);
}

inline double cutoff_time(const SystemParams& p, ModelKind kind = ModelKind::dressed) {
    if (p.g == 0) throw ArgumentError("cutoff time undefined for g = 0");
    const double d = readout_detuning(p, kind);
    if (d == 0) throw SingularDetuningError("cutoff time undefined at zero detuning");
    return 40 * std::numbers::pi * std::abs(d) / (p.g * p.g);
}

// Fast sideband frequency of the exchange dynamics.
inline double sideband_frequency(const SystemParams& p) {
    if (p.Delta_R() == 0) throw SingularDetuningError("sideband undefined at zero Rabi detuning");
    return p.Delta_R() + 4 * p.g * p.g / p.Delta_R();
}

// Sideband cycles completed during the interaction time; an integer means the
// leakage oscillation closes at the end of the gate.
inline double phase_condition_cycles(const SystemParams& p) {
    return sideband_frequency(p) * interaction_time(p) / (2 * std::numbers::pi);
}

struct Model {
    Operator h_static;
    Operator h_drive;  // multiplies pulse_amplitude(*pulse, t)
    std::optional<Pulse> pulse;
    LindbladSet lindblads;
    std::vector<int> excitations;  // logical-frame excitation numbers; empty if not meaningful

    bool time_dependent() const { return pulse.has_value(); }
    const SubsystemLayout& layout() const { return h_static.layout(); }
    int dim() const { return h_static.dim(); }
    double amplitude(double t) const { return pulse ? pulse_amplitude(*pulse, t) : 0.0; }
    Operator hamiltonian(double t) const {
        if (!pulse) return h_static;
        return h_static + amplitude(t) * h_drive;
    }
};

// Single qubit and oscillator with constant drive, logical frame by default.
inline Model readout_model(const SystemParams& p, int N, ModelKind kind, Frame frame = Frame::logical) {
    Model m;
    m.h_static = kind == ModelKind::dressed ? dressed_hamiltonian(p, N, frame) : bare_hamiltonian(p, N, frame);
    m.lindblads = lindblad_set(p, N, 1, kind, frame);
    if (frame == Frame::logical) m.excitations = excitation_labels(m.layout());
    return m;
}

// Two dressed qubits on the shared oscillator.  Without a pulse the drive is the
// constant plateau; with one, each qubit's amplitude follows pulse scaled by its
// Omega_R override relative to the plateau.
inline Model gate_model(const SystemParams& p, int N, std::optional<Pulse> pulse = std::nullopt,
                        Frame frame = Frame::logical) {
    Model m;
    m.lindblads = lindblad_set(p, N, 2, ModelKind::dressed, frame);
    if (frame == Frame::logical) m.excitations = excitation_labels(qubit_oscillator_layout(2, N));
    if (!pulse) {
        m.h_static = two_qubit_hamiltonian(p, N, frame);
        return m;
    }
    validate(*pulse);
    if (pulse->Omega_R0 == 0) throw ArgumentError("pulse plateau amplitude must be nonzero");
    m.h_static = two_qubit_static(p, N, frame);
    m.h_drive = (p.Omega_R_of(0) / pulse->Omega_R0) * two_qubit_drive(0, N, frame) +
                (p.Omega_R_of(1) / pulse->Omega_R0) * two_qubit_drive(1, N, frame);
    m.pulse = pulse;
    return m;
}

struct SteadyStateClosedForm {
    // basis {|1,0>, |0,0>, |0,1>} (qubit, photons) in the dressed eigenbasis
    double rho_11, rho_22, rho_33, rho_13;
    double sigma_z;
};

// Weak-coupling, weak-damping steady state of the dressed qubit and oscillator.
inline SteadyStateClosedForm steady_state_closed_form(const SystemParams& p) {
    const double dr = p.Delta_R(), g = p.g, gq = p.gamma_q, gh = p.gamma_h;
    if (dr == 0) throw SingularDetuningError("closed-form steady state needs Delta_R != 0");
    if (g == 0) return {0.5, 0.5, 0.0, 0.0, 0.0};
    if (std::abs(g) > 0.1 * std::abs(dr) || gq > 0.02 * g || gh > 0.02 * g)
        warn("closed-form steady state used outside g << |Delta_R|, gamma << g");
    if (!(gq > 0 && gh > 0)) throw ArgumentError("closed-form steady state needs positive damping rates");
    const double gt = 16 * gq * gh / (5 * gq + 4 * gh);
    const double x = g * g / (dr * dr);
    const double sz = -2 * (gq + 4 * gh) / gt * x;
    SteadyStateClosedForm r;
    r.rho_11 = 0.5 - (gq + 4 * gh) / gt * x;
    r.rho_22 = 0.5 + (4 * gh - gq) / gt * x;
    r.rho_33 = 2 * gq / gt * x;
    r.rho_13 = g / (2 * dr);
    r.sigma_z = sz;
    return r;
}

}  // namespace qubus
