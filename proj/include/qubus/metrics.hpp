#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "diagnostics.hpp"
#include "dynamics.hpp"
#include "errors.hpp"
#include "hilbert.hpp"
#include "liouville.hpp"
#include "models.hpp"
#include "spectral.hpp"

namespace qubus {

// Two disjoint groups of subsystems; anything outside both is traced out first.
struct Bipartition {
    std::vector<int> a, b;
};

inline double log_negativity(const Operator& rho, const Bipartition& bp) {
    const SubsystemLayout& L = rho.layout();
    if (bp.a.empty() || bp.b.empty()) throw ArgumentError("bipartition needs two nonempty parts");
    std::vector<int> keep;
    for (int s : bp.a) {
        L.check_slot(s);
        keep.push_back(s);
    }
    for (int s : bp.b) {
        L.check_slot(s);
        if (std::find(bp.a.begin(), bp.a.end(), s) != bp.a.end()) throw ArgumentError("bipartition parts overlap");
        keep.push_back(s);
    }
    std::sort(keep.begin(), keep.end());
    if (std::adjacent_find(keep.begin(), keep.end()) != keep.end()) throw ArgumentError("repeated subsystem");
    Operator r = static_cast<int>(keep.size()) == L.size() ? rho : partial_trace(rho, keep);
    for (int s : bp.a) {
        const int pos = static_cast<int>(std::lower_bound(keep.begin(), keep.end(), s) - keep.begin());
        r = partial_transpose(r, pos);
    }
    const double e = std::log2(trace_norm(r));
    if (e < 0 && e > -1e-12) return 0.0;
    return e;
}
inline double log_negativity(const DensityMatrix& rho, const Bipartition& bp) { return log_negativity(rho.op(), bp); }

// Two-qubit unitary in the logical basis |q1 q2>, index 2 q1 + q2.
struct GateTarget {
    Matrix matrix;
    double time = 0;
    std::string frame = "dressed-rotating";
};

// sqrt(-+ i SWAP); sign > 0 is the upper sign (positive Rabi detuning).
inline GateTarget sqrt_iswap_target(int sign) {
    if (sign == 0) throw ArgumentError("sqrt-iSWAP sign must be nonzero");
    const double s = std::numbers::sqrt2 / 2;
    const cplx off = sign > 0 ? cplx(0, -s) : cplx(0, s);
    Matrix u = Matrix::Identity(4, 4);
    u(1, 1) = u(2, 2) = s;
    u(1, 2) = u(2, 1) = off;
    return {u, 0.0};
}

namespace detail {

// exp(-i phi sigma_z^L) on each qubit times an exchange rotation by theta in the single-excitation block.
inline Matrix dispersive_gate(double phi, double theta) {
    Matrix u = Matrix::Zero(4, 4);
    u(0, 0) = std::polar(1.0, 2 * phi);  // |00>, both sigma_z^L = -1
    u(3, 3) = std::polar(1.0, -2 * phi);
    u(1, 1) = u(2, 2) = std::cos(theta);
    u(1, 2) = u(2, 1) = cplx(0, -std::sin(theta));
    return u;
}

inline void require_symmetric(const SystemParams& p) {
    if (!p.symmetric()) throw UnsupportedConfigurationError("analytic gate needs identical qubit parameters");
}

}  // namespace detail

// Dispersive two-qubit evolution restricted to the oscillator vacuum: Stark-shifted local
// phases times the exchange rotation by g^2 t / Delta_R.
inline GateTarget analytic_evolution(const SystemParams& p, double t) {
    detail::require_symmetric(p);
    const double dr = p.Delta_R();
    if (p.g == 0) return {detail::dispersive_gate(0.5 * p.Omega_R * t, 0.0), t};
    if (dr == 0) throw SingularDetuningError("analytic gate needs Delta_R != 0");
    if (std::abs(dr) < 10 * p.g) warn("analytic gate outside the dispersive regime (|Delta_R| < 10 g)");
    const double chi = p.g * p.g / dr;
    return {detail::dispersive_gate(0.5 * (p.Omega_R + chi) * t, chi * t), t};
}

// Target for a pulsed gate: local phases integrated adiabatically over the pulse window,
// exchange fixed at the quarter turn of sqrt-iSWAP.
inline GateTarget pulsed_target(const SystemParams& p, const Pulse& pulse) {
    detail::require_symmetric(p);
    validate(pulse);
    const double dr = p.Delta_R();
    if (dr == 0) throw SingularDetuningError("pulsed gate needs Delta_R != 0");
    const auto [a, b] = pulse_window(pulse);
    const double scale = p.Omega_R / pulse.Omega_R0;
    auto rate = [&](double t) {
        const double om = scale * pulse_amplitude(pulse, t);
        const double det = om - p.omega_h;
        return 0.5 * (om + (det != 0 ? p.g * p.g / det : 0.0));
    };
    const double theta = (dr > 0 ? 1 : -1) * std::numbers::pi / 4;
    if (pulse.t0 == 0) {
        const double om = p.Omega_R, det = om - p.omega_h;
        return {detail::dispersive_gate(0.5 * (om + p.g * p.g / det) * (b - a), theta), b};
    }
    // Simpson on a grid fine enough for the tanh edges
    const double width = pulse.t0 > 0 ? pulse.t0 : (b - a);
    const int n = 2 * static_cast<int>(std::ceil(std::max(2000.0, 400 * (b - a) / width) / 2));
    const double h = (b - a) / n;
    double phi = rate(a) + rate(b);
    for (int k = 1; k < n; ++k) phi += (k % 2 ? 4 : 2) * rate(a + k * h);
    phi *= h / 3;
    return {detail::dispersive_gate(phi, theta), b};
}

// Pure two-qubit product states used for the fidelity average.
struct FidelityEnsemble {
    std::vector<Vector> states;

    // +-x, +-y, +-z on each qubit (logical frame).
    static FidelityEnsemble axis_products() {
        const double s = std::numbers::sqrt2 / 2;
        const std::array<Vector, 6> one = [&] {
            std::array<Vector, 6> v;
            for (auto& x : v) x.resize(2);
            v[0] << s, s;
            v[1] << s, -s;
            v[2] << cplx(s), cplx(0, s);
            v[3] << cplx(s), cplx(0, -s);
            v[4] << 1, 0;
            v[5] << 0, 1;
            return v;
        }();
        FidelityEnsemble e;
        for (const auto& a : one)
            for (const auto& b : one) e.states.push_back(ops::kron(a, b));
        return e;
    }

    // Seeded product-Haar sample.
    static FidelityEnsemble haar_products(int n, std::uint64_t seed) {
        if (n < 1) throw ArgumentError("ensemble size must be positive");
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> nd;
        auto qubit = [&] {
            Vector v(2);
            for (int k = 0; k < 2; ++k) v(k) = cplx(nd(rng), nd(rng));
            return Vector(v / v.norm());
        };
        FidelityEnsemble e;
        for (int k = 0; k < n; ++k) {
            const Vector a = qubit();
            e.states.push_back(ops::kron(a, qubit()));
        }
        return e;
    }
};

// Reduced two-qubit map rho_q -> Tr_h[ E(rho_q (x) rho_h) ] from the propagated operator basis.
class TwoQubitChannel {
public:
    explicit TwoQubitChannel(std::array<Matrix, 16> out) : out_(std::move(out)) {}

    Matrix apply(const Matrix& rho) const {
        Matrix r = Matrix::Zero(4, 4);
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k)
                if (rho(j, k) != cplx(0)) r += rho(j, k) * out_[j * 4 + k];
        return r;
    }
    const Matrix& image(int j, int k) const { return out_[j * 4 + k]; }

private:
    std::array<Matrix, 16> out_;
};

struct ChannelOptions {
    PropagatorOptions propagator;
    // K = 2 bands lose positivity at finite n_th at the 1e-5 level; K = 4 does not
    std::optional<CoherenceBand> band{CoherenceBand{4, CoherenceBand::Parity::all}};
};

// Propagates |j><k| (x) rho_h for j <= k from t0 to t1; the rest follows from Hermiticity.
inline TwoQubitChannel gate_channel(const Model& m, const Matrix& rho_h, double t0, double t1,
                                    const ChannelOptions& opts = {}) {
    const SubsystemLayout& L = m.layout();
    if (L.size() != 3 || L.dim(0) != 2 || L.dim(1) != 2) throw LayoutError("gate channel needs a two-qubit model");
    if (rho_h.rows() != L.dim(2)) throw LayoutError("oscillator state does not match the model");
    const Propagator prop(m, choose_space(m, opts.band), opts.propagator);
    const LiouvilleSpace& sp = prop.space();
    Matrix block(sp.size(), 10);
    std::array<std::pair<int, int>, 10> pairs;
    int c = 0;
    for (int j = 0; j < 4; ++j)
        for (int k = j; k < 4; ++k) {
            Matrix e = Matrix::Zero(4, 4);
            e(j, k) = 1;
            block.col(c) = sp.pack(ops::kron(e, rho_h));
            pairs[c++] = {j, k};
        }
    const Matrix out = prop.propagate(block, t0, t1);
    std::array<Matrix, 16> img;
    for (int i = 0; i < 10; ++i) {
        const auto [j, k] = pairs[i];
        img[j * 4 + k] = partial_trace(Operator(L, sp.unpack(out.col(i))), {0, 1}).matrix();
        if (j != k) img[k * 4 + j] = img[j * 4 + k].adjoint();
    }
    return TwoQubitChannel(std::move(img));
}

enum class PhaseMode { fixed, local_z };

struct FidelityResult {
    double fidelity = 0;
    double phase1 = 0, phase2 = 0;  // local z phases applied to the target (local_z mode)
    double min_state_fidelity = 1;
    // state checks over the ensemble outputs
    double max_trace_drift = 0, max_hermiticity_error = 0, min_eigenvalue = 1;
};

// Mean <phi_t| E(|phi><phi|) |phi_t> with |phi_t> = Z U |phi>, Z = diag(1, e^{i b}, e^{i a}, e^{i (a+b)}).
inline FidelityResult gate_fidelity(const TwoQubitChannel& ch, const GateTarget& target,
                                    const FidelityEnsemble& ens, PhaseMode mode = PhaseMode::fixed) {
    if (ens.states.empty()) throw ArgumentError("empty fidelity ensemble");
    FidelityResult r;
    Matrix acc = Matrix::Zero(4, 4);  // mean of conj(v_a) rho_ab v_b
    std::vector<Matrix> terms;
    terms.reserve(ens.states.size());
    for (const Vector& phi : ens.states) {
        if (phi.size() != 4) throw LayoutError("ensemble state is not a two-qubit vector");
        const Matrix out = ch.apply(phi * phi.adjoint());
        r.max_trace_drift = std::max(r.max_trace_drift, std::abs(out.trace() - 1.0));
        r.max_hermiticity_error = std::max(r.max_hermiticity_error, (out - out.adjoint()).cwiseAbs().maxCoeff());
        r.min_eigenvalue = std::min(r.min_eigenvalue, min_eigenvalue(0.5 * (out + out.adjoint())));
        const Vector v = target.matrix * phi;
        Matrix t = v.conjugate().asDiagonal() * out * v.asDiagonal();
        terms.push_back(t);
        acc += t;
    }
    acc /= static_cast<double>(ens.states.size());
    auto value = [](const Matrix& m, double a, double b) {
        const double th[4] = {0, b, a, a + b};
        double s = 0;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) s += (m(i, j) * std::polar(1.0, th[j] - th[i])).real();
        return s;
    };
    double a = 0, b = 0;
    if (mode == PhaseMode::local_z) {
        const int n = 72;
        double best = -1;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double x = 2 * std::numbers::pi * i / n, y = 2 * std::numbers::pi * j / n;
                if (const double f = value(acc, x, y); f > best) {
                    best = f;
                    a = x;
                    b = y;
                }
            }
        for (double step = 2 * std::numbers::pi / n; step > 1e-12;) {
            bool moved = false;
            for (auto [da, db] : {std::pair{step, 0.0}, {-step, 0.0}, {0.0, step}, {0.0, -step}})
                if (const double f = value(acc, a + da, b + db); f > best) {
                    best = f;
                    a += da;
                    b += db;
                    moved = true;
                }
            if (!moved) step /= 2;
        }
        a = std::remainder(a, 2 * std::numbers::pi);
        b = std::remainder(b, 2 * std::numbers::pi);
    }
    r.phase1 = a;
    r.phase2 = b;
    r.fidelity = value(acc, a, b);
    for (const auto& t : terms) r.min_state_fidelity = std::min(r.min_state_fidelity, value(t, a, b));
    return r;
}

struct GateRunOptions {
    int truncation = 0;  // 0 picks the thermal rule
    PhaseMode mode = PhaseMode::fixed;
    ChannelOptions channel;
};

struct GateRunResult {
    FidelityResult fidelity;
    GateTarget target;
    int truncation = 0;
    Method method = Method::automatic;
};

// Constant drive for t_int when `pulse` is empty, otherwise the pulsed window; target chosen to match.
inline GateRunResult run_gate(const SystemParams& p, const std::optional<Pulse>& pulse, const FidelityEnsemble& ens,
                              const GateRunOptions& opts = {}) {
    validate(p);
    GateRunResult r;
    r.truncation = opts.truncation > 0 ? opts.truncation : choose_truncation(p.n_th_h);
    const Model m = gate_model(p, r.truncation, pulse);
    const Matrix rho_h = thermal_state_from_occupation(p.n_th_h, r.truncation, p.omega_h).matrix();
    double t0 = 0, t1 = 0;
    if (pulse) {
        r.target = pulsed_target(p, *pulse);
        std::tie(t0, t1) = pulse_window(*pulse);
    } else {
        r.target = analytic_evolution(p, interaction_time(p));
        t1 = r.target.time;
    }
    const TwoQubitChannel ch = gate_channel(m, rho_h, t0, t1, opts.channel);
    r.fidelity = gate_fidelity(ch, r.target, ens, opts.mode);
    r.method = Propagator(m, choose_space(m, opts.channel.band), opts.channel.propagator).method();
    return r;
}

// Noiseless propagator between oscillator-vacuum two-qubit states, <i,0| U(t) |j,0>.
inline Matrix vacuum_propagator(const SystemParams& p, int N, double t) {
    const Operator h = two_qubit_hamiltonian(p, N, Frame::logical);
    Eigen::SelfAdjointEigenSolver<Matrix> es(h.matrix());
    const Vector ph = (-I * t * es.eigenvalues().cast<cplx>()).array().exp();
    const Matrix u = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
    Matrix r(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) r(i, j) = u(i * N, j * N);
    return r;
}

// Entrywise distance after removing the best global phase.
inline double entrywise_error(const Matrix& a, const Matrix& b) {
    const cplx ov = (b.adjoint() * a).trace();
    const cplx ph = std::abs(ov) > 0 ? ov / std::abs(ov) : cplx(1);
    return (a - ph * b).cwiseAbs().maxCoeff();
}

struct EntanglementOptions {
    int truncation = 0;
    int points = 801;
    double t_end = 0;  // 0 means two interaction times
    std::optional<CoherenceBand> band{CoherenceBand{4, CoherenceBand::Parity::all}};
    PropagatorOptions propagator;
};

inline const std::vector<std::pair<std::string, Bipartition>>& entanglement_partitions() {
    static const std::vector<std::pair<std::string, Bipartition>> p{
        {"EN_h_q1q2", {{2}, {0, 1}}}, {"EN_h_q1", {{2}, {0}}}, {"EN_h_q2", {{2}, {1}}}, {"EN_q1_q2", {{0}, {1}}}};
    return p;
}

// Logical |10>.
inline Matrix logical_product(int q1, int q2) {
    const Vector v = ops::basis(4, 2 * q1 + q2);
    return v * v.adjoint();
}

// Constant-drive two-qubit evolution from rho_q (x) thermal oscillator, with negativities per partition.
inline Trajectory entanglement_experiment(const SystemParams& p, const Matrix& rho_q = logical_product(1, 0),
                                          const EntanglementOptions& opts = {}) {
    validate(p);
    if (rho_q.rows() != 4 || rho_q.cols() != 4) throw LayoutError("two-qubit initial state must be 4x4");
    const int N = opts.truncation > 0 ? opts.truncation : choose_truncation(p.n_th_h);
    const Model m = gate_model(p, N);
    const auto L = m.layout();
    const DensityMatrix rho0(
        Operator(L, ops::kron(rho_q, thermal_state_from_occupation(p.n_th_h, N, p.omega_h).matrix())));
    const double t_end = opts.t_end > 0 ? opts.t_end : 2 * interaction_time(p);
    EvolveOptions o;
    o.propagator = opts.propagator;
    o.band = opts.band;
    const Operator sx1 = to_frame(embed(ops::sigma_x(), 0, L), 2, ModelKind::dressed, Frame::logical);
    const Operator sx2 = to_frame(embed(ops::sigma_x(), 1, L), 2, ModelKind::dressed, Frame::logical);
    o.observables = {{"sx1", sx1}, {"sx2", sx2}, {"sx1sx2", sx1 * sx2}, {"n", embed(ops::number(N), 2, L)}};
    for (const auto& [name, bp] : entanglement_partitions())
        o.probes.push_back({name, [bp](const Operator& r) {
                                return log_negativity(Operator(r.layout(), 0.5 * (r.matrix() + r.matrix().adjoint())), bp);
                            }});
    return evolve(rho0, m, linspace(0, t_end, opts.points), o);
}

// Dominant oscillation frequency of a uniformly sampled series within [lo, hi], mean removed.
inline double dominant_frequency(std::span<const double> x, double dt, double lo, double hi) {
    if (x.size() < 4) throw ArgumentError("series too short for a frequency estimate");
    double mean = 0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    std::vector<double> y(x.begin(), x.end());
    for (double& v : y) v -= mean;
    const Spectrum s = spectral_density(y, dt * static_cast<double>(y.size() - 1), 16);
    return find_peak(s, lo, std::min(hi, s.omegas.back())).omega;
}

struct BellOptions {
    bool split_parity = true;  // ideal X on qubit 1 after the Hadamards
    int truncation = 0;
};

struct BellResult {
    Matrix rho;  // two-qubit state, logical frame
    double log_negativity = 0;
    int truncation = 0;
};

// Bare ground states, ideal Hadamards (to logical |00>), optional parity split, then the
// simulated constant-drive sqrt-iSWAP window.
inline BellResult bell_circuit(const SystemParams& p, const BellOptions& opts = {}) {
    validate(p);
    Matrix h(2, 2);
    h << 1, 1, 1, -1;
    h /= std::numbers::sqrt2;
    // bare |down> in the dressed logical frame
    const Vector down = logical_basis(ModelKind::dressed).adjoint() * ops::basis(2, 1);
    const Matrix x = ops::sigma_x();
    const Matrix hq = logical_basis(ModelKind::dressed).adjoint() * h * logical_basis(ModelKind::dressed);
    Vector q1 = hq * down, q2 = hq * down;
    if (opts.split_parity) q1 = x * q1;
    const Vector psi = ops::kron(q1, q2);

    BellResult r;
    r.truncation = opts.truncation > 0 ? opts.truncation : choose_truncation(p.n_th_h);
    const Model m = gate_model(p, r.truncation);
    const Matrix rho_h = thermal_state_from_occupation(p.n_th_h, r.truncation, p.omega_h).matrix();
    const TwoQubitChannel ch = gate_channel(m, rho_h, 0, interaction_time(p));
    r.rho = ch.apply(psi * psi.adjoint());
    r.log_negativity = log_negativity(Operator(SubsystemLayout({2, 2}), 0.5 * (r.rho + r.rho.adjoint())),
                                      Bipartition{{0}, {1}});
    return r;
}

}  // namespace qubus
