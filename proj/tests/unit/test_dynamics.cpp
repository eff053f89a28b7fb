#include <qubus/dynamics.hpp>

#include <gtest/gtest.h>

#include <chrono>
#include <sstream>

#include "support.hpp"

using namespace qubus;
using qubus::fixtures::max_abs;

namespace {

// Qubit with splitting omega and amplitude damping at rate gamma.
Model damped_qubit(double omega, double gamma) {
    const SubsystemLayout L({2});
    Model m;
    m.h_static = Operator(L, 0.5 * omega * ops::sigma_z());
    m.lindblads.ops.push_back({"q-", Operator(L, std::sqrt(gamma) * ops::sigma_minus()), gamma});
    return m;
}

// Oscillator at frequency omega with thermal damping.
Model thermal_oscillator(double omega, double gamma, double n, int N) {
    const SubsystemLayout L({N});
    Model m;
    m.h_static = Operator(L, omega * ops::number(N));
    m.lindblads.ops.push_back({"h-", Operator(L, std::sqrt(gamma * (n + 1)) * ops::destroy(N)), gamma * (n + 1)});
    if (n > 0) m.lindblads.ops.push_back({"h+", Operator(L, std::sqrt(gamma * n) * ops::create(N)), gamma * n});
    return m;
}

Matrix final_state(const Model& m, const DensityMatrix& rho0, double t, Method method) {
    EvolveOptions o;
    o.propagator.method = method;
    o.store_states = true;
    const auto g = linspace(0, t, 2);
    return evolve(rho0, m, g, o).states.back().matrix();
}

}  // namespace

TEST(Evolve, AmplitudeDampingDecay) {
    const double gamma = 0.05;
    const Model m = damped_qubit(1.3, gamma);
    const Vector plus = (ops::basis(2, 0) + ops::basis(2, 1)) / std::sqrt(2.0);
    const DensityMatrix rho0 = DensityMatrix::pure(m.layout(), plus);
    EvolveOptions o;
    o.observables.push_back({"p_excited", Operator(m.layout(), ops::basis(2, 0) * ops::basis(2, 0).adjoint())});
    o.store_states = true;
    const auto grid = linspace(0, 40, 81);
    const Trajectory tr = evolve(rho0, m, grid, o);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_NEAR(tr["p_excited"][i], 0.5 * std::exp(-gamma * grid[i]), 1e-12);
        EXPECT_NEAR(std::abs(tr.states[i].matrix()(0, 1)), 0.5 * std::exp(-0.5 * gamma * grid[i]), 1e-12);
    }
    EXPECT_LT(tr.max_trace_drift(), 1e-12);
    EXPECT_EQ(tr.method, Method::expm_eig);
}

TEST(Evolve, UnitaryLimitConservesPurityAndEnergy) {
    SystemParams p = presets::readout_dressed();
    p.gamma_q = p.gamma_h = 0;
    p.g = 0.05;
    const Model m = readout_model(p, 6, ModelKind::dressed);
    std::mt19937_64 rng(5);
    const DensityMatrix rho0 = DensityMatrix::pure(m.layout(), fixtures::random_vector(12, rng));
    for (Method method : {Method::expm_eig, Method::expm_pade, Method::rk4}) {
        EvolveOptions o;
        o.propagator.method = method;
        o.observables.push_back({"energy", m.h_static});
        o.probes.push_back({"purity", [](const Operator& r) { return (r * r).trace().real(); }});
        const Trajectory tr = evolve(rho0, m, linspace(0, 30, 31), o);
        for (double e : tr["energy"]) EXPECT_NEAR(e, tr["energy"][0], 1e-8) << to_string(method);
        for (double x : tr["purity"]) EXPECT_NEAR(x, 1.0, 1e-8) << to_string(method);
    }
}

TEST(Evolve, UnitaryMatchesExactPropagator) {
    std::mt19937_64 rng(6);
    const SubsystemLayout L({2, 3});
    Model m;
    m.h_static = Operator(L, fixtures::random_hermitian(6, rng));
    const Matrix rho = fixtures::random_density(6, rng);
    const double t = 2.7;
    Eigen::SelfAdjointEigenSolver<Matrix> es(m.h_static.matrix());
    const Vector ph = (-I * t * es.eigenvalues().cast<cplx>()).array().exp();
    const Matrix u = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
    const Matrix expect = u * rho * u.adjoint();
    for (Method method : {Method::expm_eig, Method::expm_pade})
        EXPECT_LT(max_abs(final_state(m, DensityMatrix(Operator(L, rho)), t, method) - expect), 1e-11) << to_string(method);
    EXPECT_LT(max_abs(final_state(m, DensityMatrix(Operator(L, rho)), t, Method::rk4) - expect), 1e-6);
}

TEST(Evolve, MethodsAgreeOnReadoutModel) {
    SystemParams p = presets::readout_dressed();
    p.gamma_q = p.gamma_h = 2e-3;
    p.n_th_h = 0.3;
    const Model m = readout_model(p, 6, ModelKind::dressed);
    std::mt19937_64 rng(7);
    const DensityMatrix rho0(Operator(m.layout(), fixtures::random_density(12, rng)));
    const Matrix a = final_state(m, rho0, 120, Method::expm_eig);
    const Matrix b = final_state(m, rho0, 120, Method::expm_pade);
    const Matrix c = final_state(m, rho0, 120, Method::rk4);
    EXPECT_LT(max_abs(a - b), 1e-6);
    EXPECT_LT(max_abs(a - c), 1e-6);
}

TEST(Evolve, PulsedGateMatchesMidpointExponentials) {
    SystemParams p = presets::gate();
    p.g = 0.05;
    p.gamma_q = p.gamma_h = 1e-3;
    const Pulse pulse{p.Omega_R, 3.0, 12.0};
    const Model m = gate_model(p, 2, pulse);
    const LiouvilleSpace sp = LiouvilleSpace::full(m.dim());
    const Propagator prop(m, sp);
    ASSERT_EQ(prop.method(), Method::rk4);
    const auto [t0, t1] = pulse_window(pulse);
    std::mt19937_64 rng(8);
    const Matrix rho = fixtures::random_density(m.dim(), rng);
    const Vector out = prop.propagate(sp.pack(rho), t0, t1);

    // independent reference: exponential midpoint rule with Richardson extrapolation
    const Matrix g0(generator(m, sp)), g1(commutator_generator(m.h_drive, sp));
    auto midpoint = [&](int n) {
        const double h = (t1 - t0) / n;
        Vector v = sp.pack(rho);
        for (int k = 0; k < n; ++k) {
            const double f = pulse_amplitude(pulse, t0 + (k + 0.5) * h);
            v = (cplx(h) * (g0 + f * g1)).exp() * v;
        }
        return v;
    };
    const Vector ref = (4.0 * midpoint(1600) - midpoint(800)) / 3.0;
    EXPECT_LT(max_abs(out - ref), 1e-7);
}

TEST(Evolve, TimeDependentModelRejectsStaticMethods) {
    const Model m = gate_model(presets::gate(), 2, Pulse{1.05, 1.0, 5.0});
    PropagatorOptions o;
    o.method = Method::expm_eig;
    EXPECT_THROW(Propagator(m, LiouvilleSpace::full(m.dim()), o), ArgumentError);
}

TEST(Evolve, RejectsNonIncreasingGrid) {
    const Model m = damped_qubit(1, 0.1);
    const std::vector<double> grid{0, 1, 1};
    EXPECT_THROW(evolve(DensityMatrix::pure(m.layout(), ops::basis(2, 0)), m, grid), ArgumentError);
}

TEST(Evolve, BandMatchesFullOnCoherenceSector) {
    // without qubit damping the even coherence orders form a closed sector
    SystemParams p = presets::gate();
    p.g = 0.02;
    p.gamma_q = 0;
    p.gamma_h = 1e-3;
    const Model m = gate_model(p, 3, std::nullopt, Frame::logical);
    const LiouvilleSpace full = LiouvilleSpace::full(m.dim());
    const LiouvilleSpace band = LiouvilleSpace::band(m.excitations, {100, CoherenceBand::Parity::even});
    std::mt19937_64 rng(9);
    Matrix rho = fixtures::random_density(m.dim(), rng);
    for (int a = 0; a < m.dim(); ++a)
        for (int b = 0; b < m.dim(); ++b)
            if ((m.excitations[a] - m.excitations[b]) % 2) rho(a, b) = 0;
    const Vector vf = Propagator(m, full).propagate(full.pack(rho), 0, 50);
    const Vector vb = Propagator(m, band).propagate(band.pack(rho), 0, 50);
    EXPECT_LT(max_abs(full.unpack(vf) - band.unpack(vb)), 1e-10);
}

TEST(SteadyState, BareGroundStateAtZeroTemperature) {
    SystemParams p = presets::readout_bare();
    p.g = 0;
    p.gamma_q = p.gamma_h = 1e-3;
    const Model m = readout_model(p, 4, ModelKind::bare);
    const Matrix rho = steady_state(m).matrix();
    Matrix expect = Matrix::Zero(8, 8);
    expect(0, 0) = 1;  // logical |0, n=0>
    EXPECT_LT(max_abs(rho - expect), 1e-10);
}

TEST(SteadyState, DressedUncoupledQubitIsMixed) {
    SystemParams p = presets::readout_dressed();
    p.g = 0;
    p.gamma_q = 1e-8;
    const Model m = readout_model(p, 4, ModelKind::dressed);
    const DensityMatrix rho = steady_state(m);
    const Matrix q = partial_trace(rho, {0}).matrix();
    EXPECT_LT(max_abs(q - 0.5 * ops::identity(2)), 1e-8);
    EXPECT_NEAR(partial_trace(rho, {1}).matrix()(0, 0).real(), 1.0, 1e-10);
}

TEST(SteadyState, ThermalOscillator) {
    const Model m = thermal_oscillator(1.0, 0.1, 0.4, 20);
    const Matrix rho = steady_state(m).matrix();
    EXPECT_LT(max_abs(rho - thermal_state_from_occupation(0.4, 20).matrix()), 1e-7);
}

TEST(SteadyState, IsAFixedPoint) {
    SystemParams p = presets::readout_dressed();
    p.gamma_q = p.gamma_h = 1e-3;
    const Model m = readout_model(p, 5, ModelKind::dressed);
    const DensityMatrix rho = steady_state(m);
    const Matrix d = apply_master_equation(m.h_static, m.lindblads, rho.matrix());
    EXPECT_LT(max_abs(d), 1e-10);
    EXPECT_NEAR(rho.op().trace().real(), 1.0, 1e-12);
}

TEST(SteadyState, UndampedModelIsNotUnique) {
    SystemParams p = presets::readout_dressed();
    p.gamma_q = p.gamma_h = 0;
    EXPECT_THROW(steady_state(readout_model(p, 3, ModelKind::dressed)), NonUniqueSteadyStateError);
}

TEST(Correlator, ThermalDampedOscillator) {
    const double omega = 1.0, gamma = 0.05, n = 0.5;
    const int N = 30;
    const Model m = thermal_oscillator(omega, gamma, n, N);
    const DensityMatrix rho0 = thermal_state_from_occupation(n, N);
    const auto grid = linspace(0, 60, 241);
    const auto c = regression_correlator(m, rho0, grid);
    EXPECT_NEAR(c[0], 2 * n + 1, 1e-9);
    for (std::size_t i = 0; i < grid.size(); ++i)
        EXPECT_NEAR(c[i], (2 * n + 1) * std::cos(omega * grid[i]) * std::exp(-0.5 * gamma * grid[i]), 1e-7);
}

TEST(Correlator, HeisenbergOracle) {
    std::mt19937_64 rng(10);
    const SubsystemLayout L({2, 4});
    Model m;
    m.h_static = Operator(L, fixtures::random_hermitian(8, rng));
    const Matrix rho = fixtures::random_density(8, rng);
    const Matrix x = quadrature(L).matrix();
    Eigen::SelfAdjointEigenSolver<Matrix> es(m.h_static.matrix());
    const auto grid = linspace(0, 5, 11);
    const auto c = regression_correlator(m, DensityMatrix(Operator(L, rho)), grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vector ph = (-I * grid[i] * es.eigenvalues().cast<cplx>()).array().exp();
        const Matrix u = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
        const double expect = (u.adjoint() * x * u * x * rho).trace().real();
        EXPECT_NEAR(c[i], expect, 1e-9);
    }
}

TEST(Correlator, ModesSampleMatchesDirectEvaluation) {
    const Model m = thermal_oscillator(1.0, 0.02, 0.2, 12);
    const LiouvilleSpace sp = LiouvilleSpace::full(12);
    const Propagator prop(m, sp);
    const CorrelatorModes modes = correlator_modes(prop, quadrature(m.layout()), thermal_state_from_occupation(0.2, 12).op());
    const auto s = modes.sample(0.37, 3000);
    for (std::size_t k = 0; k < s.size(); k += 97) EXPECT_NEAR(s[k], modes.value(0.37 * k), 1e-10);
    EXPECT_NEAR(modes.pruned(1e-6).max_frequency(), 1.0, 1e-9);
}

TEST(Correlator, RungeKuttaPathAgreesWithModes) {
    SystemParams p = presets::readout_dressed();
    p.gamma_q = p.gamma_h = 1e-3;
    const Model m = readout_model(p, 6, ModelKind::dressed);
    const DensityMatrix rho0 = DensityMatrix::pure(m.layout(), ops::basis(12, 0));
    const auto grid = linspace(0, 40, 41);
    CorrelatorOptions o;
    const auto a = regression_correlator(m, rho0, grid, o);
    o.propagator.method = Method::rk4;
    const auto b = regression_correlator(m, rho0, grid, o);
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-7);
}

TEST(Trajectory, CsvLayout) {
    const Model m = damped_qubit(1, 0.1);
    EvolveOptions o;
    o.observables.push_back({"sz", m.h_static});
    const Trajectory tr = evolve(DensityMatrix::pure(m.layout(), ops::basis(2, 0)), m, linspace(0, 1, 3), o);
    std::ostringstream os;
    tr.write_csv(os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "t,sz,trace,hermiticity,min_eigenvalue");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 3);
    EXPECT_THROW(tr["nope"], ArgumentError);
}

TEST(Linspace, Endpoints) {
    const auto v = linspace(-1, 1, 5);
    EXPECT_EQ(v.front(), -1);
    EXPECT_EQ(v.back(), 1);
    EXPECT_EQ(v[2], 0);
    EXPECT_THROW(linspace(0, 1, 0), ArgumentError);
}
