#include <qubus/spectral.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"

using namespace qubus;

namespace {

std::vector<double> sampled(double t_cut, std::size_t M, const std::function<double(double)>& f) {
    std::vector<double> c(M + 1);
    for (std::size_t k = 0; k <= M; ++k) c[k] = f(t_cut * k / M);
    return c;
}

Spectrum synthetic(std::vector<double> values, double step = 1.0) {
    Spectrum s;
    s.t_cut = 2 * std::numbers::pi / step;
    s.dt = 0.1;
    for (std::size_t j = 0; j < values.size(); ++j) s.omegas.push_back(step * j);
    s.values = std::move(values);
    return s;
}

}  // namespace

TEST(SpectralDensity, DampedCosineIsLorentzian) {
    const double w0 = 1.0, gamma = 0.02, t_cut = 3000;
    const auto c = sampled(t_cut, 60000, [&](double t) { return std::cos(w0 * t) * std::exp(-0.5 * gamma * t); });
    const Spectrum s = spectral_density(c, t_cut);
    EXPECT_LE(s.step(), s.resolution() / 4 + 1e-15);
    const Peak p = find_peak(s, 0.9, 1.1);
    EXPECT_NEAR(p.omega, w0, s.resolution());
    EXPECT_NEAR(p.fwhm, gamma, 0.05 * gamma);
    // analytic one-sided transform at resonance: 2 * (gamma/2) / (gamma/2)^2 / 2 = 2 / gamma
    EXPECT_NEAR(p.height, 2 / gamma, 0.01 * 2 / gamma);
}

TEST(SpectralDensity, ZeroCorrelatorGivesZeroSpectrum) {
    const std::vector<double> c(1001, 0.0);
    const Spectrum s = spectral_density(c, 100);
    for (double v : s.values) EXPECT_EQ(v, 0.0);
    EXPECT_THROW(find_peak(s, 0.5, 1.5), NoPeakError);
}

TEST(SpectralDensity, ParsevalSum) {
    const double t_cut = 500;
    const auto c = sampled(t_cut, 20000, [](double t) { return 3 * std::cos(1.3 * t) * std::exp(-0.01 * t) + 0.2; });
    const Spectrum s = spectral_density(c, t_cut);
    EXPECT_NEAR(integrated_power(s), c[0], 0.02 * c[0]);
    EXPECT_NEAR(integrated_power(s), c[0], 1e-9);  // exact for the trapezoid sum
}

TEST(SpectralDensity, RejectsDegenerateInput) {
    const std::vector<double> one{1.0};
    EXPECT_THROW(spectral_density(one, 1.0), ArgumentError);
    const std::vector<double> two{1.0, 0.5};
    EXPECT_THROW(spectral_density(two, 0.0), ArgumentError);
}

TEST(SpectralDensity, CsvHeader) {
    const Spectrum s = synthetic({0, 1, 0});
    std::ostringstream os;
    s.write_csv(os);
    EXPECT_EQ(os.str().substr(0, 10), "omega,S_x\n");
}

TEST(FindPeak, LorentzianBetweenBins) {
    std::vector<double> v;
    for (int j = 0; j < 41; ++j) v.push_back(1 / (1 + std::pow((j - 20.5) / 3.0, 2)));
    const Peak p = find_peak(synthetic(v), 0, 40);
    EXPECT_LT(std::abs(p.omega - 20.5), 0.1);
    EXPECT_NEAR(p.fwhm, 6.0, 0.3);
}

TEST(FindPeak, SingleNonzeroBin) {
    std::vector<double> v(21, 0.0);
    v[7] = 2.5;
    const Peak p = find_peak(synthetic(v, 0.5), 0, 10);
    EXPECT_EQ(p.omega, 3.5);
    EXPECT_EQ(p.height, 2.5);
}

TEST(FindPeak, WindowSelectsLocalMaximum) {
    std::vector<double> v;
    for (int j = 0; j < 101; ++j)
        v.push_back(2 / (1 + std::pow((j - 30.0) / 2.0, 2)) + 1 / (1 + std::pow((j - 70.0) / 2.0, 2)));
    EXPECT_NEAR(find_peak(synthetic(v), 0, 100).omega, 30.0, 0.05);
    EXPECT_NEAR(find_peak(synthetic(v), 55, 85).omega, 70.0, 0.05);
    EXPECT_THROW(find_peak(synthetic(v), 50, 200), ArgumentError);
}

TEST(SpectralDensity, DampedOscillatorEndToEnd) {
    const int N = 8;
    const SubsystemLayout L({N});
    Model m;
    m.h_static = Operator(L, ops::number(N));
    m.lindblads.ops.push_back({"h-", Operator(L, std::sqrt(1e-3) * ops::destroy(N)), 1e-3});
    const double t_cut = 2e4;
    const std::size_t M = 60000;
    const auto grid = linspace(0, t_cut, M + 1);
    const auto c = regression_correlator(m, DensityMatrix::pure(L, ops::basis(N, 0)), grid);
    const Spectrum s = spectral_density(c, t_cut);
    EXPECT_NEAR(find_peak(s, 0.9, 1.1).omega, 1.0, s.resolution());
}

TEST(Readout, UncoupledOscillatorPeaksAtItsFrequency) {
    SystemParams p = presets::readout_dressed();
    p.g = 0;
    ReadoutOptions o;
    o.t_cut = 2.5e4;
    const ReadoutResult r = readout_experiment(p, QubitInit::excited, ModelKind::dressed, o);
    EXPECT_NEAR(r.peak.omega, 1.0, r.bin);
    EXPECT_EQ(r.predicted_shift, 0.0);
    EXPECT_EQ(r.truncation, 4);
    p.g = 0;
    EXPECT_THROW(readout_experiment(p, QubitInit::excited, ModelKind::dressed), ArgumentError);
}

TEST(Readout, UncoupledLinewidth) {
    SystemParams p = presets::readout_dressed();
    p.g = 0;
    p.gamma_h = 2e-3;
    ReadoutOptions o;
    o.t_cut = 2e4;  // resolution 3e-4, well below the linewidth
    const ReadoutResult r = readout_experiment(p, QubitInit::ground, ModelKind::dressed, o);
    EXPECT_NEAR(r.peak.fwhm, p.gamma_h, 0.2 * p.gamma_h);
}

TEST(Readout, ShiftSignFollowsQubitState) {
    // stronger coupling and a shorter window keep this test fast
    SystemParams p = presets::readout_dressed();
    p.g = 0.01;
    p.gamma_q = p.gamma_h = 2e-4;
    ReadoutOptions o;
    o.t_cut = 4e4;
    const ReadoutResult e = readout_experiment(p, QubitInit::excited, ModelKind::dressed, o);
    const ReadoutResult g = readout_experiment(p, QubitInit::ground, ModelKind::dressed, o);
    EXPECT_NEAR(e.predicted_shift, 2e-3, 1e-15);
    EXPECT_NEAR(e.peak.omega - 1.0, 2e-3, 2 * e.bin);
    EXPECT_NEAR(g.peak.omega - 1.0, -2e-3, 2 * g.bin);
    EXPECT_NEAR(e.peak.omega - 1.0, -(g.peak.omega - 1.0), e.bin);
    EXPECT_GT(e.rcond, 1e-11);
}

TEST(Readout, PolarizationTrajectoryIsPhysical) {
    SystemParams p = presets::readout_dressed();
    p.gamma_q = p.gamma_h = 1e-3;
    const auto grid = linspace(0, 2000, 21);
    const Trajectory tr = readout_polarization(p, QubitInit::excited, ModelKind::dressed, grid);
    EXPECT_NEAR(tr["sx"][0], 1.0, 1e-12);  // dressed excited state is +x
    EXPECT_NEAR(tr["sz"][0], 0.0, 1e-12);
    EXPECT_LT(tr["sx"].back(), 0.5);  // relaxes towards the mixed state
    EXPECT_LT(tr.max_trace_drift(), 1e-10);
    EXPECT_GT(tr.min_eigenvalue(), -1e-8);
}
