#include <qubus/liouville.hpp>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace qubus;
using qubus::fixtures::max_abs;

namespace {

struct RandomSystem {
    Operator h;
    LindbladSet ls;
};

RandomSystem random_system(const SubsystemLayout& L, std::mt19937_64& rng, int n_jumps = 3) {
    const int D = L.total_dim();
    RandomSystem s{Operator(L, fixtures::random_hermitian(D, rng)), {}};
    for (int k = 0; k < n_jumps; ++k)
        s.ls.ops.push_back({"j" + std::to_string(k), Operator(L, 0.3 * fixtures::random_matrix(D, rng)), 1.0});
    return s;
}

Vector vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

}  // namespace

TEST(Liouvillian, DenseMatchesDirectAction) {
    std::mt19937_64 rng(11);
    const SubsystemLayout L({2, 3});
    const auto s = random_system(L, rng);
    const Matrix rho = fixtures::random_density(6, rng);
    const Liouvillian l = liouvillian(s.h, s.ls);
    EXPECT_EQ(l.dim, 36);
    EXPECT_LT(max_abs(l.matrix * vec(rho) - vec(apply_master_equation(s.h, s.ls, rho))), 1e-12);
}

TEST(Liouvillian, SparseMatchesDense) {
    std::mt19937_64 rng(12);
    const SubsystemLayout L({2, 2, 3});
    const auto s = random_system(L, rng);
    const Matrix dense = liouvillian(s.h, s.ls).matrix;
    const Matrix sparse(generator(s.h, s.ls, LiouvilleSpace::full(12)));
    EXPECT_LT(max_abs(dense - sparse), 1e-12);
}

TEST(Liouvillian, DampedOscillatorExample) {
    const double gamma = 0.7;
    const int N = 3;
    LindbladSet ls;
    ls.ops.push_back({"h-", Operator(std::sqrt(gamma) * ops::destroy(N)), gamma});
    const Operator h = Operator::zero(SubsystemLayout({N}));
    const Matrix out = apply_master_equation(h, ls, ops::basis(N, 1) * ops::basis(N, 1).adjoint());
    Matrix expect = Matrix::Zero(N, N);
    expect(0, 0) = gamma;
    expect(1, 1) = -gamma;
    EXPECT_LT(max_abs(out - expect), 1e-15);
    const Matrix l = liouvillian(h, ls).matrix;
    EXPECT_LT(max_abs(l * vec(ops::basis(N, 1) * ops::basis(N, 1).adjoint()) - vec(expect)), 1e-15);
}

TEST(Liouvillian, TracePreservingAndHermiticityPreserving) {
    std::mt19937_64 rng(13);
    const SubsystemLayout L({3, 3});
    const auto s = random_system(L, rng, 2);
    const LiouvilleSpace sp = LiouvilleSpace::full(9);
    const Matrix g(generator(s.h, s.ls, sp));
    EXPECT_LT(max_abs(sp.trace_functional() * g), 1e-12);
    const Matrix rho = fixtures::random_density(9, rng);
    const Matrix d = sp.unpack(g * sp.pack(rho));
    EXPECT_LT(max_abs(d - d.adjoint()), 1e-12);
}

TEST(LiouvilleSpace, PackUnpackAndFunctionals) {
    std::mt19937_64 rng(14);
    const LiouvilleSpace sp = LiouvilleSpace::full(5);
    const Matrix rho = fixtures::random_matrix(5, rng);
    const Matrix obs = fixtures::random_matrix(5, rng);
    EXPECT_EQ(max_abs(sp.unpack(sp.pack(rho)) - rho), 0.0);
    EXPECT_EQ(max_abs(sp.pack(rho) - vec(rho)), 0.0);
    EXPECT_NEAR(std::abs((sp.functional(obs) * sp.pack(rho))(0) - (obs * rho).trace()), 0, 1e-12);
    EXPECT_EQ(sp.index(2, 3), 2 + 3 * 5);
    EXPECT_EQ(sp.element(2 + 3 * 5), (std::pair<int, int>{2, 3}));
}

TEST(LiouvilleSpace, BandMembership) {
    const std::vector<int> e = excitation_labels(qubit_oscillator_layout(1, 4));
    const LiouvilleSpace odd = LiouvilleSpace::band(e, {3, CoherenceBand::Parity::odd});
    for (int k = 0; k < odd.size(); ++k) {
        const auto [a, b] = odd.element(k);
        const int K = e[a] - e[b];
        EXPECT_TRUE(std::abs(K) <= 3 && K % 2 != 0);
        EXPECT_EQ(odd.index(a, b), k);
    }
    int expected = 0;
    for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b) expected += CoherenceBand{3, CoherenceBand::Parity::odd}.admits(e[a] - e[b]);
    EXPECT_EQ(odd.size(), expected);
    EXPECT_FALSE(odd.is_full());
    EXPECT_TRUE(LiouvilleSpace::band(e, {99, CoherenceBand::Parity::all}).is_full());
    EXPECT_EQ(odd.index(0, 0), -1);
}

TEST(LiouvilleSpace, BandGeneratorIsGalerkinRestriction) {
    const SystemParams p = presets::readout_dressed();
    const Model m = readout_model(p, 5, ModelKind::dressed);
    const LiouvilleSpace full = LiouvilleSpace::full(m.dim());
    const LiouvilleSpace band = LiouvilleSpace::band(m.excitations, {2, CoherenceBand::Parity::even});
    const Matrix gf(generator(m, full));
    const Matrix gb(generator(m, band));
    for (int r = 0; r < band.size(); ++r)
        for (int c = 0; c < band.size(); ++c) {
            const auto [a, b] = band.element(r);
            const auto [x, y] = band.element(c);
            ASSERT_EQ(gb(r, c), gf(full.index(a, b), full.index(x, y)));
        }
    // the diagonal (K = 0) is kept, so trace conservation survives the truncation
    EXPECT_LT(max_abs(band.trace_functional() * gb), 1e-15);
}

TEST(LiouvilleSpace, ChooseSpace) {
    const Model small = readout_model(presets::readout_dressed(), 4, ModelKind::dressed);
    EXPECT_TRUE(choose_space(small, CoherenceBand{3, CoherenceBand::Parity::odd}).is_full());
    const Model big = readout_model(presets::readout_dressed(), 30, ModelKind::dressed);
    EXPECT_FALSE(choose_space(big, CoherenceBand{3, CoherenceBand::Parity::odd}).is_full());
    EXPECT_TRUE(choose_space(big, std::nullopt).is_full());
    const Model pauli = readout_model(presets::readout_dressed(), 30, ModelKind::dressed, Frame::pauli);
    EXPECT_THROW(choose_space(pauli, CoherenceBand{3, CoherenceBand::Parity::odd}), ArgumentError);
}

TEST(Liouvillian, LayoutMismatchThrows) {
    const Operator h = Operator::identity(SubsystemLayout({2, 3}));
    LindbladSet ls;
    ls.ops.push_back({"x", Operator::identity(SubsystemLayout({3, 2})), 1.0});
    EXPECT_THROW(liouvillian(h, ls), LayoutError);
    EXPECT_THROW(generator(h, LindbladSet{}, LiouvilleSpace::full(5)), LayoutError);
}
