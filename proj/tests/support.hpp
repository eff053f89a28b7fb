#pragma once

// Random operators and brute-force oracles shared by the test suites.

#include <qubus/hilbert.hpp>

#include <random>

namespace qubus::fixtures {

inline Matrix random_matrix(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Matrix m(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) m(i, j) = cplx(nd(rng), nd(rng));
    return m;
}

inline Vector random_vector(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = cplx(nd(rng), nd(rng));
    return v / v.norm();
}

inline Matrix random_hermitian(int n, std::mt19937_64& rng) {
    const Matrix m = random_matrix(n, rng);
    return 0.5 * (m + m.adjoint());
}

// Ginibre density matrix, full rank with probability one.
inline Matrix random_density(int n, std::mt19937_64& rng) {
    const Matrix g = random_matrix(n, rng);
    Matrix r = g * g.adjoint();
    return r / r.trace();
}

inline Matrix random_unitary(int n, std::mt19937_64& rng) {
    Eigen::HouseholderQR<Matrix> qr(random_matrix(n, rng));
    return qr.householderQ();
}

inline double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace qubus::fixtures
