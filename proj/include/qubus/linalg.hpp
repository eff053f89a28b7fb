#pragma once

#include <complex>
#ifndef lapack_complex_double
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#endif
#include <lapacke.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <string>

#include "errors.hpp"
#include "hilbert.hpp"

namespace qubus::linalg {

struct EigenDecomposition {
    Vector values;
    Matrix vectors;  // right eigenvectors, one per column
};

// General complex eigenproblem through LAPACK zgeev.
inline EigenDecomposition eig(Matrix a) {
    const lapack_int n = static_cast<lapack_int>(a.rows());
    EigenDecomposition r{Vector(n), Matrix(n, n)};
    if (n == 0) return r;
    cplx dummy;
    const lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'V', n, a.data(), n, r.values.data(), &dummy, 1,
                                          r.vectors.data(), n);
    if (info != 0) throw NumericalError("zgeev failed with info " + std::to_string(info));
    return r;
}

// Singular values, descending.
inline Eigen::VectorXd singular_values(Matrix a) {
    const lapack_int m = static_cast<lapack_int>(a.rows()), n = static_cast<lapack_int>(a.cols());
    Eigen::VectorXd s(std::min(m, n));
    if (s.size() == 0) return s;
    cplx dummy;
    const lapack_int info =
        LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', m, n, a.data(), m, s.data(), &dummy, 1, &dummy, 1);
    if (info != 0) throw NumericalError("zgesdd failed with info " + std::to_string(info));
    return s;
}

inline Matrix expm(const Matrix& a) { return a.exp(); }

}  // namespace qubus::linalg
