#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace qubus {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr cplx I{0.0, 1.0};

// Ordered tensor factors; slot 0 is the most significant index, as in kron.
class SubsystemLayout {
public:
    SubsystemLayout() = default;
    explicit SubsystemLayout(std::vector<int> dims) : dims_(std::move(dims)) {
        for (int d : dims_)
            if (d < 1) throw LayoutError("subsystem dimension must be positive, got " + std::to_string(d));
    }
    SubsystemLayout(std::initializer_list<int> dims) : SubsystemLayout(std::vector<int>(dims)) {}

    const std::vector<int>& dims() const { return dims_; }
    int size() const { return static_cast<int>(dims_.size()); }
    int dim(int slot) const {
        check_slot(slot);
        return dims_[slot];
    }
    int total_dim() const {
        return std::accumulate(dims_.begin(), dims_.end(), 1, std::multiplies<>());
    }
    // index stride of a slot in the flattened basis
    int stride(int slot) const {
        check_slot(slot);
        int s = 1;
        for (int k = slot + 1; k < size(); ++k) s *= dims_[k];
        return s;
    }
    int digit(int index, int slot) const { return (index / stride(slot)) % dims_[slot]; }

    void check_slot(int slot) const {
        if (slot < 0 || slot >= size())
            throw LayoutError("subsystem index " + std::to_string(slot) + " out of range for " +
                              std::to_string(size()) + " subsystems");
    }

    SubsystemLayout concat(const SubsystemLayout& other) const {
        std::vector<int> d = dims_;
        d.insert(d.end(), other.dims_.begin(), other.dims_.end());
        return SubsystemLayout(std::move(d));
    }

    bool operator==(const SubsystemLayout&) const = default;

    std::string str() const {
        std::string s = "[";
        for (int k = 0; k < size(); ++k) s += (k ? "," : "") + std::to_string(dims_[k]);
        return s + "]";
    }

private:
    std::vector<int> dims_;
};

class Operator {
public:
    Operator() = default;
    Operator(SubsystemLayout layout, Matrix data) : layout_(std::move(layout)), data_(std::move(data)) {
        const int n = layout_.total_dim();
        if (data_.rows() != n || data_.cols() != n)
            throw LayoutError("operator is " + std::to_string(data_.rows()) + "x" + std::to_string(data_.cols()) +
                              " but layout " + layout_.str() + " needs " + std::to_string(n));
    }
    // single-factor operator
    explicit Operator(Matrix data) : layout_({static_cast<int>(data.rows())}), data_(std::move(data)) {
        if (data_.rows() != data_.cols()) throw LayoutError("operator matrix must be square");
    }

    static Operator identity(const SubsystemLayout& layout) {
        const int n = layout.total_dim();
        return Operator(layout, Matrix::Identity(n, n));
    }
    static Operator zero(const SubsystemLayout& layout) {
        const int n = layout.total_dim();
        return Operator(layout, Matrix::Zero(n, n));
    }

    const SubsystemLayout& layout() const { return layout_; }
    const Matrix& matrix() const { return data_; }
    int dim() const { return static_cast<int>(data_.rows()); }
    cplx trace() const { return data_.trace(); }
    Operator adjoint() const { return Operator(layout_, data_.adjoint()); }
    double hermiticity_error() const {
        return dim() ? (data_ - data_.adjoint()).cwiseAbs().maxCoeff() : 0.0;
    }

    Operator& operator+=(const Operator& o) {
        same_layout(o);
        data_ += o.data_;
        return *this;
    }
    Operator& operator-=(const Operator& o) {
        same_layout(o);
        data_ -= o.data_;
        return *this;
    }
    Operator& operator*=(cplx s) {
        data_ *= s;
        return *this;
    }
    friend Operator operator+(Operator a, const Operator& b) { return a += b; }
    friend Operator operator-(Operator a, const Operator& b) { return a -= b; }
    friend Operator operator*(Operator a, cplx s) { return a *= s; }
    friend Operator operator*(cplx s, Operator a) { return a *= s; }
    friend Operator operator*(const Operator& a, const Operator& b) {
        a.same_layout(b);
        return Operator(a.layout_, a.data_ * b.data_);
    }

    void same_layout(const Operator& o) const {
        if (!(layout_ == o.layout_))
            throw LayoutError("layout mismatch: " + layout_.str() + " vs " + o.layout_.str());
    }

private:
    SubsystemLayout layout_;
    Matrix data_;
};

// Re Tr[A B] without forming the product.
inline cplx trace_product(const Matrix& a, const Matrix& b) {
    return (a.array() * b.transpose().array()).sum();
}
inline double expectation(const Operator& obs, const Operator& rho) {
    obs.same_layout(rho);
    return trace_product(obs.matrix(), rho.matrix()).real();
}

inline double min_eigenvalue(const Matrix& hermitian) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

struct StateTolerances {
    double hermiticity = 1e-12;
    double trace = 1e-10;
    double min_eigenvalue = -1e-8;
};

// Tolerances for states produced by propagation rather than built by hand.
inline constexpr StateTolerances evolved_tolerances{1e-8, 1e-6, -1e-6};

class DensityMatrix {
public:
    DensityMatrix() = default;
    explicit DensityMatrix(Operator op, StateTolerances tol = {}) : op_(std::move(op)) {
        const double herm = op_.hermiticity_error();
        if (herm > tol.hermiticity) throw ArgumentError("density matrix not Hermitian: " + std::to_string(herm));
        const double tr_err = std::abs(op_.trace() - 1.0);
        if (tr_err > tol.trace) throw ArgumentError("density matrix trace off by " + std::to_string(tr_err));
        const double lam = min_eigenvalue(op_.matrix());
        if (lam < tol.min_eigenvalue)
            throw ArgumentError("density matrix has eigenvalue " + std::to_string(lam));
    }

    static DensityMatrix pure(const SubsystemLayout& layout, const Vector& psi) {
        if (psi.size() != layout.total_dim()) throw LayoutError("state vector size does not match layout");
        const double n = psi.norm();
        if (n == 0.0) throw ArgumentError("zero state vector");
        const Vector v = psi / n;
        return DensityMatrix(Operator(layout, v * v.adjoint()));
    }

    // Symmetrizes a propagated state and checks it against the drift budget.
    static DensityMatrix from_evolved(const Operator& op, StateTolerances tol = evolved_tolerances) {
        DensityMatrix r(Operator(op.layout(), 0.5 * (op.matrix() + op.matrix().adjoint())),
                        {1e-12, tol.trace, tol.min_eigenvalue});
        if (op.hermiticity_error() > tol.hermiticity)
            throw NumericalError("propagated state lost Hermiticity: " + std::to_string(op.hermiticity_error()));
        return r;
    }

    const Operator& op() const { return op_; }
    const Matrix& matrix() const { return op_.matrix(); }
    const SubsystemLayout& layout() const { return op_.layout(); }
    int dim() const { return op_.dim(); }
    double purity() const { return trace_product(matrix(), matrix()).real(); }

private:
    Operator op_;
};

namespace ops {

inline Matrix identity(int n) { return Matrix::Identity(n, n); }
inline Matrix sigma_x() {
    Matrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}
inline Matrix sigma_y() {
    Matrix m(2, 2);
    m << 0, -I, I, 0;
    return m;
}
inline Matrix sigma_z() {
    Matrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}
// lowers the sigma_z = +1 state (index 0) to sigma_z = -1 (index 1)
inline Matrix sigma_minus() {
    Matrix m = Matrix::Zero(2, 2);
    m(1, 0) = 1;
    return m;
}
inline Matrix sigma_plus() { return sigma_minus().transpose(); }
inline Matrix destroy(int n) {
    Matrix m = Matrix::Zero(n, n);
    for (int k = 1; k < n; ++k) m(k - 1, k) = std::sqrt(double(k));
    return m;
}
inline Matrix create(int n) { return destroy(n).adjoint(); }
inline Matrix number(int n) {
    Matrix m = Matrix::Zero(n, n);
    for (int k = 0; k < n; ++k) m(k, k) = double(k);
    return m;
}
inline Matrix position(int n) { return destroy(n) + create(n); }

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix r(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return r;
}

inline Vector basis(int n, int k) {
    Vector v = Vector::Zero(n);
    v(k) = 1;
    return v;
}

}  // namespace ops

inline Operator kron(const Operator& a, const Operator& b) {
    return Operator(a.layout().concat(b.layout()), ops::kron(a.matrix(), b.matrix()));
}

inline Operator embed(const Matrix& op, int slot, const SubsystemLayout& layout) {
    layout.check_slot(slot);
    if (op.rows() != layout.dim(slot) || op.cols() != layout.dim(slot))
        throw LayoutError("cannot embed " + std::to_string(op.rows()) + "x" + std::to_string(op.cols()) +
                          " operator into slot " + std::to_string(slot) + " of " + layout.str());
    int before = 1, after = 1;
    for (int k = 0; k < slot; ++k) before *= layout.dim(k);
    for (int k = slot + 1; k < layout.size(); ++k) after *= layout.dim(k);
    return Operator(layout, ops::kron(ops::kron(ops::identity(before), op), ops::identity(after)));
}
inline Operator embed(const Operator& op, int slot, const SubsystemLayout& layout) {
    return embed(op.matrix(), slot, layout);
}

namespace detail {

// offsets[i] = flattened contribution of the multi-index i over `slots`
inline std::vector<int> slot_offsets(const SubsystemLayout& layout, const std::vector<int>& slots) {
    std::vector<int> off{0};
    for (int s : slots) {
        std::vector<int> next;
        next.reserve(off.size() * layout.dim(s));
        for (int o : off)
            for (int d = 0; d < layout.dim(s); ++d) next.push_back(o + d * layout.stride(s));
        off = std::move(next);
    }
    return off;
}

}  // namespace detail

inline Operator partial_trace(const Operator& rho, std::vector<int> keep) {
    const SubsystemLayout& L = rho.layout();
    if (keep.empty()) throw ArgumentError("partial_trace needs a nonempty keep set");
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    for (int s : keep) L.check_slot(s);
    std::vector<int> traced, kept_dims;
    for (int s = 0; s < L.size(); ++s) {
        if (std::binary_search(keep.begin(), keep.end(), s))
            kept_dims.push_back(L.dim(s));
        else
            traced.push_back(s);
    }
    const auto ok = detail::slot_offsets(L, keep);
    const auto ot = detail::slot_offsets(L, traced);
    const int n = static_cast<int>(ok.size());
    Matrix r = Matrix::Zero(n, n);
    const Matrix& a = rho.matrix();
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            cplx s = 0;
            for (int t : ot) s += a(ok[i] + t, ok[j] + t);
            r(i, j) = s;
        }
    return Operator(SubsystemLayout(kept_dims), std::move(r));
}
inline DensityMatrix partial_trace(const DensityMatrix& rho, std::vector<int> keep) {
    return DensityMatrix(partial_trace(rho.op(), std::move(keep)), {1e-10, 1e-10, -1e-8});
}

inline Operator partial_transpose(const Operator& rho, int subsystem) {
    const SubsystemLayout& L = rho.layout();
    L.check_slot(subsystem);
    const int st = L.stride(subsystem), d = L.dim(subsystem), n = rho.dim();
    const Matrix& a = rho.matrix();
    Matrix r(n, n);
    for (int c = 0; c < n; ++c) {
        const int dc = (c / st) % d;
        for (int row = 0; row < n; ++row) {
            const int dr = (row / st) % d;
            r(row + (dc - dr) * st, c + (dr - dc) * st) = a(row, c);
        }
    }
    return Operator(L, std::move(r));
}
inline Operator partial_transpose(const DensityMatrix& rho, int subsystem) {
    return partial_transpose(rho.op(), subsystem);
}

inline double trace_norm(const Matrix& x) {
    if (x.size() == 0) return 0.0;
    const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
    if ((x - x.adjoint()).cwiseAbs().maxCoeff() <= 1e-13 * scale) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (x + x.adjoint()), Eigen::EigenvaluesOnly);
        return es.eigenvalues().cwiseAbs().sum();
    }
    Eigen::BDCSVD<Matrix> svd(x);
    return svd.singularValues().sum();
}
inline double trace_norm(const Operator& x) { return trace_norm(x.matrix()); }

// Boltzmann populations truncated to N levels and renormalized.
inline DensityMatrix thermal_state(double omega, double T, int N) {
    if (N < 1) throw ArgumentError("truncation must be at least 1");
    if (T < 0) throw ArgumentError("temperature must be non-negative");
    if (omega <= 0) throw ArgumentError("mode frequency must be positive");
    Matrix rho = Matrix::Zero(N, N);
    if (T == 0.0) {
        rho(0, 0) = 1;
        return DensityMatrix(Operator(std::move(rho)));
    }
    const double q = std::exp(-omega / T);
    const double tail = std::pow(q, N);
    if (tail > 1e-6)
        throw TruncationError("N = " + std::to_string(N) + " leaves thermal tail mass " + std::to_string(tail));
    double z = 0;
    for (int n = 0; n < N; ++n) z += std::pow(q, n);
    for (int n = 0; n < N; ++n) rho(n, n) = std::pow(q, n) / z;
    return DensityMatrix(Operator(std::move(rho)));
}

// Same state parameterized by its mean occupation.
inline DensityMatrix thermal_state_from_occupation(double n_th, int N, double omega = 1.0) {
    if (n_th < 0) throw ArgumentError("occupation must be non-negative");
    if (n_th == 0) return thermal_state(omega, 0.0, N);
    return thermal_state(omega, omega / std::log1p(1.0 / n_th), N);
}

struct TruncationPolicy {
    double tail = 1e-8;
    double headroom = 3.0;
    int floor = 4;
};

// Smallest Fock cutoff with thermal tail below policy.tail and headroom over n_max.
inline int choose_truncation(double n_max, TruncationPolicy policy = {}) {
    int n = policy.floor;
    if (n_max <= 0) return n;
    n = std::max(n, static_cast<int>(std::ceil(policy.headroom * n_max)));
    const double q = n_max / (n_max + 1.0);
    n = std::max(n, static_cast<int>(std::floor(std::log(policy.tail) / std::log(q))) + 1);
    return n;
}

inline int convergence_truncation(int N) { return static_cast<int>(std::ceil(1.5 * N)); }

}  // namespace qubus
