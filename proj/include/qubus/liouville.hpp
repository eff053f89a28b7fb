#pragma once

#include <Eigen/Sparse>

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "hilbert.hpp"
#include "models.hpp"

namespace qubus {

using SparseMatrix = Eigen::SparseMatrix<cplx>;

// Which coherence orders K = e(a) - e(b) of |a><b| are kept.
struct CoherenceBand {
    enum class Parity { all, even, odd };
    int kmax = 0;
    Parity parity = Parity::all;

    bool admits(int k) const {
        if (std::abs(k) > kmax) return false;
        if (parity == Parity::even) return k % 2 == 0;
        if (parity == Parity::odd) return k % 2 != 0;
        return true;
    }
};

// Coordinates of a (possibly truncated) Liouville space.  The full space uses
// column stacking, index a + b*D for |a><b|; a band keeps the same relative order.
class LiouvilleSpace {
public:
    static LiouvilleSpace full(int D) {
        LiouvilleSpace s;
        s.D_ = D;
        s.full_ = true;
        s.index_.resize(static_cast<std::size_t>(D) * D);
        s.elements_.reserve(s.index_.size());
        for (int b = 0; b < D; ++b)
            for (int a = 0; a < D; ++a) {
                s.index_[a + b * D] = static_cast<int>(s.elements_.size());
                s.elements_.emplace_back(a, b);
            }
        return s;
    }

    // Galerkin truncation to the coherence orders admitted by `band`.
    static LiouvilleSpace band(const std::vector<int>& excitations, CoherenceBand band) {
        LiouvilleSpace s;
        s.D_ = static_cast<int>(excitations.size());
        s.band_ = band;
        s.index_.assign(static_cast<std::size_t>(s.D_) * s.D_, -1);
        for (int b = 0; b < s.D_; ++b)
            for (int a = 0; a < s.D_; ++a)
                if (band.admits(excitations[a] - excitations[b])) {
                    s.index_[a + b * s.D_] = static_cast<int>(s.elements_.size());
                    s.elements_.emplace_back(a, b);
                }
        s.full_ = static_cast<int>(s.elements_.size()) == s.D_ * s.D_;
        return s;
    }

    int hilbert_dim() const { return D_; }
    int size() const { return static_cast<int>(elements_.size()); }
    bool is_full() const { return full_; }
    const std::optional<CoherenceBand>& coherence_band() const { return band_; }
    int index(int a, int b) const { return index_[a + static_cast<std::size_t>(b) * D_]; }
    std::pair<int, int> element(int k) const { return elements_[k]; }

    Vector pack(const Matrix& rho) const {
        Vector v(size());
        for (int k = 0; k < size(); ++k) v(k) = rho(elements_[k].first, elements_[k].second);
        return v;
    }
    Matrix unpack(const Vector& v) const {
        Matrix m = Matrix::Zero(D_, D_);
        for (int k = 0; k < size(); ++k) m(elements_[k].first, elements_[k].second) = v(k);
        return m;
    }
    // Row vector r with r * pack(rho) = Tr[obs rho].
    Eigen::RowVectorXcd functional(const Matrix& obs) const {
        Eigen::RowVectorXcd r(size());
        for (int k = 0; k < size(); ++k) r(k) = obs(elements_[k].second, elements_[k].first);
        return r;
    }
    Eigen::RowVectorXcd trace_functional() const { return functional(Matrix::Identity(D_, D_)); }

private:
    int D_ = 0;
    bool full_ = false;
    std::optional<CoherenceBand> band_;
    std::vector<int> index_;
    std::vector<std::pair<int, int>> elements_;
};

// Dense column-stacked superoperator of the master equation.
struct Liouvillian {
    int dim = 0;
    Matrix matrix;
};

inline void require_layout(const Operator& h, const LindbladSet& ls) {
    for (const auto& j : ls.ops) h.same_layout(j.op);
}

inline Liouvillian liouvillian(const Operator& h, const LindbladSet& ls) {
    require_layout(h, ls);
    const int D = h.dim();
    const Matrix id = ops::identity(D);
    Matrix l = -I * (ops::kron(id, h.matrix()) - ops::kron(h.matrix().transpose(), id));
    for (const auto& j : ls.ops) {
        const Matrix& L = j.op.matrix();
        const Matrix ldl = L.adjoint() * L;
        l += ops::kron(L.conjugate(), L) - 0.5 * (ops::kron(id, ldl) + ops::kron(ldl.transpose(), id));
    }
    return {D * D, std::move(l)};
}

// Right-hand side of the master equation evaluated directly on a matrix.
inline Matrix apply_master_equation(const Operator& h, const LindbladSet& ls, const Matrix& rho) {
    Matrix r = -I * (h.matrix() * rho - rho * h.matrix());
    for (const auto& j : ls.ops) {
        const Matrix& L = j.op.matrix();
        const Matrix ldl = L.adjoint() * L;
        r += L * rho * L.adjoint() - 0.5 * (ldl * rho + rho * ldl);
    }
    return r;
}

namespace detail {

struct SparseColumns {
    std::vector<std::vector<std::pair<int, cplx>>> cols;
};

inline SparseColumns sparse_columns(const Matrix& m) {
    const double cut = 1e-15 * std::max(1.0, m.size() ? m.cwiseAbs().maxCoeff() : 0.0);
    SparseColumns s;
    s.cols.resize(m.cols());
    for (int c = 0; c < m.cols(); ++c)
        for (int r = 0; r < m.rows(); ++r)
            if (std::abs(m(r, c)) > cut) s.cols[c].emplace_back(r, m(r, c));
    return s;
}

}  // namespace detail

// Generator rho -> K rho + rho K^dag + sum_k L_k rho L_k^dag restricted to `space`,
// with K = -iH - (1/2) sum_k L_k^dag L_k.  Couplings leaving the space are dropped.
inline SparseMatrix generator(const Operator& h, const LindbladSet& ls, const LiouvilleSpace& space) {
    require_layout(h, ls);
    if (space.hilbert_dim() != h.dim()) throw LayoutError("Liouville space does not match the Hamiltonian");
    Matrix k = -I * h.matrix();
    for (const auto& j : ls.ops) k -= 0.5 * j.op.matrix().adjoint() * j.op.matrix();
    const auto K = detail::sparse_columns(k);
    std::vector<detail::SparseColumns> jumps;
    for (const auto& j : ls.ops) jumps.push_back(detail::sparse_columns(j.op.matrix()));

    std::vector<Eigen::Triplet<cplx>> t;
    for (int col = 0; col < space.size(); ++col) {
        const auto [c, d] = space.element(col);
        for (const auto& [a, v] : K.cols[c])
            if (int row = space.index(a, d); row >= 0) t.emplace_back(row, col, v);
        for (const auto& [b, v] : K.cols[d])
            if (int row = space.index(c, b); row >= 0) t.emplace_back(row, col, std::conj(v));
        for (const auto& J : jumps)
            for (const auto& [a, va] : J.cols[c])
                for (const auto& [b, vb] : J.cols[d])
                    if (int row = space.index(a, b); row >= 0) t.emplace_back(row, col, va * std::conj(vb));
    }
    SparseMatrix g(space.size(), space.size());
    g.setFromTriplets(t.begin(), t.end());
    g.prune(cplx(0.0), 0.0);
    return g;
}

inline SparseMatrix generator(const Model& m, const LiouvilleSpace& space) {
    return generator(m.h_static, m.lindblads, space);
}

// -i[h, .] restricted to `space`.
inline SparseMatrix commutator_generator(const Operator& h, const LiouvilleSpace& space) {
    return generator(h, LindbladSet{}, space);
}

// Liouville space for a model: full when the superoperator side stays below
// max_full, otherwise the requested band (which needs excitation labels).
inline LiouvilleSpace choose_space(const Model& m, const std::optional<CoherenceBand>& band, int max_full = 1600) {
    const int D = m.dim();
    if (!band || D * D <= max_full) return LiouvilleSpace::full(D);
    if (m.excitations.empty()) throw ArgumentError("coherence band needs a logical-frame model");
    return LiouvilleSpace::band(m.excitations, *band);
}

}  // namespace qubus
