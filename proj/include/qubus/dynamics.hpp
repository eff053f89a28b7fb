#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "hilbert.hpp"
#include "linalg.hpp"
#include "liouville.hpp"
#include "models.hpp"

namespace qubus {

enum class Method { automatic, expm_eig, expm_pade, rk4 };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::automatic: return "automatic";
        case Method::expm_eig: return "expm-eig";
        case Method::expm_pade: return "expm-pade";
        case Method::rk4: return "rk4";
    }
    return "?";
}

struct PropagatorOptions {
    Method method = Method::automatic;
    double max_step = 0;        // rk4 cap; 0 leaves the automatic bound
    int max_eig_dim = 2500;     // largest space handed to the dense eigensolver
    int max_pade_dim = 1200;
    double min_rcond = 1e-11;   // eigenvector conditioning floor before falling back
    long long max_steps = 200'000'000;
};

// Liouvillian eigendecomposition: rho(t) = V exp(Lambda t) V^-1 rho(0).
class EigenPropagator {
public:
    explicit EigenPropagator(const Matrix& g) {
        auto e = linalg::eig(g);
        values_ = std::move(e.values);
        vectors_ = std::move(e.vectors);
        lu_.compute(vectors_);
    }
    const Vector& values() const { return values_; }
    const Matrix& vectors() const { return vectors_; }
    double rcond() const { return lu_.rcond(); }
    Matrix coefficients(const Matrix& v0) const { return lu_.solve(v0); }
    Matrix state(const Matrix& coeffs, double t) const {
        const Vector z = (values_ * t).array().exp();
        return vectors_ * (z.asDiagonal() * coeffs);
    }

private:
    Vector values_;
    Matrix vectors_;
    Eigen::PartialPivLU<Matrix> lu_;
};

// Fourth-order Runge-Kutta in the frame that removes the (imaginary) diagonal of
// the generator exactly.  The drive enters as G(t) = G0 + f(t) G1 with f the pulse.
class InteractionRK4 {
public:
    InteractionRK4(const Model& m, const LiouvilleSpace& space, const PropagatorOptions& opts) {
        SparseMatrix g0 = generator(m, space);
        phase0_ = g0.diagonal().imag();
        r0_ = std::move(g0);
        for (int k = 0; k < r0_.rows(); ++k) r0_.coeffRef(k, k) -= I * phase0_(k);
        r0_.prune(cplx(0.0), 0.0);
        phase1_ = Eigen::VectorXd::Zero(space.size());
        double f_max = 0;
        if (m.pulse) {
            pulse_ = *m.pulse;
            f_max = pulse_->Omega_R0;
            SparseMatrix g1 = commutator_generator(m.h_drive, space);
            phase1_ = g1.diagonal().imag();
            r1_ = std::move(g1);
            for (int k = 0; k < r1_.rows(); ++k) r1_.coeffRef(k, k) -= I * phase1_(k);
            r1_.prune(cplx(0.0), 0.0);
            has_r1_ = r1_.nonZeros() > 0;
        }
        nu_ = max_frequency(f_max);
        step_ = nu_ > 0 ? 2 * std::numbers::pi / (50 * nu_) : std::numeric_limits<double>::infinity();
        if (pulse_ && pulse_->t0 > 0) step_ = std::min(step_, pulse_->t0 / 200);
        if (opts.max_step > 0) step_ = std::min(step_, opts.max_step);
        max_steps_ = opts.max_steps;
    }

    double step() const { return step_; }
    double max_frequency() const { return nu_; }

    void run(const Matrix& v0, std::span<const double> grid,
             const std::function<void(std::size_t, const Matrix&)>& visit) const {
        if (grid.empty()) return;
        const Clock clk{grid[0], pulse_ ? pulse_antiderivative(*pulse_, grid[0]) : 0.0};
        Matrix y = v0;  // interaction-frame state; equals the lab state at t_ref
        visit(0, v0);
        long long steps = 0;
        for (std::size_t i = 1; i < grid.size(); ++i) {
            const double span = grid[i] - grid[i - 1];
            const long long n = std::max<long long>(1, static_cast<long long>(std::ceil(span / step_ - 1e-9)));
            steps += n;
            if (steps > max_steps_) throw IntegrationError("rk4 step budget exhausted");
            const double h = span / static_cast<double>(n);
            for (long long s = 0; s < n; ++s) {
                const double t = grid[i - 1] + h * static_cast<double>(s);
                const Matrix k1 = rhs(clk, t, y);
                const Matrix k2 = rhs(clk, t + 0.5 * h, y + 0.5 * h * k1);
                const Matrix k3 = rhs(clk, t + 0.5 * h, y + 0.5 * h * k2);
                const Matrix k4 = rhs(clk, t + h, y + h * k3);
                y += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
            }
            if (!y.allFinite()) throw NumericalError("non-finite state during rk4 propagation");
            visit(i, phases(clk, grid[i]).asDiagonal() * y);
        }
    }

private:
    struct Clock {
        double t_ref, F_ref;
    };

    Vector phases(const Clock& clk, double t) const {
        const double dF = pulse_ ? pulse_antiderivative(*pulse_, t) - clk.F_ref : 0.0;
        const Eigen::VectorXd theta = phase0_ * (t - clk.t_ref) + phase1_ * dF;
        Vector e(theta.size());
        for (Eigen::Index k = 0; k < theta.size(); ++k) e(k) = std::polar(1.0, theta(k));
        return e;
    }

    Matrix rhs(const Clock& clk, double t, const Matrix& y) const {
        const Vector e = phases(clk, t);
        const Matrix z = e.asDiagonal() * y;
        Matrix w = r0_ * z;
        if (has_r1_) w += pulse_amplitude(*pulse_, t) * (r1_ * z);
        return e.conjugate().asDiagonal() * w;
    }

    // Largest rotation rate of any residual coupling over the drive range, or the
    // residual's Gershgorin radius if that is larger.
    double max_frequency(double f_max) const {
        double nu = 0;
        auto scan = [&](const SparseMatrix& r, double fscale) {
            Eigen::VectorXd colsum = Eigen::VectorXd::Zero(r.cols());
            for (int c = 0; c < r.outerSize(); ++c)
                for (SparseMatrix::InnerIterator it(r, c); it; ++it) {
                    colsum(c) += fscale * std::abs(it.value());
                    if (it.row() == it.col()) continue;
                    const double a = phase0_(it.row()) - phase0_(it.col());
                    const double b = phase1_(it.row()) - phase1_(it.col());
                    nu = std::max({nu, std::abs(a), std::abs(a + f_max * b)});
                }
            if (colsum.size()) nu = std::max(nu, colsum.maxCoeff());
        };
        scan(r0_, 1.0);
        if (has_r1_) scan(r1_, f_max);
        return nu;
    }

    SparseMatrix r0_, r1_;
    Eigen::VectorXd phase0_, phase1_;
    bool has_r1_ = false;
    std::optional<Pulse> pulse_;
    double nu_ = 0, step_ = 0;
    long long max_steps_ = 0;
};

// Propagates blocks of vectorized operators with the method chosen for the model.
class Propagator {
public:
    Propagator(const Model& m, LiouvilleSpace space, PropagatorOptions opts = {}) : space_(std::move(space)) {
        if (m.dim() != space_.hilbert_dim()) throw LayoutError("Liouville space does not match the model");
        Method method = opts.method;
        if (m.time_dependent() && method != Method::rk4) {
            if (method != Method::automatic)
                throw ArgumentError(to_string(method) + " needs a time-independent model");
            method = Method::rk4;
        }
        if (method == Method::automatic) method = space_.size() <= opts.max_eig_dim ? Method::expm_eig : Method::rk4;
        if (method == Method::expm_eig) {
            eig_.emplace(Matrix(generator(m, space_)));
            if (eig_->rcond() < opts.min_rcond && opts.method == Method::automatic) {
                eig_.reset();
                method = space_.size() <= opts.max_pade_dim ? Method::expm_pade : Method::rk4;
            }
        }
        if (method == Method::expm_pade) dense_ = Matrix(generator(m, space_));
        if (method == Method::rk4) rk4_.emplace(m, space_, opts);
        method_ = method;
    }

    const LiouvilleSpace& space() const { return space_; }
    Method method() const { return method_; }
    const EigenPropagator* eigen() const { return eig_ ? &*eig_ : nullptr; }
    const InteractionRK4* rk4() const { return rk4_ ? &*rk4_ : nullptr; }

    // v0 holds one vectorized operator per column, taken at grid[0].
    void run(const Matrix& v0, std::span<const double> grid,
             const std::function<void(std::size_t, const Matrix&)>& visit) const {
        if (v0.rows() != space_.size()) throw LayoutError("initial block does not match the Liouville space");
        for (std::size_t i = 1; i < grid.size(); ++i)
            if (!(grid[i] > grid[i - 1])) throw ArgumentError("time grid must be strictly increasing");
        if (grid.empty()) return;
        switch (method_) {
            case Method::expm_eig: {
                const Matrix c = eig_->coefficients(v0);
                visit(0, v0);
                for (std::size_t i = 1; i < grid.size(); ++i) {
                    Matrix s = eig_->state(c, grid[i] - grid[0]);
                    if (!s.allFinite()) throw NumericalError("non-finite state from eigendecomposition");
                    visit(i, s);
                }
                break;
            }
            case Method::expm_pade: {
                Matrix s = v0, step;
                double last_dt = -1;
                visit(0, v0);
                for (std::size_t i = 1; i < grid.size(); ++i) {
                    const double dt = grid[i] - grid[i - 1];
                    if (std::abs(dt - last_dt) > 1e-13 * std::abs(dt)) {
                        step = linalg::expm(dense_ * cplx(dt));
                        last_dt = dt;
                    }
                    s = step * s;
                    if (!s.allFinite()) throw NumericalError("non-finite state from matrix exponential");
                    visit(i, s);
                }
                break;
            }
            case Method::rk4: rk4_->run(v0, grid, visit); break;
            case Method::automatic: break;
        }
    }

    Matrix propagate(const Matrix& v0, double t0, double t1) const {
        Matrix out = v0;
        const double g[2] = {t0, t1};
        if (t1 == t0) return out;
        run(v0, std::span<const double>(g, 2), [&](std::size_t i, const Matrix& s) {
            if (i == 1) out = s;
        });
        return out;
    }

private:
    LiouvilleSpace space_;
    Method method_ = Method::automatic;
    std::optional<EigenPropagator> eig_;
    std::optional<InteractionRK4> rk4_;
    Matrix dense_;
};

struct Observable {
    std::string name;
    Operator op;
};

struct Probe {
    std::string name;
    std::function<double(const Operator&)> fn;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
    std::vector<Operator> states;  // filled when requested
    Method method = Method::automatic;

    int column_index(const std::string& name) const {
        for (std::size_t k = 0; k < names.size(); ++k)
            if (names[k] == name) return static_cast<int>(k);
        return -1;
    }
    const std::vector<double>& operator[](const std::string& name) const {
        const int k = column_index(name);
        if (k < 0) throw ArgumentError("trajectory has no record '" + name + "'");
        return columns[k];
    }
    double max_trace_drift() const {
        double d = 0;
        for (double v : (*this)["trace"]) d = std::max(d, std::abs(v - 1));
        return d;
    }
    double max_hermiticity_error() const {
        const auto& h = (*this)["hermiticity"];
        return h.empty() ? 0.0 : *std::max_element(h.begin(), h.end());
    }
    double min_eigenvalue() const {
        const auto& e = (*this)["min_eigenvalue"];
        return e.empty() ? 0.0 : *std::min_element(e.begin(), e.end());
    }

    void write_csv(std::ostream& os) const {
        os << "t";
        for (const auto& n : names) os << ',' << n;
        os << '\n' << std::setprecision(17);
        for (std::size_t i = 0; i < times.size(); ++i) {
            os << times[i];
            for (const auto& c : columns) os << ',' << c[i];
            os << '\n';
        }
    }
};

struct EvolveOptions {
    PropagatorOptions propagator;
    std::optional<CoherenceBand> band;  // used only when the full space is too large
    std::vector<Observable> observables;
    std::vector<Probe> probes;
    bool store_states = false;
    bool state_checks = true;  // trace, hermiticity and min_eigenvalue records
};

namespace detail {

inline Trajectory record_trajectory(const Propagator& prop, const Operator& rho0, std::span<const double> grid,
                                    const EvolveOptions& opts) {
    const LiouvilleSpace& space = prop.space();
    Trajectory tr;
    tr.method = prop.method();
    tr.times.assign(grid.begin(), grid.end());
    std::vector<Eigen::RowVectorXcd> fun;
    for (const auto& o : opts.observables) {
        o.op.same_layout(rho0);
        tr.names.push_back(o.name);
        fun.push_back(space.functional(o.op.matrix()));
    }
    for (const auto& p : opts.probes) tr.names.push_back(p.name);
    if (opts.state_checks) {
        for (const char* n : {"trace", "hermiticity", "min_eigenvalue"}) tr.names.push_back(n);
    }
    tr.columns.assign(tr.names.size(), std::vector<double>(grid.size()));
    const bool need_matrix = !opts.probes.empty() || opts.state_checks || opts.store_states;
    prop.run(space.pack(rho0.matrix()), grid, [&](std::size_t i, const Matrix& v) {
        std::size_t c = 0;
        for (const auto& f : fun) tr.columns[c++][i] = (f * v.col(0))(0).real();
        if (!need_matrix) return;
        const Operator rho(rho0.layout(), space.unpack(v.col(0)));
        for (const auto& p : opts.probes) tr.columns[c++][i] = p.fn(rho);
        if (opts.state_checks) {
            tr.columns[c++][i] = rho.trace().real();
            tr.columns[c++][i] = rho.hermiticity_error();
            tr.columns[c++][i] = min_eigenvalue(0.5 * (rho.matrix() + rho.matrix().adjoint()));
        }
        if (opts.store_states) tr.states.push_back(rho);
    });
    for (const auto& col : tr.columns)
        for (double x : col)
            if (!std::isfinite(x)) throw NumericalError("non-finite value in trajectory record");
    return tr;
}

}  // namespace detail

inline Trajectory evolve(const DensityMatrix& rho0, const Propagator& prop, std::span<const double> grid,
                         const EvolveOptions& opts = {}) {
    return detail::record_trajectory(prop, rho0.op(), grid, opts);
}

inline Trajectory evolve(const DensityMatrix& rho0, const Model& model, std::span<const double> grid,
                         const EvolveOptions& opts = {}) {
    rho0.op().same_layout(model.h_static);
    const Propagator prop(model, choose_space(model, opts.band), opts.propagator);
    return detail::record_trajectory(prop, rho0.op(), grid, opts);
}

inline std::vector<double> linspace(double a, double b, int n) {
    if (n < 1) throw ArgumentError("linspace needs at least one point");
    std::vector<double> v(n);
    for (int k = 0; k < n; ++k) v[k] = n == 1 ? a : a + (b - a) * k / (n - 1);
    return v;
}

// Unique fixed point of a time-independent model.
inline DensityMatrix steady_state(const Model& model, const std::optional<LiouvilleSpace>& space_in = std::nullopt) {
    if (model.time_dependent()) throw ArgumentError("steady state needs a time-independent model");
    const LiouvilleSpace space = space_in ? *space_in : LiouvilleSpace::full(model.dim());
    const Matrix g(generator(model, space));
    const Eigen::VectorXd sv = linalg::singular_values(g);
    const Eigen::Index n = sv.size();
    if (n >= 2 && !(sv(n - 2) > 1e3 * sv(n - 1)))
        throw NonUniqueSteadyStateError("Liouvillian null space is degenerate (singular values " +
                                        std::to_string(sv(n - 2)) + ", " + std::to_string(sv(n - 1)) + ")");
    Matrix a = g;
    a.row(0) = space.trace_functional();
    Vector b = Vector::Zero(space.size());
    b(0) = 1;
    const Vector v = a.partialPivLu().solve(b);
    const double residual = (g * v).cwiseAbs().maxCoeff();
    if (!(residual <= 1e-10)) throw NumericalError("steady-state residual " + std::to_string(residual));
    const Matrix rho = space.unpack(v);
    return DensityMatrix::from_evolved(Operator(model.layout(), rho), {1e-8, 1e-10, -1e-8});
}

// C(t) = sum_k w_k exp(lambda_k t), real part taken.
struct CorrelatorModes {
    Vector rates;
    Vector weights;

    double value(double t) const { return (weights.array() * (rates * t).array().exp()).sum().real(); }

    // Largest oscillation frequency among modes carrying at least `rel` of the peak weight.
    double max_frequency(double rel = 1e-6) const {
        const double wmax = weights.size() ? weights.cwiseAbs().maxCoeff() : 0.0;
        double w = 0;
        for (Eigen::Index k = 0; k < rates.size(); ++k)
            if (std::abs(weights(k)) >= rel * wmax) w = std::max(w, std::abs(rates(k).imag()));
        return w;
    }

    // Uniform samples C(k dt), k = 0..n-1, by recurrence with periodic resynchronization.
    std::vector<double> sample(double dt, std::size_t n) const {
        std::vector<double> c(n);
        const Vector z = (rates * dt).array().exp();
        Vector p = weights;
        for (std::size_t k = 0; k < n; ++k) {
            if (k % 1024 == 0) p = weights.array() * (rates * (dt * static_cast<double>(k))).array().exp();
            c[k] = p.sum().real();
            p = p.cwiseProduct(z);
        }
        return c;
    }

    CorrelatorModes pruned(double rel = 1e-14) const {
        const double wmax = weights.size() ? weights.cwiseAbs().maxCoeff() : 0.0;
        std::vector<Eigen::Index> keep;
        for (Eigen::Index k = 0; k < weights.size(); ++k)
            if (std::abs(weights(k)) > rel * wmax) keep.push_back(k);
        CorrelatorModes r{Vector(keep.size()), Vector(keep.size())};
        for (std::size_t i = 0; i < keep.size(); ++i) {
            r.rates(i) = rates(keep[i]);
            r.weights(i) = weights(keep[i]);
        }
        return r;
    }
};

// Symmetrized source {x, rho0} whose evolution carries the regression correlator.
inline Operator regression_source(const Operator& x, const Operator& rho0) {
    return Operator(rho0.layout(), x.matrix() * rho0.matrix() + rho0.matrix() * x.matrix());
}

inline CorrelatorModes correlator_modes(const Propagator& prop, const Operator& x, const Operator& rho0) {
    const EigenPropagator* e = prop.eigen();
    if (!e) throw ArgumentError("correlator modes need an eigendecomposition propagator");
    const LiouvilleSpace& s = prop.space();
    const Vector c = e->coefficients(s.pack(regression_source(x, rho0).matrix()));
    const Eigen::RowVectorXcd r = 0.5 * s.functional(x.matrix()) * e->vectors();
    return {e->values(), r.transpose().cwiseProduct(c)};
}

// Oscillator quadrature a + a^dag on the last subsystem.
inline Operator quadrature(const SubsystemLayout& layout) {
    const int slot = layout.size() - 1;
    return embed(ops::position(layout.dim(slot)), slot, layout);
}

struct CorrelatorOptions {
    PropagatorOptions propagator;
    std::optional<CoherenceBand> band;
    bool from_steady_state = false;  // replace rho0 by the model's fixed point
};

inline std::vector<double> regression_correlator(const Model& model, const DensityMatrix& rho0,
                                                 std::span<const double> grid, const CorrelatorOptions& opts = {}) {
    if (model.time_dependent()) throw ArgumentError("regression correlator needs a time-independent model");
    rho0.op().same_layout(model.h_static);
    const Operator x = quadrature(model.layout());
    LiouvilleSpace space = choose_space(model, opts.band);
    const Operator start = opts.from_steady_state ? steady_state(model).op() : rho0.op();
    PropagatorOptions po = opts.propagator;
    if (po.method == Method::automatic) po.method = space.size() <= 5000 ? Method::expm_eig : Method::rk4;
    const Propagator prop(model, std::move(space), po);
    std::vector<double> c(grid.size());
    if (prop.eigen()) {
        const CorrelatorModes m = correlator_modes(prop, x, start);
        for (std::size_t i = 0; i < grid.size(); ++i) c[i] = m.value(grid[i] - (grid.empty() ? 0 : grid[0]));
        return c;
    }
    const Eigen::RowVectorXcd f = 0.5 * prop.space().functional(x.matrix());
    prop.run(prop.space().pack(regression_source(x, start).matrix()), grid,
             [&](std::size_t i, const Matrix& v) { c[i] = (f * v.col(0))(0).real(); });
    return c;
}

}  // namespace qubus
