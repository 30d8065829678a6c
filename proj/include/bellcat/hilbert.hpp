#pragma once

// Truncated Fock-space linear algebra for a qubit coupled to one cavity mode.
//
// Joint basis ordering: index = q * n_cav + n, with q = 0 for |g> and q = 1
// for |e>. Qubit convention: sigma_z |g> = +|g>, so a Z outcome of +1 means
// "ground". Displacement is D(alpha) = exp(alpha a^dag - conj(alpha) a).

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Eigenvalues>

#include "bellcat/common.hpp"

namespace bellcat::hilbert {

inline constexpr int kDefaultPad = 30;

// ---------------------------------------------------------------------------
// Cavity vectors

/// Amplitudes over the photon-number basis |0>..|n_cav-1>. Norm may fall
/// short of one when a coherent state is cut off by the truncation.
class CavityVector {
public:
    CavityVector(Vector amplitudes, double leakage = 0.0)
        : amp_(std::move(amplitudes)), leakage_(leakage) {
        require(amp_.size() >= 1, "CavityVector: empty");
    }

    int n_cav() const { return static_cast<int>(amp_.size()); }
    const Vector& amplitudes() const { return amp_; }
    /// 1 - ||c||^2 reported at construction.
    double leakage() const { return leakage_; }
    double norm() const { return amp_.norm(); }
    Vector normalized() const { return amp_ / amp_.norm(); }

private:
    Vector amp_;
    double leakage_;
};

/// |beta> truncated to n_cav levels: c_n = exp(-|beta|^2/2) beta^n / sqrt(n!).
/// Throws NumericalError when the lost norm exceeds `leakage_tol`, unless
/// `allow_leakage` is set.
inline CavityVector coherent_state(cplx beta, int n_cav, double leakage_tol = 1e-8,
                                   bool allow_leakage = false) {
    require(n_cav >= 1, "coherent_state: n_cav must be >= 1");
    Vector c(n_cav);
    c(0) = std::exp(-0.5 * std::norm(beta));
    for (int n = 1; n < n_cav; ++n) c(n) = c(n - 1) * beta / std::sqrt(static_cast<double>(n));
    const double leakage = std::max(0.0, 1.0 - c.squaredNorm());
    if (!allow_leakage && leakage > leakage_tol) {
        throw NumericalError("coherent_state: truncation leakage " + std::to_string(leakage) +
                                 " exceeds tolerance at n_cav=" + std::to_string(n_cav),
                             leakage);
    }
    return CavityVector(std::move(c), leakage);
}

inline CavityVector fock_state(int n, int n_cav) {
    require(n >= 0 && n < n_cav, "fock_state: photon number outside truncation");
    Vector c = Vector::Zero(n_cav);
    c(n) = 1.0;
    return CavityVector(std::move(c));
}

// ---------------------------------------------------------------------------
// Cavity operators

inline Operator identity(int dim) { return Operator::Identity(dim, dim); }

inline Operator annihilation(int n_cav) {
    Operator a = Operator::Zero(n_cav, n_cav);
    for (int n = 1; n < n_cav; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

inline Operator number_op(int n_cav) {
    Operator num = Operator::Zero(n_cav, n_cav);
    for (int n = 0; n < n_cav; ++n) num(n, n) = static_cast<double>(n);
    return num;
}

inline Operator parity_op(int n_cav) {
    Operator p = Operator::Zero(n_cav, n_cav);
    for (int n = 0; n < n_cav; ++n) p(n, n) = (n % 2 == 0) ? 1.0 : -1.0;
    return p;
}

/// exp(i * phase * n) on the diagonal.
inline Vector number_phases(int n_cav, double phase) {
    Vector d(n_cav);
    for (int n = 0; n < n_cav; ++n) d(n) = std::polar(1.0, phase * n);
    return d;
}

/// Exponentiates the truncated displacement generator on a fixed workspace.
///
/// alpha = r e^{i phi} gives D = U_phi exp(r (a^dag - a)) U_phi^dag with
/// U_phi = exp(i phi n). The real generator r (a^dag - a) = -i r H with H
/// Hermitian, so one eigendecomposition of H serves every alpha.
class DisplacementEngine {
public:
    explicit DisplacementEngine(int n_work) : n_work_(n_work) {
        require(n_work >= 1, "DisplacementEngine: n_work must be >= 1");
        const Operator a = annihilation(n_work);
        const Operator h = kI * (a.adjoint() - a);
        Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
        eigvals_ = solver.eigenvalues();
        eigvecs_ = solver.eigenvectors();
    }

    int n_work() const { return n_work_; }

    Matrix matrix(cplx alpha) const {
        const double r = std::abs(alpha);
        const double phi = std::arg(alpha);
        Vector ph = phase_factors(r);
        Matrix core = eigvecs_ * ph.asDiagonal() * eigvecs_.adjoint();
        const Vector u = number_phases(n_work_, phi);
        return u.asDiagonal() * core * u.conjugate().asDiagonal();
    }

    /// D(alpha) v; v may be shorter than the workspace and is zero padded.
    Vector apply(cplx alpha, const Vector& v) const {
        require(v.size() <= n_work_, "DisplacementEngine::apply: vector exceeds workspace");
        Vector w = Vector::Zero(n_work_);
        w.head(v.size()) = v;
        const double r = std::abs(alpha);
        const double phi = std::arg(alpha);
        const Vector u = number_phases(n_work_, phi);
        w = u.conjugate().cwiseProduct(w);
        Vector t = eigvecs_.adjoint() * w;
        t = phase_factors(r).cwiseProduct(t);
        w = eigvecs_ * t;
        return u.cwiseProduct(w);
    }

private:
    Vector phase_factors(double r) const {
        Vector ph(n_work_);
        for (int k = 0; k < n_work_; ++k) ph(k) = std::polar(1.0, -r * eigvals_(k));
        return ph;
    }

    int n_work_;
    RealVector eigvals_;
    Matrix eigvecs_;
};

/// Shared, immutable engine per workspace size.
inline const DisplacementEngine& displacement_engine(int n_work) {
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<DisplacementEngine>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[n_work];
    if (!slot) slot = std::make_unique<DisplacementEngine>(n_work);
    return *slot;
}

struct DisplacementReport {
    double non_unitarity = 0.0;  // max column norm loss on the support block
    int support = 0;
};

/// Largest norm loss 1 - ||P D|n>||^2 over n < support, where P projects
/// onto the first n_cav levels.
inline DisplacementReport displacement_non_unitarity(cplx alpha, int n_cav, int support,
                                                     int pad = kDefaultPad) {
    const auto& engine = displacement_engine(n_cav + pad);
    const Matrix full = engine.matrix(alpha);
    DisplacementReport rep;
    rep.support = support;
    for (int n = 0; n < support; ++n) {
        const double kept = full.col(n).head(n_cav).squaredNorm();
        rep.non_unitarity = std::max(rep.non_unitarity, std::abs(1.0 - kept));
    }
    return rep;
}

/// D(alpha) built on an (n_cav + pad) workspace and projected to n_cav levels.
/// The support block defaults to the lower quarter of the truncation.
inline Operator displacement_op(cplx alpha, int n_cav, int pad = kDefaultPad,
                                double tol = 1e-8, int support = -1) {
    require(n_cav >= 1 && pad >= 0, "displacement_op: bad truncation");
    if (alpha == cplx{0.0, 0.0}) return identity(n_cav);
    if (support < 0) support = std::max(1, n_cav / 4);
    const auto& engine = displacement_engine(n_cav + pad);
    const Matrix full = engine.matrix(alpha);
    DisplacementReport rep;
    for (int n = 0; n < support; ++n) {
        const double kept = full.col(n).head(n_cav).squaredNorm();
        rep.non_unitarity = std::max(rep.non_unitarity, std::abs(1.0 - kept));
    }
    if (rep.non_unitarity > tol) {
        throw NumericalError("displacement_op: non-unitarity " +
                                 std::to_string(rep.non_unitarity) + " on support block",
                             rep.non_unitarity);
    }
    return full.topLeftCorner(n_cav, n_cav);
}

/// P_alpha = D(alpha) P D(alpha)^dag from the padded workspace, projected.
inline Operator displaced_parity(cplx alpha, int n_cav, int pad = kDefaultPad) {
    if (alpha == cplx{0.0, 0.0}) return parity_op(n_cav);
    const int n_work = n_cav + pad;
    const Matrix d = displacement_engine(n_work).matrix(alpha);
    const Matrix rows = d.topRows(n_cav);
    Vector sign(n_work);
    for (int k = 0; k < n_work; ++k) sign(k) = (k % 2 == 0) ? 1.0 : -1.0;
    return rows * sign.asDiagonal() * rows.adjoint();
}

/// Closed-form Fock matrix elements of P_alpha = D(2 alpha) P on the first
/// n levels. Uses <m|D(g)|k> = sqrt(k!/m!) g^(m-k) e^{-|g|^2/2} L_k^(m-k)(|g|^2)
/// for m >= k and the conjugate-symmetric form otherwise. Exact for any
/// alpha; no truncation edge.
inline Matrix displaced_parity_analytic(cplx alpha, int n) {
    require(n >= 1, "displaced_parity_analytic: n must be >= 1");
    const cplx g = 2.0 * alpha;
    const double x = std::norm(g);
    const double abs_g = std::abs(g);
    const double arg_g = std::arg(g);
    Matrix d = Matrix::Zero(n, n);
    std::vector<double> lag(static_cast<std::size_t>(n));
    std::vector<double> lf(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) lf[i] = std::lgamma(i + 1.0);
    const double log_abs_g = (abs_g > 0.0) ? std::log(abs_g) : 0.0;
    for (int k = 0; k < n; ++k) {  // k = |m - col|
        if (k > 0 && abs_g == 0.0) break;
        const int jmax = n - 1 - k;
        lag[0] = 1.0;
        if (jmax >= 1) lag[1] = 1.0 + k - x;
        for (int j = 1; j < jmax; ++j) {
            lag[j + 1] = ((2.0 * j + 1.0 + k - x) * lag[j] - (j + k) * lag[j - 1]) / (j + 1.0);
        }
        for (int j = 0; j <= jmax; ++j) {
            const double log_pref = 0.5 * (lf[j] - lf[j + k]) + k * log_abs_g - 0.5 * x;
            const double mag = std::exp(log_pref) * lag[j];
            // m >= col: g^k ; m < col: (-conj g)^k
            d(j + k, j) = std::polar(mag, k * arg_g);
            if (k > 0) d(j, j + k) = std::polar(mag, k * (kPi - arg_g));
        }
    }
    for (int c = 1; c < n; c += 2) d.col(c) *= -1.0;
    return d;
}

// ---------------------------------------------------------------------------
// Qubit operators

enum class Pauli { I = 0, X = 1, Y = 2, Z = 3 };

inline Operator pauli(Pauli p) {
    Operator s(2, 2);
    switch (p) {
        case Pauli::I: s << 1, 0, 0, 1; break;
        case Pauli::X: s << 0, 1, 1, 0; break;
        case Pauli::Y: s << 0, -kI, kI, 0; break;
        case Pauli::Z: s << 1, 0, 0, -1; break;
    }
    return s;
}

inline Operator pauli(int i) { return pauli(static_cast<Pauli>(i)); }

/// exp(-i theta/2 (cos(phi) sigma_y + sin(phi) sigma_x)): phi = 0 rotates
/// about y, phi = pi/2 about x. R(pi/2, 0)|g> = (|g> + |e>)/sqrt(2).
inline Operator qubit_rotation(double theta, double phi) {
    const Operator axis = std::cos(phi) * pauli(Pauli::Y) + std::sin(phi) * pauli(Pauli::X);
    return std::cos(theta / 2.0) * identity(2) - kI * std::sin(theta / 2.0) * axis;
}

// ---------------------------------------------------------------------------
// Joint states

class JointState {
public:
    enum class Kind { Pure, Density };

    /// Renormalizes drift up to 1e-6; anything larger is rejected.
    static JointState pure(Vector amplitudes, int n_cav) {
        require(n_cav >= 1 && amplitudes.size() == 2 * n_cav, "JointState::pure: dimension mismatch");
        const double nrm = amplitudes.norm();
        require(std::abs(nrm - 1.0) < 1e-6, "JointState::pure: norm " + std::to_string(nrm));
        amplitudes /= nrm;
        return JointState(n_cav, std::move(amplitudes));
    }

    static JointState density(Matrix rho, int n_cav) {
        require(n_cav >= 1 && rho.rows() == 2 * n_cav && rho.cols() == 2 * n_cav,
                "JointState::density: dimension mismatch");
        const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
        require(herm < 1e-8, "JointState::density: not Hermitian");
        rho = 0.5 * (rho + rho.adjoint()).eval();
        const double tr = rho.trace().real();
        require(std::abs(tr - 1.0) < 1e-6, "JointState::density: trace " + std::to_string(tr));
        rho /= tr;
        return JointState(n_cav, std::move(rho));
    }

    /// qubit (2) (x) cavity (n_cav); both factors are normalized first.
    static JointState product(const Vector& qubit, const Vector& cavity) {
        require(qubit.size() == 2, "JointState::product: qubit vector must have 2 entries");
        const int n = static_cast<int>(cavity.size());
        const Vector q = qubit / qubit.norm();
        const Vector c = cavity / cavity.norm();
        Vector v(2 * n);
        v.head(n) = q(0) * c;
        v.tail(n) = q(1) * c;
        return JointState(n, std::move(v));
    }

    int n_cav() const { return n_cav_; }
    int dim() const { return 2 * n_cav_; }
    Kind kind() const { return std::holds_alternative<Vector>(data_) ? Kind::Pure : Kind::Density; }
    bool is_pure() const { return kind() == Kind::Pure; }

    const Vector& vector() const {
        require(is_pure(), "JointState::vector: state is a density matrix");
        return std::get<Vector>(data_);
    }

    Matrix density_matrix() const {
        if (is_pure()) {
            const Vector& v = std::get<Vector>(data_);
            return v * v.adjoint();
        }
        return std::get<Matrix>(data_);
    }

    JointState to_density() const { return JointState(n_cav_, density_matrix()); }

    /// Strict invariant check; throws NumericalError on violation.
    void validate(const Tolerances& tol = {}) const {
        if (is_pure()) {
            const double nrm = vector().norm();
            if (std::abs(nrm - 1.0) > tol.state_norm)
                throw NumericalError("JointState: norm drift", std::abs(nrm - 1.0));
            return;
        }
        const Matrix& rho = std::get<Matrix>(data_);
        const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
        if (herm > tol.hermiticity) throw NumericalError("JointState: not Hermitian", herm);
        const double tr = std::abs(rho.trace().real() - 1.0);
        if (tr > tol.state_norm) throw NumericalError("JointState: trace drift", tr);
        Eigen::SelfAdjointEigenSolver<Matrix> solver(rho, Eigen::EigenvaluesOnly);
        const double mn = solver.eigenvalues().minCoeff();
        if (mn < -tol.min_eigenvalue) throw NumericalError("JointState: negative eigenvalue", mn);
    }

    /// Amplitudes (or blocks) with the qubit in |q>: block(q, q') is the
    /// n_cav x n_cav cavity block <q| rho |q'>.
    Matrix block(int q, int qp) const {
        const Matrix rho = density_matrix();
        return rho.block(q * n_cav_, qp * n_cav_, n_cav_, n_cav_);
    }

private:
    JointState(int n_cav, Vector v) : n_cav_(n_cav), data_(std::move(v)) {}
    JointState(int n_cav, Matrix m) : n_cav_(n_cav), data_(std::move(m)) {}

    int n_cav_;
    std::variant<Vector, Matrix> data_;
};

inline Vector qubit_ground() { Vector v(2); v << 1, 0; return v; }
inline Vector qubit_excited() { Vector v(2); v << 0, 1; return v; }

/// Amplitude vector a|g,c1> + b|e,c2>, unnormalized.
inline Vector joint_vector(cplx a, const Vector& c_g, cplx b, const Vector& c_e) {
    require(c_g.size() == c_e.size(), "joint_vector: cavity size mismatch");
    const auto n = c_g.size();
    Vector v(2 * n);
    v.head(n) = a * c_g;
    v.tail(n) = b * c_e;
    return v;
}

/// Kronecker product qubit (x) cavity in the documented basis order.
inline Operator embed(const Operator& qubit_op, const Operator& cavity_op) {
    require(qubit_op.rows() == 2 && qubit_op.cols() == 2, "embed: qubit operator must be 2x2");
    require(cavity_op.rows() == cavity_op.cols(), "embed: cavity operator must be square");
    const auto n = cavity_op.rows();
    Operator out(2 * n, 2 * n);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) out.block(a * n, b * n, n, n) = qubit_op(a, b) * cavity_op;
    return out;
}

inline cplx expectation(const JointState& state, const Operator& op) {
    require(op.rows() == state.dim() && op.cols() == state.dim(), "expectation: dimension mismatch");
    if (state.is_pure()) {
        const Vector& v = state.vector();
        return v.dot(op * v);
    }
    const Matrix rho = state.density_matrix();
    return (op * rho).trace();
}

/// Tr[(A (x) B) rho] without forming the joint operator.
inline cplx expectation(const JointState& state, const Operator& qubit_op, const Operator& cavity_op) {
    const int n = state.n_cav();
    require(cavity_op.rows() == n && cavity_op.cols() == n, "expectation: cavity dimension mismatch");
    cplx acc = 0.0;
    if (state.is_pure()) {
        const Vector& v = state.vector();
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                if (qubit_op(a, b) == cplx{0.0, 0.0}) continue;
                acc += qubit_op(a, b) * v.segment(a * n, n).dot(cavity_op * v.segment(b * n, n));
            }
        return acc;
    }
    const Matrix rho = state.density_matrix();
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            if (qubit_op(a, b) == cplx{0.0, 0.0}) continue;
            acc += qubit_op(a, b) * (cavity_op * rho.block(b * n, a * n, n, n)).trace();
        }
    return acc;
}

enum class Subsystem { Qubit, Cavity };

/// Traces out `traced`; returns the reduced density matrix of the other part.
inline Matrix partial_trace(const JointState& state, Subsystem traced) {
    const int n = state.n_cav();
    const Matrix rho = state.density_matrix();
    if (traced == Subsystem::Qubit) return rho.block(0, 0, n, n) + rho.block(n, n, n, n);
    Matrix q(2, 2);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) q(a, b) = rho.block(a * n, b * n, n, n).trace();
    return q;
}

inline double purity(const Matrix& rho) { return (rho * rho).trace().real(); }

/// <psi| rho |psi> for a target pure state (psi is normalized first).
inline double fidelity(const JointState& state, const Vector& psi) {
    require(psi.size() == state.dim(), "fidelity: dimension mismatch");
    const Vector t = psi / psi.norm();
    if (state.is_pure()) return std::norm(t.dot(state.vector()));
    return t.dot(state.density_matrix() * t).real();
}

/// Cavity-only helper: <psi| rho |psi>.
inline double fidelity(const Matrix& rho, const Vector& psi) {
    const Vector t = psi / psi.norm();
    return t.dot(rho * t).real();
}

/// Zero-pads or truncates a cavity vector to n levels.
inline Vector resize_cavity(const Vector& v, int n) {
    Vector out = Vector::Zero(n);
    const auto m = std::min<Eigen::Index>(n, v.size());
    out.head(m) = v.head(m);
    return out;
}

}  // namespace bellcat::hilbert
