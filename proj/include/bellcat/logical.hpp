#pragma once

// Cat-code encoded qubit on |beta>, |-beta>: logical observables as parity
// points, code-space projector, two-qubit Pauli set, DFE and witness.

#include <array>
#include <cmath>
#include <optional>

#include "bellcat/hilbert.hpp"
#include "bellcat/tomography.hpp"

namespace bellcat::logical {

using hilbert::JointState;
using tomography::ParityExpansion;

inline constexpr double kMinBeta = 0.05;

/// Parity points of the encoded Pauli set. With the chi sign used here,
/// <beta|P_{-i y}|-beta> = e^{-4 i y beta} e^{-2 y^2}, so the Y_c point sits
/// at -i pi / (8 beta) for real beta (rotated with arg(beta) otherwise).
struct LogicalFrame {
    cplx beta;

    explicit LogicalFrame(cplx b) : beta(b) {}

    double orthogonality() const { return std::exp(-4.0 * std::norm(beta)); }
    cplx x_point() const { return {0.0, 0.0}; }
    cplx y_point() const {
        require(std::abs(beta) >= kMinBeta, "LogicalFrame: |beta| too small for the Y_c point");
        return -kI * kPi * beta / (8.0 * std::norm(beta));
    }

    /// I_c, X_c, Y_c, Z_c as parity-point combinations.
    std::array<ParityExpansion, 4> expansions() const {
        std::array<ParityExpansion, 4> e;
        e[0].points = {{beta, 1.0}, {-beta, 1.0}};
        e[1].points = {{x_point(), 1.0}};
        e[2].points = {{y_point(), 1.0}};
        e[3].points = {{beta, 1.0}, {-beta, -1.0}};
        return e;
    }
};

/// Cavity operators {I_c, X_c, Y_c, Z_c} on n_cav levels.
inline std::array<Operator, 4> logical_observables(cplx beta, int n_cav) {
    const auto exp = LogicalFrame(beta).expansions();
    std::array<Operator, 4> ops;
    for (int j = 0; j < 4; ++j) {
        ops[j] = Operator::Zero(n_cav, n_cav);
        for (const auto& [pt, c] : exp[j].points) ops[j] += c * hilbert::displaced_parity_analytic(pt, n_cav);
    }
    return ops;
}

/// M = |beta><beta| + |-beta><-beta|.
inline Operator logical_projector(cplx beta, int n_cav, double leakage_tol = 1e-8) {
    require(std::abs(beta) >= kMinBeta, "logical_projector: code collapses for |beta| < 0.05");
    const Vector p = hilbert::coherent_state(beta, n_cav, leakage_tol).normalized();
    const Vector m = hilbert::coherent_state(-beta, n_cav, leakage_tol).normalized();
    return p * p.adjoint() + m * m.adjoint();
}

struct Correlations {
    double ii = 0, xx = 0, yy = 0, zz = 0;
};

/// 1/4 (II + XX - YY + ZZ); above 1/2 rules out classical correlation.
inline double dfe(const Correlations& c) { return 0.25 * (c.ii + c.xx - c.yy + c.zz); }

enum class WitnessForm {
    Text,    // II - XX + YY - ZZ
    Figure,  // II - ZZ - XX + YY
};

/// Negative values flag entanglement with the target Bell-cat. Both forms
/// carry the same four terms and evaluate identically.
inline double witness(const Correlations& c, WitnessForm form = WitnessForm::Text) {
    if (form == WitnessForm::Text) return c.ii - c.xx + c.yy - c.zz;
    return c.ii - c.zz - c.xx + c.yy;
}

/// 16 correlations <sigma_i sigma^c_j>, row i = qubit Pauli, column j = code Pauli.
using PauliSet = std::array<std::array<double, 4>, 4>;

/// Projector route: <sigma_i (x) M L_j M> on a joint state.
inline PauliSet pauli_set_16(const JointState& state, cplx beta) {
    const int n = state.n_cav();
    const auto obs = logical_observables(beta, n);
    const Operator m = logical_projector(beta, n, 1e-3);
    PauliSet out{};
    for (int j = 0; j < 4; ++j) {
        const Operator proj = m * obs[j] * m;
        for (int i = 0; i < 4; ++i) out[i][j] = hilbert::expectation(state, hilbert::pauli(i), proj).real();
    }
    return out;
}

/// Grid route: Wigner overlaps at the parity points.
inline PauliSet pauli_set_16(const tomography::WignerGrid& w, cplx beta) {
    const auto exp = LogicalFrame(beta).expansions();
    PauliSet out{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) out[i][j] = tomography::observable_from_wigner(w, hilbert::pauli(i), exp[j]);
    return out;
}

inline Correlations diagonal(const PauliSet& p) { return {p[0][0], p[1][1], p[2][2], p[3][3]}; }

/// Maximum von Neumann entropy of the code space in bits, with eigenvalues
/// eta = (1 +- e^{-2|beta|^2}) / 2.
inline double encoded_entropy(cplx beta) {
    const double o = std::exp(-2.0 * std::norm(beta));
    double s = 0.0;
    for (double eta : {0.5 * (1.0 + o), 0.5 * (1.0 - o)})
        if (eta > 0.0) s -= eta * std::log2(eta);
    return s;
}

/// Qubit decay during the pi / chi wait: gamma = pi / (chi T1).
inline double preparation_gamma(double chi, double t1) { return kPi / (chi * t1); }

struct PreparationOffsets {
    double ii = 1, zi = 0, iz = 0, zz = 1;
};

/// Leading-order shifts of the diagonal correlations from qubit decay
/// (gamma) and the pi-pulse under-rotation (delta_theta).
inline PreparationOffsets preparation_error_predictions(double gamma, double delta_theta) {
    require(gamma >= 0.0, "preparation_error_predictions: gamma must be >= 0");
    const double e = std::exp(-gamma);
    const double shift = 0.5 * (1.0 - e) + 0.25 * kPi * delta_theta;
    return {0.5 * (1.0 + e), shift, shift, 0.5 * (1.0 + e)};
}

}  // namespace bellcat::logical
