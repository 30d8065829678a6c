#pragma once

// Decoherence channels and detector imperfections, both as maps on density
// matrices and as closed-form corrections.

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "bellcat/config.hpp"
#include "bellcat/hilbert.hpp"

namespace bellcat::noise {

using hilbert::JointState;

/// Complete Kraus set of single-photon loss with survival eta on n levels:
/// A_k = sum_n sqrt(C(n,k) eta^(n-k) (1-eta)^k) |n-k><n|.
inline std::vector<Matrix> damping_kraus(int n_cav, double eta) {
    require(eta >= 0.0 && eta <= 1.0, "damping_kraus: survival must lie in [0, 1]");
    std::vector<Matrix> ops;
    for (int k = 0; k < n_cav; ++k) {
        Matrix a = Matrix::Zero(n_cav, n_cav);
        for (int n = k; n < n_cav; ++n) {
            const double log_binom = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
            double w = std::exp(0.5 * log_binom);
            w *= std::pow(eta, 0.5 * (n - k)) * std::pow(1.0 - eta, 0.5 * k);
            a(n - k, n) = w;
        }
        ops.push_back(std::move(a));
    }
    return ops;
}

/// Applies the loss channel to one n x n cavity operator block.
/// Equivalent to sum_k A_k X A_k^dag; evaluated elementwise in O(n^3).
inline Matrix damp_block(const Matrix& x, double eta) {
    const auto n = static_cast<int>(x.rows());
    if (eta >= 1.0) return x;
    Matrix out = Matrix::Zero(n, n);
    std::vector<double> lf(static_cast<std::size_t>(2 * n + 1));
    for (std::size_t i = 0; i < lf.size(); ++i) lf[i] = std::lgamma(static_cast<double>(i) + 1.0);
    const double log_eta = std::log(eta);
    const double log_loss = (eta < 1.0) ? std::log(1.0 - eta) : -INFINITY;
    for (int m = 0; m < n; ++m) {
        for (int c = 0; c < n; ++c) {
            cplx acc = 0.0;
            for (int k = 0; m + k < n && c + k < n; ++k) {
                if (k > 0 && eta >= 1.0) break;
                const double lb = 0.5 * (lf[m + k] - lf[k] - lf[m] + lf[c + k] - lf[k] - lf[c]);
                const double lw = lb + 0.5 * (m + c) * log_eta + (k > 0 ? k * log_loss : 0.0);
                acc += std::exp(lw) * x(m + k, c + k);
            }
            out(m, c) = acc;
        }
    }
    return out;
}

/// Cavity amplitude damping for time t with energy decay time tau_s.
inline JointState cavity_damping(const JointState& state, double t, double tau_s) {
    require(t >= 0.0 && tau_s > 0.0, "cavity_damping: need t >= 0 and tau_s > 0");
    if (t == 0.0) return state.to_density();
    const double eta = std::exp(-t / tau_s);
    const int n = state.n_cav();
    const Matrix rho = state.density_matrix();
    Matrix out(2 * n, 2 * n);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            out.block(a * n, b * n, n, n) = damp_block(rho.block(a * n, b * n, n, n), eta);
    return JointState::density(std::move(out), n);
}

/// Qubit amplitude damping |e> -> |g> with probability p.
inline JointState qubit_decay(const JointState& state, double p) {
    require(p >= 0.0 && p <= 1.0, "qubit_decay: p must lie in [0, 1]");
    const int n = state.n_cav();
    Matrix rho = state.density_matrix();
    const double s = std::sqrt(1.0 - p);
    rho.block(0, 0, n, n) += p * rho.block(n, n, n, n);
    rho.block(0, n, n, n) *= s;
    rho.block(n, 0, n, n) *= s;
    rho.block(n, n, n, n) *= (1.0 - p);
    return JointState::density(std::move(rho), n);
}

/// Scales qubit coherences by `factor` (pure dephasing contrast).
inline JointState qubit_dephasing(const JointState& state, double factor) {
    const int n = state.n_cav();
    Matrix rho = state.density_matrix();
    rho.block(0, n, n, n) *= factor;
    rho.block(n, 0, n, n) *= factor;
    return JointState::density(std::move(rho), n);
}

enum class Detector { Qubit, Cavity };

/// Probability that the detector reports the true value.
inline double report_fidelity(int true_outcome, Detector which, const NoiseModel& model) {
    if (!model.active(model.flags.detector_flips)) return 1.0;
    if (which == Detector::Cavity) return model.f_c;
    return true_outcome > 0 ? model.p_gg : model.p_ee;
}

/// Qubit flips are asymmetric (P(g|g), P(e|e)); parity flips symmetric with F_c.
template <class Rng>
int detector_flip(int true_outcome, Detector which, const NoiseModel& model, Rng& rng) {
    require(true_outcome == 1 || true_outcome == -1, "detector_flip: outcome must be +-1");
    const double keep = report_fidelity(true_outcome, which, model);
    if (keep >= 1.0) return true_outcome;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return u(rng) < keep ? true_outcome : -true_outcome;
}

/// <AB> after reset decay: (1 - p_c) <AB> - p_c <B>.
inline double crosstalk_adjust(double ab, double b, double p_c) { return (1.0 - p_c) * ab - p_c * b; }

/// Contrast of correlated observables from readout fidelities alone.
inline double visibility_estimate(double f_q, double f_c) { return (2.0 * f_q - 1.0) * (2.0 * f_c - 1.0); }

inline double visibility_predicted(double f_q, double f_c, double p_c) {
    return (1.0 - p_c) * visibility_estimate(f_q, f_c);
}

/// Forward rotation-error model: pi pulses become pi (1 - delta_theta).
struct RotationErrorModel {
    double delta_theta = 0.0;

    double pi_pulse_angle() const { return kPi * (1.0 - delta_theta); }
    /// Tilt of the measured axis away from -Z towards X, radians.
    double axis_tilt() const { return kPi * delta_theta; }
};

inline RotationErrorModel rotation_error_model(double delta_theta) {
    require(delta_theta >= 0.0 && delta_theta < 1.0, "rotation_error_model: delta_theta must lie in [0, 1)");
    return {delta_theta};
}

/// Inverts <ZZ_c> tan(theta) = sqrt(<ZX_c>^2 + <ZY_c>^2); returns theta / pi.
inline double infer_delta_theta(double zz, double zx, double zy) {
    return std::atan2(std::hypot(zx, zy), std::abs(zz)) / kPi;
}

/// Damping interval lumped between preparation and cavity detection; the
/// preparation itself already accounts for pi / chi of loss.
inline double lumped_damping_time(const NoiseModel& model, double chi) {
    return std::max(0.0, model.t_eff() - kPi / chi);
}

inline JointState apply_lumped_damping(const JointState& state, const NoiseModel& model, double chi) {
    JointState out = state;
    if (model.active(model.flags.cavity_damping)) {
        const double t = lumped_damping_time(model, chi);
        if (t > 0.0) out = cavity_damping(out, t, model.tau_s());
    }
    if (model.active(model.flags.dephasing)) {
        const double t_phi_inv = std::max(0.0, 1.0 / model.t2() - 0.5 / model.t1());
        out = qubit_dephasing(out, std::exp(-model.t_eff() * t_phi_inv));
    }
    return out;
}

/// Decay time inside [0, tau_wait] given that a decay happened, from the
/// truncated exponential with the T1 rate.
template <class Rng>
double sample_decay_time(const NoiseModel& model, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double span = 1.0 - std::exp(-model.tau_wait() / model.t1());
    return -model.t1() * std::log(1.0 - u(rng) * span);
}

/// Gauss-Legendre nodes and normalized weights for the same distribution.
inline std::vector<std::pair<double, double>> decay_time_quadrature(const NoiseModel& model) {
    using Rule = boost::math::quadrature::gauss<double, 16>;
    const auto& x = Rule::abscissa();
    const auto& w = Rule::weights();
    const double tau = model.tau_wait();
    const double t1 = model.t1();
    std::vector<std::pair<double, double>> nodes;
    auto add = [&](double xi, double wi) {
        const double t = 0.5 * tau * (xi + 1.0);
        nodes.emplace_back(t, wi * std::exp(-t / t1));
    };
    for (std::size_t i = 0; i < x.size(); ++i) {
        add(x[i], w[i]);
        if (x[i] != 0.0) add(-x[i], w[i]);
    }
    double total = 0.0;
    for (const auto& [t, wt] : nodes) total += wt;
    for (auto& [t, wt] : nodes) wt /= total;
    return nodes;
}

}  // namespace bellcat::noise
