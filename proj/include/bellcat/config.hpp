#pragma once

// Physical parameters, noise model, truncations and grid geometry.
// Times are stored in the unit named by the field; accessors return SI.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "bellcat/common.hpp"

namespace bellcat {

/// Dispersive Hamiltonian parameters. Only chi_qs is evolved; the rest are
/// recorded for completeness.
struct HamiltonianParams {
    double chi_qs_over_2pi_mhz = 1.43;
    double omega_q_over_2pi_ghz = 5.7651;
    double omega_s_over_2pi_ghz = 7.2164;
    double omega_r_over_2pi_ghz = 8.1740;
    double k_q_over_2pi_mhz = 240.0;
    double k_s_over_2pi_khz = 1.5;
    double k_r_over_2pi_khz = 2.0;
    double chi_qr_over_2pi_mhz = 1.0;
    double chi_rs_over_2pi_khz = 1.7;

    /// chi in rad/s.
    double chi() const { return 2.0 * kPi * chi_qs_over_2pi_mhz * 1e6; }

    bool operator==(const HamiltonianParams&) const = default;
};

struct NoiseFlags {
    bool cavity_damping = true;
    bool qubit_decay = true;       // T1 during preparation
    bool detector_flips = true;    // F_q, F_c
    bool reset_decay = true;       // p_c cross-talk during feedback reset
    bool init_failure = true;      // imperfect |g> purification
    bool rotation_error = true;    // under-rotated pi pre-rotations
    bool dephasing = false;        // optional T2 contrast factor
    bool photon_dependent_fc = false;  // hook only; no functional form is modeled

    bool operator==(const NoiseFlags&) const = default;
};

/// Decoherence and detector imperfections.
struct NoiseModel {
    bool enabled = true;
    double tau_s_us = 55.0;
    double t1_us = 10.0;
    double t2_us = 10.0;
    double p_gg = 0.985;
    double p_ee = 0.975;
    double f_c = 0.955;
    std::optional<double> p_c;  // unset: 1 - exp(-tau_wait / T1)
    double tau_wait_ns = 740.0;
    double t_eff_us = 1.24;
    double init_success = 0.99;
    double rotation_error = 0.042;  // fractional under-rotation of pi pulses
    NoiseFlags flags{};

    double tau_s() const { return tau_s_us * 1e-6; }
    double t1() const { return t1_us * 1e-6; }
    double t2() const { return t2_us * 1e-6; }
    double tau_wait() const { return tau_wait_ns * 1e-9; }
    double t_eff() const { return t_eff_us * 1e-6; }
    double f_q() const { return 0.5 * (p_gg + p_ee); }
    double reset_decay_probability() const {
        return p_c.value_or(1.0 - std::exp(-tau_wait() / t1()));
    }

    bool active(bool flag) const { return enabled && flag; }

    void validate() const {
        require(tau_s_us > 0 && t1_us > 0 && t2_us > 0 && t_eff_us > 0 && tau_wait_ns > 0,
                "noise: all times must be > 0");
        for (double f : {p_gg, p_ee, f_c})
            require(f >= 0.5 && f <= 1.0, "noise: detector fidelities must lie in [0.5, 1]");
        const double pc = reset_decay_probability();
        require(pc >= 0.0 && pc <= 1.0, "noise: p_c must lie in [0, 1]");
        require(init_success >= 0.0 && init_success <= 1.0, "noise: init_success must lie in [0, 1]");
        require(rotation_error >= 0.0 && rotation_error < 1.0, "noise: rotation_error must lie in [0, 1)");
    }

    /// Everything off: ideal detectors and no decoherence.
    static NoiseModel off() {
        NoiseModel m;
        m.enabled = false;
        return m;
    }

    bool operator==(const NoiseModel&) const = default;
};

struct GridGeometry {
    double alpha_max = 3.4;
    double alpha_step = 0.085;

    int points_per_axis() const {
        return static_cast<int>(std::lround(2.0 * alpha_max / alpha_step)) + 1;
    }
    double coordinate(int i) const { return -alpha_max + alpha_step * i; }

    bool operator==(const GridGeometry&) const = default;
};

struct Truncation {
    int n_sim = 40;  // simulation cavity levels
    int n_pad = 30;  // extra workspace levels for displacements
    int n_mle = 12;  // reconstruction cavity levels

    bool operator==(const Truncation&) const = default;
};

struct MleSettings {
    int max_iterations = 4000;
    double tolerance = 1e-10;  // relative objective change
    bool fit_visibility = true;
    int bootstrap_resamples = 40;

    bool operator==(const MleSettings&) const = default;
};

struct ExperimentConfig {
    HamiltonianParams hamiltonian{};
    NoiseModel noise{};
    GridGeometry grid{};
    Truncation truncation{};
    MleSettings mle{};
    Tolerances tolerances{};
    int shots = 4000;
    std::uint64_t master_seed = 20141027;

    void validate() const {
        require(hamiltonian.chi_qs_over_2pi_mhz > 0, "config: chi must be > 0");
        noise.validate();
        require(grid.alpha_max > 0 && grid.alpha_step > 0, "config: grid extent and step must be > 0");
        require(truncation.n_sim >= 2 && truncation.n_pad >= 0 && truncation.n_mle >= 2,
                "config: bad truncation");
        require(shots >= 1, "config: shots must be >= 1");
        require(mle.max_iterations >= 1 && mle.bootstrap_resamples >= 0, "config: bad MLE settings");
    }

    bool operator==(const ExperimentConfig&) const = default;
};

/// Table values of the reference device, with p_c from the decay formula.
inline ExperimentConfig paper_preset() { return ExperimentConfig{}; }

/// Same as paper_preset but with the quoted p_c = 0.06 instead of the formula.
inline ExperimentConfig paper_pc06_preset() {
    ExperimentConfig c;
    c.noise.p_c = 0.06;
    return c;
}

inline ExperimentConfig noiseless_preset() {
    ExperimentConfig c;
    c.noise = NoiseModel::off();
    return c;
}

}  // namespace bellcat
