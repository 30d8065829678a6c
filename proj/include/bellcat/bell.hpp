#pragma once

// CHSH tests between the qubit and the encoded cavity qubit: observables,
// the optimal-displacement root, analytic model curves and Monte Carlo sweeps.

#include <array>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "bellcat/config.hpp"
#include "bellcat/hilbert.hpp"
#include "bellcat/logical.hpp"
#include "bellcat/protocol.hpp"

namespace bellcat::bell {

using hilbert::JointState;
using hilbert::Pauli;

inline double chsh(double aa, double ab, double ba, double bb) { return aa + ab - ba + bb; }

/// Z(theta) = Z cos(theta) - X sin(theta), X(theta) = X cos(theta) + Z sin(theta).
/// theta = -pi/4 gives A = (X + Z)/sqrt(2), B = (X - Z)/sqrt(2).
inline std::pair<Operator, Operator> qubit_observables_test1(double theta) {
    const Operator z = hilbert::pauli(Pauli::Z), x = hilbert::pauli(Pauli::X);
    return {z * std::cos(theta) - x * std::sin(theta), x * std::cos(theta) + z * std::sin(theta)};
}

/// R_y pulse angles that map Z(theta) and X(theta) onto the Z readout.
inline std::pair<double, double> qubit_angles_test1(double theta) { return {theta, theta - kPi / 2}; }

/// X_c(alpha) = P_{-i alpha} and Y_c(alpha) = P_{-i alpha + Y_c point}: the
/// logical X/Y pair rotated by roughly 4 alpha beta.
inline std::pair<Operator, Operator> cavity_observables_test2(double alpha, cplx beta, int n_cav) {
    const logical::LogicalFrame f(beta);
    const cplx shift = -kI * alpha * (beta / std::abs(beta));
    return {hilbert::displaced_parity_analytic(f.x_point() + shift, n_cav),
            hilbert::displaced_parity_analytic(f.y_point() + shift, n_cav)};
}

/// Parity points used as A_c and B_c in test 2: P_{-i alpha} ~ (X_c + Y_c)/sqrt(2)
/// and P_{+i alpha} ~ (X_c - Y_c)/sqrt(2) near the optimum.
inline std::pair<cplx, cplx> cavity_points_test2(double alpha) { return {-kI * alpha, kI * alpha}; }

/// Root of (beta - a)/(beta + a) = tan(4 a beta) on (0, min(pi/(8 beta), beta)).
inline double optimal_displacement(double beta, double tol = 1e-12) {
    require(beta > 0.0, "optimal_displacement: beta must be > 0");
    auto f = [beta](double a) { return (beta - a) / (beta + a) - std::tan(4.0 * a * beta); };
    const double lo = 0.0;
    const double hi = std::min(kPi / (8.0 * beta) * (1.0 - 1e-12), beta);
    const double f_lo = f(lo), f_hi = f(hi);
    if (!(f_lo > 0.0 && f_hi < 0.0))
        throw NumericalError("optimal_displacement: no sign change in bracket", beta);
    std::uintmax_t iters = 200;
    auto stop = [tol](double a, double b) { return std::abs(b - a) <= tol; };
    const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, f_lo, f_hi, stop, iters);
    if (iters >= 200) throw NumericalError("optimal_displacement: no convergence", std::abs(b - a));
    return 0.5 * (a + b);
}

struct ModelCurves1 {
    double o_ideal, o_vis, o_loss, o_pred;
};

/// Test 1 curves. The loss term enters with a plus sign so that O_loss
/// reduces to O_ideal when gamma -> 0.
inline ModelCurves1 model_curves_test1(double beta, double v, double gamma) {
    const double b2 = beta * beta;
    const double ideal = std::sqrt(2.0) * (2.0 - std::exp(-8.0 * b2));
    const double loss = std::sqrt(2.0) * (1.0 - std::exp(-8.0 * b2) + std::exp(-2.0 * gamma * b2));
    return {ideal, v * ideal, loss, v * loss};
}

struct ModelCurves2 {
    double alpha0, o_ideal, o_pred;
};

inline ModelCurves2 model_curves_test2(double beta, double v, double gamma) {
    const double a0 = optimal_displacement(beta);
    const double x = 4.0 * a0 * beta;
    const double ideal = 2.0 * (std::cos(x) + std::sin(x)) * std::exp(-2.0 * a0 * a0);
    return {a0, ideal, v * std::exp(-2.0 * gamma * beta * beta) * ideal};
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct SubResult {
    std::array<double, 4> corr{};  // <AA_c>, <AB_c>, <BA_c>, <BB_c>
    double o = 0.0;
    double sigma = 0.0;
    long long shots = 0;           // per experiment
};

struct BellResult {
    int test_id = 1;
    double beta = 0.0;
    double param = 0.0;            // theta (test 1) or alpha (test 2)
    std::array<double, 4> corr{};
    double o = 0.0;
    double sigma = 0.0;
    long long shots = 0;           // per experiment, all permutations
    int experiments = 0;           // (qubit observable, parity point) pairs
    std::array<SubResult, 4> per_setting{};  // one per detector permutation
};

namespace detail {

/// One (qubit observable, parity point) measurement and the CHSH weight of
/// each of the four correlations it feeds.
struct Experiment {
    int qubit_obs;            // 0: A, 1: B
    cplx point;
    std::array<double, 4> weight;  // contribution to corr[0..3]
};

inline std::vector<Experiment> experiments(int test_id, double beta, double param) {
    std::vector<Experiment> ex;
    if (test_id == 1) {
        // A_c = Z_c = P_beta - P_-beta, B_c = X_c = P_0
        ex.push_back({0, beta, {1, 0, 0, 0}});
        ex.push_back({0, -beta, {-1, 0, 0, 0}});
        ex.push_back({0, 0.0, {0, 1, 0, 0}});
        ex.push_back({1, beta, {0, 0, 1, 0}});
        ex.push_back({1, -beta, {0, 0, -1, 0}});
        ex.push_back({1, 0.0, {0, 0, 0, 1}});
    } else {
        const auto [pa, pb] = cavity_points_test2(param);
        ex.push_back({0, pa, {1, 0, 0, 0}});
        ex.push_back({0, pb, {0, 1, 0, 0}});
        ex.push_back({1, pa, {0, 0, 1, 0}});
        ex.push_back({1, pb, {0, 0, 0, 1}});
    }
    return ex;
}

/// Qubit pre-rotation for observable q and detector sign. Negative signs
/// append a pi pulse, which carries the under-rotation.
inline Operator qubit_prerotation(int test_id, double param, int q, int sign, double dtheta) {
    if (test_id == 2) {
        return protocol::prerotation(protocol::make_setting(q == 0 ? Pauli::X : Pauli::Y, sign), dtheta);
    }
    const auto [ta, tb] = qubit_angles_test1(param);
    const double base = (q == 0) ? ta : tb;
    return hilbert::qubit_rotation(base + (sign < 0 ? kPi * (1.0 - dtheta) : 0.0), 0.0);
}

inline void finish(SubResult& r, const std::vector<Experiment>& ex, const std::vector<double>& means, long long n) {
    r.corr = {};
    double var = 0.0;
    for (std::size_t e = 0; e < ex.size(); ++e) {
        double w_o = 0.0;
        for (int c = 0; c < 4; ++c) {
            r.corr[c] += ex[e].weight[c] * means[e];
            w_o += ex[e].weight[c] * (c == 2 ? -1.0 : 1.0);
        }
        var += w_o * w_o * (1.0 - means[e] * means[e]) / static_cast<double>(n);
    }
    r.o = chsh(r.corr[0], r.corr[1], r.corr[2], r.corr[3]);
    r.sigma = std::sqrt(var);
    r.shots = n;
}

}  // namespace detail

/// Shot-by-shot CHSH estimate for one (beta, parameter) cell. Each
/// experiment runs `shots` per detector permutation (qubit sign x Ramsey
/// sign); the pooled result combines all four.
inline BellResult bell_cell(int test_id, double beta, double param, const ExperimentConfig& cfg, int shots,
                            std::uint64_t seed, std::uint64_t cell_index = 0) {
    require(test_id == 1 || test_id == 2, "bell_cell: test_id must be 1 or 2");
    require(shots >= 1, "bell_cell: shots must be >= 1");
    require(beta >= 0.0, "bell_cell: beta must be >= 0");
    const JointState state = protocol::detection_state(beta, cfg);
    const protocol::ShotSampler sampler(state, cfg);
    const NoiseModel& nm = cfg.noise;
    const double dtheta = nm.active(nm.flags.rotation_error) ? nm.rotation_error : 0.0;
    const auto ex = detail::experiments(test_id, beta, param);

    BellResult res;
    res.test_id = test_id;
    res.beta = beta;
    res.param = param;
    res.experiments = static_cast<int>(ex.size());
    std::vector<double> pooled(ex.size(), 0.0);
    std::array<std::vector<double>, 4> per;
    for (auto& p : per) p.assign(ex.size(), 0.0);

    for (std::size_t e = 0; e < ex.size(); ++e) {
        for (int perm = 0; perm < 4; ++perm) {
            const int qs = (perm < 2) ? 1 : -1;
            const int rs = (perm % 2 == 0) ? 1 : -1;
            const Operator rot = detail::qubit_prerotation(test_id, param, ex[e].qubit_obs, qs, dtheta);
            long long acc = 0;
            for (int shot = 0; shot < shots; ++shot) {
                const std::uint64_t stream = protocol::stream_seed(
                    {seed, cell_index, static_cast<std::uint64_t>(e), static_cast<std::uint64_t>(perm),
                     static_cast<std::uint64_t>(shot)});
                const auto [a, b] = sampler.sample_outcomes(rot, rs, ex[e].point, nm, stream);
                acc += qs * rs * a * b;
            }
            const double m = static_cast<double>(acc) / shots;
            per[perm][e] = m;
            pooled[e] += 0.25 * m;
        }
    }
    SubResult all;
    detail::finish(all, ex, pooled, 4LL * shots);
    res.corr = all.corr;
    res.o = all.o;
    res.sigma = all.sigma;
    res.shots = all.shots;
    for (int perm = 0; perm < 4; ++perm) detail::finish(res.per_setting[perm], ex, per[perm], shots);
    return res;
}

/// Cells over beta_list x param_list, row-major; cell index keys the RNG.
inline std::vector<BellResult> bell_sweep(int test_id, const std::vector<double>& beta_list,
                                          const std::vector<double>& param_list, const ExperimentConfig& cfg,
                                          int shots, std::uint64_t seed) {
    std::vector<BellResult> out;
    std::uint64_t cell = 0;
    for (double b : beta_list)
        for (double p : param_list) out.push_back(bell_cell(test_id, b, p, cfg, shots, seed, cell++));
    return out;
}

/// Noiseless expectation of O from operator algebra, for reference.
inline double exact_chsh(int test_id, double beta, double param, const JointState& state) {
    const int n = state.n_cav();
    const auto ex = detail::experiments(test_id, beta, param);
    std::array<double, 4> corr{};
    for (const auto& e : ex) {
        Operator qop;
        if (test_id == 1) {
            const auto [a, b] = qubit_observables_test1(param);
            qop = (e.qubit_obs == 0) ? a : b;
        } else {
            qop = hilbert::pauli(e.qubit_obs == 0 ? Pauli::X : Pauli::Y);
        }
        const double m = hilbert::expectation(state, qop, hilbert::displaced_parity_analytic(e.point, n)).real();
        for (int c = 0; c < 4; ++c) corr[c] += e.weight[c] * m;
    }
    return chsh(corr[0], corr[1], corr[2], corr[3]);
}

}  // namespace bellcat::bell
