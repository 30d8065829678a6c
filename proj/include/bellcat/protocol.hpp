#pragma once

// Circuits of the experiment: Bell-cat preparation, Ramsey parity mapping and
// sequential qubit/cavity detection with feedback.
//
// Frame: only the dispersive cross term acts, |e,n> -> e^{+i chi n t} |e,n>.
// Outcome labels: +1 means the qubit was found in |g>.

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "bellcat/config.hpp"
#include "bellcat/hilbert.hpp"
#include "bellcat/noise.hpp"

namespace bellcat::protocol {

using hilbert::JointState;
using hilbert::Pauli;

// ---------------------------------------------------------------------------
// Random streams

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed derived from an ordered key tuple, e.g. (master, cell, shot).
inline std::uint64_t stream_seed(std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = 0x6a09e667f3bcc909ULL;
    for (auto k : keys) h = splitmix64(h ^ splitmix64(k));
    return h;
}

// ---------------------------------------------------------------------------
// Detector settings

/// Qubit pre-rotations before the first detection; +Z/-Z, +X/-X, +Y/-Y.
enum class QubitSetting { PlusZ, MinusZ, PlusX, MinusX, PlusY, MinusY };

inline Pauli setting_axis(QubitSetting s) {
    switch (s) {
        case QubitSetting::PlusZ:
        case QubitSetting::MinusZ: return Pauli::Z;
        case QubitSetting::PlusX:
        case QubitSetting::MinusX: return Pauli::X;
        default: return Pauli::Y;
    }
}

inline int setting_sign(QubitSetting s) {
    return (s == QubitSetting::PlusZ || s == QubitSetting::PlusX || s == QubitSetting::PlusY) ? 1 : -1;
}

inline QubitSetting make_setting(Pauli axis, int sign) {
    require(axis != Pauli::I && (sign == 1 || sign == -1), "make_setting: need X, Y or Z and sign +-1");
    const int base = (axis == Pauli::Z) ? 0 : (axis == Pauli::X) ? 2 : 4;
    return static_cast<QubitSetting>(base + (sign > 0 ? 0 : 1));
}

/// Rotation U with U^dag Z U = sign * axis. Only the pi pulse of -Z carries
/// the under-rotation delta_theta.
inline Operator prerotation(QubitSetting s, double delta_theta = 0.0) {
    switch (s) {
        case QubitSetting::PlusZ: return hilbert::identity(2);
        case QubitSetting::MinusZ: return hilbert::qubit_rotation(kPi * (1.0 - delta_theta), 0.0);
        case QubitSetting::PlusX: return hilbert::qubit_rotation(-kPi / 2, 0.0);
        case QubitSetting::MinusX: return hilbert::qubit_rotation(kPi / 2, 0.0);
        case QubitSetting::PlusY: return hilbert::qubit_rotation(kPi / 2, kPi / 2);
        case QubitSetting::MinusY: return hilbert::qubit_rotation(-kPi / 2, kPi / 2);
    }
    return hilbert::identity(2);
}

struct DetectorSetting {
    QubitSetting qubit = QubitSetting::PlusZ;
    int ramsey_sign = 1;
    cplx alpha{0.0, 0.0};

    bool operator==(const DetectorSetting&) const = default;
};

struct ShotRecord {
    DetectorSetting setting;
    int outcome_qubit = 1;
    int outcome_cavity = 1;
    std::uint64_t rng_stream = 0;

    /// Outcome product with both detector signs undone: a sample of
    /// <sigma_axis P_alpha>.
    int correlation() const {
        return setting_sign(setting.qubit) * setting.ramsey_sign * outcome_qubit * outcome_cavity;
    }
    /// Sample of <P_alpha> ignoring the qubit.
    int parity() const { return setting.ramsey_sign * outcome_cavity; }
};

/// The four balanced detector permutations (qubit sign x Ramsey sign).
inline std::array<DetectorSetting, 4> permutations(Pauli axis, cplx alpha) {
    return {DetectorSetting{make_setting(axis, 1), 1, alpha}, DetectorSetting{make_setting(axis, 1), -1, alpha},
            DetectorSetting{make_setting(axis, -1), 1, alpha}, DetectorSetting{make_setting(axis, -1), -1, alpha}};
}

// ---------------------------------------------------------------------------
// State maps

inline JointState dispersive_evolve(const JointState& state, double t, double chi) {
    const int n = state.n_cav();
    const Vector d = hilbert::number_phases(n, chi * t);
    if (state.is_pure()) {
        Vector v = state.vector();
        v.tail(n) = v.tail(n).cwiseProduct(d);
        return JointState::pure(std::move(v), n);
    }
    Matrix rho = state.density_matrix();
    rho.bottomRows(n) = d.asDiagonal() * rho.bottomRows(n);
    rho.rightCols(n) = rho.rightCols(n) * d.conjugate().asDiagonal();
    return JointState::density(std::move(rho), n);
}

inline JointState apply_qubit(const JointState& state, const Operator& u) {
    const int n = state.n_cav();
    if (state.is_pure()) {
        const Vector& v = state.vector();
        Vector out(2 * n);
        out.head(n) = u(0, 0) * v.head(n) + u(0, 1) * v.tail(n);
        out.tail(n) = u(1, 0) * v.head(n) + u(1, 1) * v.tail(n);
        return JointState::pure(std::move(out), n);
    }
    const Operator full = hilbert::embed(u, hilbert::identity(n));
    return JointState::density(full * state.density_matrix() * full.adjoint(), n);
}

inline JointState apply_cavity(const JointState& state, const Operator& op) {
    const int n = state.n_cav();
    if (state.is_pure()) {
        const Vector& v = state.vector();
        Vector out(2 * n);
        out.head(n) = op * v.head(n);
        out.tail(n) = op * v.tail(n);
        return JointState::pure(std::move(out), n);
    }
    const Operator full = hilbert::embed(hilbert::identity(2), op);
    return JointState::density(full * state.density_matrix() * full.adjoint(), n);
}

/// (|g,beta> + |e,-beta>) / sqrt(2).
inline Vector bell_cat_vector(cplx beta, int n_cav, double leakage_tol = 1e-8) {
    const Vector plus = hilbert::coherent_state(beta, n_cav, leakage_tol).normalized();
    const Vector minus = hilbert::coherent_state(-beta, n_cav, leakage_tol).normalized();
    return hilbert::joint_vector(1.0, plus, 1.0, minus) / std::sqrt(2.0);
}

struct PreparationOptions {
    int slices = 100;  // time steps across the pi / chi wait when noise is on
};

namespace detail {

/// R_y(pi/2) on `qubit0` (x) |beta>, then the pi / chi wait with optional
/// qubit T1 and cavity loss applied slice by slice.
inline JointState prepare_branch(cplx beta, const ExperimentConfig& cfg, const Vector& qubit0,
                                 const NoiseModel* noise, const PreparationOptions& opt) {
    const int n = cfg.truncation.n_sim;
    const Vector cav = hilbert::coherent_state(beta, n, cfg.tolerances.leakage).normalized();
    const Vector q = hilbert::qubit_rotation(kPi / 2, 0.0) * qubit0;
    JointState s = JointState::product(q, cav);
    const double chi = cfg.hamiltonian.chi();
    const double t_total = kPi / chi;
    const bool t1 = noise && noise->active(noise->flags.qubit_decay);
    const bool loss = noise && noise->active(noise->flags.cavity_damping);
    if (!t1 && !loss) return dispersive_evolve(s, t_total, chi);
    require(opt.slices >= 1, "prepare_bell_cat: slices must be >= 1");
    const double dt = t_total / opt.slices;
    s = s.to_density();
    for (int k = 0; k < opt.slices; ++k) {
        s = dispersive_evolve(s, dt, chi);
        if (t1) s = noise::qubit_decay(s, 1.0 - std::exp(-dt / noise->t1()));
        if (loss) s = noise::cavity_damping(s, dt, noise->tau_s());
    }
    return s;
}

}  // namespace detail

/// Bell-cat preparation. Without a noise model the result is pure. With one,
/// the pi / chi wait includes qubit decay and cavity loss, and a failed
/// ground-state initialization (qubit starting in |e>) enters as a mixture.
inline JointState prepare_bell_cat(cplx beta, const ExperimentConfig& cfg,
                                   const std::optional<NoiseModel>& noise = std::nullopt,
                                   const PreparationOptions& opt = {}) {
    const NoiseModel* nm = (noise && noise->enabled) ? &*noise : nullptr;
    JointState good = detail::prepare_branch(beta, cfg, hilbert::qubit_ground(), nm, opt);
    if (!nm || !nm->active(nm->flags.init_failure) || nm->init_success >= 1.0) {
        if (!nm) return good;
        return good.to_density();
    }
    const JointState bad = detail::prepare_branch(beta, cfg, hilbert::qubit_excited(), nm, opt);
    const double s = nm->init_success;
    return JointState::density(s * good.density_matrix() + (1.0 - s) * bad.density_matrix(),
                               cfg.truncation.n_sim);
}

/// Prepared state as seen at detection: preparation plus the lumped loss
/// interval (and optional dephasing) before the measurements.
inline JointState detection_state(cplx beta, const ExperimentConfig& cfg, const PreparationOptions& opt = {}) {
    if (!cfg.noise.enabled) return prepare_bell_cat(beta, cfg, std::nullopt, opt);
    const JointState prep = prepare_bell_cat(beta, cfg, cfg.noise, opt);
    return noise::apply_lumped_damping(prep, cfg.noise, cfg.hamiltonian.chi());
}

/// Normalized C_m |e,m> + sum_{n != m} C_n |g,n>, C_n = <n|beta>.
inline JointState prepare_fock_entangled(cplx beta, int m, int n_cav, double leakage_tol = 1e-8) {
    require(m >= 0 && m < n_cav, "prepare_fock_entangled: m outside truncation");
    const Vector c = hilbert::coherent_state(beta, n_cav, leakage_tol).normalized();
    Vector cg = c;
    cg(m) = 0.0;
    Vector ce = Vector::Zero(n_cav);
    ce(m) = c(m);
    return JointState::pure(hilbert::joint_vector(1.0, cg, 1.0, ce), n_cav);
}

// ---------------------------------------------------------------------------
// Projective qubit measurement

struct Projection {
    double probability = 0.0;
    std::optional<JointState> state;  // empty when the outcome has zero probability
};

/// Projects onto the outcome eigenspace of sigma_axis; outcome +1 is the
/// +1 eigenvector (|g> for Z).
inline Projection project_qubit(const JointState& state, Pauli axis, int outcome) {
    require(axis != Pauli::I, "project_qubit: axis must be X, Y or Z");
    require(outcome == 1 || outcome == -1, "project_qubit: outcome must be +-1");
    const int n = state.n_cav();
    const Operator proj = 0.5 * (hilbert::identity(2) + static_cast<double>(outcome) * hilbert::pauli(axis));
    Projection out;
    if (state.is_pure()) {
        const Vector& v = state.vector();
        Vector w(2 * n);
        w.head(n) = proj(0, 0) * v.head(n) + proj(0, 1) * v.tail(n);
        w.tail(n) = proj(1, 0) * v.head(n) + proj(1, 1) * v.tail(n);
        out.probability = w.squaredNorm();
        if (out.probability > 1e-300) out.state = JointState::pure(w / std::sqrt(out.probability), n);
        return out;
    }
    const Operator full = hilbert::embed(proj, hilbert::identity(n));
    const Matrix r = full * state.density_matrix() * full;
    out.probability = r.trace().real();
    if (out.probability > 1e-300) out.state = JointState::density(r / out.probability, n);
    return out;
}

// ---------------------------------------------------------------------------
// Circuits

struct CircuitStep {
    enum class Kind { Displace, QubitRotate, Wait, MeasureQubit, FeedbackReset };

    Kind kind = Kind::Wait;
    cplx alpha{0.0, 0.0};  // Displace
    double theta = 0.0;    // QubitRotate
    double phi = 0.0;
    double t_s = 0.0;      // Wait, seconds
    Pauli axis = Pauli::Z; // MeasureQubit

    static CircuitStep displace(cplx a) { CircuitStep s; s.kind = Kind::Displace; s.alpha = a; return s; }
    static CircuitStep rotate(double theta, double phi) {
        CircuitStep s;
        s.kind = Kind::QubitRotate;
        s.theta = theta;
        s.phi = phi;
        return s;
    }
    static CircuitStep wait(double t) {
        require(t >= 0.0, "CircuitStep::wait: t must be >= 0");
        CircuitStep s;
        s.kind = Kind::Wait;
        s.t_s = t;
        return s;
    }
    static CircuitStep measure(Pauli axis) {
        require(axis != Pauli::I, "CircuitStep::measure: axis must be X, Y or Z");
        CircuitStep s;
        s.kind = Kind::MeasureQubit;
        s.axis = axis;
        return s;
    }
    static CircuitStep feedback_reset() { CircuitStep s; s.kind = Kind::FeedbackReset; return s; }
};

/// One measurement history of a circuit run on a pure state.
struct Branch {
    double probability = 1.0;
    std::vector<int> outcomes;
    Vector psi;  // normalized, workspace dimension
};

/// Runs `steps` on a pure joint vector over an (n_cav + pad) workspace.
/// Measurements split the branch list; the reset flips |e> to |g> when the
/// last outcome was -1 (and is a no-op before any measurement).
inline std::vector<Branch> run_circuit(const Vector& psi, int n_cav, const std::vector<CircuitStep>& steps,
                                       double chi, int pad = hilbert::kDefaultPad) {
    require(psi.size() == 2 * n_cav, "run_circuit: dimension mismatch");
    const int nw = n_cav + pad;
    const auto& engine = hilbert::displacement_engine(nw);
    Branch root;
    root.psi = Vector::Zero(2 * nw);
    root.psi.head(n_cav) = psi.head(n_cav);
    root.psi.segment(nw, n_cav) = psi.tail(n_cav);
    std::vector<Branch> branches{root};
    for (const auto& st : steps) {
        std::vector<Branch> next;
        for (auto& b : branches) {
            Vector& v = b.psi;
            switch (st.kind) {
                case CircuitStep::Kind::Displace:
                    v.head(nw) = engine.apply(st.alpha, v.head(nw));
                    v.tail(nw) = engine.apply(st.alpha, v.tail(nw));
                    break;
                case CircuitStep::Kind::QubitRotate: {
                    const Operator u = hilbert::qubit_rotation(st.theta, st.phi);
                    const Vector g = v.head(nw), e = v.tail(nw);
                    v.head(nw) = u(0, 0) * g + u(0, 1) * e;
                    v.tail(nw) = u(1, 0) * g + u(1, 1) * e;
                    break;
                }
                case CircuitStep::Kind::Wait:
                    v.tail(nw) = v.tail(nw).cwiseProduct(hilbert::number_phases(nw, chi * st.t_s));
                    break;
                case CircuitStep::Kind::MeasureQubit: {
                    for (int o : {1, -1}) {
                        const Operator pr = 0.5 * (hilbert::identity(2) + static_cast<double>(o) * hilbert::pauli(st.axis));
                        Vector w(2 * nw);
                        w.head(nw) = pr(0, 0) * v.head(nw) + pr(0, 1) * v.tail(nw);
                        w.tail(nw) = pr(1, 0) * v.head(nw) + pr(1, 1) * v.tail(nw);
                        const double p = w.squaredNorm();
                        if (p <= 0.0) continue;
                        Branch nb{b.probability * p, b.outcomes, w / std::sqrt(p)};
                        nb.outcomes.push_back(o);
                        next.push_back(std::move(nb));
                    }
                    continue;
                }
                case CircuitStep::Kind::FeedbackReset:
                    if (!b.outcomes.empty() && b.outcomes.back() == -1) {
                        const Vector g = v.head(nw);
                        v.head(nw) = v.tail(nw);
                        v.tail(nw) = g;
                    }
                    break;
            }
            next.push_back(std::move(b));
        }
        branches = std::move(next);
    }
    return branches;
}

/// Ramsey parity-map sequence: D(-alpha), R_y(pi/2), wait pi/chi,
/// R_y(-+pi/2), measure Z, then D(alpha) back to the lab frame.
inline std::vector<CircuitStep> parity_map_steps(cplx alpha, int ramsey_sign, double chi) {
    require(ramsey_sign == 1 || ramsey_sign == -1, "parity_map_steps: ramsey_sign must be +-1");
    return {CircuitStep::displace(-alpha), CircuitStep::rotate(kPi / 2, 0.0), CircuitStep::wait(kPi / chi),
            CircuitStep::rotate(-ramsey_sign * kPi / 2, 0.0), CircuitStep::measure(Pauli::Z),
            CircuitStep::displace(alpha)};
}

struct ParityMapResult {
    std::array<double, 2> probability{};       // index 0: outcome +1 (g), 1: outcome -1
    std::array<std::optional<JointState>, 2> post;  // qubit left in the measured state
    bool improper_initialization = false;       // qubit was not in |g> on entry
    double truncation_loss = 0.0;               // norm dropped projecting back to n_cav
};

/// Runs the parity map on `state`. For ramsey_sign +1, p(+1) = (1 + <P_alpha>)/2.
inline ParityMapResult parity_map_circuit(const JointState& state, cplx alpha, int ramsey_sign,
                                          double chi = HamiltonianParams{}.chi(), int pad = hilbert::kDefaultPad) {
    const int n = state.n_cav();
    const int nw = n + pad;
    ParityMapResult res;
    res.improper_initialization = hilbert::partial_trace(state, hilbert::Subsystem::Cavity)(1, 1).real() > 1e-9;
    const auto steps = parity_map_steps(alpha, ramsey_sign, chi);

    std::vector<std::pair<double, Vector>> components;
    if (state.is_pure()) {
        components.emplace_back(1.0, state.vector());
    } else {
        Eigen::SelfAdjointEigenSolver<Matrix> es(state.density_matrix());
        for (int k = 0; k < es.eigenvalues().size(); ++k)
            if (es.eigenvalues()(k) > 1e-14) components.emplace_back(es.eigenvalues()(k), es.eigenvectors().col(k));
    }
    std::array<Matrix, 2> post{Matrix::Zero(2 * n, 2 * n), Matrix::Zero(2 * n, 2 * n)};
    std::array<std::optional<Vector>, 2> pure_post;
    for (const auto& [w, v] : components) {
        for (const auto& b : run_circuit(v, n, steps, chi, pad)) {
            const int idx = b.outcomes.back() == 1 ? 0 : 1;
            Vector t(2 * n);
            t.head(n) = b.psi.head(n);
            t.tail(n) = b.psi.segment(nw, n);
            res.truncation_loss = std::max(res.truncation_loss, 1.0 - t.squaredNorm());
            t.normalize();
            res.probability[idx] += w * b.probability;
            if (state.is_pure()) pure_post[idx] = t;
            else post[idx] += w * b.probability * t * t.adjoint();
        }
    }
    for (int i = 0; i < 2; ++i) {
        if (res.probability[i] <= 1e-300) continue;
        if (state.is_pure()) res.post[i] = JointState::pure(*pure_post[i], n);
        else res.post[i] = JointState::density(post[i] / res.probability[i], n);
    }
    return res;
}

/// Feedback reset: a pi pulse when the qubit was found in |e>.
inline JointState feedback_reset(const JointState& state, int outcome) {
    if (outcome == 1) return state;
    Operator flip(2, 2);
    flip << 0, 1, 1, 0;
    return apply_qubit(state, flip);
}

// ---------------------------------------------------------------------------
// Exact detector statistics

/// Cavity blocks <q| U rho U^dag |q> after the qubit pre-rotation; their
/// traces are the true first-detection probabilities.
struct QubitBranches {
    std::array<Matrix, 2> cavity;  // index 0: true outcome +1 (g), 1: -1 (e)
};

inline QubitBranches qubit_branches(const JointState& state, QubitSetting s, double delta_theta) {
    const JointState r = apply_qubit(state, prerotation(s, delta_theta));
    return {{r.block(0, 0), r.block(1, 1)}};
}

/// Parity expectations the detector statistics depend on, for one setting.
struct BranchParities {
    std::array<double, 2> weight{};  // Tr C_q
    std::array<double, 2> parity{};  // Re Tr[P_alpha C_q]
    double parity_decayed_e = 0.0;   // Tr[P_alpha' C_e] averaged over decay times
};

/// Reported-outcome distribution p[a][b], a/b index 0 for +1 and 1 for -1.
using FourOutcome = std::array<std::array<double, 2>, 2>;

/// Combines branch parities with reset decay and detector flips.
inline FourOutcome outcome_distribution(const BranchParities& bp, int ramsey_sign, const NoiseModel& nm) {
    const double pc = nm.active(nm.flags.reset_decay) ? nm.reset_decay_probability() : 0.0;
    const double r = ramsey_sign;
    // true[a][b]
    FourOutcome t{};
    t[0][0] = 0.5 * (bp.weight[0] + r * bp.parity[0]);
    t[0][1] = 0.5 * (bp.weight[0] - r * bp.parity[0]);
    t[1][0] = (1.0 - pc) * 0.5 * (bp.weight[1] + r * bp.parity[1]) + pc * 0.5 * (bp.weight[1] - r * bp.parity_decayed_e);
    t[1][1] = (1.0 - pc) * 0.5 * (bp.weight[1] - r * bp.parity[1]) + pc * 0.5 * (bp.weight[1] + r * bp.parity_decayed_e);
    const double kq[2] = {noise::report_fidelity(1, noise::Detector::Qubit, nm),
                          noise::report_fidelity(-1, noise::Detector::Qubit, nm)};
    const double kc = noise::report_fidelity(1, noise::Detector::Cavity, nm);
    FourOutcome out{};
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int ra = 0; ra < 2; ++ra)
                for (int rb = 0; rb < 2; ++rb) {
                    const double pa = (ra == a) ? kq[a] : 1.0 - kq[a];
                    const double pb = (rb == b) ? kc : 1.0 - kc;
                    out[ra][rb] += t[a][b] * pa * pb;
                }
    for (auto& row : out)
        for (auto& p : row) p = std::max(0.0, p);
    return out;
}

/// Re Tr[P_alpha C] using closed-form matrix elements.
inline double parity_trace(const Matrix& c, cplx alpha) {
    const Matrix p = hilbert::displaced_parity_analytic(alpha, static_cast<int>(c.rows()));
    return (p.cwiseProduct(c.transpose())).sum().real();
}

/// Branch parities for one setting at one displacement, including the
/// decay-time average of the rotated point seen by the decayed e branch.
inline BranchParities branch_parities(const QubitBranches& qb, cplx alpha, const NoiseModel& nm, double chi) {
    BranchParities bp;
    for (int q = 0; q < 2; ++q) {
        bp.weight[q] = qb.cavity[q].trace().real();
        bp.parity[q] = parity_trace(qb.cavity[q], alpha);
    }
    if (nm.active(nm.flags.reset_decay) && nm.reset_decay_probability() > 0.0) {
        for (const auto& [t, w] : noise::decay_time_quadrature(nm)) {
            const cplx a2 = alpha * std::polar(1.0, chi * (nm.tau_wait() - t));
            bp.parity_decayed_e += w * parity_trace(qb.cavity[1], a2);
        }
    }
    return bp;
}

/// Exact expectation of ShotRecord::correlation() for one setting.
inline double expected_correlation(const FourOutcome& p, QubitSetting s, int ramsey_sign) {
    const double m = p[0][0] - p[0][1] - p[1][0] + p[1][1];
    return setting_sign(s) * ramsey_sign * m;
}

// ---------------------------------------------------------------------------
// Shot-by-shot sampling

/// Draws ShotRecords from a fixed state. The density matrix is decomposed
/// once; each shot picks a pure component, then runs the detection chain on
/// vectors in an (n_cav + pad) workspace.
class ShotSampler {
public:
    ShotSampler(const JointState& state, const ExperimentConfig& cfg)
        : n_(state.n_cav()), nw_(state.n_cav() + cfg.truncation.n_pad), chi_(cfg.hamiltonian.chi()),
          engine_(&hilbert::displacement_engine(nw_)) {
        if (state.is_pure()) {
            weights_.push_back(1.0);
            vectors_.push_back(state.vector());
        } else {
            Eigen::SelfAdjointEigenSolver<Matrix> es(state.density_matrix());
            for (int k = 0; k < es.eigenvalues().size(); ++k) {
                if (es.eigenvalues()(k) <= 1e-13) continue;
                weights_.push_back(es.eigenvalues()(k));
                vectors_.push_back(es.eigenvectors().col(k));
            }
        }
        double acc = 0.0;
        for (double w : weights_) cumulative_.push_back(acc += w);
        for (auto& c : cumulative_) c /= acc;
    }

    ShotRecord sample(const DetectorSetting& setting, const NoiseModel& nm, std::uint64_t stream) const {
        const double dtheta = nm.active(nm.flags.rotation_error) ? nm.rotation_error : 0.0;
        const auto [a, b] = sample_outcomes(prerotation(setting.qubit, dtheta), setting.ramsey_sign, setting.alpha, nm, stream);
        return {setting, a, b, stream};
    }

    /// Reported (qubit, cavity) outcomes for an arbitrary qubit pre-rotation.
    std::pair<int, int> sample_outcomes(const Operator& rot, int ramsey_sign, cplx alpha, const NoiseModel& nm,
                                        std::uint64_t stream) const {
        Rng rng(stream);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double pick = u(rng);
        std::size_t k = 0;
        while (k + 1 < cumulative_.size() && pick >= cumulative_[k]) ++k;
        const Vector& v = vectors_[k];

        const Vector g = rot(0, 0) * v.head(n_) + rot(0, 1) * v.tail(n_);
        const Vector e = rot(1, 0) * v.head(n_) + rot(1, 1) * v.tail(n_);
        const double pg = g.squaredNorm();
        const int a_true = (u(rng) < pg) ? 1 : -1;
        const Vector cav = (a_true == 1 ? g : e) / std::sqrt(a_true == 1 ? pg : 1.0 - pg);
        const int a_rep = noise::detector_flip(a_true, noise::Detector::Qubit, nm, rng);

        bool decayed = false;
        if (a_true == -1 && nm.active(nm.flags.reset_decay)) {
            if (u(rng) < nm.reset_decay_probability()) {
                decayed = true;
                const double td = noise::sample_decay_time(nm, rng);
                alpha *= std::polar(1.0, chi_ * (nm.tau_wait() - td));
            }
        }
        const double par = displaced_parity_value(cav, alpha);
        const double p_plus = 0.5 * (1.0 + ramsey_sign * par);
        int b = (u(rng) < p_plus) ? 1 : -1;
        if (decayed) b = -b;
        const int b_rep = noise::detector_flip(b, noise::Detector::Cavity, nm, rng);
        return {a_rep, b_rep};
    }

    /// <P_alpha> of a normalized cavity vector via the workspace displacement.
    double displaced_parity_value(const Vector& cav, cplx alpha) const {
        const Vector w = engine_->apply(-alpha, cav);
        double acc = 0.0;
        for (int m = 0; m < nw_; ++m) acc += ((m % 2 == 0) ? 1.0 : -1.0) * std::norm(w(m));
        return acc;
    }

private:
    int n_;
    int nw_;
    double chi_;
    const hilbert::DisplacementEngine* engine_;
    std::vector<double> weights_;
    std::vector<double> cumulative_;
    std::vector<Vector> vectors_;
};

/// One sequential detection: pre-rotation, qubit readout, feedback reset
/// (with possible decay during the wait), parity map, cavity readout.
inline ShotRecord sequential_run(const JointState& state, const DetectorSetting& setting,
                                 const ExperimentConfig& cfg, std::uint64_t stream) {
    return ShotSampler(state, cfg).sample(setting, cfg.noise, stream);
}

}  // namespace bellcat::protocol
