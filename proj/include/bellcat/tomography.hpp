#pragma once

// Joint Wigner tomography: exact and sampled grids, overlap functionals and
// constrained least-squares reconstruction.
//
// Normalization used throughout, with Tr[sigma_i sigma_j] = 2 delta_ij:
//   W_i(alpha) = (2/pi) <sigma_i P_alpha>
//   Tr[rho sigma] = (pi/2) sum_i Int W_i^rho W_i^sigma d^2alpha
//   <A B> = sum_i Tr[A sigma_i] Int Tr[B P_alpha] W_i(alpha) d^2alpha
// Integrals are Riemann sums with cell area step^2.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "bellcat/config.hpp"
#include "bellcat/hilbert.hpp"
#include "bellcat/protocol.hpp"

namespace bellcat::tomography {

using hilbert::JointState;
using hilbert::Pauli;

enum Channel { kChI = 0, kChX = 1, kChY = 2, kChZ = 3 };

/// Square lattice of displacements with four real channels. Entry (i, j)
/// sits at alpha = coordinate(i) + i * coordinate(j).
struct WignerGrid {
    GridGeometry geometry;
    std::array<RealMatrix, 4> w;
    int shots_per_point = 0;  // 0: exact
    std::vector<std::string> warnings;

    static WignerGrid zeros(const GridGeometry& g) {
        WignerGrid grid;
        grid.geometry = g;
        const int n = g.points_per_axis();
        for (auto& c : grid.w) c = RealMatrix::Zero(n, n);
        return grid;
    }

    int size() const { return geometry.points_per_axis(); }
    double step() const { return geometry.alpha_step; }
    double cell_area() const { return step() * step(); }
    cplx alpha(int i, int j) const { return {geometry.coordinate(i), geometry.coordinate(j)}; }

    /// Bicubic (4 x 4 Lagrange) interpolation of channel c at alpha.
    double value(int c, cplx a) const {
        const int n = size();
        const double fx = (a.real() + geometry.alpha_max) / step();
        const double fy = (a.imag() + geometry.alpha_max) / step();
        const double eps = 1e-9;
        if (fx < -eps || fy < -eps || fx > n - 1 + eps || fy > n - 1 + eps)
            throw InvalidArgument("WignerGrid::value: point outside the grid");
        auto stencil = [n](double f, int& i0, std::array<double, 4>& wt) {
            const int base = std::clamp(static_cast<int>(std::floor(f)) - 1, 0, std::max(0, n - 4));
            i0 = base;
            for (int k = 0; k < 4; ++k) {
                double l = 1.0;
                for (int m = 0; m < 4; ++m)
                    if (m != k) l *= (f - (base + m)) / static_cast<double>(k - m);
                wt[k] = l;
            }
        };
        require(n >= 4, "WignerGrid::value: need at least 4 points per axis");
        int ix = 0, iy = 0;
        std::array<double, 4> wx{}, wy{};
        stencil(fx, ix, wx);
        stencil(fy, iy, wy);
        double acc = 0.0;
        for (int p = 0; p < 4; ++p)
            for (int q = 0; q < 4; ++q) acc += wx[p] * wy[q] * w[c](ix + p, iy + q);
        return acc;
    }
};

// ---------------------------------------------------------------------------
// Exact grids

namespace detail {

/// Re Tr[P C] terms grouped by diagonal: S_k = sum_{m - n = k} P_mn C_nm,
/// index k + (dim - 1). Rotating alpha by phi multiplies S_k by e^{i phi k}.
inline std::vector<cplx> diagonal_sums(const Matrix& p, const Matrix& c) {
    const auto n = static_cast<int>(p.rows());
    std::vector<cplx> s(static_cast<std::size_t>(2 * n - 1), 0.0);
    for (int col = 0; col < n; ++col)
        for (int m = 0; m < n; ++m) s[m - col + n - 1] += p(m, col) * c(col, m);
    return s;
}

inline double rotated_trace(const std::vector<cplx>& s, double phi) {
    const int n = (static_cast<int>(s.size()) + 1) / 2;
    cplx acc = 0.0;
    for (int k = -(n - 1); k <= n - 1; ++k) acc += std::polar(1.0, phi * k) * s[k + n - 1];
    return acc.real();
}

inline void warn_if_outside(WignerGrid& grid) {
    double mass = 0.0;
    for (int i = 0; i < grid.size(); ++i)
        for (int j = 0; j < grid.size(); ++j) mass += grid.w[kChI](i, j);
    mass *= grid.cell_area();
    if (std::abs(1.0 - mass) >= 0.01) {
        grid.warnings.push_back("state has " + std::to_string(std::abs(1.0 - mass)) +
                                " of its Wigner mass outside the grid");
    }
}

}  // namespace detail

/// W_i(alpha) = (2/pi) <sigma_i (x) P_alpha> from operator expectations.
inline WignerGrid joint_wigner_exact(const JointState& state, const GridGeometry& geom, bool check_support = true) {
    WignerGrid grid = WignerGrid::zeros(geom);
    const int n = state.n_cav();
    const Matrix gg = state.block(0, 0), ee = state.block(1, 1), eg = state.block(1, 0);
    const int np = grid.size();
    for (int i = 0; i < np; ++i) {
        for (int j = 0; j < np; ++j) {
            const Matrix p = hilbert::displaced_parity_analytic(grid.alpha(i, j), n);
            // Tr[P rho_ab] as sum_mn P_mn rho_ab(n, m)
            const double tg = p.cwiseProduct(gg.transpose()).sum().real();
            const double te = p.cwiseProduct(ee.transpose()).sum().real();
            const cplx tge = p.cwiseProduct(eg.transpose()).sum();  // Tr[P rho_eg]
            const double k = 2.0 / kPi;
            grid.w[kChI](i, j) = k * (tg + te);
            grid.w[kChZ](i, j) = k * (tg - te);
            grid.w[kChX](i, j) = k * 2.0 * tge.real();
            grid.w[kChY](i, j) = k * 2.0 * tge.imag();
        }
    }
    if (check_support) detail::warn_if_outside(grid);
    return grid;
}

// ---------------------------------------------------------------------------
// Detector-level grids

/// Precomputed qubit branches for all six pre-rotations of a state.
class DetectorModel {
public:
    DetectorModel(const JointState& state, const ExperimentConfig& cfg)
        : nm_(cfg.noise), chi_(cfg.hamiltonian.chi()), n_(state.n_cav()) {
        const double dtheta = nm_.active(nm_.flags.rotation_error) ? nm_.rotation_error : 0.0;
        for (int s = 0; s < 6; ++s)
            branches_[s] = protocol::qubit_branches(state, static_cast<protocol::QubitSetting>(s), dtheta);
        if (nm_.active(nm_.flags.reset_decay) && nm_.reset_decay_probability() > 0.0)
            quadrature_ = noise::decay_time_quadrature(nm_);
    }

    const NoiseModel& noise() const { return nm_; }

    /// Branch parities of all six settings at alpha.
    std::array<protocol::BranchParities, 6> parities(cplx alpha) const {
        const Matrix p = hilbert::displaced_parity_analytic(alpha, n_);
        std::array<protocol::BranchParities, 6> out{};
        for (int s = 0; s < 6; ++s) {
            auto& bp = out[s];
            for (int q = 0; q < 2; ++q) {
                const Matrix& c = branches_[s].cavity[q];
                bp.weight[q] = c.trace().real();
                if (q == 1 && !quadrature_.empty()) {
                    const auto sums = detail::diagonal_sums(p, c);
                    bp.parity[q] = detail::rotated_trace(sums, 0.0);
                    for (const auto& [t, w] : quadrature_)
                        bp.parity_decayed_e += w * detail::rotated_trace(sums, chi_ * (nm_.tau_wait() - t));
                } else {
                    bp.parity[q] = p.cwiseProduct(c.transpose()).sum().real();
                }
            }
        }
        return out;
    }

    /// Reported-outcome distribution of one detector setting.
    protocol::FourOutcome distribution(const std::array<protocol::BranchParities, 6>& bp,
                                       const protocol::DetectorSetting& s) const {
        return protocol::outcome_distribution(bp[static_cast<int>(s.qubit)], s.ramsey_sign, nm_);
    }

private:
    NoiseModel nm_;
    double chi_;
    int n_;
    std::array<protocol::QubitBranches, 6> branches_;
    std::vector<std::pair<double, double>> quadrature_;
};

namespace detail {

inline double correlation_mean(const protocol::FourOutcome& p, const protocol::DetectorSetting& s) {
    return protocol::expected_correlation(p, s.qubit, s.ramsey_sign);
}

inline double parity_mean(const protocol::FourOutcome& p, int ramsey_sign) {
    return ramsey_sign * (p[0][0] + p[1][0] - p[0][1] - p[1][1]);
}

}  // namespace detail

/// Infinite-shot limit of the sampled grid: detector statistics averaged
/// over the four balanced permutations of each axis. The I channel comes
/// from the Z-axis runs with the qubit outcome ignored.
inline WignerGrid joint_wigner_expected(const JointState& state, const ExperimentConfig& cfg) {
    const DetectorModel model(state, cfg);
    WignerGrid grid = WignerGrid::zeros(cfg.grid);
    const int np = grid.size();
    for (int i = 0; i < np; ++i) {
        for (int j = 0; j < np; ++j) {
            const cplx a = grid.alpha(i, j);
            const auto bp = model.parities(a);
            for (Pauli axis : {Pauli::X, Pauli::Y, Pauli::Z}) {
                double corr = 0.0, par = 0.0;
                for (const auto& s : protocol::permutations(axis, a)) {
                    const auto p = model.distribution(bp, s);
                    corr += detail::correlation_mean(p, s);
                    par += detail::parity_mean(p, s.ramsey_sign);
                }
                grid.w[static_cast<int>(axis)](i, j) = (2.0 / kPi) * corr / 4.0;
                if (axis == Pauli::Z) grid.w[kChI](i, j) = (2.0 / kPi) * par / 4.0;
            }
        }
    }
    return grid;
}

enum class SamplingMode {
    Multinomial,  // outcome counts drawn from the exact four-outcome law
    ShotByShot,   // every shot simulated through the detection chain
};

/// Sampled grid with `shots` per point and axis, split evenly over the four
/// detector permutations. Each (point, axis, permutation) owns an RNG stream
/// keyed by the seed, so results do not depend on evaluation order.
inline WignerGrid joint_wigner_sampled(const JointState& state, const ExperimentConfig& cfg, int shots,
                                       std::uint64_t seed, SamplingMode mode = SamplingMode::Multinomial) {
    require(shots >= 4, "joint_wigner_sampled: need at least 4 shots per point");
    WignerGrid grid = WignerGrid::zeros(cfg.grid);
    grid.shots_per_point = shots;
    const int np = grid.size();
    std::optional<DetectorModel> model;
    std::optional<protocol::ShotSampler> sampler;
    if (mode == SamplingMode::Multinomial) model.emplace(state, cfg);
    else sampler.emplace(state, cfg);

    for (int i = 0; i < np; ++i) {
        for (int j = 0; j < np; ++j) {
            const cplx a = grid.alpha(i, j);
            const std::uint64_t point = static_cast<std::uint64_t>(i) * np + j;
            std::array<protocol::BranchParities, 6> bp{};
            if (model) bp = model->parities(a);
            for (Pauli axis : {Pauli::X, Pauli::Y, Pauli::Z}) {
                long long corr = 0, par = 0;
                const auto perms = protocol::permutations(axis, a);
                for (int k = 0; k < 4; ++k) {
                    const auto& s = perms[k];
                    const int n_k = shots / 4 + (k < shots % 4 ? 1 : 0);
                    const std::uint64_t stream =
                        protocol::stream_seed({seed, point, static_cast<std::uint64_t>(axis), static_cast<std::uint64_t>(k)});
                    std::array<std::array<long long, 2>, 2> counts{};
                    if (model) {
                        const auto p = model->distribution(bp, s);
                        protocol::Rng rng(stream);
                        int left = n_k;
                        double mass = 1.0;
                        const double flat[4] = {p[0][0], p[0][1], p[1][0], p[1][1]};
                        long long drawn[4] = {0, 0, 0, 0};
                        for (int o = 0; o < 3 && left > 0; ++o) {
                            const double q = (mass > 0.0) ? std::clamp(flat[o] / mass, 0.0, 1.0) : 0.0;
                            std::binomial_distribution<int> bin(left, q);
                            drawn[o] = bin(rng);
                            left -= static_cast<int>(drawn[o]);
                            mass -= flat[o];
                        }
                        drawn[3] = left;
                        counts = {{{drawn[0], drawn[1]}, {drawn[2], drawn[3]}}};
                    } else {
                        for (int shot = 0; shot < n_k; ++shot) {
                            const auto rec = sampler->sample(s, cfg.noise, protocol::stream_seed({stream, static_cast<std::uint64_t>(shot)}));
                            ++counts[rec.outcome_qubit == 1 ? 0 : 1][rec.outcome_cavity == 1 ? 0 : 1];
                        }
                    }
                    const int sq = protocol::setting_sign(s.qubit);
                    const int sr = s.ramsey_sign;
                    corr += sq * sr * (counts[0][0] - counts[0][1] - counts[1][0] + counts[1][1]);
                    par += sr * (counts[0][0] + counts[1][0] - counts[0][1] - counts[1][1]);
                }
                grid.w[static_cast<int>(axis)](i, j) = (2.0 / kPi) * static_cast<double>(corr) / shots;
                if (axis == Pauli::Z) grid.w[kChI](i, j) = (2.0 / kPi) * static_cast<double>(par) / shots;
            }
        }
    }
    return grid;
}

// ---------------------------------------------------------------------------
// Overlap functionals

/// (2/pi) Int <I P_alpha> d^2alpha of the unnormalized grid.
inline double visibility_from_wigner(const WignerGrid& w) { return w.w[kChI].sum() * w.cell_area(); }

/// Every channel divided by the grid's visibility.
inline WignerGrid normalized(const WignerGrid& w) {
    const double v = visibility_from_wigner(w);
    if (!(v > 0.0)) throw NumericalError("normalized: non-positive visibility", v);
    WignerGrid out = w;
    for (auto& c : out.w) c /= v;
    return out;
}

/// (pi/2) sum_i Int W_i^target W_i d^2alpha.
inline double fidelity_from_wigner(const WignerGrid& w, const WignerGrid& target) {
    require(w.geometry == target.geometry, "fidelity_from_wigner: grid geometries differ");
    double acc = 0.0;
    for (int c = 0; c < 4; ++c) acc += w.w[c].cwiseProduct(target.w[c]).sum();
    return 0.5 * kPi * acc * w.cell_area();
}

inline double fidelity_from_wigner(const WignerGrid& w, const JointState& target) {
    return fidelity_from_wigner(w, joint_wigner_exact(target, w.geometry, false));
}

/// Tr[A sigma_i], i = I, X, Y, Z.
inline std::array<double, 4> pauli_components(const Operator& a) {
    require(a.rows() == 2 && a.cols() == 2, "pauli_components: qubit operator must be 2x2");
    std::array<double, 4> out{};
    for (int i = 0; i < 4; ++i) out[i] = (a * hilbert::pauli(i)).trace().real();
    return out;
}

/// Cavity observable as a combination of parity points plus a multiple of
/// the identity, the form every logical observable takes.
struct ParityExpansion {
    double identity = 0.0;
    std::vector<std::pair<cplx, double>> points;  // (beta_k, c_k): sum c_k P_{beta_k}
};

/// <A (x) B> for a parity-point B: (pi/4) sum_i Tr[A sigma_i] W_i(beta) per
/// point, read off the grid by interpolation. The identity's kernel
/// Tr[P_alpha] = 1/2 integrates against the grid.
inline double observable_from_wigner(const WignerGrid& w, const Operator& qubit_op, const ParityExpansion& b) {
    const auto a = pauli_components(qubit_op);
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) {
        if (a[i] == 0.0) continue;
        double ch = 0.0;
        for (const auto& [pt, c] : b.points) ch += c * (kPi / 4.0) * w.value(i, pt);
        if (b.identity != 0.0) ch += b.identity * 0.5 * w.w[i].sum() * w.cell_area();
        acc += a[i] * ch;
    }
    return acc;
}

/// <A (x) B> for a bounded, grid-supported cavity operator B with kernel
/// B(alpha) = Tr[B P_alpha].
inline double observable_from_wigner(const WignerGrid& w, const Operator& qubit_op, const Operator& cavity_op) {
    const auto a = pauli_components(qubit_op);
    const int n = static_cast<int>(cavity_op.rows());
    require(cavity_op.cols() == n, "observable_from_wigner: cavity operator must be square");
    double acc = 0.0;
    for (int i = 0; i < w.size(); ++i) {
        for (int j = 0; j < w.size(); ++j) {
            const Matrix p = hilbert::displaced_parity_analytic(w.alpha(i, j), n);
            const double kern = p.cwiseProduct(cavity_op.transpose()).sum().real();
            for (int c = 0; c < 4; ++c) acc += a[c] * kern * w.w[c](i, j);
        }
    }
    return acc * w.cell_area();
}

// ---------------------------------------------------------------------------
// Reconstruction

/// Precomputed measurement map for a grid geometry and cavity truncation:
/// P_k on n levels at every grid point and the normal superoperator
/// K(X) = sum_k Tr[P_k X] P_k in vec form.
class MeasurementMap {
public:
    MeasurementMap(const GridGeometry& geom, int n) : geom_(geom), n_(n) {
        require(n >= 2, "MeasurementMap: n must be >= 2");
        const int np = geom.points_per_axis();
        const int d = n * n;
        ops_.resize(static_cast<std::size_t>(np) * np);
        Matrix vecs(d, static_cast<Eigen::Index>(ops_.size()));
        Matrix vecs_t(d, static_cast<Eigen::Index>(ops_.size()));
        for (int i = 0; i < np; ++i)
            for (int j = 0; j < np; ++j) {
                const std::size_t k = static_cast<std::size_t>(i) * np + j;
                ops_[k] = hilbert::displaced_parity_analytic({geom.coordinate(i), geom.coordinate(j)}, n);
                vecs.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Vector>(ops_[k].data(), d);
                const Matrix t = ops_[k].transpose();
                vecs_t.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Vector>(t.data(), d);
            }
        kop_ = vecs * vecs_t.transpose();
        kop_ = 0.5 * (kop_ + kop_.adjoint()).eval();
        Eigen::SelfAdjointEigenSolver<Matrix> es(kop_, Eigen::EigenvaluesOnly);
        lambda_max_ = es.eigenvalues().maxCoeff();
    }

    int n() const { return n_; }
    const GridGeometry& geometry() const { return geom_; }
    const Matrix& op(std::size_t k) const { return ops_[k]; }
    std::size_t points() const { return ops_.size(); }
    double lambda_max() const { return lambda_max_; }

    Matrix apply_normal(const Matrix& x) const {
        const int d = n_ * n_;
        const Vector v = kop_ * Eigen::Map<const Vector>(x.data(), d);
        return Eigen::Map<const Matrix>(v.data(), n_, n_);
    }

    /// sum_k m_k P_k for data m in the grid's (i, j) order.
    Matrix adjoint(const RealMatrix& m) const {
        Matrix acc = Matrix::Zero(n_, n_);
        const int np = geom_.points_per_axis();
        for (int i = 0; i < np; ++i)
            for (int j = 0; j < np; ++j) acc += m(i, j) * ops_[static_cast<std::size_t>(i) * np + j];
        return acc;
    }

    /// Tr[P_k X] on the grid.
    RealMatrix forward(const Matrix& x) const {
        const int np = geom_.points_per_axis();
        RealMatrix out(np, np);
        const Matrix xt = x.transpose();
        for (int i = 0; i < np; ++i)
            for (int j = 0; j < np; ++j)
                out(i, j) = ops_[static_cast<std::size_t>(i) * np + j].cwiseProduct(xt).sum().real();
        return out;
    }

private:
    GridGeometry geom_;
    int n_;
    std::vector<Matrix> ops_;
    Matrix kop_;
    double lambda_max_ = 0.0;
};

struct ReconstructionResult {
    Matrix rho;                         // 2 n_max x 2 n_max, PSD, unit trace
    int n_max = 0;
    std::array<double, 4> scale{1, 1, 1, 1};  // fitted visibility (shared value)
    std::array<RealMatrix, 4> residuals;      // data - model, correlation units
    std::array<RealMatrix, 4> fitted;         // model, correlation units
    double residual_mean = 0.0;
    double residual_std = 0.0;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;

    JointState state() const { return JointState::density(rho, n_max); }
};

namespace detail {

/// Euclidean projection of a Hermitian matrix onto {rho >= 0, Tr rho = 1}.
inline Matrix project_density(const Matrix& h) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.adjoint()));
    RealVector ev = es.eigenvalues();
    std::vector<double> u(ev.data(), ev.data() + ev.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0, shift = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        cum += u[k];
        const double t = (cum - 1.0) / static_cast<double>(k + 1);
        if (u[k] - t > 0.0) shift = t;
    }
    for (int k = 0; k < ev.size(); ++k) ev(k) = std::max(0.0, ev(k) - shift);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

/// rho_i = Tr_q[(sigma_i (x) I) rho].
inline std::array<Matrix, 4> pauli_blocks(const Matrix& rho, int n) {
    const Matrix gg = rho.block(0, 0, n, n), ee = rho.block(n, n, n, n);
    const Matrix ge = rho.block(0, n, n, n), eg = rho.block(n, 0, n, n);
    return {gg + ee, eg + ge, kI * (ge - eg), gg - ee};
}

/// sum_i sigma_i (x) G_i.
inline Matrix pauli_assemble(const std::array<Matrix, 4>& g, int n) {
    Matrix out(2 * n, 2 * n);
    out.block(0, 0, n, n) = g[0] + g[3];
    out.block(n, n, n, n) = g[0] - g[3];
    out.block(0, n, n, n) = g[1] - kI * g[2];
    out.block(n, 0, n, n) = g[1] + kI * g[2];
    return out;
}

}  // namespace detail

/// Least-squares fit of s Tr[(sigma_i (x) P_alpha) rho] to the measured
/// correlations (pi/2) W_i, over density matrices on 2 x n levels.
/// Accelerated projected gradient with adaptive restart. With
/// fit_visibility a single scale s (shared by all channels) is refit in
/// closed form each step; per-channel scales would be degenerate with
/// qubit depolarization.
inline ReconstructionResult mle_reconstruct(const WignerGrid& w, const MeasurementMap& map, const MleSettings& opt,
                                            const std::optional<Matrix>& warm_start = std::nullopt) {
    require(w.geometry == map.geometry(), "mle_reconstruct: grid geometry does not match the measurement map");
    const int n = map.n();
    std::array<RealMatrix, 4> data;
    std::array<Matrix, 4> adj;
    double data_sq = 0.0;
    for (int c = 0; c < 4; ++c) {
        data[c] = (kPi / 2.0) * w.w[c];
        adj[c] = map.adjoint(data[c]);
        data_sq += data[c].squaredNorm();
    }
    ReconstructionResult res;
    res.n_max = n;
    Matrix rho = warm_start ? *warm_start : Matrix(Matrix::Identity(2 * n, 2 * n) / (2.0 * n));
    require(rho.rows() == 2 * n, "mle_reconstruct: warm start has the wrong dimension");
    std::array<double, 4> s{1, 1, 1, 1};

    auto objective = [&](const std::array<Matrix, 4>& blocks, const std::array<Matrix, 4>& kb) {
        double f = data_sq;
        for (int c = 0; c < 4; ++c) {
            const double quad = (blocks[c].adjoint() * kb[c]).trace().real();
            const double lin = (blocks[c].adjoint() * adj[c]).trace().real();
            f += s[c] * s[c] * quad - 2.0 * s[c] * lin;
        }
        return f;
    };
    auto update_scale = [&](const std::array<Matrix, 4>& blocks, const std::array<Matrix, 4>& kb) {
        if (!opt.fit_visibility) return;
        double quad = 0.0, lin = 0.0;
        for (int c = 0; c < 4; ++c) {
            quad += (blocks[c].adjoint() * kb[c]).trace().real();
            lin += (blocks[c].adjoint() * adj[c]).trace().real();
        }
        if (quad > 1e-14 && lin > 0.0) s.fill(lin / quad);
    };
    auto normal = [&](const std::array<Matrix, 4>& blocks) {
        std::array<Matrix, 4> kb;
        for (int c = 0; c < 4; ++c) kb[c] = map.apply_normal(blocks[c]);
        return kb;
    };

    auto blocks = detail::pauli_blocks(rho, n);
    auto kb = normal(blocks);
    update_scale(blocks, kb);
    double f = objective(blocks, kb);
    Matrix y = rho;
    double t = 1.0;
    int it = 0;
    int quiet = 0;
    for (; it < opt.max_iterations; ++it) {
        const double smax = *std::max_element(s.begin(), s.end());
        const double lip = 4.0 * smax * smax * map.lambda_max();
        const auto yb = detail::pauli_blocks(y, n);
        const auto ykb = normal(yb);
        std::array<Matrix, 4> g;
        for (int c = 0; c < 4; ++c) g[c] = 2.0 * s[c] * (s[c] * ykb[c] - adj[c]);
        const Matrix grad = detail::pauli_assemble(g, n);
        const Matrix next = detail::project_density(y - grad / lip);
        const auto nb = detail::pauli_blocks(next, n);
        const auto nkb = normal(nb);
        const double f_next = objective(nb, nkb);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        if (f_next > f) {  // restart momentum
            y = rho;
            t = 1.0;
            continue;
        }
        y = next + ((t - 1.0) / t_next) * (next - rho);
        t = t_next;
        const double change = f - f_next;
        rho = next;
        blocks = nb;
        kb = nkb;
        update_scale(blocks, kb);
        f = objective(blocks, kb);
        if (change <= opt.tolerance * (f + 1e-12 * data_sq)) {
            if (++quiet >= 5) { res.converged = true; ++it; break; }
        } else {
            quiet = 0;
        }
    }
    res.iterations = it;
    res.rho = rho;
    res.scale = s;
    res.objective = f;

    double sum = 0.0, sum_sq = 0.0;
    std::size_t count = 0;
    for (int c = 0; c < 4; ++c) {
        res.fitted[c] = s[c] * map.forward(blocks[c]);
        res.residuals[c] = data[c] - res.fitted[c];
        sum += res.residuals[c].sum();
        sum_sq += res.residuals[c].squaredNorm();
        count += static_cast<std::size_t>(res.residuals[c].size());
    }
    res.residual_mean = sum / static_cast<double>(count);
    res.residual_std = std::sqrt(std::max(0.0, sum_sq / static_cast<double>(count) - res.residual_mean * res.residual_mean));
    return res;
}

inline ReconstructionResult mle_reconstruct(const WignerGrid& w, int n_max, const MleSettings& opt = {}) {
    return mle_reconstruct(w, MeasurementMap(w.geometry, n_max), opt);
}

/// Residual-resampled grid: fitted values plus residuals drawn with
/// replacement within each channel.
inline WignerGrid resample_residuals(const WignerGrid& w, const ReconstructionResult& fit, protocol::Rng& rng) {
    WignerGrid out = w;
    for (int c = 0; c < 4; ++c) {
        const RealMatrix& r = fit.residuals[c];
        std::uniform_int_distribution<Eigen::Index> pick(0, r.size() - 1);
        for (Eigen::Index k = 0; k < r.size(); ++k) {
            const double v = fit.fitted[c].data()[k] + r.data()[pick(rng)];
            out.w[c].data()[k] = (2.0 / kPi) * v;
        }
    }
    return out;
}

struct ConfidenceInterval {
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    std::vector<double> samples;

    double width() const { return upper - lower; }
};

/// Percentile interval of `statistic` over residual-bootstrap refits, each
/// warm-started from the original fit. Deterministic given `seed`.
inline ConfidenceInterval bootstrap_ci(const WignerGrid& w, const MeasurementMap& map, const ReconstructionResult& fit,
                                       const std::function<double(const ReconstructionResult&)>& statistic,
                                       int n_resamples, std::uint64_t seed, const MleSettings& opt = {},
                                       double level = 0.95) {
    require(n_resamples >= 1, "bootstrap_ci: need at least one resample");
    require(level > 0.0 && level < 1.0, "bootstrap_ci: level must lie in (0, 1)");
    ConfidenceInterval ci;
    ci.estimate = statistic(fit);
    for (int b = 0; b < n_resamples; ++b) {
        protocol::Rng rng(protocol::stream_seed({seed, static_cast<std::uint64_t>(b)}));
        const WignerGrid star = resample_residuals(w, fit, rng);
        ci.samples.push_back(statistic(mle_reconstruct(star, map, opt, fit.rho)));
    }
    std::vector<double> sorted = ci.samples;
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) {
        const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, sorted.size() - 1);
        return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    };
    ci.lower = quantile(0.5 * (1.0 - level));
    ci.upper = quantile(0.5 * (1.0 + level));
    return ci;
}

}  // namespace bellcat::tomography
