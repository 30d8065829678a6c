#include <gtest/gtest.h>

#include <random>

#include "bellcat/protocol.hpp"
#include "bellcat/tomography.hpp"
#include "oracles.hpp"

using namespace bellcat;
using namespace bellcat::tomography;
using hilbert::JointState;

namespace {

GridGeometry small_grid() { return {1.0, 0.5}; }

JointState bell_cat(double beta, int n = 40) { return JointState::pure(protocol::bell_cat_vector(beta, n), n); }

}  // namespace

TEST(ExactGrid, MatchesCoherentStateAlgebra) {
    const double beta = 1.2;
    const auto g = joint_wigner_exact(bell_cat(beta), GridGeometry{});
    EXPECT_EQ(g.size(), 81);
    for (auto [i, j] : std::vector<std::pair<int, int>>{{40, 40}, {54, 40}, {40, 47}, {10, 70}, {61, 33}}) {
        const auto ref = oracle::bell_cat_wigner(beta, g.alpha(i, j));
        for (int c = 0; c < 4; ++c) EXPECT_NEAR(g.w[c](i, j), ref[c], 1e-10) << c << " " << g.alpha(i, j);
    }
}

TEST(ExactGrid, NormalizationGivesQubitExpectations) {
    const double beta = 1.0;
    const auto g = joint_wigner_exact(bell_cat(beta), GridGeometry{});
    const double da = g.cell_area();
    EXPECT_NEAR(g.w[kChI].sum() * da, 1.0, 1e-6);
    EXPECT_NEAR(g.w[kChZ].sum() * da, 0.0, 1e-6);
    EXPECT_NEAR(g.w[kChX].sum() * da, std::exp(-2.0 * beta * beta), 1e-6);
    EXPECT_NEAR(visibility_from_wigner(g), 1.0, 1e-6);
}

TEST(ExactGrid, ParsevalPurity) {
    const auto pure = joint_wigner_exact(bell_cat(std::sqrt(3.0)), GridGeometry{});
    EXPECT_NEAR(fidelity_from_wigner(pure, pure), 1.0, 1e-6);
    const auto cfg = paper_preset();
    const auto mixed = protocol::detection_state(1.0, cfg);
    const auto g = joint_wigner_exact(mixed, GridGeometry{});
    EXPECT_NEAR(fidelity_from_wigner(g, g), hilbert::purity(mixed.density_matrix()), 1e-6);
}

TEST(ExactGrid, WarnsWhenMassLeavesTheGrid) {
    const auto st = JointState::product(hilbert::qubit_ground(), oracle::coherent(3.3, 45));
    EXPECT_FALSE(joint_wigner_exact(st, GridGeometry{}).warnings.empty());
    EXPECT_TRUE(joint_wigner_exact(bell_cat(1.0), GridGeometry{}).warnings.empty());
}

TEST(Interpolation, ReproducesSmoothFunctionAndRejectsOutside) {
    const auto st = JointState::product(hilbert::qubit_ground(), oracle::coherent({0.4, -0.2}, 30));
    const auto g = joint_wigner_exact(st, GridGeometry{});
    const cplx a{0.4321, -0.1234};
    // 4-point Lagrange remainder at step 0.085 is below 1e-4 for this Gaussian
    EXPECT_NEAR(g.value(kChI, a), oracle::coherent_wigner({0.4, -0.2}, a), 1e-4);
    EXPECT_THROW(g.value(kChI, {3.5, 0.0}), InvalidArgument);
}

TEST(Expected, NoiselessEqualsExact) {
    ExperimentConfig cfg = noiseless_preset();
    cfg.grid = small_grid();
    const auto st = bell_cat(1.0);
    const auto e = joint_wigner_expected(st, cfg);
    const auto x = joint_wigner_exact(st, cfg.grid, false);
    for (int c = 0; c < 4; ++c) EXPECT_LT((e.w[c] - x.w[c]).cwiseAbs().maxCoeff(), 1e-10) << c;
}

TEST(Expected, NoiseReducesVisibility) {
    const auto cfg = paper_preset();
    const auto st = protocol::detection_state(std::sqrt(3.0), cfg);
    const double v = visibility_from_wigner(joint_wigner_expected(st, cfg));
    EXPECT_GT(v, 0.80);
    EXPECT_LT(v, 0.88);
}

TEST(Sampled, DeterministicAndUnbiased) {
    ExperimentConfig cfg = paper_preset();
    cfg.grid = {2.0, 0.25};
    const auto st = protocol::detection_state(1.0, cfg);
    const auto a = joint_wigner_sampled(st, cfg, 4000, 17);
    const auto b = joint_wigner_sampled(st, cfg, 4000, 17);
    const auto c = joint_wigner_sampled(st, cfg, 4000, 18);
    const auto e = joint_wigner_expected(st, cfg);
    for (int ch = 0; ch < 4; ++ch) {
        EXPECT_EQ(a.w[ch], b.w[ch]);
        EXPECT_NE(a.w[ch], c.w[ch]);
        // residuals in correlation units: mean ~ 0, spread ~ 1/sqrt(N)
        const RealMatrix r = (kPi / 2.0) * (a.w[ch] - e.w[ch]);
        const double mean = r.mean();
        const double sd = std::sqrt((r.array() - mean).square().mean());
        EXPECT_LT(std::abs(mean), 5.0 * sd / std::sqrt(static_cast<double>(r.size()))) << ch;
        EXPECT_GT(sd, 0.008);
        EXPECT_LT(sd, 0.0165);
    }
}

TEST(Sampled, ShotByShotAgreesWithMultinomial) {
    ExperimentConfig cfg = paper_preset();
    cfg.grid = small_grid();
    const auto st = protocol::detection_state(1.0, cfg);
    const auto e = joint_wigner_expected(st, cfg);
    const auto s = joint_wigner_sampled(st, cfg, 8000, 5, SamplingMode::ShotByShot);
    for (int ch = 0; ch < 4; ++ch) {
        const RealMatrix z = (kPi / 2.0) * (s.w[ch] - e.w[ch]) * std::sqrt(8000.0);
        EXPECT_LT(z.cwiseAbs().maxCoeff(), 5.0) << ch;
    }
}

TEST(Overlaps, ParityPointAndKernelFormsMatchExact) {
    const double beta = 1.0;
    const auto st = bell_cat(beta);
    const auto g = joint_wigner_exact(st, GridGeometry{});
    ParityExpansion pe;
    pe.points = {{0.0, 1.0}};
    const double exact_xp = hilbert::expectation(st, hilbert::pauli(1), hilbert::displaced_parity_analytic(0.0, 40)).real();
    EXPECT_NEAR(observable_from_wigner(g, hilbert::pauli(1), pe), exact_xp, 1e-9);
    pe = {};
    pe.identity = 1.0;
    EXPECT_NEAR(observable_from_wigner(g, hilbert::pauli(0), pe), 1.0, 1e-6);

    const Vector c = oracle::coherent(beta, 20);
    const Operator proj = c * c.adjoint();
    const Operator big = [&] {
        Operator m = Operator::Zero(40, 40);
        m.topLeftCorner(20, 20) = proj;
        return m;
    }();
    const double exact_zp = hilbert::expectation(st, hilbert::pauli(3), big).real();
    EXPECT_NEAR(observable_from_wigner(g, hilbert::pauli(3), proj), exact_zp, 2e-3);
}

TEST(MeasurementMap, AdjointConsistentWithForward) {
    const MeasurementMap map(small_grid(), 6);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n01;
    Matrix x(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) x(i, j) = cplx(n01(rng), n01(rng));
    x = (x + x.adjoint()).eval();
    RealMatrix y(5, 5);
    for (int i = 0; i < 25; ++i) y.data()[i] = n01(rng);
    const double lhs = (map.forward(x).cwiseProduct(y)).sum();
    const double rhs = (map.adjoint(y) * x).trace().real();
    EXPECT_NEAR(lhs, rhs, 1e-10);
    const Matrix kx = map.apply_normal(x);
    EXPECT_LT((kx - map.adjoint(map.forward(x))).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Mle, RecoversExactGrid) {
    const double beta = std::sqrt(3.0);
    const auto g = joint_wigner_exact(bell_cat(beta), GridGeometry{});
    const auto fit = mle_reconstruct(g, 12);
    EXPECT_TRUE(fit.converged);
    const auto target = JointState::pure(protocol::bell_cat_vector(beta, 12, 1e-3), 12);
    EXPECT_GE(hilbert::fidelity(fit.rho, target.vector()), 0.99);
    EXPECT_NO_THROW(fit.state().validate(Tolerances{1e-8, 1e-8, 1e-8, 1e-8, 1e-8, 0.02}));
}

TEST(Mle, ResidualSpreadTracksInjectedNoise) {
    const double beta = 1.0, sigma = 0.02;
    auto g = joint_wigner_exact(bell_cat(beta), GridGeometry{});
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n01;
    for (auto& ch : g.w)
        for (Eigen::Index k = 0; k < ch.size(); ++k) ch.data()[k] += (2.0 / kPi) * sigma * n01(rng);
    const auto fit = mle_reconstruct(g, 12);
    EXPECT_NEAR(fit.residual_std, sigma, 0.05 * sigma);
    // the PSD constraint biases the fit slightly; the offset stays far below the noise
    EXPECT_LT(std::abs(fit.residual_mean), 0.05 * sigma);
}

TEST(Bootstrap, DeterministicIntervalAroundEstimate) {
    const double beta = 1.0;
    ExperimentConfig cfg = paper_preset();
    const auto st = protocol::detection_state(beta, cfg);
    const auto g = joint_wigner_sampled(st, cfg, 4000, 3);
    const MeasurementMap map(cfg.grid, 10);
    const auto fit = mle_reconstruct(g, map, cfg.mle);
    const Vector target = protocol::bell_cat_vector(beta, 10, 1e-3);
    auto stat = [&](const ReconstructionResult& r) { return hilbert::fidelity(r.rho, target); };
    const auto a = bootstrap_ci(g, map, fit, stat, 4, 77, cfg.mle);
    const auto b = bootstrap_ci(g, map, fit, stat, 4, 77, cfg.mle);
    EXPECT_EQ(a.samples, b.samples);
    EXPECT_LE(a.lower, a.upper);
    EXPECT_LT(a.width(), 0.05);
    EXPECT_NEAR(0.5 * (a.lower + a.upper), a.estimate, 0.05);
}
