#include <gtest/gtest.h>

#include "bellcat/bell.hpp"
#include "oracles.hpp"

using namespace bellcat;
using namespace bellcat::bell;

namespace {

constexpr double kRootTwo = 1.4142135623730951;

double max_abs(const Operator& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Chsh, Combination) {
    EXPECT_DOUBLE_EQ(chsh(1, 1, -1, 1), 4.0);
    EXPECT_DOUBLE_EQ(chsh(0.5, 0.25, 0.125, 0.0625), 0.6875);
}

TEST(Observables, Test1AtMinusQuarterPi) {
    const auto [a, b] = qubit_observables_test1(-kPi / 4);
    const Operator x = hilbert::pauli(Pauli::X), z = hilbert::pauli(Pauli::Z);
    EXPECT_LT(max_abs(a - (x + z) / kRootTwo), 1e-15);
    EXPECT_LT(max_abs(b - (x - z) / kRootTwo), 1e-15);
}

TEST(Observables, PulseAnglesMapReadoutOntoObservables) {
    const Operator z = hilbert::pauli(Pauli::Z);
    for (double theta : {-kPi / 4, 0.3, 1.9}) {
        const auto [a, b] = qubit_observables_test1(theta);
        const auto [ta, tb] = qubit_angles_test1(theta);
        const Operator ra = hilbert::qubit_rotation(ta, 0.0), rb = hilbert::qubit_rotation(tb, 0.0);
        EXPECT_LT(max_abs(ra.adjoint() * z * ra - a), 1e-14) << theta;
        EXPECT_LT(max_abs(rb.adjoint() * z * rb - b), 1e-14) << theta;
        // the negative-sign pre-rotation measures -A
        const Operator rn = detail::qubit_prerotation(1, theta, 0, -1, 0.0);
        EXPECT_LT(max_abs(rn.adjoint() * z * rn + a), 1e-14) << theta;
    }
}

TEST(Observables, Test2CavityPairFromParityPoints) {
    const double beta = 1.0, alpha = 0.15;
    const auto [xc, yc] = cavity_observables_test2(alpha, beta, 30);
    EXPECT_LT(max_abs(xc - hilbert::displaced_parity_analytic(cplx(0, -alpha), 30)), 1e-14);
    const cplx yp = cplx(0, -alpha) + cplx(0, -kPi / (8 * beta));
    EXPECT_LT(max_abs(yc - hilbert::displaced_parity_analytic(yp, 30)), 1e-14);
    const auto [pa, pb] = cavity_points_test2(alpha);
    EXPECT_EQ(pa, cplx(0, -alpha));
    EXPECT_EQ(pb, cplx(0, alpha));
}

TEST(OptimalDisplacement, MatchesBisectionOracle) {
    for (double beta : {0.3, 0.7, 1.0, 1.5, std::sqrt(3.0), 2.5, 4.0}) {
        const double a = optimal_displacement(beta);
        EXPECT_NEAR(a, oracle::alpha0(beta), 1e-9) << beta;
        EXPECT_NEAR((beta - a) / (beta + a), std::tan(4 * a * beta), 1e-9) << beta;
    }
    EXPECT_NEAR(optimal_displacement(1.0), 0.15, 0.01);
    EXPECT_THROW(optimal_displacement(0.0), InvalidArgument);
}

TEST(OptimalDisplacement, LargeBetaLimit) {
    // relative gap to pi/(16 beta) is ~1/(4 beta^2): under 1% only from beta ~ 5
    for (double beta : {5.0, 7.0, 10.0}) {
        const double lim = kPi / (16 * beta);
        EXPECT_NEAR(optimal_displacement(beta), lim, 0.01 * lim) << beta;
    }
    for (double beta : {1.5, 2.0, 2.5, 3.0, 4.0}) {
        const double lim = kPi / (16 * beta);
        const double rel = (lim - optimal_displacement(beta)) / lim;
        EXPECT_GT(rel, 0.0) << beta;
        EXPECT_LT(rel, 1.0 / (4 * beta * beta)) << beta;
    }
}

TEST(ModelCurves, Test1Limits) {
    const double g = 1.24 / 55.0;
    EXPECT_NEAR(model_curves_test1(0.0, 1.0, 0.0).o_ideal, kRootTwo, 1e-15);
    for (double beta : {2.0, 2.5, 3.0}) EXPECT_NEAR(model_curves_test1(beta, 1.0, g).o_ideal, 2 * kRootTwo, 1e-6);
    for (double beta : {0.0, 0.4, 1.0, 1.7}) {
        const auto m = model_curves_test1(beta, 0.85, g);
        EXPECT_NEAR(m.o_ideal, oracle::o1_ideal(beta), 1e-14);
        EXPECT_NEAR(m.o_pred, oracle::o1_pred(beta, 0.85, g), 1e-14);
        EXPECT_NEAR(m.o_vis, 0.85 * m.o_ideal, 1e-14);
        EXPECT_NEAR(model_curves_test1(beta, 1.0, 0.0).o_loss, m.o_ideal, 1e-14);
        EXPECT_DOUBLE_EQ(model_curves_test1(beta, 0.0, g).o_pred, 0.0);
    }
}

TEST(ModelCurves, Test1PredictionNearMeasured) {
    const double o = model_curves_test1(1.0, 0.85, 1.24 / 55.0).o_pred;
    EXPECT_NEAR(o, 2.35, 0.05);
    EXPECT_NEAR(o, 2.30, 0.1);
}

TEST(ModelCurves, Test1PredictionHasOneInteriorMaximum) {
    const double g = 1.24 / 55.0;
    int turns = 0;
    double prev = model_curves_test1(0.05, 0.85, g).o_pred, slope = 1.0;
    for (int k = 1; k <= 500; ++k) {
        const double b = 0.05 + 2.45 * k / 500.0;
        const double o = model_curves_test1(b, 0.85, g).o_pred;
        const double s = o - prev;
        if (s * slope < 0) ++turns;
        if (s != 0) slope = s;
        prev = o;
    }
    EXPECT_EQ(turns, 1);
}

TEST(ModelCurves, Test2) {
    const double g = 1.24 / 55.0;
    const auto m = model_curves_test2(1.0, 0.85, g);
    EXPECT_NEAR(m.o_ideal, oracle::o2_ideal(1.0), 1e-9);
    EXPECT_NEAR(m.o_pred, 0.85 * std::exp(-2 * g) * oracle::o2_ideal(1.0), 1e-9);
    EXPECT_NEAR(m.o_pred, 2.14, 0.10);
    EXPECT_NEAR(model_curves_test2(10.0, 1.0, 0.0).o_ideal, 2 * kRootTwo, 3e-3);
    EXPECT_LT(model_curves_test2(10.0, 1.0, 0.0).o_ideal, 2 * kRootTwo);
}

TEST(ExactChsh, MatchesClosedForms) {
    const auto cfg = noiseless_preset();
    for (double beta : {0.5, 1.0, 1.5}) {
        const auto st = protocol::prepare_bell_cat(beta, cfg);
        EXPECT_NEAR(exact_chsh(1, beta, -kPi / 4, st), oracle::o1_ideal(beta), 1e-8) << beta;
    }
    // test 2 away from large beta: X_c, Y_c are not exact Paulis, so compare the
    // parity algebra directly
    const double beta = 1.0, a = oracle::alpha0(1.0);
    const auto st = protocol::prepare_bell_cat(beta, cfg);
    auto corr = [&](Pauli q, cplx pt) {
        // <g,b| and <e,-b| blocks: sigma_x, sigma_y couple the cross terms
        const cplx c = oracle::parity_between(beta, -beta, pt);
        return q == Pauli::X ? c.real() : c.imag();
    };
    const double ref = corr(Pauli::X, {0, -a}) + corr(Pauli::X, {0, a}) - corr(Pauli::Y, {0, -a}) +
                       corr(Pauli::Y, {0, a});
    EXPECT_NEAR(exact_chsh(2, beta, a, st), ref, 1e-8);
}

TEST(MonteCarlo, NoiselessConvergesToIdeal) {
    const auto cfg = noiseless_preset();
    const double beta = 1.5;
    const auto r = bell_cell(1, beta, -kPi / 4, cfg, 25000, 11);
    EXPECT_EQ(r.experiments, 6);
    EXPECT_EQ(r.shots, 100000);
    EXPECT_NEAR(r.o, oracle::o1_ideal(beta), 3 * r.sigma);
}

TEST(MonteCarlo, NoEntanglementNoViolation) {
    const auto r = bell_cell(1, 0.0, -kPi / 4, paper_preset(), 2000, 4);
    EXPECT_LT(r.o, 2.0);
    const auto n = bell_cell(1, 0.0, -kPi / 4, noiseless_preset(), 2000, 4);
    EXPECT_NEAR(n.o, kRootTwo, 3 * n.sigma + 1e-12);
}

TEST(MonteCarlo, PaperPresetViolatesAndStaysBelowTsirelson) {
    const auto cfg = paper_preset();
    const auto r = bell_cell(1, 1.0, -kPi / 4, cfg, 4000, 2024);
    EXPECT_GT(r.o - 2.0, 3 * r.sigma);
    EXPECT_LE(r.o, 2 * kRootTwo + 4 * r.sigma);
    const double v = noise::visibility_predicted(cfg.noise.f_q(), cfg.noise.f_c, cfg.noise.reset_decay_probability());
    const double pred = model_curves_test1(1.0, v, cfg.noise.t_eff_us / cfg.noise.tau_s_us).o_pred;
    // the model lumps everything but detection and reset into one loss rate
    EXPECT_NEAR(r.o, pred, 0.1);
    for (const auto& s : r.per_setting) {
        EXPECT_EQ(s.shots, 4000);
        EXPECT_NEAR(s.o, r.o, 3 * s.sigma);
        EXPECT_LE(s.o, 2 * kRootTwo + 4 * s.sigma);
    }
}

TEST(MonteCarlo, Test2MatchesExactAndNoiseLowersIt) {
    const double beta = 1.0, a = optimal_displacement(beta);
    const auto clean = bell_cell(2, beta, a, noiseless_preset(), 2000, 9);
    EXPECT_EQ(clean.experiments, 4);
    const double exact = exact_chsh(2, beta, a, protocol::prepare_bell_cat(beta, noiseless_preset()));
    EXPECT_NEAR(clean.o, exact, 3 * clean.sigma);
    const auto noisy = bell_cell(2, beta, a, paper_preset(), 2000, 9);
    EXPECT_LT(noisy.o, exact);
    EXPECT_LE(noisy.o, 2 * kRootTwo + 4 * noisy.sigma);
}

TEST(MonteCarlo, DeterministicPerSeedAndCell) {
    const auto cfg = paper_preset();
    const auto a = bell_cell(1, 0.8, -kPi / 4, cfg, 300, 5, 2);
    const auto b = bell_cell(1, 0.8, -kPi / 4, cfg, 300, 5, 2);
    const auto c = bell_cell(1, 0.8, -kPi / 4, cfg, 300, 5, 3);
    EXPECT_EQ(a.o, b.o);
    EXPECT_EQ(a.corr, b.corr);
    EXPECT_NE(a.o, c.o);
    const auto sw = bell_sweep(1, {0.5, 0.8}, {-kPi / 4, 0.1}, cfg, 300, 5);
    ASSERT_EQ(sw.size(), 4u);
    EXPECT_EQ(sw[2].o, a.o);
    EXPECT_EQ(sw[3].beta, 0.8);
    EXPECT_EQ(sw[3].param, 0.1);
}

TEST(MonteCarlo, RejectsBadInput) {
    EXPECT_THROW(bell_cell(3, 1.0, 0.0, paper_preset(), 10, 1), InvalidArgument);
    EXPECT_THROW(bell_cell(1, 1.0, 0.0, paper_preset(), 0, 1), InvalidArgument);
}
