#include <gtest/gtest.h>

#include <random>

#include "bellcat/hilbert.hpp"
#include "bellcat/protocol.hpp"
#include "oracles.hpp"

using namespace bellcat;
using namespace bellcat::hilbert;

TEST(Coherent, MatchesPowerSeries) {
    for (cplx b : {cplx{0, 0}, cplx{1.2, -0.4}, cplx{std::sqrt(3.0), 0}}) {
        const auto c = coherent_state(b, 45);
        const Vector ref = oracle::coherent(b, 45);
        EXPECT_LT((c.amplitudes() - ref).norm(), 1e-13);
        EXPECT_LT(c.leakage(), 1e-8);
    }
}

TEST(Coherent, ReportsAndRejectsLeakage) {
    EXPECT_THROW(coherent_state(3.0, 10), NumericalError);
    const auto c = coherent_state(3.0, 10, 1e-8, true);
    EXPECT_NEAR(c.leakage(), 1.0 - oracle::coherent(3.0, 10).squaredNorm(), 1e-12);
}

TEST(Displacement, MatchesMatrixExponential) {
    const cplx a{1.1, -0.6};
    const Matrix d = displacement_op(a, 24);
    const Matrix ref = oracle::displacement_expm(a, 24);
    EXPECT_LT((d - ref).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Displacement, ActsOnVacuumAsCoherentState) {
    const cplx a{-0.8, 1.3};
    const Vector vac = fock_state(0, 40).amplitudes();
    const Vector out = displacement_engine(70).apply(a, vac).head(40);
    EXPECT_LT((out - oracle::coherent(a, 40)).norm(), 1e-10);
}

TEST(Displacement, NonUnitarityIsReported) {
    EXPECT_LT(displacement_non_unitarity(0.5, 40, 10).non_unitarity, 1e-10);
    EXPECT_THROW(displacement_op(5.0, 12, 30, 1e-8, 8), NumericalError);
}

TEST(DisplacedParity, ClosedFormMatchesExponential) {
    for (cplx a : {cplx{0, 0}, cplx{0.3, 0.2}, cplx{-1.7, 0.9}, cplx{3.4, -3.4}}) {
        const Matrix p = displaced_parity_analytic(a, 30);
        const Matrix ref = oracle::displaced_parity_expm(a, 30, 200);
        EXPECT_LT((p - ref).cwiseAbs().maxCoeff(), 1e-9) << a;
    }
}

TEST(DisplacedParity, WorkspaceMatchesClosedFormOnSupport) {
    const cplx a{0.9, -1.4};
    const Matrix w = displaced_parity(a, 40, 40);
    const Matrix c = displaced_parity_analytic(a, 40);
    EXPECT_LT((w - c).topLeftCorner(15, 15).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(DisplacedParity, CoherentExpectationIsGaussian) {
    const cplx b{0.7, 0.4};
    const Vector c = oracle::coherent(b, 40);
    for (cplx a : {cplx{0, 0}, cplx{0.5, 0.5}, cplx{-1, 0.3}}) {
        const double v = c.dot(displaced_parity_analytic(a, 40) * c).real();
        EXPECT_NEAR((2.0 / kPi) * v, oracle::coherent_wigner(b, a), 1e-12);
    }
}

TEST(DisplacedParity, HermitianAndBoundedForRandomPoints) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3.4, 3.4);
    for (int k = 0; k < 20; ++k) {
        const Matrix p = displaced_parity_analytic({u(rng), u(rng)}, 25);
        EXPECT_LT((p - p.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
        Eigen::SelfAdjointEigenSolver<Matrix> es(p);
        EXPECT_LE(es.eigenvalues().cwiseAbs().maxCoeff(), 1.0 + 1e-9);
    }
}

TEST(Qubit, RotationConventions) {
    const Vector plus = qubit_rotation(kPi / 2, 0.0) * qubit_ground();
    EXPECT_NEAR(std::abs(plus(0) - 1.0 / std::sqrt(2.0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(plus(1) - 1.0 / std::sqrt(2.0)), 0.0, 1e-15);
    const Operator r = qubit_rotation(0.37, 1.1);
    EXPECT_LT((r * r.adjoint() - identity(2)).norm(), 1e-14);
    // sigma_z |g> = +|g>
    EXPECT_NEAR((pauli(Pauli::Z) * qubit_ground())(0).real(), 1.0, 0);
}

TEST(JointState, RejectsMalformedInput) {
    EXPECT_THROW(JointState::pure(Vector::Ones(4), 2), InvalidArgument);
    EXPECT_THROW(JointState::pure(Vector::Ones(3), 2), InvalidArgument);
    Matrix bad = Matrix::Identity(4, 4) / 4.0;
    bad(0, 1) = 0.3;
    EXPECT_THROW(JointState::density(bad, 2), InvalidArgument);
    EXPECT_THROW(JointState::density(Matrix::Identity(4, 4), 2), InvalidArgument);
}

TEST(JointState, ValidateFlagsNegativeEigenvalue) {
    Matrix m = Matrix::Zero(4, 4);
    m(0, 0) = 1.2;
    m(1, 1) = -0.2;
    const auto s = JointState::density(m, 2);
    EXPECT_THROW(s.validate(), NumericalError);
}

TEST(JointState, FactorizedExpectationMatchesEmbedding) {
    const double beta = 1.3;
    const auto st = JointState::pure(protocol::bell_cat_vector(beta, 30), 30);
    const Operator c = displaced_parity_analytic({0.2, -0.5}, 30);
    for (int i = 0; i < 4; ++i) {
        const cplx a = expectation(st, pauli(i), c);
        const cplx b = expectation(st, embed(pauli(i), c));
        const cplx d = expectation(st.to_density(), pauli(i), c);
        EXPECT_LT(std::abs(a - b), 1e-12);
        EXPECT_LT(std::abs(a - d), 1e-12);
    }
}

TEST(JointState, ReducedQubitPurityOfBellCat) {
    for (double beta : {0.3, 0.8, 1.5}) {
        const auto st = JointState::pure(protocol::bell_cat_vector(beta, 40), 40);
        const Matrix q = partial_trace(st, Subsystem::Cavity);
        EXPECT_NEAR(purity(q), 0.5 * (1.0 + std::exp(-4.0 * beta * beta)), 1e-10);
        EXPECT_NEAR(partial_trace(st, Subsystem::Qubit).trace().real(), 1.0, 1e-12);
    }
}

TEST(JointState, FidelityOfItselfIsOne) {
    const Vector v = protocol::bell_cat_vector(1.0, 30);
    const auto st = JointState::pure(v, 30);
    EXPECT_NEAR(fidelity(st, v), 1.0, 1e-12);
    EXPECT_NEAR(fidelity(st.density_matrix(), v), 1.0, 1e-12);
}
