#pragma once

// Independent reference computations. Nothing here calls into the library's
// numerical routines; only the plain types are shared.

#include <cmath>
#include <complex>
#include <functional>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "bellcat/common.hpp"

namespace oracle {

using bellcat::cplx;
using bellcat::kPi;
using bellcat::Matrix;
using bellcat::Vector;

/// Coherent amplitudes from the power series in long double.
inline Vector coherent(cplx beta, int n) {
    Vector c(n);
    const std::complex<long double> b(beta.real(), beta.imag());
    std::complex<long double> term = std::exp(-0.5L * std::norm(b));
    for (int k = 0; k < n; ++k) {
        c(k) = cplx(static_cast<double>(term.real()), static_cast<double>(term.imag()));
        term *= b / std::sqrt(static_cast<long double>(k + 1));
    }
    return c;
}

/// D(alpha) by matrix exponential on a large space, cut to n levels.
inline Matrix displacement_expm(cplx alpha, int n, int big = 120) {
    Matrix a = Matrix::Zero(big, big);
    for (int k = 1; k < big; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
    const Matrix gen = alpha * a.adjoint() - std::conj(alpha) * a;
    const Matrix d = gen.exp();
    return d.topLeftCorner(n, n);
}

/// D P D^dag by matrix exponential, cut to n levels.
inline Matrix displaced_parity_expm(cplx alpha, int n, int big = 120) {
    Matrix a = Matrix::Zero(big, big);
    for (int k = 1; k < big; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
    const Matrix d = (alpha * a.adjoint() - std::conj(alpha) * a).exp();
    Matrix p = Matrix::Zero(big, big);
    for (int k = 0; k < big; ++k) p(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
    return (d * p * d.adjoint()).topLeftCorner(n, n);
}

/// <b| D(alpha) P D(alpha)^dag |c> for coherent states, by composing
/// D(-alpha)|c> = e^{(alpha* c - alpha c*)/2}|c - alpha>, P|x> = |-x> and
/// <b|x> = exp(-|b|^2/2 - |x|^2/2 + b* x).
inline cplx parity_between(cplx b, cplx c, cplx alpha) {
    const cplx ph1 = std::exp(0.5 * (std::conj(alpha) * c - alpha * std::conj(c)));
    const cplx x = alpha - c;  // after P
    const cplx ph2 = std::exp(0.5 * (alpha * std::conj(x) - std::conj(alpha) * x));
    const cplx y = alpha + x;
    const cplx overlap = std::exp(-0.5 * std::norm(b) - 0.5 * std::norm(y) + std::conj(b) * y);
    return ph1 * ph2 * overlap;
}

/// Joint Wigner channels of (|g,beta> + |e,-beta>)/sqrt(2) in {I, X, Y, Z}.
inline std::array<double, 4> bell_cat_wigner(cplx beta, cplx alpha) {
    const double k = 2.0 / kPi;
    const double pp = parity_between(beta, beta, alpha).real();
    const double mm = parity_between(-beta, -beta, alpha).real();
    const cplx pm = parity_between(beta, -beta, alpha);
    return {k * 0.5 * (pp + mm), k * pm.real(), k * pm.imag(), k * 0.5 * (pp - mm)};
}

inline double coherent_wigner(cplx beta, cplx alpha) { return (2.0 / kPi) * std::exp(-2.0 * std::norm(alpha - beta)); }

/// Plain bisection to |hi - lo| < tol.
inline double bisect(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-13) {
    double flo = f(lo);
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// Root of (b - a)/(b + a) = tan(4 a b) below pi/(8b), by bisection.
inline double alpha0(double beta) {
    const double hi = std::min(kPi / (8.0 * beta) - 1e-12, beta);
    return bisect([beta](double a) { return (beta - a) / (beta + a) - std::tan(4 * a * beta); }, 0.0, hi);
}

inline double o1_ideal(double b) { return std::sqrt(2.0) * (2.0 - std::exp(-8 * b * b)); }
inline double o1_pred(double b, double v, double g) {
    return v * std::sqrt(2.0) * (1.0 - std::exp(-8 * b * b) + std::exp(-2 * g * b * b));
}
inline double o2_ideal(double b) {
    const double a = alpha0(b);
    return 2.0 * (std::cos(4 * a * b) + std::sin(4 * a * b)) * std::exp(-2 * a * a);
}

/// Entropy of the equal mixture of |beta>, |-beta> from its 2x2 Gram matrix.
inline double code_entropy(double beta) {
    const double o = std::exp(-2.0 * beta * beta);
    Eigen::Matrix2d g;
    g << 0.5, 0.5 * o, 0.5 * o, 0.5;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(g);
    double s = 0.0;
    for (int i = 0; i < 2; ++i) {
        const double l = es.eigenvalues()(i);
        if (l > 0) s -= l * std::log2(l);
    }
    return s;
}

}  // namespace oracle
