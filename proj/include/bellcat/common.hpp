#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace bellcat {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// Dense operator on a truncated Hilbert space (cavity, qubit or joint).
using Operator = Matrix;

inline constexpr double kPi = std::numbers::pi;
inline constexpr cplx kI{0.0, 1.0};

/// Bad input: dimensions, ranges, malformed configuration.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure: truncation violation, non-convergence.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double metric = 0.0)
        : std::runtime_error(what), metric_(metric) {}

    double metric() const noexcept { return metric_; }

private:
    double metric_;
};

/// Central numerical tolerances. Defaults are the values every module assumes.
struct Tolerances {
    double leakage = 1e-8;       // coherent-state truncation leakage
    double unitarity = 1e-8;     // displacement non-unitarity on the support block
    double state_norm = 1e-9;    // pure norm / density trace
    double hermiticity = 1e-9;   // density matrix and observable checks
    double min_eigenvalue = 1e-9;
    double grid_slack = 0.02;    // quadrature slack on overlap functionals

    bool operator==(const Tolerances&) const = default;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw InvalidArgument(message);
}

}  // namespace bellcat
