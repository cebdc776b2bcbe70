#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace impasse {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr Complex kJ{0.0, 1.0};

enum class ErrorKind {
    Input,            // malformed or invalid case data
    Assumption1,      // x''_d != x''_q
    Assumption2,      // non-positive bus voltage
    Domain,           // argument outside a formula's domain (e.g. slip <= 0)
    Network,          // disconnected network, bad bus reference
    NotApplicable,    // analysis precondition fails
    Numerical,        // solver failure
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Newton iteration on the algebraic equations did not converge. Carries the
/// last iterate and the smallest singular value of the algebraic Jacobian
/// there so callers can tell stiffness from a genuine impasse.
class NewtonFailure : public Error {
public:
    NewtonFailure(const std::string& what, RealVector last_iterate, double sigma_min_jalg)
        : Error(ErrorKind::Numerical, what),
          last_iterate_(std::move(last_iterate)),
          sigma_min_jalg_(sigma_min_jalg) {}

    const RealVector& last_iterate() const noexcept { return last_iterate_; }
    double sigma_min_jalg() const noexcept { return sigma_min_jalg_; }

private:
    RealVector last_iterate_;
    double sigma_min_jalg_;
};

inline Complex polar_phasor(double magnitude, double angle) { return std::polar(magnitude, angle); }

}  // namespace impasse
