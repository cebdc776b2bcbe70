#pragma once

#include "impasse/types.hpp"

#include <array>
#include <utility>

namespace impasse {

/// Sixth-order synchronous machine on the system base. Field names follow the
/// PSAT machine table (xd1 = x'_d, xd2 = x''_d, Td01 = T'_d0, M = 2H, ...).
struct GeneratorParams {
    int terminal_bus = 0;  // 0-based index into the network buses
    double ra = 0.0;
    double xd = 1.0;
    double xd1 = 0.3;
    double xd2 = 0.2;
    double Td01 = 5.0;
    double Td02 = 0.03;
    double xq = 1.0;
    double xq1 = 0.5;
    double xq2 = 0.2;
    double Tq01 = 0.5;
    double Tq02 = 0.05;
    double M = 10.0;  // mechanical starting time 2H [s]
    double D = 0.0;

    // Power-flow setpoints.
    double p_set = 0.0;
    double v_set = 1.0;
    bool slack = false;

    /// Stator branch admittance (ra + j xd2)^-1.
    Complex stator_admittance() const { return 1.0 / Complex(ra, xd2); }
};

/// delta, omega, e'_d, e'_q, e''_d, e''_q
struct GeneratorState {
    double delta = 0.0;
    double omega = 1.0;
    double ed1 = 0.0;
    double eq1 = 0.0;
    double ed2 = 0.0;
    double eq2 = 0.0;
};

/// Quantities held constant during a run (no governor, no exciter).
struct GeneratorInputs {
    double pm = 0.0;
    double vf = 1.0;
};

/// Single-cage induction motor, third-order model. Names follow the PSAT
/// motor table; torque load is a + b(1 - sigma) + c(1 - sigma)^2.
struct MotorParams {
    int bus = 0;
    double rs = 0.01;
    double xs = 0.15;
    double rr = 0.05;
    double xr = 0.15;
    double xm = 3.0;
    double Hm = 0.5;
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    double open_circuit_reactance() const { return xs + xm; }
    double transient_reactance() const { return xs + xr * xm / (xr + xm); }
    double load_torque(double sigma) const {
        const double w = 1.0 - sigma;
        return a + b * w + c * w * w;
    }
};

/// sigma (slip) and the internal voltage e' = ed + j eq in the network frame.
struct MotorState {
    double sigma = 0.0;
    double ed1 = 0.0;
    double eq1 = 0.0;
};

struct StaticLoad {
    int bus = 0;
    double p0 = 0.0;
    double q0 = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
};

struct InternalVoltage {
    double magnitude = 0.0;
    double angle = 0.0;
};

using GeneratorDerivatives = std::array<double, 6>;
using MotorDerivatives = std::array<double, 3>;

/// Throws Error(Assumption1) when xd2 != xq2, Error(Input) on non-physical
/// reactances or time constants.
void validate_generator(const GeneratorParams& params, const std::string& name);
void validate_motor(const MotorParams& params, const std::string& name);

// --- generator -----------------------------------------------------------

/// Internal source behind the subtransient impedance:
///   E e^{j eta} = (e''_d + j e''_q) e^{j(delta - pi/2)}.
InternalVoltage gen_internal_voltage(const GeneratorState& state, const GeneratorParams& params);

/// Stator current injected into the terminal bus, network frame.
Complex gen_stator_current(const GeneratorState& state, double theta, double v, const GeneratorParams& params);

/// PSAT-style sixth-order model (T_AA = 0). Throws Error(Assumption2) if v <= 0.
GeneratorDerivatives gen_derivatives(const GeneratorState& state, double theta, double v,
                                     const GeneratorParams& params, const GeneratorInputs& inputs,
                                     double omega_base);

/// Back-initializes a generator from the terminal phasor and injected power.
std::pair<GeneratorState, GeneratorInputs> gen_initialize(double theta, double v, Complex s_injected,
                                                          const GeneratorParams& params);

// --- induction motor -----------------------------------------------------

/// Steady-state equivalent admittance of the cage motor at slip sigma.
Complex motor_equiv_admittance(double sigma, const MotorParams& params);

/// (P, Q) drawn at voltage v through the equivalent admittance.
std::pair<double, double> motor_power(double sigma, double v, const MotorParams& params);

/// Current drawn by the motor when its internal voltage is e'.
Complex motor_current(const MotorState& state, double theta, double v, const MotorParams& params);

double motor_electrical_torque(const MotorState& state, double theta, double v, const MotorParams& params);

MotorDerivatives motor_derivatives(const MotorState& state, double theta, double v, const MotorParams& params,
                                   double omega_base);

/// Internal voltage in steady state at slip sigma for the given terminal phasor.
MotorState motor_steady_state(double sigma, double theta, double v, const MotorParams& params);

/// Electrical torque of the equivalent circuit at slip sigma (steady state).
double motor_steady_torque(double sigma, double v, const MotorParams& params);

/// Smallest slip in (0, 1) where steady electrical torque equals load torque.
/// Throws Error(Numerical) when no root exists.
double motor_equilibrium_slip(double v, const MotorParams& params);

// --- static load ---------------------------------------------------------

std::pair<double, double> static_load_power(double v, const StaticLoad& load);

/// Equivalent shunt (G, B) drawing (P, Q) at voltage v.
std::pair<double, double> static_load_equiv(double p, double q, double v);

}  // namespace impasse
